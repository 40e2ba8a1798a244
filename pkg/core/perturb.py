"""Equivariant polynomial sections on corner domains.

Sections are polynomial maps with rational coefficients on the box
[0,1]^corner_dim x [-1,1]^free_dim, read as a chart of a <k>-manifold
near a corner: the walls are x_j = 0 for j <= corner_dim, and the stratum
T keeps the corner coordinates in T free while setting the others to 0.

All polynomial identities (averaging, extension, face restriction) are
exact and done with sympy. Zero finding is numerical: interval
subdivision with a Krawczyk test isolates zeros, Newton polishes them and
numpy gives Jacobian ranks and determinants.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Mapping, Optional, Sequence

import numpy as np
import sympy as sp
from sympy.polys.monomials import itermonomials
from sympy.polys.orderings import monomial_key

from core.data_loader import DEFAULTS
from core.errors import (
    BudgetExceeded,
    CurveTrackingFailure,
    IncompatibleBoundary,
    NotTransverse,
)
from core.validation import validate_section_size

LOGGER = logging.getLogger(__name__)

# split point inside each box, off the dyadic grid where polynomial roots often sit
SPLIT_RATIO = 0.5139303900908738
PAD = 2.0 ** -10


def default_variables(n: int) -> tuple[sp.Symbol, ...]:
    """x, y, z, w for up to four coordinates, x1..xn beyond."""
    names = "x y z w".split()
    if n <= len(names):
        return tuple(sp.symbols(names[:n])) if n else ()
    return tuple(sp.symbols(f"x1:{n + 1}"))


def _rational(value) -> sp.Rational:
    if isinstance(value, float):
        raise ValueError(
            f"Got the float {value!r}; coefficients must be exact. Write it as "
            "a fraction such as '1/3'."
        )
    if isinstance(value, Fraction):
        return sp.Rational(value.numerator, value.denominator)
    if isinstance(value, str):
        return sp.Rational(sp.sympify(value))
    return sp.Rational(value)


# ---------------------------------------------------------------------------
# Polynomial maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolyMap:
    """A polynomial map Q^n -> Q^m, stored as expanded sympy expressions."""
    variables: tuple
    components: tuple

    @classmethod
    def make(cls, components: Sequence, variables: Sequence) -> "PolyMap":
        """Build from expressions or strings, rejecting inexact or non-polynomial input.

        Raises:
            ValueError: If a component has float coefficients or is not a
                polynomial in ``variables``.
        """
        syms = tuple(sp.Symbol(str(v)) if not isinstance(v, sp.Symbol) else v for v in variables)
        local = {str(s): s for s in syms}
        comps = []
        for c in components:
            expr = sp.sympify(c, locals=local) if isinstance(c, str) else sp.sympify(c)
            expr = sp.expand(expr)
            if expr.atoms(sp.Float):
                raise ValueError(
                    f"Component '{c}' has floating-point coefficients. Use exact "
                    "rationals such as 1/3."
                )
            extra = expr.free_symbols - set(syms)
            if extra:
                raise ValueError(
                    f"Component '{c}' uses {sorted(map(str, extra))}, which are not "
                    f"among the variables {[str(s) for s in syms]}."
                )
            if syms and not expr.is_polynomial(*syms):
                raise ValueError(f"Component '{c}' is not a polynomial.")
            comps.append(expr)
        return cls(syms, tuple(comps))

    @classmethod
    def zero(cls, variables: Sequence, n_out: int) -> "PolyMap":
        return cls(tuple(variables), tuple(sp.Integer(0) for _ in range(n_out)))

    @property
    def n_in(self) -> int:
        return len(self.variables)

    @property
    def n_out(self) -> int:
        return len(self.components)

    @property
    def degree(self) -> int:
        degrees = [
            sp.Poly(c, *self.variables).total_degree() if self.variables else 0
            for c in self.components if c != 0
        ]
        return max(degrees, default=0)

    def subs(self, values: Mapping) -> "PolyMap":
        return PolyMap(self.variables, tuple(sp.expand(c.subs(values)) for c in self.components))

    def compose_linear(self, A: sp.Matrix) -> "PolyMap":
        """x -> p(A x)."""
        x = sp.Matrix(self.variables)
        image = A * x
        return self.subs(dict(zip(self.variables, image)))

    def apply_linear(self, B: sp.Matrix) -> "PolyMap":
        """x -> B p(x)."""
        out = B * sp.Matrix(self.components)
        return PolyMap(self.variables, tuple(sp.expand(c) for c in out))

    def __add__(self, other: "PolyMap") -> "PolyMap":
        return PolyMap(self.variables, tuple(
            sp.expand(a + b) for a, b in zip(self.components, other.components)
        ))

    def __sub__(self, other: "PolyMap") -> "PolyMap":
        return PolyMap(self.variables, tuple(
            sp.expand(a - b) for a, b in zip(self.components, other.components)
        ))

    def scale(self, factor) -> "PolyMap":
        return PolyMap(self.variables, tuple(sp.expand(factor * c) for c in self.components))

    def is_zero(self) -> bool:
        return all(sp.expand(c) == 0 for c in self.components)

    def equals(self, other: "PolyMap") -> bool:
        return self.n_out == other.n_out and (self - other).is_zero()

    def jacobian(self) -> sp.Matrix:
        return sp.Matrix(self.components).jacobian(sp.Matrix(self.variables))

    def __call__(self, point: Sequence) -> tuple:
        values = dict(zip(self.variables, (_rational(v) for v in point)))
        return tuple(c.subs(values) for c in self.components)

    def coefficients(self) -> dict:
        """(component, exponent tuple) -> rational coefficient."""
        out = {}
        for i, c in enumerate(self.components):
            if not self.variables:
                if c != 0:
                    out[(i, ())] = sp.Rational(c)
                continue
            for monom, coeff in sp.Poly(c, *self.variables).terms():
                out[(i, monom)] = coeff
        return out

    def to_strings(self) -> list[str]:
        return [str(c) for c in self.components]


# ---------------------------------------------------------------------------
# Finite group representations
# ---------------------------------------------------------------------------

def _matrix(rows) -> sp.ImmutableMatrix:
    return sp.ImmutableMatrix([[_rational(v) for v in row] for row in rows])


def mulclose(generators: Sequence[tuple], max_order: Optional[int] = None) -> list[tuple]:
    """Close a set of (g_V, g_W) pairs under multiplication."""
    elements = list(dict.fromkeys(generators))
    seen = set(elements)
    boundary = list(elements)
    while boundary:
        fresh = []
        for A in generators:
            for B in boundary:
                C = (A[0] * B[0], A[1] * B[1])
                if C not in seen:
                    seen.add(C)
                    elements.append(C)
                    fresh.append(C)
                    if max_order is not None and len(elements) > max_order:
                        raise ValueError(
                            f"The generators produce more than {max_order} group "
                            "elements, beyond the supported group order."
                        )
        boundary = fresh
    return elements


@dataclass(frozen=True)
class FiniteGroupRep:
    """A finite group acting orthogonally on V = Q^n_V and W = Q^n_W.

    ``elements`` is the multiplicative closure of ``generators``; each
    element is a pair (g_V, g_W) of immutable rational matrices.
    """
    n_V: int
    n_W: int
    generators: tuple = ()
    elements: tuple = ()

    @classmethod
    def make(
        cls,
        n_V: int,
        n_W: int,
        generators: Sequence[tuple] = (),
        max_order: Optional[int] = None,
    ) -> "FiniteGroupRep":
        """Build from (V matrix rows, W matrix rows) generator pairs.

        Raises:
            ValueError: If a matrix has the wrong shape or is not
                orthogonal, or the closure exceeds ``max_order``.
        """
        cap = max_order if max_order is not None else DEFAULTS["caps"]["group_order"]
        gens = []
        for idx, (gv, gw) in enumerate(generators):
            A, B = _matrix(gv), _matrix(gw)
            for name, M, n in (("V", A, n_V), ("W", B, n_W)):
                if M.shape != (n, n):
                    raise ValueError(
                        f"Generator {idx} acts on {name} by a {M.shape[0]}x{M.shape[1]} "
                        f"matrix, expected {n}x{n}."
                    )
                if M.T * M != sp.eye(n):
                    raise ValueError(
                        f"Generator {idx} does not act orthogonally on {name}; "
                        "averaging needs orthogonal actions so that g^-1 = g^T."
                    )
            gens.append((A, B))
        ident = (sp.ImmutableMatrix(sp.eye(n_V)), sp.ImmutableMatrix(sp.eye(n_W)))
        elements = mulclose([ident] + gens, cap)
        return cls(n_V, n_W, tuple(gens), tuple(elements))

    @classmethod
    def trivial(cls, n_V: int, n_W: int) -> "FiniteGroupRep":
        return cls.make(n_V, n_W, [])

    @property
    def order(self) -> int:
        return len(self.elements)

    def closure(self) -> list[tuple]:
        return list(self.elements)

    def preserves_corner(self, corner_dim: int) -> bool:
        """True when every element acts trivially on the first corner_dim coordinates."""
        for gv, _ in self.generators:
            for i in range(corner_dim):
                for j in range(self.n_V):
                    expected = 1 if i == j else 0
                    if gv[i, j] != expected or gv[j, i] != expected:
                        return False
        return True


def reynolds_project(p: PolyMap, rep: FiniteGroupRep) -> PolyMap:
    """Average g_W^-1 ∘ p ∘ g_V over the group."""
    if (p.n_in, p.n_out) != (rep.n_V, rep.n_W):
        raise ValueError(
            f"The map goes Q^{p.n_in} -> Q^{p.n_out} but the group acts on "
            f"Q^{rep.n_V} and Q^{rep.n_W}."
        )
    total = PolyMap.zero(p.variables, p.n_out)
    for gv, gw in rep.elements:
        total = total + p.compose_linear(sp.Matrix(gv)).apply_linear(sp.Matrix(gw).T)
    return total.scale(sp.Rational(1, rep.order))


def is_equivariant(p: PolyMap, rep: FiniteGroupRep) -> bool:
    """Exact check of p(g_V x) = g_W p(x) on the generators."""
    for gv, gw in rep.generators:
        if not p.compose_linear(sp.Matrix(gv)).equals(p.apply_linear(sp.Matrix(gw))):
            return False
    return True


@dataclass(frozen=True)
class EquivariantPolySpace:
    n_V: int
    n_W: int
    degree: int
    basis: tuple

    @property
    def dim(self) -> int:
        return len(self.basis)


def monomial_maps(variables: Sequence, n_out: int, degree: int) -> list[PolyMap]:
    """The maps m·e_i for monomials m of degree <= degree, graded-lex order."""
    variables = tuple(variables)
    if variables:
        monos = sorted(itermonomials(variables, degree), key=monomial_key("grlex", list(variables)))
    else:
        monos = [sp.Integer(1)]
    maps = []
    for i in range(n_out):
        for m in monos:
            comps = tuple(m if k == i else sp.Integer(0) for k in range(n_out))
            maps.append(PolyMap(variables, comps))
    return maps


def enumerate_equivariant_basis(
    n_V: int,
    n_W: int,
    degree: int,
    rep: Optional[FiniteGroupRep] = None,
    variables: Optional[Sequence] = None,
) -> EquivariantPolySpace:
    """Basis of the equivariant maps of degree <= ``degree``.

    Averages every monomial map and keeps a maximal independent subset of
    the images, so the dimension is the rank of the averaging operator.
    """
    if degree < 0:
        raise ValueError(f"Degree must be nonnegative, got {degree}.")
    rep = rep or FiniteGroupRep.trivial(n_V, n_W)
    variables = tuple(variables) if variables is not None else default_variables(n_V)
    projected = [reynolds_project(m, rep) for m in monomial_maps(variables, n_W, degree)]
    keys = sorted(
        {k for p in projected for k in p.coefficients()},
        key=lambda k: (k[0], sum(k[1]), k[1]),
    )
    if not keys:
        return EquivariantPolySpace(n_V, n_W, degree, ())
    columns = sp.Matrix([[p.coefficients().get(k, 0) for p in projected] for k in keys])
    _, pivots = columns.rref()
    basis = tuple(projected[j] for j in pivots)
    LOGGER.debug("equivariant space of degree %d has dimension %d", degree, len(basis))
    return EquivariantPolySpace(n_V, n_W, degree, basis)


# ---------------------------------------------------------------------------
# Sections and boundary data
# ---------------------------------------------------------------------------

def _face_values(variables: Sequence, corner_dim: int, T: frozenset) -> dict:
    return {variables[j - 1]: 0 for j in range(1, corner_dim + 1) if j not in T}


def restrict_to_face(p: PolyMap, corner_dim: int, T: frozenset) -> PolyMap:
    """Set the corner coordinates outside T to zero (variables are kept)."""
    return p.subs(_face_values(p.variables, corner_dim, frozenset(T)))


@dataclass(frozen=True)
class SectionOnBox:
    """Polynomial section on [0,1]^corner_dim x [-1,1]^free_dim."""
    corner_dim: int
    free_dim: int
    map: PolyMap
    rep: Optional[FiniteGroupRep] = None

    @classmethod
    def make(
        cls,
        corner_dim: int,
        free_dim: int,
        p: PolyMap,
        rep: Optional[FiniteGroupRep] = None,
        caps: Optional[dict] = None,
    ) -> "SectionOnBox":
        """Validate sizes against the desk-scale caps.

        Raises:
            ValueError: If the section exceeds a cap, the variable count
                does not match, or the group moves corner coordinates.
        """
        if p.n_in != corner_dim + free_dim:
            raise ValueError(
                f"The map has {p.n_in} variables but the box has "
                f"{corner_dim} corner and {free_dim} free coordinates."
            )
        problems = validate_section_size(
            corner_dim, free_dim, p.degree, rep.order if rep else 1,
            caps or DEFAULTS["caps"],
        )
        if problems:
            raise ValueError(problems[0].message)
        if rep is not None and not rep.preserves_corner(corner_dim):
            raise ValueError(
                "The group must act trivially on the corner coordinates; only "
                "the free coordinates may be moved."
            )
        return cls(corner_dim, free_dim, p, rep)

    @property
    def n_out(self) -> int:
        return self.map.n_out

    @property
    def dim(self) -> int:
        return self.corner_dim + self.free_dim

    def strata(self) -> list[frozenset]:
        """All T ⊆ {1..corner_dim}, smallest first."""
        corner = range(1, self.corner_dim + 1)
        return [
            frozenset(T) for size in range(self.corner_dim + 1)
            for T in combinations(corner, size)
        ]

    def stratum_variables(self, T: frozenset) -> tuple:
        v = self.map.variables
        corner = [v[j - 1] for j in range(1, self.corner_dim + 1) if j in T]
        return tuple(corner) + tuple(v[self.corner_dim:])

    def restrict(self, T: frozenset) -> PolyMap:
        """The section on stratum T as a map of the stratum's own coordinates."""
        face = restrict_to_face(self.map, self.corner_dim, frozenset(T))
        return PolyMap(self.stratum_variables(T), face.components)

    def stratum_box(self, T: frozenset) -> tuple[np.ndarray, np.ndarray]:
        n_corner = len([j for j in T if 1 <= j <= self.corner_dim])
        lo = [0.0] * n_corner + [-1.0] * self.free_dim
        hi = [1.0] * (n_corner + self.free_dim)
        return np.array(lo), np.array(hi)


def section_from_strings(
    components: Sequence[str],
    variables: Sequence[str],
    corner_dim: int,
    rep: Optional[FiniteGroupRep] = None,
) -> SectionOnBox:
    p = PolyMap.make(components, variables)
    return SectionOnBox.make(corner_dim, len(variables) - corner_dim, p, rep)


@dataclass(frozen=True)
class BoundaryData:
    """Sections s^T on the proper faces U(T), T ⊊ {1..corner_dim}.

    Each s^T is stored on the full variable list with the corner
    coordinates outside T set to zero.
    """
    corner_dim: int
    free_dim: int
    variables: tuple
    n_out: int
    faces: dict = field(default_factory=dict)
    rep: Optional[FiniteGroupRep] = None

    @classmethod
    def make(
        cls,
        corner_dim: int,
        free_dim: int,
        faces: Mapping,
        variables: Optional[Sequence] = None,
        n_out: Optional[int] = None,
        rep: Optional[FiniteGroupRep] = None,
    ) -> "BoundaryData":
        """Build from {T: PolyMap or list of strings}.

        A missing face is filled by restricting a given face that contains
        it, or failing that by extending the data on its own sub-faces.

        Raises:
            IncompatibleBoundary: If two faces disagree where they meet.
            ValueError: If ``rep`` is given and some face is not equivariant.
        """
        variables = tuple(variables) if variables is not None else default_variables(corner_dim + free_dim)
        syms = PolyMap.make([], variables).variables
        full = frozenset(range(1, corner_dim + 1))
        stored = {}
        for T, value in faces.items():
            T = frozenset(T)
            if not T < full:
                raise ValueError(
                    f"Boundary data must sit on proper faces; {sorted(T)} is not a "
                    f"proper subset of {{1..{corner_dim}}}."
                )
            p = value if isinstance(value, PolyMap) else PolyMap.make(value, syms)
            stored[T] = restrict_to_face(PolyMap(syms, p.components), corner_dim, T)
        widths = {p.n_out for p in stored.values()}
        if n_out is None:
            if len(widths) > 1:
                raise ValueError("Boundary faces have different numbers of components.")
            n_out = widths.pop() if widths else 0
        data = cls(corner_dim, free_dim, syms, n_out, stored, rep)
        data = data.completed()
        data.check_compatible()
        if rep is not None:
            for T, p in sorted(data.faces.items(), key=lambda item: (len(item[0]), sorted(item[0]))):
                if not is_equivariant(p, rep):
                    raise ValueError(
                        f"The data on face {sorted(T)} is not equivariant, so no "
                        "equivariant section extends it."
                    )
        return data

    def completed(self) -> "BoundaryData":
        faces = dict(self.faces)
        full = sorted(range(1, self.corner_dim + 1))
        for size in range(self.corner_dim - 1, -1, -1):
            for T in map(frozenset, combinations(full, size)):
                above = [U for U in faces if T < U]
                if T not in faces and above:
                    faces[T] = restrict_to_face(faces[min(above, key=sorted)], self.corner_dim, T)
        for size in range(self.corner_dim):
            for T in map(frozenset, combinations(full, size)):
                if T in faces:
                    continue
                below = {U: faces[U] for U in faces if U < T}
                steps = _extend_faces(below, self.corner_dim, self.variables, self.n_out)
                base = steps[-1].section if steps else PolyMap.zero(self.variables, self.n_out)
                faces[T] = restrict_to_face(base, self.corner_dim, T)
        return BoundaryData(self.corner_dim, self.free_dim, self.variables, self.n_out, faces, self.rep)

    def check_compatible(self) -> None:
        for T, p in self.faces.items():
            for U, q in self.faces.items():
                if U < T and not restrict_to_face(p, self.corner_dim, U).equals(q):
                    raise IncompatibleBoundary(
                        f"The data on face {sorted(T)} restricted to face {sorted(U)} "
                        "differs from the data given there. Boundary pieces must agree "
                        "where faces meet.",
                        witness=(sorted(T), sorted(U)),
                    )


@dataclass(frozen=True)
class ExtensionStep:
    """Section after processing the faces of size ``size`` and the remaining residuals."""
    size: int
    section: PolyMap
    residuals: dict


def _extend_faces(faces: dict, corner_dim: int, variables: tuple, n_out: int) -> list[ExtensionStep]:
    current = PolyMap.zero(variables, n_out)
    steps = []
    for size in range(max((len(T) for T in faces), default=-1) + 1):
        layer = [T for T in faces if len(T) == size]
        corrections = PolyMap.zero(variables, n_out)
        for T in layer:
            corrections = corrections + (faces[T] - restrict_to_face(current, corner_dim, T))
        current = current + corrections
        residuals = {T: faces[T] - restrict_to_face(current, corner_dim, T) for T in faces}
        steps.append(ExtensionStep(size, current, residuals))
        LOGGER.debug("extension step %d fixed %d faces", size + 1, len(layer))
    return steps


def extension_steps(bd: BoundaryData) -> list[ExtensionStep]:
    """Run the inductive extension one face dimension at a time.

    Step j adds r^T ∘ pi_T for every face T with |T| = j - 1, where r^T is
    the difference between s^T and the current section on U(T). Since r^T
    vanishes on the smaller faces, each step fixes its faces without
    disturbing earlier ones.
    """
    return _extend_faces(bd.faces, bd.corner_dim, bd.variables, bd.n_out)


def extend_from_boundary(bd: BoundaryData, corner_dim: Optional[int] = None) -> SectionOnBox:
    """Canonical polynomial extension of compatible boundary data.

    The result carries the group representation of ``bd``. It is
    equivariant whenever the faces are, because the group fixes the
    corner coordinates the extension is built along.

    Raises:
        IncompatibleBoundary: If the faces disagree.
        ValueError: If the extension exceeds the section caps.
    """
    if corner_dim is not None and corner_dim != bd.corner_dim:
        raise ValueError(
            f"Boundary data are for corner dimension {bd.corner_dim}, not {corner_dim}."
        )
    bd.check_compatible()
    steps = extension_steps(bd)
    result = steps[-1].section if steps else PolyMap.zero(bd.variables, bd.n_out)
    return SectionOnBox.make(bd.corner_dim, bd.free_dim, result, bd.rep)


def boundary_of(s: SectionOnBox) -> BoundaryData:
    """The face restrictions of a global section as boundary data."""
    full = frozenset(range(1, s.corner_dim + 1))
    faces = {T: restrict_to_face(s.map, s.corner_dim, T) for T in s.strata() if T != full}
    return BoundaryData(s.corner_dim, s.free_dim, s.map.variables, s.n_out, faces, s.rep)


# ---------------------------------------------------------------------------
# Numerical zero finding
# ---------------------------------------------------------------------------

def _ipow(lo: float, hi: float, k: int) -> tuple[float, float]:
    if k == 0:
        return 1.0, 1.0
    a, b = lo ** k, hi ** k
    if k % 2 == 1 or lo >= 0:
        return min(a, b), max(a, b)
    if hi <= 0:
        return min(a, b), max(a, b)
    return 0.0, max(a, b)


class _NumericSystem:
    """Float evaluation and interval bounds of a polynomial map."""

    def __init__(self, p: PolyMap):
        self.n = p.n_in
        self.m = p.n_out
        self._f = sp.lambdify(p.variables, list(p.components), "numpy")
        J = p.jacobian() if p.variables else sp.zeros(p.n_out, 0)
        self._J = sp.lambdify(p.variables, J.tolist(), "numpy")
        self.terms = [self._terms(c, p.variables) for c in p.components]
        self.jterms = [[self._terms(J[i, j], p.variables) for j in range(self.n)] for i in range(self.m)]

    @staticmethod
    def _terms(expr, variables) -> list[tuple[float, tuple]]:
        if not variables:
            return [(float(expr), ())]
        return [(float(c), m) for m, c in sp.Poly(expr, *variables).terms()]

    def f(self, x: np.ndarray) -> np.ndarray:
        return np.array(self._f(*x), dtype=float).reshape(self.m)

    def J(self, x: np.ndarray) -> np.ndarray:
        return np.array(self._J(*x), dtype=float).reshape(self.m, self.n)

    @staticmethod
    def _bound(terms, lo: np.ndarray, hi: np.ndarray) -> tuple[float, float]:
        total_lo = total_hi = 0.0
        for c, monom in terms:
            t_lo, t_hi = 1.0, 1.0
            for i, k in enumerate(monom):
                if k:
                    p_lo, p_hi = _ipow(lo[i], hi[i], k)
                    prods = (t_lo * p_lo, t_lo * p_hi, t_hi * p_lo, t_hi * p_hi)
                    t_lo, t_hi = min(prods), max(prods)
            a, b = c * t_lo, c * t_hi
            total_lo += min(a, b)
            total_hi += max(a, b)
        slack = 1e-12 * (1.0 + abs(total_lo) + abs(total_hi))
        return total_lo - slack, total_hi + slack

    def f_bounds(self, lo, hi) -> tuple[np.ndarray, np.ndarray]:
        pairs = [self._bound(t, lo, hi) for t in self.terms]
        return np.array([a for a, _ in pairs]), np.array([b for _, b in pairs])

    def J_bounds(self, lo, hi) -> tuple[np.ndarray, np.ndarray]:
        los = np.zeros((self.m, self.n))
        his = np.zeros((self.m, self.n))
        for i in range(self.m):
            for j in range(self.n):
                los[i, j], his[i, j] = self._bound(self.jterms[i][j], lo, hi)
        return los, his

    def excludes(self, lo, hi) -> bool:
        f_lo, f_hi = self.f_bounds(lo, hi)
        return bool(np.any(f_lo > 0) or np.any(f_hi < 0))


def _newton(system: _NumericSystem, x: np.ndarray, residual: float, max_steps: int) -> Optional[np.ndarray]:
    """Newton (least-squares steps when not square) until |f| < residual."""
    for _ in range(max_steps):
        fx = system.f(x)
        if np.linalg.norm(fx) < residual:
            return x
        step, *_ = np.linalg.lstsq(system.J(x), fx, rcond=None)
        x = x - step
        if not np.all(np.isfinite(x)):
            return None
    return x if np.linalg.norm(system.f(x)) < residual else None


def _split(lo: np.ndarray, hi: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    axis = int(np.argmax(hi - lo))
    cut = lo[axis] + SPLIT_RATIO * (hi[axis] - lo[axis])
    left_hi = hi.copy()
    left_hi[axis] = cut
    right_lo = lo.copy()
    right_lo[axis] = cut
    return [(lo, left_hi), (right_lo, hi)]


def _krawczyk(system: _NumericSystem, lo: np.ndarray, hi: np.ndarray) -> str:
    """Classify a box as 'none', 'unique' or 'unknown' for a square system."""
    mid = (lo + hi) / 2
    rad = (hi - lo) / 2
    Jm = system.J(mid)
    try:
        Y = np.linalg.inv(Jm)
    except np.linalg.LinAlgError:
        return "unknown"
    if not np.all(np.isfinite(Y)):
        return "unknown"
    J_lo, J_hi = system.J_bounds(lo, hi)
    Y_pos, Y_neg = np.maximum(Y, 0), np.minimum(Y, 0)
    YJ_lo = Y_pos @ J_lo + Y_neg @ J_hi
    YJ_hi = Y_pos @ J_hi + Y_neg @ J_lo
    eye = np.eye(system.n)
    M_abs = np.maximum(np.abs(eye - YJ_lo), np.abs(eye - YJ_hi))
    center = mid - Y @ system.f(mid)
    spread = M_abs @ rad
    K_lo, K_hi = center - spread, center + spread
    if np.any(K_hi < lo) or np.any(K_lo > hi):
        return "none"
    if np.all(K_lo > lo) and np.all(K_hi < hi):
        return "unique"
    return "unknown"


def _merge(points: list[np.ndarray], radius: float) -> list[np.ndarray]:
    kept: list[np.ndarray] = []
    for p in points:
        if all(np.linalg.norm(p - q) > radius for q in kept):
            kept.append(p)
    return sorted(kept, key=lambda p: tuple(p))


def isolate_zeros(
    p: PolyMap,
    lo: np.ndarray,
    hi: np.ndarray,
    depth: Optional[int] = None,
    budget: Optional[int] = None,
    residual: Optional[float] = None,
    merge_radius: Optional[float] = None,
) -> list[np.ndarray]:
    """All zeros of a square polynomial system in the box [lo, hi].

    The box is padded slightly so that zeros on its faces sit in the
    interior of some sub-box; callers filter zeros against the closed box.

    Raises:
        BudgetExceeded: If a box reaches the depth cap without being
            excluded or certified, or too many boxes are visited.
    """
    depth = depth if depth is not None else DEFAULTS["subdivision_depth"]
    budget = budget if budget is not None else DEFAULTS["box_budget"]
    residual = residual if residual is not None else DEFAULTS["newton_residual"]
    radius = merge_radius if merge_radius is not None else DEFAULTS["merge_radius"]
    system = _NumericSystem(p)
    if system.n != system.m:
        raise ValueError(
            f"Zero isolation needs a square system, got {system.m} equations in "
            f"{system.n} unknowns."
        )
    stack = [(lo - PAD, hi + PAD, 0)]
    found = []
    visited = 0
    max_depth = depth * max(system.n, 1)
    while stack:
        b_lo, b_hi, level = stack.pop()
        visited += 1
        if visited > budget:
            raise BudgetExceeded(
                f"Zero isolation visited more than {budget} boxes. The section may "
                "have a non-isolated zero set on this stratum.",
                witness=visited,
            )
        if system.excludes(b_lo, b_hi):
            continue
        verdict = _krawczyk(system, b_lo, b_hi)
        if verdict == "none":
            continue
        if verdict == "unique":
            root = _newton(system, (b_lo + b_hi) / 2, residual, DEFAULTS["newton_max_steps"])
            if root is not None:
                found.append(root)
                continue
        if level >= max_depth:
            raise BudgetExceeded(
                f"A box around {((b_lo + b_hi) / 2).tolist()} reached the subdivision "
                "depth limit without isolating a zero; the zero is probably singular.",
                witness=((b_lo + b_hi) / 2).tolist(),
            )
        for child_lo, child_hi in _split(b_lo, b_hi):
            stack.append((child_lo, child_hi, level + 1))
    LOGGER.debug("isolated %d zeros after %d boxes", len(found), visited)
    return _merge(found, radius)


def sample_zero_set(
    p: PolyMap,
    lo: np.ndarray,
    hi: np.ndarray,
    leaf_depth: int = 6,
    budget: Optional[int] = None,
    residual: Optional[float] = None,
    merge_radius: Optional[float] = None,
) -> list[np.ndarray]:
    """Points of the zero set of a non-square system found from leaf boxes."""
    budget = budget if budget is not None else DEFAULTS["box_budget"]
    residual = residual if residual is not None else DEFAULTS["newton_residual"]
    radius = merge_radius if merge_radius is not None else DEFAULTS["merge_radius"]
    system = _NumericSystem(p)
    stack = [(lo - PAD, hi + PAD, 0)]
    found = []
    visited = 0
    max_depth = leaf_depth * max(system.n, 1)
    while stack:
        b_lo, b_hi, level = stack.pop()
        visited += 1
        if visited > budget:
            raise BudgetExceeded(
                f"Sampling the zero set visited more than {budget} boxes.",
                witness=visited,
            )
        if system.excludes(b_lo, b_hi):
            continue
        if level >= max_depth:
            root = _newton(system, (b_lo + b_hi) / 2, residual, DEFAULTS["newton_max_steps"])
            if root is not None:
                found.append(root)
            continue
        for child_lo, child_hi in _split(b_lo, b_hi):
            stack.append((child_lo, child_hi, level + 1))
    return _merge(found, radius)


# ---------------------------------------------------------------------------
# Transversality and signed counts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroRecord:
    point: tuple
    rank: int
    singular_values: tuple
    sign: Optional[int] = None

    def to_dict(self) -> dict:
        record = {
            "point": list(self.point),
            "rank": self.rank,
            "singular_values": list(self.singular_values),
        }
        if self.sign is not None:
            record["sign"] = self.sign
        return record


@dataclass(frozen=True)
class StratumReport:
    stratum: tuple
    dim: int
    codim: int
    zeros: tuple
    transverse: bool

    def to_dict(self) -> dict:
        return {
            "stratum": list(self.stratum),
            "dim": self.dim,
            "codomain": self.codim,
            "zeros": [z.to_dict() for z in self.zeros],
            "transverse": self.transverse,
        }


@dataclass(frozen=True)
class TransversalityReport:
    strata: tuple

    @property
    def transverse(self) -> bool:
        return all(r.transverse for r in self.strata)

    def stratum(self, T) -> StratumReport:
        key = tuple(sorted(T))
        for r in self.strata:
            if r.stratum == key:
                return r
        raise KeyError(key)

    def to_dict(self) -> dict:
        return {"transverse": self.transverse, "strata": [r.to_dict() for r in self.strata]}


def _in_stratum(point: np.ndarray, n_corner: int, tol: float) -> bool:
    corner = point[:n_corner]
    free = point[n_corner:]
    return bool(
        np.all(corner > tol) and np.all(corner <= 1 + tol) and np.all(np.abs(free) <= 1 + tol)
    )


def stratum_zeros(s: SectionOnBox, T: frozenset, **kwargs) -> list[np.ndarray]:
    """Zeros of the restriction of s to the open stratum T."""
    T = frozenset(T)
    p = s.restrict(T)
    radius = kwargs.get("merge_radius", DEFAULTS["merge_radius"])
    if p.n_in == 0:
        return [np.zeros(0)] if all(c == 0 for c in p.components) else []
    lo, hi = s.stratum_box(T)
    if p.n_in == p.n_out:
        points = isolate_zeros(p, lo, hi, **kwargs)
    else:
        points = sample_zero_set(p, lo, hi, **{k: v for k, v in kwargs.items() if k != "depth"})
    return [x for x in points if _in_stratum(x, len(T), radius)]


def _zero_record(system: _NumericSystem, x: np.ndarray, tol: float) -> ZeroRecord:
    if system.n == 0 or system.m == 0:
        return ZeroRecord(tuple(x.tolist()), 0, ())
    J = system.J(x)
    sv = np.linalg.svd(J, compute_uv=False)
    rank = int(np.sum(sv > tol))
    sign = None
    if system.n == system.m and rank == system.n:
        sign = 1 if np.linalg.det(J) > 0 else -1
    return ZeroRecord(tuple(float(v) for v in x), rank, tuple(float(v) for v in sv), sign)


def check_strong_transversality(
    s: SectionOnBox,
    tol: Optional[float] = None,
    **kwargs,
) -> TransversalityReport:
    """Check that s restricted to every stratum is transverse to zero.

    On each stratum every zero must have a surjective Jacobian (numerical
    rank equal to the number of components, singular values above tol).

    Raises:
        BudgetExceeded: If zeros cannot be isolated.
    """
    tol = tol if tol is not None else DEFAULTS["rank_tol"]
    reports = []
    for T in s.strata():
        p = s.restrict(T)
        zeros = stratum_zeros(s, T, **kwargs)
        system = _NumericSystem(p)
        records = tuple(_zero_record(system, x, tol) for x in zeros)
        ok = all(r.rank == p.n_out for r in records)
        if not ok:
            LOGGER.debug("stratum %s is not transverse", sorted(T))
        reports.append(StratumReport(tuple(sorted(T)), p.n_in, p.n_out, records, ok))
    return TransversalityReport(tuple(reports))


def count_signed_zeros(
    s: SectionOnBox,
    stratum: Optional[frozenset] = None,
    tol: Optional[float] = None,
    **kwargs,
) -> int:
    """Sum of sign(det J) over the zeros of s on a stratum (the top by default).

    Raises:
        ValueError: If the stratum dimension differs from the number of components.
        NotTransverse: If some zero has a singular Jacobian.
    """
    tol = tol if tol is not None else DEFAULTS["rank_tol"]
    T = frozenset(range(1, s.corner_dim + 1)) if stratum is None else frozenset(stratum)
    p = s.restrict(T)
    if p.n_in != p.n_out:
        raise ValueError(
            f"Stratum {sorted(T)} has dimension {p.n_in} but the section has "
            f"{p.n_out} components; signed counts need them equal."
        )
    if p.n_in == 0:
        if all(c == 0 for c in p.components):
            return 1
        return 0
    system = _NumericSystem(p)
    total = 0
    for x in stratum_zeros(s, T, **kwargs):
        record = _zero_record(system, x, tol)
        if record.sign is None:
            raise NotTransverse(
                f"The zero at {record.point} on stratum {sorted(T)} has a singular "
                f"Jacobian (singular values {record.singular_values}); its sign is "
                "undefined.",
                witness=record.point,
            )
        total += record.sign
    return total


# ---------------------------------------------------------------------------
# Zero curves and boundary orientation
# ---------------------------------------------------------------------------

def _tangent(J: np.ndarray) -> np.ndarray:
    """Kernel vector v of an (n-1) x n matrix with det[v; J] > 0."""
    n = J.shape[1]
    v = np.array([
        (-1) ** i * np.linalg.det(np.delete(J, i, axis=1)) if n > 1 else 1.0
        for i in range(n)
    ])
    norm = np.linalg.norm(v)
    if norm == 0:
        raise CurveTrackingFailure("The zero curve has a singular point; no tangent direction.")
    return v / norm


@dataclass(frozen=True)
class CurveRecord:
    start: tuple
    end: tuple
    start_face: str
    end_face: str
    start_sign: int
    end_sign: int
    steps: int

    def to_dict(self) -> dict:
        return {
            "start": list(self.start),
            "end": list(self.end),
            "start_face": self.start_face,
            "end_face": self.end_face,
            "start_sign": self.start_sign,
            "end_sign": self.end_sign,
            "steps": self.steps,
        }


@dataclass(frozen=True)
class BoundaryReport:
    consistent: bool
    walls: dict
    curves: tuple
    unmatched: tuple

    def to_dict(self) -> dict:
        return {
            "consistent": self.consistent,
            "walls": {str(j): w for j, w in sorted(self.walls.items())},
            "curves": [c.to_dict() for c in self.curves],
            "unmatched": [list(u) for u in self.unmatched],
        }


def _face_of(x: np.ndarray, corner_dim: int, tol: float) -> Optional[tuple[int, float]]:
    """The first box face that x lies beyond (coordinate index, bound), if any."""
    for i, v in enumerate(x):
        low = 0.0 if i < corner_dim else -1.0
        if v < low - tol:
            return i, low
        if v > 1.0 + tol:
            return i, 1.0
    return None


def _solve_on_face(
    system: _NumericSystem,
    x: np.ndarray,
    axis: int,
    value: float,
    residual: float,
    max_steps: int,
) -> Optional[np.ndarray]:
    x = x.copy()
    x[axis] = value
    keep = [i for i in range(system.n) if i != axis]
    for _ in range(max_steps):
        fx = system.f(x)
        if np.linalg.norm(fx) < residual:
            return x
        J = system.J(x)[:, keep]
        step, *_ = np.linalg.lstsq(J, fx, rcond=None)
        x[keep] = x[keep] - step
    return x if np.linalg.norm(system.f(x)) < residual else None


def _trace(
    system: _NumericSystem,
    start: np.ndarray,
    orientation: int,
    corner_dim: int,
    step: float,
    max_steps: int,
    residual: float,
) -> tuple[np.ndarray, int, float, int]:
    """Follow the zero curve from ``start`` along orientation·v until it leaves the box.

    Returns the exit point, the crossed coordinate, its bound and the step count.
    """
    x = start.copy()
    h = step
    newton_steps = DEFAULTS["newton_max_steps"]
    for count in range(1, max_steps + 1):
        v = _tangent(system.J(x))
        guess = x + orientation * h * v
        corrected = _newton(system, guess, residual, newton_steps)
        if corrected is None or np.dot(_tangent(system.J(corrected)), v) <= 0:
            h /= 2
            if h < 1e-10:
                raise CurveTrackingFailure(
                    f"Step size collapsed while following the zero curve near {x.tolist()}.",
                    witness=x.tolist(),
                )
            continue
        crossed = _face_of(corrected, corner_dim, 0.0)
        if crossed is not None:
            axis, bound = crossed
            lo_t, hi_t = 0.0, 1.0
            for _ in range(60):
                t = (lo_t + hi_t) / 2
                point = x + t * (corrected - x)
                if _face_of(point, corner_dim, 0.0) is None:
                    lo_t = t
                else:
                    hi_t = t
            exit_guess = x + hi_t * (corrected - x)
            exit_point = _solve_on_face(system, exit_guess, axis, bound, residual, newton_steps)
            if exit_point is None:
                raise CurveTrackingFailure(
                    f"Could not land the zero curve on the face x{axis + 1} = {bound}.",
                    witness=exit_guess.tolist(),
                )
            return exit_point, axis, bound, count
        x = corrected
        h = min(step, 2 * h)
    raise CurveTrackingFailure(
        f"The zero curve did not leave the box within {max_steps} steps; it may be closed.",
        witness=x.tolist(),
    )


def boundary_consistency(
    s: SectionOnBox,
    tol: Optional[float] = None,
    step: Optional[float] = None,
    max_steps: Optional[int] = None,
) -> BoundaryReport:
    """Trace the one-dimensional zero set from the walls and compare signs.

    The curve carries the orientation det[v; ds] > 0. An endpoint on the
    wall x_j = 0 counts +1 when the orientation leaves the domain there;
    the endpoint sum on each wall must equal (-1)^j times the signed zero
    count of the wall restriction. Curves are followed from every wall
    zero until they leave the box; endpoints on the far faces are
    reported but not part of any wall count.

    Strong transversality is assumed: zeros of a wall restriction must lie
    in the open wall. A zero sitting on a corner, where two walls meet, is
    counted on neither wall and no curve is traced from it. The section
    x - y on the square is such a case: the diagonal runs corner to
    corner, so both wall counts come out 0.

    Raises:
        ValueError: If the zero set on the top stratum is not a curve.
        CurveTrackingFailure: If a curve cannot be followed.
    """
    tol = tol if tol is not None else DEFAULTS["rank_tol"]
    step = step if step is not None else DEFAULTS["curve_step"]
    max_steps = max_steps if max_steps is not None else DEFAULTS["curve_max_steps"]
    residual = DEFAULTS["newton_residual"]
    radius = DEFAULTS["merge_radius"]
    if s.dim != s.n_out + 1:
        raise ValueError(
            f"Boundary consistency needs a one-dimensional zero set: the box has "
            f"dimension {s.dim} but the section has {s.n_out} components."
        )
    system = _NumericSystem(s.map)
    full = frozenset(range(1, s.corner_dim + 1))

    wall_zeros: dict[int, list[np.ndarray]] = {}
    wall_counts: dict[int, int] = {}
    for j in range(1, s.corner_dim + 1):
        T = full - {j}
        wall_counts[j] = count_signed_zeros(s, T, tol)
        local = stratum_zeros(s, T)
        # lift stratum coordinates back to the box
        lifted = []
        for z in local:
            x = np.insert(z, j - 1, 0.0)
            lifted.append(x)
        wall_zeros[j] = lifted

    signs: dict[tuple[int, int], int] = {}
    curves = []
    unmatched = []
    for j in sorted(wall_zeros):
        for idx, z in enumerate(wall_zeros[j]):
            if (j, idx) in signs:
                continue
            v = _tangent(system.J(z))
            inward = 1 if v[j - 1] > 0 else -1
            signs[(j, idx)] = -inward
            end, axis, bound, count = _trace(system, z, inward, s.corner_dim, step, max_steps, residual)
            end_sign = inward
            end_face = f"x{axis + 1}={bound:g}"
            if axis < s.corner_dim and bound == 0.0:
                wall = axis + 1
                match = next(
                    (k for k, w in enumerate(wall_zeros[wall]) if np.linalg.norm(w - end) <= radius * 100),
                    None,
                )
                if match is None:
                    unmatched.append(tuple(end.tolist()))
                    LOGGER.warning("curve endpoint %s matches no wall zero", end.tolist())
                else:
                    signs[(wall, match)] = end_sign
            curves.append(CurveRecord(
                tuple(z.tolist()), tuple(end.tolist()), f"x{j}=0", end_face,
                -inward, end_sign, count,
            ))

    walls = {}
    consistent = not unmatched
    for j in sorted(wall_zeros):
        endpoint_sum = sum(signs.get((j, k), 0) for k in range(len(wall_zeros[j])))
        expected = (-1) ** j * wall_counts[j]
        walls[j] = {"count": wall_counts[j], "endpoint_sum": endpoint_sum, "expected": expected}
        if endpoint_sum != expected:
            consistent = False
    return BoundaryReport(consistent, walls, tuple(curves), tuple(unmatched))
