"""Exact arithmetic in truncated universal Novikov rings.

Elements are finite sums of integer multiples of T^r with rational r,
read as residue classes modulo T^truncation (or exact when the truncation
is None). All arithmetic is exact: exponents are Fractions and no
floating point is involved anywhere in this module.

Besides the ring operations the module diagonalizes matrices over the
ring, computes the cohomology of free cochain complexes and builds the
minimal-rank complex with prescribed cohomology.
"""

import logging
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from typing import Iterable, Optional, Sequence, Union

from core.data_loader import DEFAULTS
from core.errors import (
    DegreeMismatch,
    NotAComplex,
    NotAUnit,
    ParseError,
    TruncationTooCoarse,
)

LOGGER = logging.getLogger(__name__)

INFINITY = math.inf

# None means exact
Truncation = Optional[Fraction]


def to_fraction(value: Union[int, str, Fraction]) -> Fraction:
    """Convert an int, Fraction or 'p/q' string to a Fraction.

    Raises:
        TypeError: For floats and other inexact inputs.
        ZeroDivisionError: For strings such as '1/0'.
    """
    if isinstance(value, bool):
        raise TypeError("Booleans are not rationals.")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(
        f"Expected an exact rational, got {value!r}. Floats are not "
        "accepted; pass a string such as '1/3' or a Fraction."
    )


def _tmin(a: Truncation, b: Truncation) -> Truncation:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def _below(exponent: Fraction, truncation: Truncation) -> bool:
    return truncation is None or exponent < truncation


# ---------------------------------------------------------------------------
# Elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NovikovElement:
    """A residue class sum(c_i T^r_i) modulo T^truncation.

    Terms are (coefficient, exponent) pairs with nonzero integer
    coefficients and strictly increasing exponents, all below the
    truncation. Build instances with ``NovikovElement.make`` (or the
    ``element``/``monomial`` helpers) so the canonical form holds.
    """
    terms: tuple[tuple[int, Fraction], ...] = ()
    truncation: Truncation = None

    @classmethod
    def make(
        cls,
        terms: Iterable[tuple[int, Union[int, str, Fraction]]],
        truncation: Union[None, int, str, Fraction] = None,
    ) -> "NovikovElement":
        tau = None if truncation is None else to_fraction(truncation)
        collected: dict[Fraction, int] = {}
        for coeff, exponent in terms:
            e = to_fraction(exponent)
            collected[e] = collected.get(e, 0) + int(coeff)
        kept = tuple(
            (c, e) for e, c in sorted(collected.items())
            if c != 0 and _below(e, tau)
        )
        return cls(kept, tau)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_exact(self) -> bool:
        return self.truncation is None

    @property
    def leading(self) -> Optional[tuple[int, Fraction]]:
        return self.terms[0] if self.terms else None

    @property
    def valuation(self) -> Union[Fraction, float]:
        return self.terms[0][1] if self.terms else INFINITY

    def __str__(self) -> str:
        return format_element(self)


def element(
    value: Union[int, str, "NovikovElement", Iterable[tuple[int, Union[int, str, Fraction]]]] = 0,
    truncation: Union[None, int, str, Fraction] = None,
) -> NovikovElement:
    """Build an element from an int, text, term pairs or another element.

    A given truncation is combined with any truncation already present
    (the coarser one wins).
    """
    tau = None if truncation is None else to_fraction(truncation)
    if isinstance(value, NovikovElement):
        return truncate(value, tau)
    if isinstance(value, bool):
        raise TypeError("Booleans are not Novikov elements.")
    if isinstance(value, int):
        return NovikovElement.make([(value, 0)], tau)
    if isinstance(value, str):
        return truncate(parse_element(value), tau)
    return NovikovElement.make(value, tau)


def monomial(
    coeff: int,
    exponent: Union[int, str, Fraction] = 0,
    truncation: Union[None, int, str, Fraction] = None,
) -> NovikovElement:
    return NovikovElement.make([(coeff, exponent)], truncation)


def zero(truncation: Union[None, int, str, Fraction] = None) -> NovikovElement:
    return NovikovElement.make([], truncation)


def one(truncation: Union[None, int, str, Fraction] = None) -> NovikovElement:
    return NovikovElement.make([(1, 0)], truncation)


def truncate(a: NovikovElement, truncation: Truncation) -> NovikovElement:
    """Coarsen ``a`` to ``truncation`` (never refines)."""
    return NovikovElement.make(a.terms, _tmin(a.truncation, truncation))


def is_unit(a: NovikovElement) -> bool:
    """Units are exactly the elements with leading coefficient ±1."""
    return bool(a.terms) and abs(a.terms[0][0]) == 1


def as_integer(a: NovikovElement) -> Optional[int]:
    """Return the integer ``a`` represents, or None if it is not a constant."""
    if a.is_zero:
        return 0
    if len(a.terms) == 1 and a.terms[0][1] == 0:
        return a.terms[0][0]
    return None


# ---------------------------------------------------------------------------
# Ring operations
# ---------------------------------------------------------------------------

def nov_add(a: NovikovElement, b: NovikovElement) -> NovikovElement:
    """Termwise sum, truncated at the coarser of the two truncations."""
    return NovikovElement.make(a.terms + b.terms, _tmin(a.truncation, b.truncation))


def nov_neg(a: NovikovElement) -> NovikovElement:
    return NovikovElement(tuple((-c, e) for c, e in a.terms), a.truncation)


def nov_sub(a: NovikovElement, b: NovikovElement) -> NovikovElement:
    return nov_add(a, nov_neg(b))


def nov_scale(a: NovikovElement, k: int) -> NovikovElement:
    """Multiply by the exact integer ``k``."""
    return NovikovElement.make(((k * c, e) for c, e in a.terms), a.truncation)


def nov_shift(a: NovikovElement, s: Union[int, str, Fraction]) -> NovikovElement:
    """Multiply by the exact monomial T^s; the truncation moves by s too."""
    shift = to_fraction(s)
    tau = None if a.truncation is None else a.truncation + shift
    return NovikovElement(tuple((c, e + shift) for c, e in a.terms), tau)


def nov_valuation(a: NovikovElement) -> Union[Fraction, float]:
    """Smallest exponent, or +inf for zero."""
    return a.valuation


def _effective_valuation(a: NovikovElement) -> Union[Fraction, float]:
    if a.terms:
        return a.valuation
    return INFINITY if a.truncation is None else a.truncation


def nov_product(a: NovikovElement, b: NovikovElement) -> NovikovElement:
    """Cauchy product in the universal ring, where T^r is a unit for every r.

    With both valuations nonnegative the result lives modulo the coarser
    input truncation. When a factor has negative valuation the error terms
    are shifted down by it, and the surviving window
    min(tau_a + v_b, tau_b + v_a) is used instead.
    """
    ta, tb = a.truncation, b.truncation
    if ta is None and tb is None:
        tau = None
    elif a.valuation >= 0 and b.valuation >= 0:
        tau = _tmin(ta, tb)
    else:
        bounds = []
        if ta is not None:
            bounds.append(ta + _effective_valuation(b))
        if tb is not None:
            bounds.append(tb + _effective_valuation(a))
        finite = [x for x in bounds if x != INFINITY]
        tau = min(finite) if finite else None
    products = [
        (c1 * c2, e1 + e2) for c1, e1 in a.terms for c2, e2 in b.terms
    ]
    return NovikovElement.make(products, tau)


def nov_mul(a: NovikovElement, b: NovikovElement) -> NovikovElement:
    """Cauchy product of two residue classes modulo the coarser truncation.

    Raises:
        TruncationTooCoarse: If a truncation is finite and a factor has
            negative valuation; use nov_product for the shifted window.
    """
    if a.truncation is not None or b.truncation is not None:
        for x in (a, b):
            if x.valuation < 0:
                raise TruncationTooCoarse(
                    f"{format_element(x)} has negative valuation, so a product "
                    "with a truncated factor is not determined modulo "
                    f"T^{_tmin(a.truncation, b.truncation)}. Multiply the "
                    "factors by T^r first, or use the shifted product.",
                    witness=format_element(x),
                )
    return nov_product(a, b)


def _times(mult: NovikovElement, x: NovikovElement) -> NovikovElement:
    # exact monomials shift without losing precision
    if mult.truncation is None and len(mult.terms) == 1:
        c, e = mult.terms[0]
        return nov_scale(nov_shift(x, e), c)
    if mult.truncation is None and not mult.terms:
        return zero()
    return nov_product(mult, x)


def nov_invert(a: NovikovElement) -> NovikovElement:
    """Invert a unit ±T^r(1 + u), val(u) > 0, by a geometric series.

    Args:
        a: Element with leading coefficient ±1.

    Returns:
        The inverse modulo T^(truncation - 2r).

    Raises:
        NotAUnit: If ``a`` is zero or its leading coefficient is not ±1.
        TruncationTooCoarse: If ``a`` is exact but not a monomial, so its
            inverse is an infinite series.
    """
    if a.is_zero:
        raise NotAUnit(
            "Zero has no inverse. If this element is zero only because of "
            "truncation, recompute it at a finer truncation."
        )
    c, r = a.leading
    if abs(c) != 1:
        raise NotAUnit(
            f"{format_element(a)} has leading coefficient {c}. Only elements "
            "whose leading coefficient is +1 or -1 are invertible: T^r is a "
            f"unit but the integer {c} is not.",
            witness=c,
        )
    normalized = nov_shift(nov_scale(a, c), -r)
    u = nov_sub(normalized, one(normalized.truncation))
    if u.is_zero:
        tau = None if a.truncation is None else a.truncation - 2 * r
        return monomial(c, -r, tau)
    if normalized.truncation is None:
        raise TruncationTooCoarse(
            f"The inverse of the exact element {format_element(a)} is an "
            "infinite series. Give the element a truncation (for example "
            "'mod T^(5)') to invert it.",
            witness=format_element(a),
        )
    tau = normalized.truncation
    inverse = one(tau)
    term = one(tau)
    minus_u = nov_neg(u)
    while True:
        term = nov_mul(term, minus_u)
        if term.is_zero:
            break
        inverse = nov_add(inverse, term)
    return nov_scale(nov_shift(inverse, -r), c)


def nov_divmod(
    b: NovikovElement,
    a: NovikovElement,
    max_steps: Optional[int] = None,
) -> tuple[NovikovElement, NovikovElement]:
    """Leading-term division of ``b`` by ``a``.

    Repeatedly cancels the leading term of the remainder while its
    coefficient is divisible by the leading coefficient of ``a``.

    Returns:
        (q, r) with b = a*q + r, where r is zero or has a leading
        coefficient not divisible by lc(a).

    Raises:
        TruncationTooCoarse: If ``a`` has no terms, or an exact division
            does not terminate within ``max_steps``.
    """
    if a.is_zero:
        raise TruncationTooCoarse(
            "Cannot divide by an element with no terms below its truncation."
        )
    cap = max_steps if max_steps is not None else DEFAULTS["diagonalize_step_cap"]
    ca, va = a.leading
    bounds = []
    if b.truncation is not None:
        bounds.append(b.truncation - va)
    if a.truncation is not None:
        vb = _effective_valuation(b)
        if vb != INFINITY:
            bounds.append(a.truncation + vb - 2 * va)
    tq = min(bounds) if bounds else None

    q = zero(tq)
    r = b
    steps = 0
    while not r.is_zero:
        cr, er = r.leading
        if cr % ca != 0:
            break
        shift = er - va
        if tq is not None and shift >= tq:
            break
        steps += 1
        if steps > cap:
            raise TruncationTooCoarse(
                f"Dividing {format_element(b)} by {format_element(a)} does not "
                f"terminate within {cap} steps; the quotient is an infinite "
                "series. Work at a finite truncation.",
            )
        qt = monomial(cr // ca, shift)
        q = nov_add(q, qt)
        r = nov_sub(r, _times(qt, a))
    return q, r


def nov_divides(a: NovikovElement, b: NovikovElement) -> bool:
    """True when ``a`` divides ``b`` at the available precision."""
    if b.is_zero:
        return True
    if a.is_zero:
        return False
    _, r = nov_divmod(b, a)
    return r.is_zero


def associates(a: NovikovElement, b: NovikovElement) -> bool:
    """True when a and b divide each other."""
    if a.is_zero or b.is_zero:
        return a.is_zero and b.is_zero
    return nov_divides(a, b) and nov_divides(b, a)


# ---------------------------------------------------------------------------
# Text form
# ---------------------------------------------------------------------------

_TERM_RE = re.compile(
    r"\s*([+-])?\s*(\d+)?\s*(\*?\s*T\s*(?:\^\s*(?:\(\s*(-?\d+(?:/\d+)?)\s*\)"
    r"|(-?\d+(?:/\d+)?)))?)?"
)
_SUFFIX_RE = re.compile(
    r"(?:\bmod\s+T\s*\^\s*(?:\(\s*(-?\d+(?:/\d+)?)\s*\)|(-?\d+(?:/\d+)?))|\bexact)\s*$"
)


def format_element(a: NovikovElement) -> str:
    """Render as ``c1*T^(p1/q1) + ... mod T^(p/q)`` (or ``... exact``)."""
    parts = []
    for idx, (c, e) in enumerate(a.terms):
        mag = abs(c)
        if e == 0:
            body = str(mag)
        else:
            power = f"T^({e})"
            body = power if mag == 1 else f"{mag}*{power}"
        if idx == 0:
            parts.append(("-" if c < 0 else "") + body)
        else:
            parts.append((" - " if c < 0 else " + ") + body)
    text = "".join(parts) or "0"
    if a.truncation is None:
        return f"{text} exact"
    return f"{text} mod T^({a.truncation})"


def parse_element(text: str) -> NovikovElement:
    """Parse the text form produced by ``format_element``.

    The suffix is optional; without it the element is exact.

    Raises:
        ParseError: With the 1-based column of the offending character.
    """
    body = text.strip()
    truncation = None
    suffix = _SUFFIX_RE.search(body)
    if suffix:
        raw = suffix.group(1) or suffix.group(2)
        if raw is not None:
            try:
                truncation = Fraction(raw)
            except ZeroDivisionError:
                raise ParseError(
                    f"Truncation exponent '{raw}' has a zero denominator.",
                    line=1, column=suffix.start() + 1,
                )
        body = body[:suffix.start()]
    if body.strip() in ("", "0"):
        return zero(truncation)

    terms = []
    pos = 0
    first = True
    while pos < len(body):
        if not body[pos:].strip():
            break
        match = _TERM_RE.match(body, pos)
        sign, coeff, tpart, paren_exp, bare_exp = match.groups()
        if coeff is None and tpart is None:
            bad = match.end()
            raise ParseError(
                f"Unexpected character {body[bad:bad + 1]!r} in Novikov "
                f"element '{text.strip()}'. Terms look like 3*T^(1/2).",
                line=1, column=bad + 1,
            )
        if not first and sign is None:
            raise ParseError(
                f"Expected '+' or '-' between terms in '{text.strip()}'.",
                line=1, column=pos + 1,
            )
        c = int(coeff) if coeff else 1
        if sign == "-":
            c = -c
        raw_exp = paren_exp or bare_exp
        try:
            if tpart is None:
                exponent = Fraction(0)
            elif raw_exp is None:
                exponent = Fraction(1)
            else:
                exponent = Fraction(raw_exp)
        except ZeroDivisionError:
            raise ParseError(
                f"Exponent '{raw_exp}' has a zero denominator.",
                line=1, column=pos + 1,
            )
        terms.append((c, exponent))
        pos = match.end()
        first = False
    return NovikovElement.make(terms, truncation)


# ---------------------------------------------------------------------------
# Novikov groups
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NovikovGroupDesc:
    """Free abelian group Pi with energy E and grading mu on its generators."""
    E: tuple[Fraction, ...] = ()
    mu: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.E) != len(self.mu):
            raise ValueError(
                f"Energy has {len(self.E)} entries but grading has "
                f"{len(self.mu)}. Both homomorphisms are given by their "
                "values on the same list of generators."
            )

    @classmethod
    def make(cls, E: Sequence, mu: Sequence[int]) -> "NovikovGroupDesc":
        return cls(tuple(to_fraction(e) for e in E), tuple(int(m) for m in mu))

    @property
    def rank(self) -> int:
        return len(self.E)

    @property
    def N(self) -> int:
        """Positive generator of mu(Pi), or 0 when mu vanishes."""
        return math.gcd(*self.mu) if self.mu else 0

    def _check(self, g: Sequence[int]) -> None:
        if len(g) != self.rank:
            raise ValueError(
                f"Group element {list(g)} has {len(g)} coordinates but the "
                f"Novikov group has rank {self.rank}."
            )

    def energy(self, g: Sequence[int]) -> Fraction:
        self._check(g)
        return sum((e * x for e, x in zip(self.E, g)), Fraction(0))

    def grading(self, g: Sequence[int]) -> int:
        self._check(g)
        return sum(m * x for m, x in zip(self.mu, g))


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NovikovMatrix:
    """Dense matrix of Novikov elements."""
    rows: int
    cols: int
    entries: tuple[tuple[NovikovElement, ...], ...]

    @classmethod
    def make(
        cls,
        data: Sequence[Sequence],
        truncation: Union[None, int, str, Fraction] = None,
        cols: Optional[int] = None,
    ) -> "NovikovMatrix":
        rows = [tuple(element(x, truncation) for x in row) for row in data]
        width = cols if cols is not None else (len(rows[0]) if rows else 0)
        for i, row in enumerate(rows):
            if len(row) != width:
                raise ValueError(
                    f"Row {i} has {len(row)} entries but the matrix has "
                    f"{width} columns."
                )
        return cls(len(rows), width, tuple(rows))

    def __getitem__(self, index: tuple[int, int]) -> NovikovElement:
        i, j = index
        return self.entries[i][j]

    @property
    def truncation(self) -> Truncation:
        tau = None
        for row in self.entries:
            for x in row:
                tau = _tmin(tau, x.truncation)
        return tau

    @property
    def is_zero(self) -> bool:
        return all(x.is_zero for row in self.entries for x in row)

    def coarsen(self, truncation: Truncation) -> "NovikovMatrix":
        return NovikovMatrix(
            self.rows, self.cols,
            tuple(tuple(truncate(x, truncation) for x in row) for row in self.entries),
        )


def zeros(rows: int, cols: int, truncation: Truncation = None) -> NovikovMatrix:
    z = zero(truncation)
    return NovikovMatrix(rows, cols, tuple(tuple(z for _ in range(cols)) for _ in range(rows)))


def identity(n: int, truncation: Truncation = None) -> NovikovMatrix:
    return NovikovMatrix(n, n, tuple(
        tuple(one(truncation) if i == j else zero(truncation) for j in range(n))
        for i in range(n)
    ))


def transpose(A: NovikovMatrix) -> NovikovMatrix:
    return NovikovMatrix(A.cols, A.rows, tuple(
        tuple(A.entries[i][j] for i in range(A.rows)) for j in range(A.cols)
    ))


def mat_add(A: NovikovMatrix, B: NovikovMatrix) -> NovikovMatrix:
    _same_shape(A, B)
    return NovikovMatrix(A.rows, A.cols, tuple(
        tuple(nov_add(a, b) for a, b in zip(ra, rb))
        for ra, rb in zip(A.entries, B.entries)
    ))


def mat_neg(A: NovikovMatrix) -> NovikovMatrix:
    return NovikovMatrix(A.rows, A.cols, tuple(
        tuple(nov_neg(a) for a in row) for row in A.entries
    ))


def mat_sub(A: NovikovMatrix, B: NovikovMatrix) -> NovikovMatrix:
    return mat_add(A, mat_neg(B))


def matmul(A: NovikovMatrix, B: NovikovMatrix) -> NovikovMatrix:
    if A.cols != B.rows:
        raise ValueError(
            f"Cannot multiply a {A.rows}x{A.cols} matrix by a "
            f"{B.rows}x{B.cols} matrix: inner dimensions differ."
        )
    out = []
    for i in range(A.rows):
        row = []
        for j in range(B.cols):
            acc = zero()
            for k in range(A.cols):
                acc = nov_add(acc, nov_product(A.entries[i][k], B.entries[k][j]))
            row.append(acc)
        out.append(tuple(row))
    return NovikovMatrix(A.rows, B.cols, tuple(out))


def mat_vec(A: NovikovMatrix, x: Sequence[NovikovElement]) -> list[NovikovElement]:
    column = NovikovMatrix(len(x), 1, tuple((v,) for v in x))
    return [row[0] for row in matmul(A, column).entries]


def _same_shape(A: NovikovMatrix, B: NovikovMatrix) -> None:
    if (A.rows, A.cols) != (B.rows, B.cols):
        raise ValueError(
            f"Matrix shapes differ: {A.rows}x{A.cols} vs {B.rows}x{B.cols}."
        )


def agrees_with(
    A: NovikovMatrix,
    B: NovikovMatrix,
    truncation: Truncation = None,
) -> bool:
    """Entrywise equality of residue classes at their common precision."""
    if (A.rows, A.cols) != (B.rows, B.cols):
        return False
    for ra, rb in zip(A.entries, B.entries):
        for a, b in zip(ra, rb):
            tau = _tmin(_tmin(a.truncation, b.truncation), truncation)
            if truncate(a, tau).terms != truncate(b, tau).terms:
                return False
    return True


def nov_det(M: NovikovMatrix) -> NovikovElement:
    """Leibniz determinant; intended for small matrices."""
    if M.rows != M.cols:
        raise ValueError(f"Determinant needs a square matrix, got {M.rows}x{M.cols}.")
    total = one()
    if M.rows == 0:
        return total
    total = zero()
    for perm in permutations(range(M.rows)):
        inversions = sum(
            1 for a in range(len(perm)) for b in range(a + 1, len(perm)) if perm[a] > perm[b]
        )
        term = one()
        for i, j in enumerate(perm):
            term = nov_product(term, M.entries[i][j])
        total = nov_add(total, nov_neg(term) if inversions % 2 else term)
    return total


# ---------------------------------------------------------------------------
# Diagonalization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Diagonalization:
    """U*M*V = D with D diagonal and its nonzero entries forming a divisibility chain.

    Unpacks as ``U, D, V = nov_diagonalize(M)``.
    """
    U: NovikovMatrix
    D: NovikovMatrix
    V: NovikovMatrix
    rank: int
    truncation: Truncation
    det_u: NovikovElement
    det_v: NovikovElement
    non_integral: tuple[int, ...] = ()

    def __iter__(self):
        return iter((self.U, self.D, self.V))

    @property
    def invariant_factors(self) -> tuple[NovikovElement, ...]:
        return tuple(self.D.entries[i][i] for i in range(self.rank))


class _Reducer:
    """Row/column reduction state keeping W = U*M*V throughout.

    Every operation multiplies by T^r or k*T^s with r, s >= 0, so no
    entry ever drops below the truncation of the input. Precision is
    only spent when a pivot is normalized to leading exponent 0.
    """

    def __init__(self, M: NovikovMatrix, step_cap: int):
        self.rows, self.cols = M.rows, M.cols
        self.W = [list(row) for row in M.entries]
        self.U = [list(row) for row in identity(M.rows).entries]
        self.V = [list(row) for row in identity(M.cols).entries]
        self.det_u = one()
        self.det_v = one()
        self.steps = 0
        self.step_cap = step_cap
        self.non_integral: list[int] = []

    def tick(self) -> None:
        self.steps += 1
        if self.steps > self.step_cap:
            raise TruncationTooCoarse(
                f"Diagonalization did not converge within {self.step_cap} "
                "steps. Exact inputs whose pivots are not monomials need a "
                "finite truncation; otherwise raise the step cap.",
            )

    def swap_rows(self, i: int, j: int) -> None:
        if i == j:
            return
        self.W[i], self.W[j] = self.W[j], self.W[i]
        self.U[i], self.U[j] = self.U[j], self.U[i]
        self.det_u = nov_neg(self.det_u)

    def swap_cols(self, i: int, j: int) -> None:
        if i == j:
            return
        for row in self.W:
            row[i], row[j] = row[j], row[i]
        for row in self.V:
            row[i], row[j] = row[j], row[i]
        self.det_v = nov_neg(self.det_v)

    def combine_rows(self, i: int, t: int, k: int, s: Fraction, r: Fraction) -> None:
        """row_i = T^r * row_i - k*T^s * row_t."""
        for mat in (self.W, self.U):
            mat[i] = [
                nov_sub(nov_shift(x, r), nov_scale(nov_shift(y, s), k))
                for x, y in zip(mat[i], mat[t])
            ]
        if r:
            self.det_u = nov_shift(self.det_u, r)

    def combine_cols(self, j: int, t: int, k: int, s: Fraction, r: Fraction) -> None:
        """col_j = T^r * col_j - k*T^s * col_t."""
        for mat in (self.W, self.V):
            for row in mat:
                row[j] = nov_sub(nov_shift(row[j], r), nov_scale(nov_shift(row[t], s), k))
        if r:
            self.det_v = nov_shift(self.det_v, r)

    def scale_row(self, t: int, factor: NovikovElement) -> None:
        for mat in (self.W, self.U):
            mat[t] = [_times(factor, x) for x in mat[t]]
        self.det_u = _times(factor, self.det_u)

    def select_pivot(self, t: int) -> bool:
        best = None
        for i in range(t, self.rows):
            for j in range(t, self.cols):
                e = self.W[i][j]
                if e.is_zero:
                    continue
                c, v = e.leading
                key = (abs(c), v, i, j)
                if best is None or key < best:
                    best = key
        if best is None:
            return False
        self.swap_rows(t, best[2])
        self.swap_cols(t, best[3])
        LOGGER.debug("pivot %d: %s", t, format_element(self.W[t][t]))
        return True

    @staticmethod
    def plan(p: NovikovElement, e: NovikovElement):
        """(k, s, r, rest) with rest = T^r*e - k*T^s*p reduced against p."""
        cp, vp = p.leading
        ce, ve = e.leading
        top = max(vp, ve)
        k = ce // cp
        s, r = top - vp, top - ve
        rest = nov_sub(nov_shift(e, r), nov_scale(nov_shift(p, s), k))
        return k, s, r, rest

    def best_step(self, t: int):
        """The elimination in pivot row or column leaving the smallest remainder."""
        p = self.W[t][t]
        best = None
        candidates = [("row", i, self.W[i][t]) for i in range(t + 1, self.rows)]
        candidates += [("col", j, self.W[t][j]) for j in range(t + 1, self.cols)]
        for order, (axis, index, e) in enumerate(candidates):
            if e.is_zero:
                continue
            k, s, r, rest = self.plan(p, e)
            size = (0, 0) if rest.is_zero else (abs(rest.leading[0]), rest.leading[1])
            key = (size, order)
            if best is None or key < best[0]:
                best = (key, axis, index, k, s, r, rest)
        return best

    def eliminate(self, t: int, step) -> None:
        _, axis, index, k, s, r, rest = step
        cp = self.W[t][t].leading[0]
        if k:
            if axis == "row":
                self.combine_rows(index, t, k, s, r)
            else:
                self.combine_cols(index, t, k, s, r)
        if k == 0 or (not rest.is_zero and abs(rest.leading[0]) < abs(cp)):
            if axis == "row":
                self.swap_rows(t, index)
            else:
                self.swap_cols(t, index)

    def normalize_pivot(self, t: int) -> None:
        p = self.W[t][t]
        c, v = p.leading
        sign = 1 if c > 0 else -1
        if all(coeff % c == 0 for coeff, _ in p.terms):
            unit = NovikovElement.make(((coeff // c, e) for coeff, e in p.terms), p.truncation)
            try:
                self.scale_row(t, nov_scale(nov_invert(unit), sign))
                return
            except TruncationTooCoarse:
                LOGGER.warning(
                    "pivot %s is associate to %d but exact; leaving it unnormalized",
                    format_element(p), abs(c),
                )
                self.scale_row(t, monomial(sign, -v))
                return
        self.scale_row(t, monomial(sign, -v))
        self.non_integral.append(t)
        LOGGER.warning(
            "invariant factor %s is not associate to an integer",
            format_element(self.W[t][t]),
        )

    def first_not_divisible(self, t: int) -> Optional[int]:
        p = self.W[t][t]
        for i in range(t + 1, self.rows):
            for j in range(t + 1, self.cols):
                if not nov_divides(p, self.W[i][j]):
                    return i
        return None

    def reduce_at(self, t: int) -> bool:
        """Bring position t to its final diagonal form; False if nothing is left."""
        if not self.select_pivot(t):
            return False
        while True:
            self.tick()
            p = self.W[t][t]
            if p.is_zero:
                if not self.select_pivot(t):
                    return False
                continue
            step = self.best_step(t)
            if step is not None:
                self.eliminate(t, step)
                continue
            if not is_unit(p):
                i = self.first_not_divisible(t)
                if i is not None:
                    self.combine_rows(t, i, -1, Fraction(0), Fraction(0))
                    continue
            self.normalize_pivot(t)
            return True


def nov_diagonalize(
    M: NovikovMatrix,
    step_cap: Optional[int] = None,
) -> Diagonalization:
    """Diagonalize M over the Novikov ring by invertible row and column operations.

    Pivots minimize (|leading coefficient|, valuation), ties broken
    row-major. Entries are reduced against the pivot by a Euclidean
    algorithm on leading coefficients that only multiplies by T^r with
    r >= 0, so the truncation never drops below the input's until each
    pivot is normalized: units to 1, associates of integers to a positive
    integer, anything else to leading term c*T^0 with c > 0.

    Args:
        M: Matrix to diagonalize.
        step_cap: Maximum number of reduction steps.

    Returns:
        Diagonalization with U*M*V = D at ``truncation``.

    Raises:
        TruncationTooCoarse: If precision runs out before D is determined.
    """
    cap = step_cap if step_cap is not None else DEFAULTS["diagonalize_step_cap"]
    red = _Reducer(M, cap)
    rank = 0
    for t in range(min(M.rows, M.cols)):
        if not red.reduce_at(t):
            break
        rank += 1

    tau = None
    for row in red.W:
        for x in row:
            tau = _tmin(tau, x.truncation)
    if tau is not None and tau <= 0:
        raise TruncationTooCoarse(
            f"Diagonalization lost all precision (surviving truncation {tau}). "
            "Start from a finer truncation.",
            witness=str(tau),
        )
    diag_entries = tuple(
        tuple(
            truncate(red.W[i][j], tau) if i == j and i < rank else zero(tau)
            for j in range(M.cols)
        )
        for i in range(M.rows)
    )
    D = NovikovMatrix(M.rows, M.cols, diag_entries)
    LOGGER.debug("diagonalized %dx%d matrix, rank %d, truncation %s", M.rows, M.cols, rank, tau)
    return Diagonalization(
        U=NovikovMatrix(M.rows, M.rows, tuple(tuple(r) for r in red.U)),
        D=D,
        V=NovikovMatrix(M.cols, M.cols, tuple(tuple(r) for r in red.V)),
        rank=rank,
        truncation=tau,
        det_u=red.det_u,
        det_v=red.det_v,
        non_integral=tuple(red.non_integral),
    )


def nov_linear_solve(
    A: NovikovMatrix,
    b: Sequence[NovikovElement],
) -> Optional[list[NovikovElement]]:
    """Solve A*x = b at the available truncation.

    Returns:
        A solution vector, or None when the system is inconsistent.
    """
    if len(b) != A.rows:
        raise ValueError(
            f"Right-hand side has {len(b)} entries but the matrix has {A.rows} rows."
        )
    diag = nov_diagonalize(A)
    c = mat_vec(diag.U, b)
    y = []
    for i in range(A.cols):
        if i < diag.rank:
            q, r = nov_divmod(c[i], diag.D.entries[i][i])
            if not r.is_zero:
                return None
            y.append(q)
        else:
            y.append(zero())
    for i in range(diag.rank, A.rows):
        if not truncate(c[i], diag.truncation).is_zero:
            return None
    return mat_vec(diag.V, y) if A.cols else []


# ---------------------------------------------------------------------------
# Complexes and cohomology
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NovikovComplex:
    """Cochain complex of free Novikov modules.

    ``differentials[k]`` is d^k : C^k -> C^(k+1), with rows indexed by the
    degree-(k+1) generators and columns by the degree-k generators, both
    in the order they appear in ``generators``. Degrees are residues
    modulo ``period`` when it is positive.
    """
    generators: tuple[tuple[str, int], ...]
    differentials: dict = field(default_factory=dict)
    period: int = 0
    truncation: Truncation = None
    lambda0: bool = False
    group: Optional[NovikovGroupDesc] = None

    @classmethod
    def from_entries(
        cls,
        generators: Sequence[tuple[str, int]],
        entries: dict,
        period: int = 0,
        truncation: Truncation = None,
        lambda0: bool = False,
        group: Optional[NovikovGroupDesc] = None,
    ) -> "NovikovComplex":
        """Build from a sparse map (target id, source id) -> element."""
        gens = tuple((gid, _wrap(int(deg), period)) for gid, deg in generators)
        degree_of = dict(gens)
        if len(degree_of) != len(gens):
            raise ValueError("Generator ids must be distinct.")
        for (target, source) in entries:
            for gid in (target, source):
                if gid not in degree_of:
                    raise ValueError(f"Differential entry mentions unknown generator '{gid}'.")
            if degree_of[target] != _wrap(degree_of[source] + 1, period):
                raise DegreeMismatch(
                    f"Entry ({target}, {source}) would map degree "
                    f"{degree_of[source]} to degree {degree_of[target]}; a "
                    "differential raises degree by exactly one.",
                    witness=(target, source),
                )
        differentials = {}
        for k in sorted(set(degree_of.values())):
            cols = [g for g, d in gens if d == k]
            rows = [g for g, d in gens if d == _wrap(k + 1, period)]
            data = [[entries.get((r, c), zero(truncation)) for c in cols] for r in rows]
            differentials[k] = NovikovMatrix.make(data, truncation, cols=len(cols))
        return cls(gens, differentials, period, truncation, lambda0, group)

    def degrees(self) -> list[int]:
        return sorted({d for _, d in self.generators})

    def generators_in(self, k: int) -> list[str]:
        return [g for g, d in self.generators if d == _wrap(k, self.period)]

    def degree_of(self, gid: str) -> int:
        for g, d in self.generators:
            if g == gid:
                return d
        raise KeyError(gid)

    def next_degree(self, k: int) -> int:
        return _wrap(k + 1, self.period)

    def previous_degree(self, k: int) -> int:
        return _wrap(k - 1, self.period)

    def differential(self, k: int) -> NovikovMatrix:
        k = _wrap(k, self.period)
        if k in self.differentials:
            return self.differentials[k]
        return zeros(len(self.generators_in(k + 1)), len(self.generators_in(k)), self.truncation)

    def entry(self, target: str, source: str) -> NovikovElement:
        k = self.degree_of(source)
        if self.degree_of(target) != self.next_degree(k):
            return zero(self.truncation)
        rows = self.generators_in(k + 1)
        cols = self.generators_in(k)
        return self.differential(k).entries[rows.index(target)][cols.index(source)]

    def entries(self) -> dict:
        """Sparse (target, source) -> element map of the nonzero entries."""
        out = {}
        for k in self.degrees():
            rows = self.generators_in(k + 1)
            cols = self.generators_in(k)
            d = self.differential(k)
            for i, r in enumerate(rows):
                for j, c in enumerate(cols):
                    if not d.entries[i][j].is_zero:
                        out[(r, c)] = d.entries[i][j]
        return out

    def full_matrix(self) -> NovikovMatrix:
        """d as one endomorphism matrix in the order of ``generators``."""
        ids = [g for g, _ in self.generators]
        sparse = self.entries()
        return NovikovMatrix(len(ids), len(ids), tuple(
            tuple(sparse.get((r, c), zero(self.truncation)) for c in ids) for r in ids
        ))


def _wrap(k: int, period: int) -> int:
    return k % period if period else k


def d_squared_witness(C: NovikovComplex) -> Optional[tuple[str, str]]:
    """Return (target, source) of the first nonzero entry of d*d, or None."""
    for k in C.degrees():
        first = C.differential(k)
        second = C.differential(k + 1)
        composite = matmul(second, first)
        targets = C.generators_in(k + 2)
        sources = C.generators_in(k)
        for i, row in enumerate(composite.entries):
            for j, x in enumerate(row):
                if not x.is_zero:
                    return targets[i], sources[j]
    return None


@dataclass(frozen=True)
class CohomologyGroup:
    """Lambda^free_rank plus the sum of Lambda/(t) over the torsion factors."""
    free_rank: int = 0
    torsion: tuple[NovikovElement, ...] = ()

    @property
    def torsion_count(self) -> int:
        return len(self.torsion)

    def integer_torsion(self) -> Optional[tuple[int, ...]]:
        values = tuple(as_integer(t) for t in self.torsion)
        return None if any(v is None for v in values) else values


@dataclass(frozen=True)
class GradedCohomology:
    """Cohomology (or homology) groups by degree."""
    groups: dict = field(default_factory=dict)
    period: int = 0
    convention: str = "cohomology"  # "cohomology" or "homology"

    @classmethod
    def from_integers(
        cls,
        data: dict,
        period: int = 0,
        convention: str = "cohomology",
    ) -> "GradedCohomology":
        """Build from {degree: (free_rank, [torsion integers])}."""
        groups = {
            int(k): CohomologyGroup(int(free), tuple(monomial(int(t)) for t in torsion))
            for k, (free, torsion) in data.items()
        }
        return cls(groups, 0, convention).wrapped(period)

    def wrapped(self, period: int) -> "GradedCohomology":
        """Regrade modulo ``period``, merging groups that land in one degree."""
        merged: dict[int, tuple[int, tuple]] = {}
        for k, g in self.groups.items():
            free, torsion = merged.get(_wrap(k, period), (0, ()))
            merged[_wrap(k, period)] = (free + g.free_rank, torsion + g.torsion)
        groups = {
            k: CohomologyGroup(free, canonical_torsion(torsion))
            for k, (free, torsion) in sorted(merged.items())
        }
        return GradedCohomology(groups, period, self.convention)

    def to_cohomology(self) -> "GradedCohomology":
        """Universal coefficients: H^k has the free part of H_k and the torsion of H_(k-1)."""
        if self.convention == "cohomology":
            return self
        degrees = set(self.groups) | {_wrap(k + 1, self.period) for k in self.groups}
        groups = {
            k: CohomologyGroup(self.group(k).free_rank, self.group(k - 1).torsion)
            for k in sorted(degrees)
        }
        return GradedCohomology(groups, self.period, "cohomology")

    def group(self, k: int) -> CohomologyGroup:
        return self.groups.get(_wrap(k, self.period), CohomologyGroup())

    def degrees(self) -> list[int]:
        return sorted(self.groups)

    def free_ranks(self) -> dict[int, int]:
        return {k: g.free_rank for k, g in sorted(self.groups.items())}

    def chain_holds(self) -> bool:
        """Check t_i | t_(i+1) in every degree."""
        for g in self.groups.values():
            for a, b in zip(g.torsion, g.torsion[1:]):
                if not nov_divides(a, b):
                    return False
        return True

    def same_as(self, other: "GradedCohomology") -> bool:
        """Equal free ranks and associate torsion factors in every degree."""
        for k in set(self.groups) | set(other.groups):
            a, b = self.group(k), other.group(k)
            if a.free_rank != b.free_rank or len(a.torsion) != len(b.torsion):
                return False
            if not all(associates(x, y) for x, y in zip(a.torsion, b.torsion)):
                return False
        return True

    def to_dict(self) -> dict:
        out = {}
        for k, g in sorted(self.groups.items()):
            ints = g.integer_torsion()
            torsion = list(ints) if ints is not None else [format_element(t) for t in g.torsion]
            out[str(k)] = {"free_rank": g.free_rank, "torsion": torsion}
        return out


def canonical_torsion(factors: Sequence[NovikovElement]) -> tuple[NovikovElement, ...]:
    """Invariant factors (non-units only) of the direct sum of Lambda/(f)."""
    if len(factors) <= 1:
        return tuple(f for f in factors if not is_unit(f))
    n = len(factors)
    square = NovikovMatrix(n, n, tuple(
        tuple(factors[i] if i == j else zero() for j in range(n)) for i in range(n)
    ))
    diag = nov_diagonalize(square)
    return tuple(f for f in diag.invariant_factors if not is_unit(f))


def nov_homology(C: NovikovComplex) -> GradedCohomology:
    """Cohomology of a free cochain complex.

    Free rank in degree k is n_k - rank(d^k) - rank(d^(k-1)); torsion is
    read off the non-unit invariant factors of d^(k-1).

    Raises:
        NotAComplex: If d*d is nonzero at the truncation.
    """
    witness = d_squared_witness(C)
    if witness is not None:
        raise NotAComplex(
            f"d*d is nonzero on entry {witness}: the differential does not "
            "square to zero, so cohomology is undefined. Check the signs of "
            "the counts.",
            witness=witness,
        )
    ranks = {}
    factors = {}
    for k in C.degrees():
        diag = nov_diagonalize(C.differential(k))
        ranks[k] = diag.rank
        factors[k] = diag.invariant_factors
    groups = {}
    for k in C.degrees():
        prev = C.previous_degree(k)
        torsion = tuple(f for f in factors.get(prev, ()) if not is_unit(f))
        free = len(C.generators_in(k)) - ranks[k] - ranks.get(prev, 0)
        groups[k] = CohomologyGroup(free, torsion)
    return GradedCohomology(groups, C.period)


@dataclass(frozen=True)
class MinimalRank:
    """Minimal generator count of a free complex with given cohomology."""
    bound: int
    rank_bound: int
    per_degree: dict
    realizing: NovikovComplex
    verified: bool


def min_rank(H: GradedCohomology, period: Optional[int] = None) -> MinimalRank:
    """Smallest free cochain complex with cohomology H.

    Each free summand of H^k needs one generator in degree k; each torsion
    factor of H^k needs a pair in degrees k-1 and k joined by the factor.
    The realizing complex is built and its cohomology compared with H.

    Args:
        H: Target cohomology.
        period: Grading period (0 for Z-grading); defaults to H.period.
            Complexes assembled from a Novikov group are graded modulo
            NovikovGroupDesc.N, the positive generator of mu(Pi). For a
            Maslov-type grading with mu(Pi) = 2N·Z that generator is 2N,
            so a Z/2N-graded target is passed as period=2*N.

    Returns:
        MinimalRank with ``bound`` = sum over k of (k_f + t_k + t_(k+1)).
    """
    N = H.period if period is None else period
    target = H.to_cohomology().wrapped(N)
    per_degree: dict[int, int] = {}
    generators = []
    entries = {}
    free_total = 0
    torsion_total = 0
    truncation = None
    for k, grp in target.groups.items():
        below = _wrap(k - 1, N)
        per_degree[k] = per_degree.get(k, 0) + grp.free_rank + grp.torsion_count
        if grp.torsion_count:
            per_degree[below] = per_degree.get(below, 0) + grp.torsion_count
        free_total += grp.free_rank
        torsion_total += grp.torsion_count
        for i in range(grp.free_rank):
            generators.append((f"f{k}.{i}", k))
        for i, factor in enumerate(grp.torsion):
            a, b = f"t{k}.{i}a", f"t{k}.{i}b"
            generators.append((a, below))
            generators.append((b, k))
            entries[(b, a)] = factor
            truncation = _tmin(truncation, factor.truncation)

    realizing = NovikovComplex.from_entries(generators, entries, period=N, truncation=truncation)
    verified = nov_homology(realizing).same_as(target)
    if not verified:
        LOGGER.warning("realizing complex does not reproduce the requested cohomology")
    return MinimalRank(
        bound=sum(per_degree.values()),
        rank_bound=free_total + torsion_total,
        per_degree=dict(sorted(per_degree.items())),
        realizing=realizing,
        verified=verified,
    )
