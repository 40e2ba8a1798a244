"""Discrete Morse theory on small simplicial complexes.

Builds bundled triangulations, computes their integral homology with an
integer Smith normal form, pairs cells into an acyclic matching and
turns the critical cells into a flow category whose rigid counts are the
signed gradient-path counts. The flow category goes through the same
assembly and minimal-rank machinery as any other input, and the integer
homology serves as an independent check on the result.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Optional, Sequence

import networkx as nx

from core.data_loader import TRIANGULATIONS
from core.documents import document_for, serialize_document
from core.flowcat import (
    FlowCategoryDesc,
    FlowObject,
    MorphismRecord,
    arnold_check,
    check_d_squared,
)
from core.novikov import GradedCohomology, NovikovGroupDesc
from core.validation import ValidationResult

LOGGER = logging.getLogger(__name__)

Simplex = tuple[int, ...]

STRATEGIES = ("greedy_lex",)


def cell_name(simplex: Simplex) -> str:
    """Object id of a simplex: 's' followed by its vertices, e.g. s0_1_2."""
    return "s" + "_".join(str(v) for v in simplex)


def _order(simplex: Simplex) -> tuple:
    return (len(simplex), simplex)


# ---------------------------------------------------------------------------
# Simplicial complexes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimplicialComplex:
    """A finite simplicial complex given by its maximal simplices.

    Every vertex below ``vertex_count`` is a 0-cell, even when it lies in
    no listed simplex. Simplices are oriented by increasing vertex order.
    """
    vertex_count: int
    maximal: tuple[Simplex, ...]
    name: str = ""

    @classmethod
    def make(cls, vertex_count: int, simplices: Sequence[Sequence[int]], name: str = "") -> "SimplicialComplex":
        """Validate and normalize a list of simplices.

        Raises:
            ValueError: If a simplex is empty, repeats a vertex, uses a
                vertex outside 0..vertex_count-1 or is listed twice.
        """
        normalized = []
        for s in simplices:
            simplex = tuple(sorted(int(v) for v in s))
            if not simplex:
                raise ValueError("Simplices must have at least one vertex.")
            if len(set(simplex)) != len(simplex):
                raise ValueError(f"Simplex {list(s)} repeats a vertex.")
            if simplex[0] < 0 or simplex[-1] >= vertex_count:
                raise ValueError(
                    f"Simplex {list(s)} uses a vertex outside 0..{vertex_count - 1}. "
                    "Raise the vertex count or renumber the vertices."
                )
            if simplex in normalized:
                raise ValueError(f"Simplex {list(simplex)} is listed twice.")
            normalized.append(simplex)
        return cls(int(vertex_count), tuple(normalized), name)

    @cached_property
    def cells(self) -> tuple[Simplex, ...]:
        """All faces of the maximal simplices, by dimension then vertices."""
        found = {(v,) for v in range(self.vertex_count)}
        for s in self.maximal:
            for size in range(1, len(s) + 1):
                found.update(combinations(s, size))
        return tuple(sorted(found, key=_order))

    @property
    def dimension(self) -> int:
        return max((len(s) - 1 for s in self.cells), default=-1)

    def cells_of_dim(self, k: int) -> list[Simplex]:
        return [s for s in self.cells if len(s) == k + 1]

    def f_vector(self) -> list[int]:
        return [len(self.cells_of_dim(k)) for k in range(self.dimension + 1)]

    @staticmethod
    def faces(simplex: Simplex) -> list[tuple[Simplex, int]]:
        """Codimension-one faces with their incidence signs (-1)^i."""
        if len(simplex) == 1:
            return []
        return [
            (simplex[:i] + simplex[i + 1:], (-1) ** i)
            for i in range(len(simplex))
        ]

    @cached_property
    def _cofaces(self) -> dict:
        table: dict[Simplex, list[Simplex]] = {s: [] for s in self.cells}
        for s in self.cells:
            for face, _ in self.faces(s):
                table[face].append(s)
        return table

    def cofaces(self, simplex: Simplex) -> list[Simplex]:
        return list(self._cofaces[simplex])

    def incidence(self, higher: Simplex, lower: Simplex) -> int:
        for face, sign in self.faces(higher):
            if face == lower:
                return sign
        return 0

    def boundary_matrix(self, k: int) -> list[list[int]]:
        """Matrix of the boundary C_k -> C_(k-1); rows are (k-1)-cells."""
        rows = self.cells_of_dim(k - 1)
        cols = self.cells_of_dim(k)
        index = {s: i for i, s in enumerate(rows)}
        M = [[0] * len(cols) for _ in rows]
        for j, s in enumerate(cols):
            for face, sign in self.faces(s):
                M[index[face]][j] = sign
        return M


def build_simplicial(name: str) -> SimplicialComplex:
    """Load a bundled triangulation by name.

    Raises:
        ValueError: If the name is not bundled.
    """
    if name not in TRIANGULATIONS:
        raise ValueError(
            f"No bundled triangulation named '{name}'. Choose one of: "
            f"{', '.join(sorted(TRIANGULATIONS))}."
        )
    entry = TRIANGULATIONS[name]
    return SimplicialComplex.make(entry["vertices"], entry["simplices"], name)


def euler_characteristic(X: SimplicialComplex) -> int:
    return sum((-1) ** k * n for k, n in enumerate(X.f_vector()))


# ---------------------------------------------------------------------------
# Integer Smith normal form
# ---------------------------------------------------------------------------

def _divisibility_chain(values: list[int]) -> list[int]:
    d = sorted(values)
    for i in range(len(d)):
        for j in range(i + 1, len(d)):
            g = math.gcd(d[i], d[j])
            d[i], d[j] = g, d[i] * d[j] // g
    return d


def smith_diagonal(matrix: Sequence[Sequence[int]]) -> list[int]:
    """Nonzero invariant factors of an integer matrix, each dividing the next."""
    A = [list(map(int, row)) for row in matrix]
    m = len(A)
    n = len(A[0]) if m else 0
    diagonal = []
    t = 0
    while t < min(m, n):
        candidates = [
            (abs(A[i][j]), i, j) for i in range(t, m) for j in range(t, n) if A[i][j]
        ]
        if not candidates:
            break
        _, pi, pj = min(candidates)
        A[t], A[pi] = A[pi], A[t]
        for row in A:
            row[t], row[pj] = row[pj], row[t]
        while True:
            pivot = A[t][t]
            for i in range(t + 1, m):
                q = A[i][t] // pivot
                if q:
                    A[i] = [a - q * b for a, b in zip(A[i], A[t])]
            for j in range(t + 1, n):
                q = A[t][j] // pivot
                if q:
                    for row in A:
                        row[j] -= q * row[t]
            leftovers = [(abs(A[i][t]), i, t) for i in range(t + 1, m) if A[i][t]]
            leftovers += [(abs(A[t][j]), t, j) for j in range(t + 1, n) if A[t][j]]
            if not leftovers:
                break
            _, i, j = min(leftovers)
            if j == t:
                A[t], A[i] = A[i], A[t]
            else:
                for row in A:
                    row[t], row[j] = row[j], row[t]
        diagonal.append(abs(A[t][t]))
        t += 1
    return _divisibility_chain(diagonal)


def _matmul(A: list[list[int]], B: list[list[int]]) -> list[list[int]]:
    inner = len(B)
    width = len(B[0]) if B else 0
    return [[sum(A[i][k] * B[k][j] for k in range(inner)) for j in range(width)] for i in range(len(A))]


def homology_from_boundaries(sizes: dict[int, int], boundaries: dict[int, list[list[int]]]) -> GradedCohomology:
    """Integral homology of a chain complex given by boundary matrices.

    ``sizes[k]`` is the rank of C_k and ``boundaries[k]`` the matrix of
    C_k -> C_(k-1).
    """
    factors = {k: smith_diagonal(M) for k, M in boundaries.items()}
    data = {}
    for k, n in sorted(sizes.items()):
        rank_out = len(factors.get(k, []))
        incoming = factors.get(k + 1, [])
        torsion = [d for d in incoming if d > 1]
        data[k] = (n - rank_out - len(incoming), torsion)
    return GradedCohomology.from_integers(data, convention="homology")


def simplicial_homology(X: SimplicialComplex) -> GradedCohomology:
    """Integral homology of X from the Smith normal form of its boundary matrices."""
    sizes = {k: len(X.cells_of_dim(k)) for k in range(X.dimension + 1)}
    boundaries = {k: X.boundary_matrix(k) for k in range(1, X.dimension + 1)}
    return homology_from_boundaries(sizes, boundaries)


# ---------------------------------------------------------------------------
# Discrete gradients
# ---------------------------------------------------------------------------

def hasse_graph(X: SimplicialComplex, pairs: Sequence[tuple[Simplex, Simplex]] = ()) -> nx.DiGraph:
    """Hasse diagram pointing from each cell to its faces, matched pairs reversed."""
    graph = nx.DiGraph()
    graph.add_nodes_from(X.cells)
    for s in X.cells:
        for face, _ in X.faces(s):
            graph.add_edge(s, face)
    for low, high in pairs:
        graph.remove_edge(high, low)
        graph.add_edge(low, high)
    return graph


@dataclass(frozen=True)
class DiscreteGradient:
    """An acyclic matching of cells with codimension-one cofaces."""
    complex: SimplicialComplex
    pairs: tuple[tuple[Simplex, Simplex], ...]

    @cached_property
    def partner(self) -> dict:
        table = {}
        for low, high in self.pairs:
            table[low] = high
            table[high] = low
        return table

    @property
    def critical(self) -> list[Simplex]:
        return [s for s in self.complex.cells if s not in self.partner]

    def matched_up(self, cell: Simplex) -> Optional[Simplex]:
        """The coface paired with ``cell``, when the pair goes up."""
        other = self.partner.get(cell)
        return other if other is not None and len(other) > len(cell) else None

    def graph(self) -> nx.DiGraph:
        return hasse_graph(self.complex, self.pairs)

    def is_acyclic(self) -> bool:
        return nx.is_directed_acyclic_graph(self.graph())

    def check(self) -> list[ValidationResult]:
        """Matching and acyclicity findings; an empty list means valid."""
        findings = []
        seen: set = set()
        for low, high in self.pairs:
            if len(high) != len(low) + 1 or not set(low) < set(high):
                findings.append(ValidationResult(
                    False, "NotACofacet",
                    f"{list(high)} is not a codimension-one coface of {list(low)}.",
                    witness=(low, high),
                ))
            for cell in (low, high):
                if cell in seen:
                    findings.append(ValidationResult(
                        False, "DoubleMatch",
                        f"Cell {list(cell)} appears in more than one pair.",
                        witness=cell,
                    ))
                seen.add(cell)
        if not findings and not self.is_acyclic():
            cycle = nx.find_cycle(self.graph())
            findings.append(ValidationResult(
                False, "CyclicMatching",
                "The matching has a closed gradient path, so it is not a discrete gradient.",
                witness=[edge[0] for edge in cycle],
            ))
        return findings


class _Matcher:
    """Grows a matching pair by pair, keeping the modified Hasse diagram acyclic."""

    def __init__(self, X: SimplicialComplex):
        self.X = X
        self.graph = hasse_graph(X)
        self.matched: set = set()
        self.pairs: list[tuple[Simplex, Simplex]] = []

    def try_pair(self, low: Simplex, high: Simplex) -> bool:
        if low in self.matched or high in self.matched:
            return False
        self.graph.remove_edge(high, low)
        self.graph.add_edge(low, high)
        if nx.is_directed_acyclic_graph(self.graph):
            self.matched.update((low, high))
            self.pairs.append((low, high))
            return True
        self.graph.remove_edge(low, high)
        self.graph.add_edge(high, low)
        return False

    def vertex_trees(self) -> None:
        """Pair every vertex but one per component with the edge it was reached by."""
        seen: set = set()
        for root in self.X.cells_of_dim(0):
            if root in seen:
                continue
            seen.add(root)
            queue = deque([root])
            while queue:
                v = queue.popleft()
                for edge in self.X.cofaces(v):
                    (w,) = [u for u in edge if (u,) != v]
                    if (w,) in seen or edge in self.matched:
                        continue
                    if self.try_pair((w,), edge):
                        seen.add((w,))
                        queue.append((w,))

    def coface_trees(self, k: int) -> None:
        """Pair (k+1)-cells with the free k-face they were reached through."""
        seen: set = set()
        for root in self.X.cells_of_dim(k + 1):
            if root in seen or root in self.matched:
                continue
            seen.add(root)
            queue = deque([root])
            while queue:
                cell = queue.popleft()
                for face, _ in self.X.faces(cell):
                    if face in self.matched:
                        continue
                    for other in self.X.cofaces(face):
                        if other == cell or other in seen or other in self.matched:
                            continue
                        if self.try_pair(face, other):
                            seen.add(other)
                            queue.append(other)
                            break


def discrete_gradient(X: SimplicialComplex, strategy: str = "greedy_lex") -> DiscreteGradient:
    """Deterministic acyclic matching.

    ``greedy_lex`` visits cells breadth-first in lexicographic order: first
    a spanning tree of each component pairs vertices with edges, then for
    each k the (k+1)-cells are reached through their unmatched k-faces.
    Every pair is accepted only if the modified Hasse diagram stays
    acyclic. On closed connected surfaces this leaves one critical vertex,
    one critical triangle and 2 - chi critical edges.

    Raises:
        ValueError: If the strategy is unknown.
    """
    if strategy not in STRATEGIES:
        raise ValueError(
            f"Unknown matching strategy '{strategy}'. Choose one of: {', '.join(STRATEGIES)}."
        )
    matcher = _Matcher(X)
    if X.dimension >= 1:
        matcher.vertex_trees()
    for k in range(1, X.dimension):
        matcher.coface_trees(k)
    V = DiscreteGradient(X, tuple(matcher.pairs))
    LOGGER.debug(
        "matched %d pairs on %s, %d critical cells",
        len(V.pairs), X.name or "complex", len(V.critical),
    )
    return V


# ---------------------------------------------------------------------------
# Morse complexes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MorseComplexZ:
    """Critical cells and gradient-path counts between them.

    ``counts[(a, b)]`` is the signed number of gradient paths from the
    critical cell a down to the critical cell b one dimension lower;
    ``paths`` holds the unsigned numbers.
    """
    gradient: DiscreteGradient
    critical: tuple[Simplex, ...]
    counts: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)

    @property
    def complex(self) -> SimplicialComplex:
        return self.gradient.complex

    def critical_in(self, k: int) -> list[Simplex]:
        return [c for c in self.critical if len(c) == k + 1]

    def degrees(self) -> list[int]:
        return sorted({len(c) - 1 for c in self.critical})

    def matrix(self, k: int) -> list[list[int]]:
        """Morse boundary C_k -> C_(k-1); rows are critical (k-1)-cells."""
        return [
            [self.counts.get((a, b), 0) for a in self.critical_in(k)]
            for b in self.critical_in(k - 1)
        ]

    def d_squared_zero(self) -> bool:
        for k in self.degrees():
            outer, inner = self.matrix(k - 1), self.matrix(k)
            if outer and inner and any(any(row) for row in _matmul(outer, inner)):
                return False
        return True

    def homology(self) -> GradedCohomology:
        sizes = {k: len(self.critical_in(k)) for k in self.degrees()}
        boundaries = {k: self.matrix(k) for k in self.degrees() if k >= 1}
        return homology_from_boundaries(sizes, boundaries)


def _flow(X: SimplicialComplex, V: DiscreteGradient, start: Simplex, order: list[Simplex]) -> tuple[dict, dict]:
    """Push the boundary of a critical cell down gradient paths to critical cells."""
    signed: dict[Simplex, int] = {}
    unsigned: dict[Simplex, int] = {}
    for face, sign in X.faces(start):
        signed[face] = sign
        unsigned[face] = 1
    for cell in order:
        if len(cell) != len(start) - 1:
            continue
        up = V.matched_up(cell)
        if up is None:
            continue
        value = signed.pop(cell, 0)
        many = unsigned.pop(cell, 0)
        if not many:
            continue
        incidence = X.incidence(up, cell)
        for face, sign in X.faces(up):
            if face == cell:
                continue
            signed[face] = signed.get(face, 0) - value * incidence * sign
            unsigned[face] = unsigned.get(face, 0) + many
    critical = {c for c in V.critical if len(c) == len(start) - 1}
    return (
        {c: v for c, v in signed.items() if c in critical},
        {c: v for c, v in unsigned.items() if c in critical and v},
    )


def morse_complex(X: SimplicialComplex, V: Optional[DiscreteGradient] = None) -> MorseComplexZ:
    """Morse complex of an acyclic matching.

    Raises:
        ValueError: If the matching is not a valid discrete gradient.
    """
    V = V or discrete_gradient(X)
    problems = V.check()
    if problems:
        raise ValueError(problems[0].message)
    order = list(nx.lexicographical_topological_sort(V.graph(), key=_order))
    counts = {}
    paths = {}
    for a in V.critical:
        if len(a) == 1:
            continue
        signed, unsigned = _flow(X, V, a, order)
        for b, n in unsigned.items():
            paths[(a, b)] = n
            counts[(a, b)] = signed.get(b, 0)
    return MorseComplexZ(V, tuple(V.critical), counts, paths)


def unsigned_path_counts(M: MorseComplexZ) -> dict:
    """Number of gradient paths (ignoring signs) between critical cells."""
    return dict(M.paths)


def morse_numbers(M: MorseComplexZ) -> dict[int, int]:
    return {k: len(M.critical_in(k)) for k in M.degrees()}


@dataclass(frozen=True)
class MorseInequality:
    degree: int
    critical: int
    bound: int

    @property
    def holds(self) -> bool:
        return self.critical >= self.bound


def morse_inequalities(M: MorseComplexZ, H: Optional[GradedCohomology] = None) -> list[MorseInequality]:
    """m_k >= b_k + t_k + t_(k-1) in every degree of the homology H."""
    H = H or simplicial_homology(M.complex)
    numbers = morse_numbers(M)
    degrees = sorted(set(numbers) | set(H.degrees()))
    return [
        MorseInequality(
            k, numbers.get(k, 0),
            H.group(k).free_rank + H.group(k).torsion_count + H.group(k - 1).torsion_count,
        )
        for k in degrees
    ]


# ---------------------------------------------------------------------------
# Flow categories
# ---------------------------------------------------------------------------

def to_flow_category(M: MorseComplexZ, group: Optional[NovikovGroupDesc] = None) -> FlowCategoryDesc:
    """Morse flow category: objects are critical cells with mu = E = dimension.

    Pairs one dimension apart joined by gradient paths get a rigid record
    carrying the signed count. Pairs further apart joined through
    intermediate critical cells get a record whose label size is the
    dimension drop minus one.
    """
    group = group or NovikovGroupDesc()
    unit = tuple(0 for _ in range(group.rank))
    objects = tuple(
        FlowObject(cell_name(c), len(c) - 1, Fraction(len(c) - 1)) for c in M.critical
    )
    links = nx.DiGraph()
    links.add_nodes_from(M.critical)
    links.add_edges_from(M.paths)
    records = []
    for a in sorted(M.critical, key=_order):
        for b in sorted(nx.descendants(links, a), key=_order):
            drop = len(a) - len(b)
            count = M.counts.get((a, b), 0) if drop == 1 else None
            records.append(MorphismRecord(cell_name(a), cell_name(b), unit, drop - 1, count))
    return FlowCategoryDesc(group, objects, tuple(records))


@dataclass(frozen=True)
class ArnoldDemoReport:
    name: str
    critical: int
    min_rank: int
    holds: bool
    per_degree: dict
    cohomology: GradedCohomology
    oracle_agrees: bool
    d_squared_zero: bool

    @property
    def tight(self) -> bool:
        return self.critical == self.min_rank

    def to_dict(self) -> dict:
        return {
            "space": self.name,
            "critical": self.critical,
            "min_rank": self.min_rank,
            "holds": self.holds,
            "tight": self.tight,
            "per_degree": {str(k): v for k, v in sorted(self.per_degree.items())},
            "cohomology": self.cohomology.to_dict(),
            "oracle_agrees": self.oracle_agrees,
            "d_squared_zero": self.d_squared_zero,
        }


def arnold_demo(name: str, strategy: str = "greedy_lex") -> ArnoldDemoReport:
    """Run a bundled space through matching, flow category, assembly and minimal rank.

    Raises:
        ValueError: If the space is not bundled or the strategy is unknown.
    """
    X = build_simplicial(name)
    M = morse_complex(X, discrete_gradient(X, strategy))
    F = to_flow_category(M)
    ok, _ = check_d_squared(F)
    report = arnold_check(F)
    oracle = simplicial_homology(X).to_cohomology()
    agrees = report.cohomology.same_as(oracle)
    if not agrees:
        LOGGER.warning("flow-category cohomology of %s differs from the simplicial oracle", name)
    return ArnoldDemoReport(
        name=name,
        critical=report.generators,
        min_rank=report.minimal.bound,
        holds=report.holds,
        per_degree=report.per_degree,
        cohomology=report.cohomology,
        oracle_agrees=agrees,
        d_squared_zero=ok,
    )


def export_document(M: MorseComplexZ) -> str:
    """The Morse flow category as document text."""
    return serialize_document(document_for(to_flow_category(M)))
