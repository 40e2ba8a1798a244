"""Combinatorics of <k>-stratified spaces.

A stratum of a <k>-manifold is labelled by a subset S of {1..k}; S = [k]
is the open top stratum and coordinate j missing from S means the point
sits on the wall x_j = 0. Labels correspond to ordered partitions of
{1..k+1} through the sequence of block lengths h(S).

Spaces are modelled as finite cell complexes whose cells carry stratum
labels. Doubling, collaring and products act on this data directly.
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations, product as cartesian
from typing import Iterable, Optional, Sequence

from core.errors import InvariantViolation
from core.validation import ValidationResult, errors_in

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class StratumLabel:
    """A subset S of {1..k}."""
    k: int
    S: frozenset = frozenset()

    def __post_init__(self):
        if self.k < 0:
            raise InvariantViolation(f"Stratum labels need k >= 0, got k = {self.k}.")
        bad = sorted(s for s in self.S if not 1 <= s <= self.k)
        if bad:
            raise InvariantViolation(
                f"Label {sorted(self.S)} is not a subset of {{1..{self.k}}}: "
                f"{bad} out of range.",
                witness=bad,
            )

    @classmethod
    def make(cls, k: int, S: Iterable[int] = ()) -> "StratumLabel":
        return cls(int(k), frozenset(int(s) for s in S))

    @classmethod
    def full(cls, k: int) -> "StratumLabel":
        return cls(k, frozenset(range(1, k + 1)))

    @property
    def complement(self) -> list[int]:
        return [s for s in range(1, self.k + 1) if s not in self.S]

    @property
    def is_top(self) -> bool:
        return len(self.S) == self.k

    def sorted(self) -> list[int]:
        return sorted(self.S)

    def __str__(self) -> str:
        return "{" + ",".join(str(s) for s in sorted(self.S)) + "}"


@dataclass(frozen=True)
class LengthSeq:
    """Block lengths of an ordered partition of {1..k+1}."""
    h: tuple[int, ...]

    def __post_init__(self):
        if not self.h or any(x < 1 for x in self.h):
            raise InvariantViolation(
                f"Length sequence {list(self.h)} must be nonempty with positive entries."
            )

    @property
    def k(self) -> int:
        return sum(self.h) - 1


def h_of_S(label: StratumLabel) -> LengthSeq:
    """Block lengths of the partition attached to S.

    With {1..k} minus S = {s'_1 < ... < s'_j} the lengths are
    (s'_1, s'_2 - s'_1, ..., k + 1 - s'_j).
    """
    cuts = [0] + label.complement + [label.k + 1]
    return LengthSeq(tuple(b - a for a, b in zip(cuts, cuts[1:])))


def S_of_h(h: LengthSeq) -> StratumLabel:
    """Inverse of h_of_S."""
    k = h.k
    cuts = set()
    total = 0
    for x in h.h[:-1]:
        total += x
        cuts.add(total)
    return StratumLabel.make(k, (s for s in range(1, k + 1) if s not in cuts))


def partition_blocks(label: StratumLabel) -> list[tuple[int, ...]]:
    """Consecutive blocks of {1..k+1} with lengths h(S)."""
    blocks = []
    start = 1
    for length in h_of_S(label).h:
        blocks.append(tuple(range(start, start + length)))
        start += length
    return blocks


def refines(finer: StratumLabel, coarser: StratumLabel) -> bool:
    """True when every block of P(finer) lies inside a block of P(coarser)."""
    if finer.k != coarser.k:
        return False
    outer = [set(b) for b in partition_blocks(coarser)]
    return all(any(set(b) <= o for o in outer) for b in partition_blocks(finer))


def compose_labels(parts: Sequence[StratumLabel]) -> StratumLabel:
    """S(S_1, ..., S_r) = S_1 ∪ {d_1} ∪ (S_2 + d_1) ∪ {d_1 + d_2} ∪ ...

    Part i is a label over [d_i - 1]; the result is over [d - 1] with
    d = sum of the d_i.
    """
    if not parts:
        raise InvariantViolation("compose_labels needs at least one part.")
    result: set[int] = set()
    offset = 0
    for idx, part in enumerate(parts):
        result.update(s + offset for s in part.S)
        offset += part.k + 1
        if idx < len(parts) - 1:
            result.add(offset)
    return StratumLabel.make(offset - 1, result)


def restriction_poset_iso(label: StratumLabel) -> dict:
    """The poset isomorphism {T ⊇ S} -> 2^[k - |S|], r_S(S ∪ {s'_j}) = {j}."""
    comp = label.complement
    result = {}
    for size in range(len(comp) + 1):
        for chosen in combinations(range(1, len(comp) + 1), size):
            T = label.S | frozenset(comp[j - 1] for j in chosen)
            result[StratumLabel(label.k, T)] = StratumLabel.make(len(comp), chosen)
    return result


# ---------------------------------------------------------------------------
# Stratified cell complexes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    id: str
    dim: int
    label: StratumLabel
    tag: str = ""


@dataclass(frozen=True)
class CombStratSpace:
    """Finite cell complex with <k>-stratum labels on its cells.

    ``faces`` lists (cell id, face id, incidence) triples.
    """
    k: int
    cells: tuple[Cell, ...]
    faces: tuple[tuple[str, str, int], ...] = ()

    def cell(self, cell_id: str) -> Cell:
        for c in self.cells:
            if c.id == cell_id:
                return c
        raise KeyError(cell_id)

    def faces_of(self, cell_id: str) -> list[tuple[str, int]]:
        return [(f, inc) for c, f, inc in self.faces if c == cell_id]

    def check_invariants(self) -> list[ValidationResult]:
        """Report every violated structural invariant."""
        findings = []
        by_id = {}
        for c in self.cells:
            if c.id in by_id:
                findings.append(ValidationResult(
                    False, "DuplicateCell",
                    f"Cell id '{c.id}' appears more than once.", witness=c.id,
                ))
            by_id[c.id] = c
            if c.label.k != self.k:
                findings.append(ValidationResult(
                    False, "LabelArity",
                    f"Cell '{c.id}' is labelled over k = {c.label.k} but the "
                    f"space is a <{self.k}>-space.", witness=c.id,
                ))
            if c.dim < 0:
                findings.append(ValidationResult(
                    False, "NegativeDimension", f"Cell '{c.id}' has dimension {c.dim}.",
                    witness=c.id,
                ))
        for cid, fid, _ in self.faces:
            if cid not in by_id or fid not in by_id:
                findings.append(ValidationResult(
                    False, "UnknownCell",
                    f"Face relation ({cid}, {fid}) mentions an unknown cell.",
                    witness=[cid, fid],
                ))
                continue
            cell, face = by_id[cid], by_id[fid]
            if not face.label.S <= cell.label.S:
                findings.append(ValidationResult(
                    False, "LabelNotClosed",
                    f"Face '{fid}' has label {face.label} which is not contained "
                    f"in the label {cell.label} of '{cid}'. A face lies in the "
                    "closure of its cell's stratum, so its label must be smaller.",
                    witness=[cid, fid],
                ))
            if face.dim >= cell.dim:
                findings.append(ValidationResult(
                    False, "FaceDimension",
                    f"Face '{fid}' (dim {face.dim}) is not of lower dimension than "
                    f"'{cid}' (dim {cell.dim}).", witness=[cid, fid],
                ))
        if not any(c.label.is_top for c in self.cells):
            findings.append(ValidationResult(
                False, "EmptyTopStratum",
                f"No cell carries the top label {{1..{self.k}}}; the open stratum "
                "of a <k>-manifold is nonempty.",
            ))
        return findings

    def validate(self) -> None:
        """Raise InvariantViolation on the first structural problem."""
        problems = errors_in(self.check_invariants())
        if problems:
            raise InvariantViolation(problems[0].message, witness=problems[0].witness)


def euler_char(X: CombStratSpace) -> int:
    """Sum over cells of (-1)^dim."""
    return sum(-1 if c.dim % 2 else 1 for c in X.cells)


def stratum_counts(X: CombStratSpace, tag: Optional[str] = None) -> dict[tuple, int]:
    """Number of cells per label, optionally restricted to one tag."""
    counts: dict[tuple, int] = {}
    for c in X.cells:
        if tag is not None and c.tag != tag:
            continue
        key = tuple(c.label.sorted())
        counts[key] = counts.get(key, 0) + 1
    return dict(sorted(counts.items()))


def origin_counts(collared: CombStratSpace) -> dict[tuple, int]:
    """Per-label counts of the collar cells sitting at t = 0."""
    return stratum_counts(collared, tag="t=0")


# ---------------------------------------------------------------------------
# Bundled spaces
# ---------------------------------------------------------------------------

def point() -> CombStratSpace:
    return CombStratSpace(0, (Cell("p", 0, StratumLabel(0)),))


def interval() -> CombStratSpace:
    """[0,1] as a <1>-space: the open edge is top, the endpoints are walls."""
    return CombStratSpace(
        1,
        (
            Cell("e", 1, StratumLabel.full(1)),
            Cell("v0", 0, StratumLabel(1)),
            Cell("v1", 0, StratumLabel(1)),
        ),
        (("e", "v1", 1), ("e", "v0", -1)),
    )


def square() -> CombStratSpace:
    return product(interval(), interval())


BUNDLED = {"point": point, "interval": interval, "square": square}


def bundled_space(name: str) -> CombStratSpace:
    if name not in BUNDLED:
        raise ValueError(
            f"Unknown bundled space '{name}'. Choose one of: {', '.join(BUNDLED)}."
        )
    return BUNDLED[name]()


# ---------------------------------------------------------------------------
# Constructions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupDecoration:
    """(Z/2)^k acting on cells; elements are 0/1 tuples of length k."""
    k: int
    action: dict = field(default_factory=dict)

    def elements(self) -> list[tuple[int, ...]]:
        return list(cartesian((0, 1), repeat=self.k))

    def act(self, g: Sequence[int], cell_id: str) -> str:
        return self.action[(tuple(g), cell_id)]

    def check_action(self, X: CombStratSpace) -> list[ValidationResult]:
        """Identity acts trivially, composition is XOR, dimensions are preserved."""
        findings = []
        ident = tuple(0 for _ in range(self.k))
        dims = {c.id: c.dim for c in X.cells}
        for c in X.cells:
            if self.act(ident, c.id) != c.id:
                findings.append(ValidationResult(
                    False, "IdentityMoves", f"The identity moves cell '{c.id}'.", witness=c.id,
                ))
            for g in self.elements():
                image = self.act(g, c.id)
                if dims[image] != c.dim:
                    findings.append(ValidationResult(
                        False, "DimensionChanged",
                        f"{g} sends '{c.id}' to a cell of another dimension.",
                        witness=[list(g), c.id],
                    ))
                for h in self.elements():
                    gh = tuple(a ^ b for a, b in zip(g, h))
                    if self.act(g, self.act(h, c.id)) != self.act(gh, c.id):
                        findings.append(ValidationResult(
                            False, "NotAnAction",
                            f"Acting by {h} then {g} on '{c.id}' differs from acting by {gh}.",
                            witness=[list(g), list(h), c.id],
                        ))
        return findings


def _copy_id(cell: Cell, bits: dict[int, int], k: int) -> str:
    word = "".join(str(bits[j]) if j in cell.label.S else "*" for j in range(1, k + 1))
    return f"{cell.id}@{word}"


def double(X: CombStratSpace) -> tuple[CombStratSpace, GroupDecoration]:
    """Glue 2^k reflected copies of X along its walls.

    A cell c with label S(c) has one copy per coset of the stabilizer
    generated by the coordinates outside S(c), so 2^|S(c)| copies indexed
    by the restriction of a group element to S(c).

    Raises:
        InvariantViolation: If X is malformed.
    """
    X.validate()
    k = X.k
    cells = []
    copies: dict[str, list[dict[int, int]]] = {}
    for c in X.cells:
        coords = c.label.sorted()
        copies[c.id] = []
        for values in cartesian((0, 1), repeat=len(coords)):
            bits = dict(zip(coords, values))
            copies[c.id].append(bits)
            cells.append(Cell(_copy_id(c, bits, k), c.dim, StratumLabel(0), tag=c.id))
    by_id = {c.id: c for c in X.cells}
    faces = []
    for cid, fid, inc in X.faces:
        face = by_id[fid]
        for bits in copies[cid]:
            restricted = {j: bits[j] for j in face.label.S}
            faces.append((_copy_id(by_id[cid], bits, k), _copy_id(face, restricted, k), inc))
    action = {}
    for c in X.cells:
        for bits in copies[c.id]:
            source = _copy_id(c, bits, k)
            for g in cartesian((0, 1), repeat=k):
                moved = {j: bits[j] ^ g[j - 1] for j in bits}
                action[(g, source)] = _copy_id(c, moved, k)
    doubled = CombStratSpace(0, tuple(cells), tuple(faces))
    LOGGER.debug("doubled %d cells into %d", len(X.cells), len(cells))
    return doubled, GroupDecoration(k, action)


def fixed_cells(doubled: CombStratSpace, decoration: GroupDecoration, j: int) -> set[str]:
    """Cells fixed by the reflection in coordinate j."""
    g = tuple(1 if i == j else 0 for i in range(1, decoration.k + 1))
    return {c.id for c in doubled.cells if decoration.act(g, c.id) == c.id}


def collar(X: CombStratSpace) -> CombStratSpace:
    """Attach cube collars [0,1]^([k] minus R) to the closure of every stratum R.

    Cells are triples (c, R, F) with S(c) ⊆ R and F ⊆ [k] minus R the set
    of free cube coordinates; the remaining cube coordinates sit at 0, and
    a coordinate j at 1 is glued into the piece for R ∪ {j}. Cells with
    R = S(c) and F empty form the copy of X at t = 0.

    Raises:
        InvariantViolation: If X is malformed.
    """
    X.validate()
    k = X.k
    everything = frozenset(range(1, k + 1))

    def cid(c: Cell, R: frozenset, F: frozenset) -> str:
        r = ",".join(str(x) for x in sorted(R))
        f = ",".join(str(x) for x in sorted(F))
        return f"{c.id}[{r}|{f}]"

    cells = []
    faces = []
    for c in X.cells:
        outside = sorted(everything - c.label.S)
        for rsize in range(len(outside) + 1):
            for extra in combinations(outside, rsize):
                R = c.label.S | frozenset(extra)
                rest = sorted(everything - R)
                for fsize in range(len(rest) + 1):
                    for free in combinations(rest, fsize):
                        F = frozenset(free)
                        tag = "t=0" if R == c.label.S and not F else ""
                        me = cid(c, R, F)
                        cells.append(Cell(me, c.dim + len(F), StratumLabel(k, R | F), tag))
                        for face_id, inc in X.faces_of(c.id):
                            faces.append((me, cid(X.cell(face_id), R, F), inc))
                        for p, j in enumerate(sorted(F)):
                            sign = -1 if (c.dim + p) % 2 else 1
                            faces.append((me, cid(c, R, F - {j}), -sign))
                            faces.append((me, cid(c, R | {j}, F - {j}), sign))
    collared = CombStratSpace(k, tuple(cells), tuple(faces))
    LOGGER.debug("collared %d cells into %d", len(X.cells), len(cells))
    return collared


def product(X: CombStratSpace, Y: CombStratSpace) -> CombStratSpace:
    """Cartesian product; labels S_X ⊔ (S_Y + k_X), dimensions add."""
    k = X.k + Y.k
    cells = []
    for a in X.cells:
        for b in Y.cells:
            S = a.label.S | frozenset(s + X.k for s in b.label.S)
            tag = f"{a.tag}x{b.tag}" if a.tag or b.tag else ""
            cells.append(Cell(f"{a.id}x{b.id}", a.dim + b.dim, StratumLabel(k, S), tag))
    faces = []
    for a in X.cells:
        for b in Y.cells:
            me = f"{a.id}x{b.id}"
            for fa, inc in X.faces_of(a.id):
                faces.append((me, f"{fa}x{b.id}", inc))
            sign = -1 if a.dim % 2 else 1
            for fb, inc in Y.faces_of(b.id):
                faces.append((me, f"{a.id}x{fb}", sign * inc))
    return CombStratSpace(k, tuple(cells), tuple(faces))
