"""Flow categories and the Novikov cochain complexes they assemble.

A flow category is given by orbit representatives of its objects and by
morphism records (x, g, y) standing for the morphism object from x to
g·y. Rigid records (label size 0) carry signed counts; these assemble
the differential d y = sum count(x, g, y) T^(-E(g)) x.

Besides assembly the module extracts cone and square block structure,
descends E-positive complexes to Lambda_0, applies the bifurcation moves
of the invariance argument and compares generator counts with the
minimal rank of the resulting cohomology.
"""

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Union

from core.errors import (
    DegreeMismatch,
    DSquaredNonzero,
    MissingCount,
    NegativeValuationEntry,
    NoHomotopyAtTruncation,
    NotAUnit,
    SplitInvalid,
    TruncationTooCoarse,
    ValuationNotPositive,
)
from core.novikov import (
    GradedCohomology,
    MinimalRank,
    NovikovComplex,
    NovikovElement,
    NovikovGroupDesc,
    NovikovMatrix,
    Truncation,
    _tmin,
    _wrap,
    agrees_with,
    d_squared_witness,
    identity,
    is_unit,
    mat_add,
    matmul,
    min_rank,
    monomial,
    nov_add,
    nov_homology,
    nov_invert,
    nov_linear_solve,
    nov_neg,
    nov_product,
    nov_shift,
    nov_sub,
    one,
    to_fraction,
    truncate,
    zero,
)
from core.validation import ValidationResult

LOGGER = logging.getLogger(__name__)

# label size of the identity morphism (the unit object)
UNIT = -1


@dataclass(frozen=True)
class FlowObject:
    """Orbit representative with grading mu and energy E."""
    id: str
    mu: int
    E: Fraction = Fraction(0)

    @classmethod
    def make(cls, id: str, mu: int, E: Union[int, str, Fraction] = 0) -> "FlowObject":
        return cls(str(id), int(mu), to_fraction(E))


@dataclass(frozen=True)
class MorphismRecord:
    """The morphism object from ``source`` to ``g``·``target``.

    ``label_size`` is None for an empty morphism object and UNIT for the
    identity of an object; ``count`` is the signed rigid count, meaningful
    when ``label_size`` is 0.
    """
    source: str
    target: str
    g: tuple[int, ...] = ()
    label_size: Optional[int] = 0
    count: Optional[int] = None

    @property
    def is_empty(self) -> bool:
        return self.label_size is None

    @property
    def is_identity(self) -> bool:
        return self.source == self.target and not any(self.g)

    @property
    def is_rigid(self) -> bool:
        return self.label_size == 0


@dataclass(frozen=True)
class FlowCategoryDesc:
    group: NovikovGroupDesc = field(default_factory=NovikovGroupDesc)
    objects: tuple[FlowObject, ...] = ()
    morphisms: tuple[MorphismRecord, ...] = ()
    proper: bool = True
    E_proper: bool = True
    E_positive: bool = True
    gapped: bool = True

    def object(self, oid: str) -> FlowObject:
        for x in self.objects:
            if x.id == oid:
                return x
        raise KeyError(oid)

    @property
    def object_ids(self) -> list[str]:
        return [x.id for x in self.objects]

    def _g(self, record: MorphismRecord) -> tuple[int, ...]:
        return record.g if record.g else tuple(0 for _ in range(self.group.rank))

    def record_energy(self, record: MorphismRecord) -> Fraction:
        """E(source) - E(g·target)."""
        return (
            self.object(record.source).E
            - self.object(record.target).E
            - self.group.energy(self._g(record))
        )

    def expected_label_size(self, record: MorphismRecord) -> int:
        """mu(source) - mu(g·target) - 1."""
        return (
            self.object(record.source).mu
            - self.object(record.target).mu
            - self.group.grading(self._g(record))
            - 1
        )

    def nonempty_records(self) -> list[MorphismRecord]:
        return [r for r in self.morphisms if not r.is_empty and not r.is_identity]


def energies_of(F: FlowCategoryDesc) -> dict[str, Fraction]:
    return {x.id: x.E for x in F.objects}


# ---------------------------------------------------------------------------
# Label sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LabelComposition:
    """Label set of a composite: [r1] and [r2] shifted into [r1 + r2 + 1]."""
    target_size: int
    injection: dict
    missing: int

    @property
    def image(self) -> set[int]:
        return set(self.injection.values())


def compose_label_sets(r1: int, r2: int) -> LabelComposition:
    """Embed the label sets of x->y and y->z into the label set of x->z.

    The first set maps identically, the second is shifted by r1 + 1; the
    label r1 + 1 is left out and records the breaking at y.
    """
    if r1 < 0 or r2 < 0:
        raise ValueError(f"Label sizes must be natural numbers, got ({r1}, {r2}).")
    injection = {("first", i): i for i in range(1, r1 + 1)}
    injection.update({("second", j): j + r1 + 1 for j in range(1, r2 + 1)})
    return LabelComposition(r1 + r2 + 1, injection, r1 + 1)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_category(F: FlowCategoryDesc) -> list[ValidationResult]:
    """Check a flow-category description; returns every finding.

    Findings with severity "error" are violations. Unset finiteness flags
    are reported as warnings because assembly only sees the listed records.
    """
    findings = []
    ids = F.object_ids
    seen = set()
    for oid in ids:
        if oid in seen:
            findings.append(ValidationResult(
                False, "DuplicateObject",
                f"Object '{oid}' is listed twice. Objects are orbit "
                "representatives, one per orbit of the free group action.",
                witness=oid,
            ))
        seen.add(oid)

    records: dict[tuple, MorphismRecord] = {}
    identities: dict[str, int] = {}
    for idx, rec in enumerate(F.morphisms):
        where = f"record {idx} ({rec.source} -> {rec.target}, g={list(rec.g)})"
        if rec.source not in seen or rec.target not in seen:
            findings.append(ValidationResult(
                False, "UnknownObject", f"{where} mentions an unknown object.", witness=idx,
            ))
            continue
        if rec.g and len(rec.g) != F.group.rank:
            findings.append(ValidationResult(
                False, "GroupElementLength",
                f"{where} has a group element with {len(rec.g)} coordinates but "
                f"the Novikov group has rank {F.group.rank}.",
                witness=idx,
            ))
            continue

        key = (rec.source, F._g(rec), rec.target)
        if key in records:
            previous = records[key]
            if (previous.label_size, previous.count) != (rec.label_size, rec.count):
                findings.append(ValidationResult(
                    False, "NotEquivariant",
                    f"{where} repeats the orbit of an earlier record with different "
                    "data. Counts must depend only on the orbit of the pair.",
                    witness=idx,
                ))
            else:
                findings.append(ValidationResult(
                    False, "DuplicateRecord", f"{where} is listed twice.",
                    severity="warning", witness=idx,
                ))
        records[key] = rec

        if rec.is_identity:
            identities[rec.source] = identities.get(rec.source, 0) + 1
            if rec.label_size != UNIT:
                findings.append(ValidationResult(
                    False, "IdentityNotUnit",
                    f"{where} is a morphism from an object to itself with trivial "
                    f"group element; it must be the unit object (label size {UNIT}), "
                    f"got {rec.label_size}.",
                    witness=idx,
                ))
            elif identities[rec.source] > 1:
                findings.append(ValidationResult(
                    False, "DuplicateIdentity",
                    f"Object '{rec.source}' has more than one identity record.",
                    witness=idx,
                ))
            continue
        if rec.label_size == UNIT:
            findings.append(ValidationResult(
                False, "UnitOffDiagonal",
                f"{where} uses the unit label but is not an identity morphism.",
                witness=idx,
            ))
            continue
        if rec.is_empty:
            continue

        expected = F.expected_label_size(rec)
        if rec.label_size != expected:
            findings.append(ValidationResult(
                False, "LabelSizeMismatch",
                f"{where} has label size {rec.label_size}, but the gradings give "
                f"mu(source) - mu(g·target) - 1 = {expected}.",
                witness=idx,
            ))
        if rec.is_rigid and rec.count is None:
            findings.append(ValidationResult(
                False, "MissingCount",
                f"{where} is rigid (label size 0) but carries no signed count.",
                witness=idx,
            ))
        if F.E_positive and F.record_energy(rec) <= 0:
            findings.append(ValidationResult(
                False, "NotEPositive",
                f"{where} has energy {F.record_energy(rec)}; an E-positive "
                "category needs every nonempty morphism to strictly decrease energy.",
                witness=idx,
            ))

    for flag in ("proper", "E_proper", "gapped"):
        if not getattr(F, flag):
            findings.append(ValidationResult(
                False, "FlagUnset",
                f"The category is not declared {flag}; assembly only uses the "
                "listed records.",
                severity="warning",
            ))
    return findings


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def _generators(F: FlowCategoryDesc) -> list[tuple[str, int]]:
    period = F.group.N
    return [(x.id, _wrap(x.mu, period)) for x in F.objects]


def _rigid_entries(F: FlowCategoryDesc, truncation: Truncation) -> dict:
    entries: dict[tuple[str, str], NovikovElement] = {}
    for rec in F.nonempty_records():
        if not rec.is_rigid:
            continue
        if rec.count is None:
            raise MissingCount(
                f"The rigid record {rec.source} -> {rec.target} (g={list(rec.g)}) "
                "has no signed count, so the differential cannot be assembled.",
                witness=(rec.source, rec.target),
            )
        weight = monomial(rec.count, -F.group.energy(F._g(rec)), truncation)
        key = (rec.source, rec.target)
        entries[key] = nov_add(entries.get(key, zero(truncation)), weight)
    return {k: v for k, v in entries.items() if not v.is_zero}


def _raw_complex(F: FlowCategoryDesc, truncation: Truncation) -> NovikovComplex:
    return NovikovComplex.from_entries(
        _generators(F),
        _rigid_entries(F, truncation),
        period=F.group.N,
        truncation=truncation,
        group=F.group,
    )


def assemble_complex(
    F: FlowCategoryDesc,
    truncation: Union[None, int, str, Fraction] = None,
) -> NovikovComplex:
    """Assemble the Novikov cochain complex of a flow category.

    Args:
        F: Flow-category description.
        truncation: Work modulo T^truncation (None for exact).

    Raises:
        MissingCount: If a rigid record has no count.
        DSquaredNonzero: If d*d is nonzero; ``witness`` is the offending
            (target, source) pair.
    """
    tau = None if truncation is None else to_fraction(truncation)
    C = _raw_complex(F, tau)
    witness = d_squared_witness(C)
    if witness is not None:
        raise DSquaredNonzero(
            f"The assembled differential does not square to zero: the sum over "
            f"intermediate objects for the pair {witness} is nonzero. The signed "
            "counts are inconsistent with the boundary of the 1-dimensional "
            "morphism spaces.",
            witness=witness,
        )
    LOGGER.debug("assembled complex with %d generators", len(C.generators))
    return C


def check_d_squared(F: FlowCategoryDesc) -> tuple[bool, list[tuple[str, str]]]:
    """Exact d*d = 0 check with every failing (target, source) pair."""
    C = _raw_complex(F, None)
    witnesses = []
    for k in C.degrees():
        composite = matmul(C.differential(k + 1), C.differential(k))
        targets = C.generators_in(k + 2)
        sources = C.generators_in(k)
        for i, row in enumerate(composite.entries):
            for j, x in enumerate(row):
                if not x.is_zero:
                    witnesses.append((targets[i], sources[j]))
    return not witnesses, witnesses


# ---------------------------------------------------------------------------
# Cones and squares
# ---------------------------------------------------------------------------

def _block(sparse: dict, rows: Sequence[str], cols: Sequence[str], truncation: Truncation) -> NovikovMatrix:
    return NovikovMatrix(len(rows), len(cols), tuple(
        tuple(sparse.get((r, c), zero(truncation)) for c in cols) for r in rows
    ))


def chain_homotopy_identity(
    d_target: NovikovMatrix,
    H: NovikovMatrix,
    d_source: NovikovMatrix,
) -> NovikovMatrix:
    """d∘H + H∘d for H from the source complex to the target complex."""
    return mat_add(matmul(d_target, H), matmul(H, d_source))


def _check_partition(F: FlowCategoryDesc, parts: Sequence[Sequence[str]]) -> None:
    ids = F.object_ids
    listed = [oid for part in parts for oid in part]
    unknown = sorted(set(listed) - set(ids))
    if unknown:
        raise SplitInvalid(f"The split mentions unknown objects {unknown}.", witness=unknown)
    if len(listed) != len(set(listed)) or set(listed) != set(ids):
        raise SplitInvalid(
            "The split must place every object in exactly one part.",
            witness=sorted(set(ids) - set(listed)),
        )


@dataclass(frozen=True)
class ConeDecomposition:
    """The complex of F written as the cone of f: C2 -> C1.

    ``d2`` lives on the C2 objects with degrees raised by one and
    differential -D22, so that d(a, b) = (-d2 a, f a + d1 b).
    """
    d1: NovikovComplex
    d2: NovikovComplex
    f: NovikovMatrix
    c1: tuple[str, ...]
    c2: tuple[str, ...]
    chain_map: bool
    reassembles: bool
    complex: NovikovComplex

    def reassembled(self) -> NovikovMatrix:
        """[[D1, f], [0, D22]] on the C1 generators followed by the C2 generators."""
        D1 = self.d1.full_matrix()
        D2 = self.d2.full_matrix()
        tau = _tmin(self.d1.truncation, self.d2.truncation)
        rows = [D1.entries[i] + self.f.entries[i] for i in range(D1.rows)]
        rows += [
            tuple(zero(tau) for _ in range(D1.cols)) + tuple(nov_neg(x) for x in row)
            for row in D2.entries
        ]
        size = D1.rows + D2.rows
        return NovikovMatrix(size, size, tuple(rows))

    def matches_complex(self) -> bool:
        """Whether the blocks rebuild the differential they were split from."""
        order = list(self.c1) + list(self.c2)
        original = _block(self.complex.entries(), order, order, self.complex.truncation)
        return agrees_with(self.reassembled(), original)


def cone_decompose(
    F: FlowCategoryDesc,
    c1: Sequence[str],
    c2: Optional[Sequence[str]] = None,
    truncation: Union[None, int, str, Fraction] = None,
) -> ConeDecomposition:
    """Split the objects into C1 and C2 and read off the cone structure.

    Args:
        F: Flow category.
        c1: Objects of the first part.
        c2: Objects of the second part (defaults to the rest).
        truncation: Working truncation.

    Raises:
        SplitInvalid: If the parts do not partition the objects or some
            nonempty morphism runs from a C2 object to a C1 object.
    """
    c1 = tuple(c1)
    c2 = tuple(c2) if c2 is not None else tuple(x for x in F.object_ids if x not in c1)
    _check_partition(F, [c1, c2])
    for rec in F.nonempty_records():
        if rec.source in c2 and rec.target in c1:
            raise SplitInvalid(
                f"There is a nonempty morphism from '{rec.source}' (in C2) to "
                f"'{rec.target}' (in C1); the cone needs all morphisms between "
                "the parts to run from C1 to C2.",
                witness=(rec.source, rec.target),
            )
    C = assemble_complex(F, truncation)
    tau = C.truncation
    sparse = C.entries()
    period = C.period
    deg = dict(C.generators)

    d1 = NovikovComplex.from_entries(
        [(x, deg[x]) for x in c1],
        {(r, c): v for (r, c), v in sparse.items() if r in c1 and c in c1},
        period, tau, group=C.group,
    )
    d2 = NovikovComplex.from_entries(
        [(x, deg[x] + 1) for x in c2],
        {(r, c): nov_neg(v) for (r, c), v in sparse.items() if r in c2 and c in c2},
        period, tau, group=C.group,
    )
    f = _block(sparse, c1, c2, tau)

    D1 = _block(d1.entries(), c1, c1, tau)
    D2 = _block(d2.entries(), c2, c2, tau)
    chain_map = agrees_with(matmul(f, D2), matmul(D1, f))

    cone = ConeDecomposition(d1, d2, f, c1, c2, chain_map, False, C)
    cone = replace(cone, reassembles=cone.matches_complex())
    if not (chain_map and cone.reassembles):
        LOGGER.warning("cone block check failed: chain_map=%s reassembles=%s", chain_map, cone.reassembles)
    return cone


# (source part, target part) pairs a square may contain
SQUARE_ORDER = {(1, 1), (2, 2), (3, 3), (4, 4), (1, 2), (1, 3), (1, 4), (2, 4), (3, 4)}


@dataclass(frozen=True)
class SquareDecomposition:
    """Edge maps a: C4->C2, b: C4->C3, f: C2->C1, g: C3->C1 and a homotopy.

    ``H`` is minus the C4->C1 block of the differential and satisfies
    f∘a + g∘b = d∘H + H∘d; ``solved_H`` is the solution found by the
    linear solver, which need not equal ``H``.
    """
    a: NovikovMatrix
    b: NovikovMatrix
    f: NovikovMatrix
    g: NovikovMatrix
    H: NovikovMatrix
    solved_H: NovikovMatrix
    verified: bool
    parts: dict


def _solve_homotopy(
    D1: NovikovMatrix,
    D4: NovikovMatrix,
    R: NovikovMatrix,
    rows: Sequence[str],
    cols: Sequence[str],
    deg: Mapping[str, int],
    period: int,
    truncation: Truncation,
) -> Optional[NovikovMatrix]:
    unknowns = [
        (p, q) for p in range(len(rows)) for q in range(len(cols))
        if deg[rows[p]] == _wrap(deg[cols[q]] + 1, period)
    ]
    equations = [(i, j) for i in range(len(rows)) for j in range(len(cols))]
    rhs = [R.entries[i][j] for i, j in equations]
    if not unknowns:
        return zeros_like(R, truncation) if all(x.is_zero for x in rhs) else None
    data = []
    for i, j in equations:
        row = []
        for p, q in unknowns:
            coeff = zero(truncation)
            if q == j:
                coeff = nov_add(coeff, D1.entries[i][p])
            if p == i:
                coeff = nov_add(coeff, D4.entries[q][j])
            row.append(coeff)
        data.append(tuple(row))
    solution = nov_linear_solve(NovikovMatrix(len(data), len(unknowns), tuple(data)), rhs)
    if solution is None:
        return None
    values = dict(zip(unknowns, solution))
    return NovikovMatrix(len(rows), len(cols), tuple(
        tuple(values.get((p, q), zero(truncation)) for q in range(len(cols)))
        for p in range(len(rows))
    ))


def zeros_like(M: NovikovMatrix, truncation: Truncation) -> NovikovMatrix:
    return NovikovMatrix(M.rows, M.cols, tuple(
        tuple(zero(truncation) for _ in range(M.cols)) for _ in range(M.rows)
    ))


def square_decompose(
    F: FlowCategoryDesc,
    parts: Mapping[str, int],
    truncation: Union[None, int, str, Fraction] = None,
) -> SquareDecomposition:
    """Read a homotopy-commutative square off a four-part flow category.

    Args:
        F: Flow category.
        parts: Object id -> part number in 1..4.
        truncation: Working truncation.

    Raises:
        SplitInvalid: If the parts are malformed or a morphism runs
            against the allowed order.
        DSquaredNonzero: If the category does not assemble to a complex.
        NoHomotopyAtTruncation: If the homotopy equation has no solution
            at the working truncation.
    """
    bad = sorted(oid for oid, p in parts.items() if p not in (1, 2, 3, 4))
    if bad:
        raise SplitInvalid(f"Objects {bad} are not assigned to a part in 1..4.", witness=bad)
    groups = {p: tuple(x for x in F.object_ids if parts.get(x) == p) for p in (1, 2, 3, 4)}
    _check_partition(F, list(groups.values()))
    for rec in F.nonempty_records():
        pair = (parts[rec.source], parts[rec.target])
        if pair not in SQUARE_ORDER:
            raise SplitInvalid(
                f"The morphism {rec.source} -> {rec.target} runs from part {pair[0]} "
                f"to part {pair[1]}, which the square does not allow.",
                witness=(rec.source, rec.target),
            )
    C = assemble_complex(F, truncation)
    tau = C.truncation
    sparse = C.entries()
    c1, c2, c3, c4 = (groups[p] for p in (1, 2, 3, 4))

    a = _block(sparse, c2, c4, tau)
    b = _block(sparse, c3, c4, tau)
    f = _block(sparse, c1, c2, tau)
    g = _block(sparse, c1, c3, tau)
    H = NovikovMatrix(len(c1), len(c4), tuple(
        tuple(nov_neg(x) for x in row) for row in _block(sparse, c1, c4, tau).entries
    ))
    D1 = _block(sparse, c1, c1, tau)
    D4 = _block(sparse, c4, c4, tau)
    R = mat_add(matmul(f, a), matmul(g, b))
    verified = agrees_with(R, chain_homotopy_identity(D1, H, D4))
    if not verified:
        LOGGER.warning("extracted homotopy does not satisfy the square identity")

    solved = _solve_homotopy(D1, D4, R, c1, c4, dict(C.generators), C.period, tau)
    if solved is None:
        raise NoHomotopyAtTruncation(
            "The equation f∘a + g∘b = d∘H + H∘d has no solution at truncation "
            f"{tau}. Retry with a finer truncation.",
        )
    return SquareDecomposition(a, b, f, g, H, solved, verified, dict(groups))


# ---------------------------------------------------------------------------
# Descent and representatives
# ---------------------------------------------------------------------------

def descend_to_lambda0(C: NovikovComplex, E: Mapping[str, Fraction]) -> NovikovComplex:
    """Rebase every generator x to T^(-E(x))·x.

    Entry (x, y) is multiplied by T^(E(x) - E(y)); for a complex assembled
    from an E-positive category every entry then has valuation >= 0. The
    truncation moves by the smallest shift among the nonzero entries.

    Raises:
        TruncationTooCoarse: If that shift leaves no positive truncation.
        NegativeValuationEntry: With the (target, source) pair of the first
            entry of negative valuation.
    """
    energy = {gid: to_fraction(E[gid]) for gid, _ in C.generators}
    sparse = C.entries()
    tau = None
    if C.truncation is not None:
        shifts = [energy[r] - energy[c] for r, c in sparse]
        tau = C.truncation + min(shifts) if shifts else C.truncation
        if tau <= 0:
            raise TruncationTooCoarse(
                f"Rebasing moves the truncation T^({C.truncation}) down to "
                f"T^({tau}), so no coefficient survives. Assemble the complex "
                f"at a truncation above {C.truncation - tau}.",
                witness=str(tau),
            )
    entries = {}
    for (r, c), value in sparse.items():
        moved = truncate(nov_shift(value, energy[r] - energy[c]), tau)
        if moved.terms and moved.valuation < 0:
            raise NegativeValuationEntry(
                f"After rebasing, entry ({r}, {c}) has valuation {moved.valuation} < 0. "
                "The input is not E-positive: some morphism increases energy.",
                witness=(r, c),
            )
        entries[(r, c)] = moved
    return NovikovComplex.from_entries(
        C.generators, entries, C.period, tau, lambda0=True, group=C.group,
    )


def rebase_representatives(
    F: FlowCategoryDesc,
    oid: str,
    g: Sequence[int],
) -> FlowCategoryDesc:
    """Replace the representative x of an orbit by g·x.

    Records out of x gain g, records into x lose g; gradings and energies
    of the new representative shift by mu(g) and E(g).
    """
    g = tuple(int(v) for v in g)
    mu_g = F.group.grading(g)
    e_g = F.group.energy(g)
    objects = tuple(
        FlowObject(x.id, x.mu + mu_g, x.E + e_g) if x.id == oid else x for x in F.objects
    )
    morphisms = []
    for rec in F.morphisms:
        h = F._g(rec)
        if rec.source == oid and rec.target == oid:
            morphisms.append(rec)
        elif rec.source == oid:
            morphisms.append(replace(rec, g=tuple(a + b for a, b in zip(g, h))))
        elif rec.target == oid:
            morphisms.append(replace(rec, g=tuple(b - a for a, b in zip(g, h))))
        else:
            morphisms.append(rec)
    return replace(F, objects=objects, morphisms=tuple(morphisms))


# ---------------------------------------------------------------------------
# Bifurcations
# ---------------------------------------------------------------------------

def _conjugate(C: NovikovComplex, P: NovikovMatrix, P_inv: NovikovMatrix) -> NovikovComplex:
    D = matmul(P_inv, matmul(C.full_matrix(), P))
    ids = [g for g, _ in C.generators]
    entries = {
        (ids[i], ids[j]): x
        for i, row in enumerate(D.entries)
        for j, x in enumerate(row)
        if not x.is_zero
    }
    tau = _tmin(C.truncation, D.truncation)
    return NovikovComplex.from_entries(
        C.generators, entries, C.period, tau, C.lambda0, C.group,
    )


def _with_entry(M: NovikovMatrix, i: int, j: int, value: NovikovElement) -> NovikovMatrix:
    rows = [list(r) for r in M.entries]
    rows[i][j] = value
    return NovikovMatrix(M.rows, M.cols, tuple(tuple(r) for r in rows))


def bifurcation_move_c(
    C: NovikovComplex,
    p: str,
    q: str,
    sign: int = 1,
    weight: Optional[NovikovElement] = None,
) -> NovikovComplex:
    """Change basis by p -> p + sign·weight·q.

    Raises:
        DegreeMismatch: If p and q have different degrees.
    """
    if p == q:
        raise ValueError(f"The move p -> p ± q needs two different generators, got '{p}' twice.")
    if C.degree_of(p) != C.degree_of(q):
        raise DegreeMismatch(
            f"'{p}' has degree {C.degree_of(p)} and '{q}' has degree "
            f"{C.degree_of(q)}; p -> p ± q only mixes generators of equal degree.",
            witness=(p, q),
        )
    if sign not in (1, -1):
        raise ValueError(f"Sign must be +1 or -1, got {sign}.")
    w = weight if weight is not None else one()
    if w.terms and w.valuation < 0:
        raise ValueError(
            f"The weight {w} has negative valuation; the move must stay over Lambda_0."
        )
    ids = [g for g, _ in C.generators]
    ip, iq = ids.index(p), ids.index(q)
    n = len(ids)
    signed = w if sign == 1 else nov_neg(w)
    P = _with_entry(identity(n), iq, ip, signed)
    P_inv = _with_entry(identity(n), iq, ip, nov_neg(signed))
    LOGGER.debug("move c: %s -> %s %+d·(%s)·%s", p, p, sign, w, q)
    return _conjugate(C, P, P_inv)


def bifurcation_move_d(C: NovikovComplex, p: str, u: NovikovElement) -> NovikovComplex:
    """Rescale p -> (1 + u)·p.

    Raises:
        ValuationNotPositive: If u has valuation <= 0.
        TruncationTooCoarse: If both the complex and u are exact and 1 + u
            is not a monomial, so its inverse is an infinite series.
    """
    if u.is_zero:
        return C
    if u.valuation <= 0:
        raise ValuationNotPositive(
            f"u = {u} has valuation {u.valuation}; the rescaling 1 + u needs "
            "val(u) > 0 to be a unit congruent to 1.",
            witness=str(u),
        )
    factor = truncate(nov_add(one(), u), C.truncation)
    ids = [g for g, _ in C.generators]
    ip = ids.index(p)
    n = len(ids)
    P = _with_entry(identity(n), ip, ip, factor)
    P_inv = _with_entry(identity(n), ip, ip, nov_invert(factor))
    return _conjugate(C, P, P_inv)


def bifurcation_birth(
    C: NovikovComplex,
    a: str,
    b: str,
    degree: int,
    unit: Optional[NovikovElement] = None,
) -> NovikovComplex:
    """Add generators a (degree k) and b (degree k + 1) with d a = unit·b."""
    existing = {g for g, _ in C.generators}
    clash = sorted({a, b} & existing)
    if clash or a == b:
        raise ValueError(f"New generator ids must be fresh and distinct, got {clash or [a]}.")
    e = unit if unit is not None else one(C.truncation)
    if not is_unit(e):
        raise NotAUnit(f"A birth joins the new pair by a unit; {e} is not one.", witness=str(e))
    entries = dict(C.entries())
    entries[(b, a)] = e
    generators = list(C.generators) + [(a, degree), (b, degree + 1)]
    return NovikovComplex.from_entries(
        generators, entries, C.period, C.truncation, C.lambda0, C.group,
    )


def bifurcation_death(C: NovikovComplex, a: str, b: str) -> NovikovComplex:
    """Cancel a and b across the unit entry d(b, a).

    The remaining entries become d(x, y) - d(x, a)·d(b, a)^(-1)·d(b, y).

    Raises:
        DegreeMismatch: If deg b != deg a + 1.
        NotAUnit: If the entry joining a to b is not a unit.
    """
    if C.degree_of(b) != C.next_degree(C.degree_of(a)):
        raise DegreeMismatch(
            f"'{b}' must sit one degree above '{a}' to cancel against it.",
            witness=(a, b),
        )
    inverse = nov_invert(C.entry(b, a))
    sparse = C.entries()
    keep = [(g, d) for g, d in C.generators if g not in (a, b)]
    entries = {}
    for x, _ in keep:
        for y, _ in keep:
            if C.degree_of(x) != C.next_degree(C.degree_of(y)):
                continue
            value = sparse.get((x, y), zero(C.truncation))
            xa = sparse.get((x, a))
            by = sparse.get((b, y))
            if xa is not None and by is not None:
                value = nov_sub(value, nov_product(nov_product(xa, inverse), by))
            if not value.is_zero:
                entries[(x, y)] = value
    tau = C.truncation
    for v in entries.values():
        tau = _tmin(tau, v.truncation)
    return NovikovComplex.from_entries(keep, entries, C.period, tau, C.lambda0, C.group)


# ---------------------------------------------------------------------------
# Arnold bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArnoldReport:
    generators: int
    per_degree: dict
    cohomology: GradedCohomology
    minimal: MinimalRank
    holds: bool

    def to_dict(self) -> dict:
        return {
            "generators": self.generators,
            "per_degree": {str(k): v for k, v in sorted(self.per_degree.items())},
            "cohomology": self.cohomology.to_dict(),
            "min_rank": self.minimal.bound,
            "holds": self.holds,
            "tight": self.generators == self.minimal.bound,
        }


def arnold_check(
    F: FlowCategoryDesc,
    truncation: Union[None, int, str, Fraction] = None,
) -> ArnoldReport:
    """Compare the number of generators with the minimal rank of the cohomology."""
    C = assemble_complex(F, truncation)
    H = nov_homology(C)
    minimal = min_rank(H, C.period)
    per_degree = {k: len(C.generators_in(k)) for k in C.degrees()}
    count = len(C.generators)
    holds = count >= minimal.bound
    if not holds:
        LOGGER.warning(
            "generator count %d is below the minimal rank %d; the input is inconsistent",
            count, minimal.bound,
        )
    return ArnoldReport(count, per_degree, H, minimal, holds)
