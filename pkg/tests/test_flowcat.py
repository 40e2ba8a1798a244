"""Tests for core/flowcat.py: flow categories and their Novikov complexes."""

import random
from dataclasses import replace

import pytest

from core.errors import (
    DegreeMismatch,
    DSquaredNonzero,
    MissingCount,
    NegativeValuationEntry,
    NotAUnit,
    SplitInvalid,
    TruncationTooCoarse,
    ValuationNotPositive,
)
from core.flowcat import (
    UNIT,
    FlowCategoryDesc,
    FlowObject,
    MorphismRecord,
    arnold_check,
    assemble_complex,
    bifurcation_birth,
    bifurcation_death,
    bifurcation_move_c,
    bifurcation_move_d,
    check_d_squared,
    compose_label_sets,
    cone_decompose,
    descend_to_lambda0,
    energies_of,
    rebase_representatives,
    square_decompose,
    validate_category,
)
from core.novikov import (
    NovikovComplex,
    NovikovGroupDesc,
    NovikovMatrix,
    agrees_with,
    element,
    monomial,
    nov_add,
    nov_homology,
    nov_mul,
    nov_neg,
    one,
    zero,
)
from core.validation import errors_in


def category(objects, records, group=None, **flags):
    """Build a description from (id, mu, E) triples and record tuples."""
    return FlowCategoryDesc(
        group=group or NovikovGroupDesc(),
        objects=tuple(FlowObject.make(*o) for o in objects),
        morphisms=tuple(MorphismRecord(*r) for r in records),
        **flags,
    )


def single_pair(count=3):
    return category([("x", 1, 1), ("y", 0, 0)], [("x", "y", (), 0, count)])


def crafted_failure():
    return category(
        [("x", 2, 2), ("z", 1, 1), ("y", 0, 0)],
        [("x", "z", (), 0, 1), ("z", "y", (), 0, 1), ("x", "y", (), 1, None)],
    )


def diamond():
    return category(
        [("x", 2, 2), ("z1", 1, 1), ("z2", 1, 1), ("y", 0, 0)],
        [
            ("x", "z1", (), 0, 1),
            ("x", "z2", (), 0, 1),
            ("z1", "y", (), 0, 1),
            ("z2", "y", (), 0, -1),
            ("x", "y", (), 1, None),
        ],
    )


def diagonal_complex(truncation=None):
    """d = [[2, 0], [0, 3]] from degree 0 to degree 1."""
    return NovikovComplex.from_entries(
        [("y1", 0), ("y2", 0), ("x1", 1), ("x2", 1)],
        {("x1", "y1"): element(2, truncation), ("x2", "y2"): element(3, truncation)},
        truncation=truncation,
    )


class TestLabelSets:
    """Tests for compose_label_sets."""

    def test_empty_labels(self):
        comp = compose_label_sets(0, 0)
        assert comp.target_size == 1
        assert comp.injection == {}
        assert comp.missing == 1

    def test_one_and_zero(self):
        comp = compose_label_sets(1, 0)
        assert comp.target_size == 2
        assert comp.image == {1}
        assert comp.missing == 2

    def test_two_and_three(self):
        comp = compose_label_sets(2, 3)
        assert comp.target_size == 6
        assert comp.image == {1, 2, 4, 5, 6}
        assert comp.missing == 3

    def test_injective_and_misses_one(self):
        for r1 in range(6):
            for r2 in range(6):
                comp = compose_label_sets(r1, r2)
                assert len(comp.image) == r1 + r2
                assert set(range(1, comp.target_size + 1)) - comp.image == {comp.missing}

    def test_associativity(self):
        for r1 in range(6):
            for r2 in range(6):
                for r3 in range(6):
                    left = compose_label_sets(r1, r2)
                    outer = compose_label_sets(left.target_size, r3)
                    right = compose_label_sets(r2, r3)
                    other = compose_label_sets(r1, right.target_size)
                    assert outer.target_size == other.target_size

                    def via_left(part, i):
                        if part == 3:
                            return outer.injection[("second", i)]
                        inner = left.injection[("first" if part == 1 else "second", i)]
                        return outer.injection[("first", inner)]

                    def via_right(part, i):
                        if part == 1:
                            return other.injection[("first", i)]
                        inner = right.injection[("first" if part == 2 else "second", i)]
                        return other.injection[("second", inner)]

                    for part, size in ((1, r1), (2, r2), (3, r3)):
                        for i in range(1, size + 1):
                            assert via_left(part, i) == via_right(part, i)

    def test_negative_rejected(self):
        with pytest.raises(ValueError, match="natural"):
            compose_label_sets(-1, 0)


class TestValidateCategory:
    """Tests for validate_category findings."""

    def test_valid_category(self):
        assert errors_in(validate_category(diamond())) == []

    def test_label_size_mismatch(self):
        F = category([("x", 2, 2), ("y", 0, 0)], [("x", "y", (), 0, 1)])
        codes = {r.code for r in errors_in(validate_category(F))}
        assert "LabelSizeMismatch" in codes

    def test_identity_must_be_unit(self):
        F = category([("x", 0, 0)], [("x", "x", (), UNIT, None), ("x", "x", (), 2, None)])
        codes = {r.code for r in validate_category(F)}
        assert "NotEquivariant" in codes
        assert "IdentityNotUnit" in codes

    def test_duplicate_identity(self):
        F = category([("x", 0, 0)], [("x", "x", (), UNIT, None), ("x", "x", (), UNIT, None)])
        codes = {r.code for r in validate_category(F)}
        assert "DuplicateIdentity" in codes

    def test_missing_count(self):
        F = category([("x", 1, 1), ("y", 0, 0)], [("x", "y", (), 0, None)])
        assert "MissingCount" in {r.code for r in validate_category(F)}

    def test_not_e_positive(self):
        F = category([("x", 1, 0), ("y", 0, 0)], [("x", "y", (), 0, 1)])
        assert "NotEPositive" in {r.code for r in validate_category(F)}

    def test_unknown_object(self):
        F = category([("x", 1, 1)], [("x", "w", (), 0, 1)])
        assert "UnknownObject" in {r.code for r in validate_category(F)}

    def test_unset_flag_is_warning(self):
        F = category([("x", 0, 0)], [], proper=False)
        findings = validate_category(F)
        assert [r.severity for r in findings] == ["warning"]
        assert errors_in(findings) == []


class TestAssemble:
    """Tests for differential assembly and the d*d check."""

    def test_single_pair(self):
        C = assemble_complex(single_pair())
        assert C.entry("x", "y") == monomial(3)
        assert C.degree_of("x") == 1

    def test_crafted_failure_raises(self):
        with pytest.raises(DSquaredNonzero) as info:
            assemble_complex(crafted_failure())
        assert info.value.witness == ("x", "y")

    def test_crafted_failure_report(self):
        holds, witnesses = check_d_squared(crafted_failure())
        assert not holds
        assert witnesses == [("x", "y")]

    def test_zero_category(self):
        assert check_d_squared(category([("x", 0, 0), ("y", 3, 3)], [])) == (True, [])

    def test_diamond_squares_to_zero(self):
        assert check_d_squared(diamond())[0]
        C = assemble_complex(diamond(), truncation=5)
        assert C.truncation == 5

    def test_missing_count_raises(self):
        F = category([("x", 1, 1), ("y", 0, 0)], [("x", "y", (), 0, None)])
        with pytest.raises(MissingCount):
            assemble_complex(F)

    def test_novikov_weight(self):
        group = NovikovGroupDesc.make(E=["1/2"], mu=[0])
        F = category([("x", 1, 2), ("y", 0, 0)], [("x", "y", (1,), 0, 4)], group=group)
        C = assemble_complex(F)
        assert C.entry("x", "y") == monomial(4, "-1/2")


class TestCone:
    """Tests for cone_decompose."""

    def test_one_cross_morphism(self):
        F = category([("a", 1, 1), ("b", 0, 0)], [("a", "b", (), 0, 1)])
        cone = cone_decompose(F, ["a"], ["b"])
        assert cone.f.entries == ((monomial(1),),)
        assert cone.d2.degree_of("b") == 1
        assert cone.chain_map
        assert cone.reassembles

    def test_forbidden_direction(self):
        F = category([("a", 1, 1), ("b", 0, 0)], [("a", "b", (), 0, 1)])
        with pytest.raises(SplitInvalid, match="from C1 to C2"):
            cone_decompose(F, ["b"], ["a"])

    def test_direct_sum(self):
        F = category(
            [("a", 1, 1), ("b", 0, 0), ("c", 1, 1), ("e", 0, 0)],
            [("a", "b", (), 0, 2), ("c", "e", (), 0, 5)],
        )
        cone = cone_decompose(F, ["a", "b"])
        assert cone.c2 == ("c", "e")
        assert cone.f.is_zero
        assert cone.d2.entry("c", "e") == monomial(-5)
        assert cone.reassembles

    def test_split_must_partition(self):
        with pytest.raises(SplitInvalid):
            cone_decompose(single_pair(), ["x"], ["x", "y"])

    def test_diamond_by_degree(self):
        cone = cone_decompose(diamond(), ["x", "z1", "z2"], ["y"])
        assert cone.chain_map and cone.reassembles
        assert cone.f.entries == ((zero(),), (monomial(1),), (monomial(-1),))

    def test_tampered_block_fails_reassembly(self):
        cone = cone_decompose(diamond(), ["x", "z1", "z2"], ["y"])
        assert cone.matches_complex()
        blank = NovikovMatrix(cone.f.rows, cone.f.cols, tuple(
            tuple(zero() for _ in row) for row in cone.f.entries
        ))
        assert not replace(cone, f=blank).matches_complex()
        negated = NovikovComplex.from_entries(
            cone.d1.generators,
            {k: nov_neg(v) for k, v in cone.d1.entries().items()},
            cone.d1.period,
            cone.d1.truncation,
        )
        assert not replace(cone, d1=negated).matches_complex()

    def test_random_two_part_categories(self):
        rng = random.Random(0)
        for _ in range(50):
            n = rng.randint(2, 6)
            objects = [(f"o{i}", rng.randint(0, 1), 0) for i in range(n)]
            objects = [(oid, mu, mu) for oid, mu, _ in objects]
            part = {oid: rng.randint(1, 2) for oid, _, _ in objects}
            records = []
            for x, mx, _ in objects:
                for y, my, _ in objects:
                    if mx != my + 1 or (part[x] == 2 and part[y] == 1):
                        continue
                    count = rng.randint(-2, 2)
                    if count:
                        records.append((x, y, (), 0, count))
            F = category(objects, records)
            c1 = [oid for oid, _, _ in objects if part[oid] == 1]
            cone = cone_decompose(F, c1, truncation=5)
            assert cone.reassembles
            assert cone.chain_map


class TestSquare:
    """Tests for square_decompose."""

    def test_no_cross_blocks(self):
        F = category([("a", 0, 0), ("b", 0, 0), ("c", 0, 0), ("e", 0, 0)], [])
        sq = square_decompose(F, {"a": 1, "b": 2, "c": 3, "e": 4})
        assert sq.H.is_zero
        assert sq.solved_H.is_zero
        assert sq.verified

    def test_unit_edges_with_diagonal(self):
        group = NovikovGroupDesc.make(E=[1], mu=[1])
        g = (-1,)
        F = category(
            [("a", 0, 0), ("b", 0, 0), ("c", 0, 0), ("e", 0, 0)],
            [
                ("b", "e", g, 0, 1),
                ("c", "e", g, 0, -1),
                ("a", "b", g, 0, 1),
                ("a", "c", g, 0, 1),
                ("a", "e", g, 0, 2),
            ],
            group=group,
        )
        assert errors_in(validate_category(F)) == []
        sq = square_decompose(F, {"a": 1, "b": 2, "c": 3, "e": 4}, truncation=5)
        assert sq.verified
        assert sq.H.entries == ((monomial(-2, 1, 5),),)
        assert sq.a.entries == ((monomial(1, 1, 5),),)
        assert sq.b.entries == ((monomial(-1, 1, 5),),)

    def test_wrong_order(self):
        F = category([("a", 1, 1), ("b", 0, 0)], [("a", "b", (), 0, 1)])
        with pytest.raises(SplitInvalid, match="does not allow"):
            square_decompose(F, {"a": 2, "b": 1})

    def test_bad_part_number(self):
        with pytest.raises(SplitInvalid):
            square_decompose(single_pair(), {"x": 1, "y": 5})

    def test_d_squared_checked_first(self):
        with pytest.raises(DSquaredNonzero):
            square_decompose(crafted_failure(), {"x": 1, "z": 2, "y": 4})


class TestDescend:
    """Tests for descend_to_lambda0 and representative changes."""

    def test_exact_cancellation(self):
        group = NovikovGroupDesc.make(E=[1], mu=[0])
        F = category([("x", 1, 2), ("y", 0, 1)], [("x", "y", (1,), 0, 1)], group=group)
        C = assemble_complex(F)
        assert C.entry("x", "y") == monomial(1, -1)
        D = descend_to_lambda0(C, energies_of(F))
        assert D.lambda0
        assert D.entry("x", "y") == monomial(1, 0)

    def test_zero_differential_unchanged(self):
        F = category([("x", 1, 5), ("y", 0, 0)], [])
        D = descend_to_lambda0(assemble_complex(F), energies_of(F))
        assert D.entries() == {}

    def test_positive_valuations(self):
        D = descend_to_lambda0(assemble_complex(diamond(), 5), energies_of(diamond()))
        assert all(v.valuation >= 0 for v in D.entries().values())
        assert D.entry("x", "z1") == monomial(1, 1, 6)

    def test_energy_increase_rejected(self):
        F = category([("x", 1, 0), ("y", 0, 1)], [("x", "y", (), 0, 1)])
        with pytest.raises(NegativeValuationEntry) as info:
            descend_to_lambda0(assemble_complex(F), energies_of(F))
        assert info.value.witness == ("x", "y")

    def test_representative_independence(self):
        group = NovikovGroupDesc.make(E=[1], mu=[2])
        F = category([("x", 1, 5), ("y", 0, 2)], [("x", "y", (0,), 0, 1)], group=group)
        G = rebase_representatives(F, "x", (1,))
        assert G.object("x").mu == 3
        assert G.morphisms[0].g == (1,)
        assert errors_in(validate_category(G)) == []
        before = descend_to_lambda0(assemble_complex(F), energies_of(F))
        after = descend_to_lambda0(assemble_complex(G), energies_of(G))
        assert before.entries() == after.entries()
        assert after.entry("x", "y") == monomial(1, 3)

    def test_truncation_moves_by_present_entries_only(self):
        C = NovikovComplex.from_entries(
            [("y1", 0), ("y2", 0), ("x", 1)], {("x", "y1"): element(2, 5)}, truncation=5,
        )
        D = descend_to_lambda0(C, {"x": 1, "y1": 0, "y2": 10})
        assert D.truncation == 6
        assert D.entry("x", "y1") == monomial(2, 1, 6)

    def test_truncation_exhausted(self):
        C = NovikovComplex.from_entries(
            [("y", 0), ("x", 1)], {("x", "y"): element(1, 1)}, truncation=1,
        )
        with pytest.raises(TruncationTooCoarse, match="no coefficient survives"):
            descend_to_lambda0(C, {"x": 0, "y": 2})


def random_complex(rng, truncation=5):
    """Two-degree complex with Lambda_0 entries, so d*d = 0 trivially."""
    n0, n1 = rng.randint(1, 3), rng.randint(1, 3)
    gens = [(f"y{i}", 0) for i in range(n0)] + [(f"x{i}", 1) for i in range(n1)]
    entries = {}
    for i in range(n1):
        for j in range(n0):
            if rng.random() < 0.6:
                c0 = rng.choice([-3, -2, -1, 1, 2, 3])
                c1 = rng.randint(-2, 2)
                entries[(f"x{i}", f"y{j}")] = element([(c0, 0), (c1, "1/2")], truncation)
    return NovikovComplex.from_entries(gens, entries, truncation=truncation)


class TestBifurcations:
    """Tests for the bifurcation moves."""

    def test_move_c_on_zero_differential(self):
        C = NovikovComplex.from_entries([("p", 0), ("q", 0)], {}, truncation=5)
        moved = bifurcation_move_c(C, "p", "q")
        assert moved.entries() == {}

    def test_move_c_keeps_invariants(self):
        C = diagonal_complex(5)
        moved = bifurcation_move_c(C, "y1", "y2")
        assert moved.entry("x2", "y1") == element(3, 5)
        assert nov_homology(moved).same_as(nov_homology(C))

    def test_move_c_inverse(self):
        C = diagonal_complex(5)
        w = element("2 + T", 5)
        there = bifurcation_move_c(C, "x1", "x2", 1, w)
        back = bifurcation_move_c(there, "x1", "x2", -1, w)
        assert agrees_with(back.full_matrix(), C.full_matrix())

    def test_move_c_degree_mismatch(self):
        with pytest.raises(DegreeMismatch):
            bifurcation_move_c(diagonal_complex(), "y1", "x1")

    def test_move_d_on_zero_complex(self):
        C = NovikovComplex.from_entries([("p", 0)], {}, truncation=5)
        moved = bifurcation_move_d(C, "p", monomial(1, 1))
        assert nov_homology(moved).same_as(nov_homology(C))

    def test_move_d_rescales(self):
        C = NovikovComplex.from_entries(
            [("y", 0), ("x", 1)], {("x", "y"): element("1 - T", 5)}, truncation=5,
        )
        moved = bifurcation_move_d(C, "y", monomial(1, 1))
        assert moved.entry("x", "y") == element("1 - T^2", 5)
        assert nov_homology(moved).same_as(nov_homology(C))

    def test_move_d_composition(self):
        C = NovikovComplex.from_entries(
            [("y", 0), ("x", 1)], {("x", "y"): element("2 - T", 5)}, truncation=5,
        )
        u, v = monomial(1, 1), monomial(1, "1/2")
        twice = bifurcation_move_d(bifurcation_move_d(C, "x", u), "x", v)
        once = bifurcation_move_d(C, "x", nov_add(nov_add(u, v), nov_mul(u, v)))
        assert agrees_with(twice.full_matrix(), once.full_matrix())

    def test_move_d_needs_positive_valuation(self):
        with pytest.raises(ValuationNotPositive):
            bifurcation_move_d(diagonal_complex(5), "y1", one())

    def test_birth_and_death(self):
        C = diagonal_complex(5)
        born = bifurcation_birth(C, "a", "b", 0)
        assert len(born.generators) == 6
        assert nov_homology(born).same_as(nov_homology(C))
        dead = bifurcation_death(born, "a", "b")
        assert agrees_with(dead.full_matrix(), C.full_matrix())

    def test_death_updates_entries(self):
        C = NovikovComplex.from_entries(
            [("a", 0), ("y", 0), ("b", 1), ("x", 1)],
            {
                ("b", "a"): one(),
                ("b", "y"): element(2),
                ("x", "a"): element(3),
                ("x", "y"): element(5),
            },
        )
        dead = bifurcation_death(C, "a", "b")
        assert dead.entry("x", "y") == monomial(-1)
        assert nov_homology(dead).same_as(nov_homology(C))

    def test_death_needs_unit(self):
        C = NovikovComplex.from_entries([("a", 0), ("b", 1)], {("b", "a"): element(2)})
        with pytest.raises(NotAUnit):
            bifurcation_death(C, "a", "b")

    def test_random_move_sequences(self):
        rng = random.Random(0)
        for _ in range(100):
            C = random_complex(rng)
            before = nov_homology(C)
            D = C
            for _ in range(rng.randint(1, 10)):
                k = rng.choice(D.degrees())
                gens = D.generators_in(k)
                if len(gens) >= 2 and rng.random() < 0.5:
                    p, q = rng.sample(gens, 2)
                    weight = element([(rng.randint(-2, 2), 0), (rng.randint(-2, 2), 1)])
                    D = bifurcation_move_c(D, p, q, rng.choice([1, -1]), weight)
                else:
                    p = rng.choice(gens)
                    u = element([(rng.choice([-1, 1]), "1/2"), (rng.randint(-2, 2), 1)], 5)
                    D = bifurcation_move_d(D, p, u)
            assert D.truncation == 5
            assert nov_homology(D).same_as(before)


class TestArnold:
    """Tests for arnold_check."""

    def test_circle_is_tight(self):
        report = arnold_check(category([("v", 0, 0), ("e", 1, 1)], []))
        assert report.generators == 2
        assert report.minimal.bound == 2
        assert report.holds
        assert report.to_dict()["tight"]

    def test_extra_cancelling_pair(self):
        F = category(
            [("v", 0, 0), ("e", 1, 1), ("a", 0, 0), ("b", 1, 1)],
            [("b", "a", (), 0, 1)],
        )
        report = arnold_check(F)
        assert report.generators == 4
        assert report.minimal.bound == 2
        assert report.holds
        assert not report.to_dict()["tight"]

    def test_torsion_pair(self):
        F = category([("a", 0, 0), ("b", 1, 1)], [("b", "a", (), 0, 2)])
        report = arnold_check(F)
        assert report.minimal.bound == 2
        assert report.cohomology.to_dict() == {
            "0": {"free_rank": 0, "torsion": []},
            "1": {"free_rank": 0, "torsion": [2]},
        }
