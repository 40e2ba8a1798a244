"""Tests for core/morse.py: triangulations, discrete gradients and Morse flow categories."""

import pytest

from core.data_loader import TRIANGULATIONS
from core.documents import parse_document
from core.flowcat import check_d_squared
from core.morse import (
    DiscreteGradient,
    SimplicialComplex,
    arnold_demo,
    build_simplicial,
    cell_name,
    discrete_gradient,
    euler_characteristic,
    export_document,
    morse_complex,
    morse_inequalities,
    morse_numbers,
    simplicial_homology,
    smith_diagonal,
    to_flow_category,
    unsigned_path_counts,
)

SURFACES = {"sphere2": 2, "torus": 4, "rp2": 3, "klein": 4}


def integer_groups(H):
    return {k: (g.free_rank, list(g.integer_torsion())) for k, g in H.groups.items()}


class TestSimplicialComplex:
    """Building and validating simplicial complexes."""

    def test_point(self):
        X = build_simplicial("point")
        assert X.f_vector() == [1]
        assert X.dimension == 0

    def test_sphere(self):
        X = build_simplicial("sphere2")
        assert X.f_vector() == [4, 6, 4]
        assert euler_characteristic(X) == 2

    def test_rp2(self):
        X = build_simplicial("rp2")
        assert X.f_vector() == [6, 15, 10]
        assert euler_characteristic(X) == 1

    def test_torus_and_klein(self):
        assert euler_characteristic(build_simplicial("torus")) == 0
        assert euler_characteristic(build_simplicial("klein")) == 0
        assert build_simplicial("klein").f_vector() == [9, 27, 18]

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="Choose one of"):
            build_simplicial("moebius")

    def test_repeated_vertex(self):
        with pytest.raises(ValueError, match="repeats a vertex"):
            SimplicialComplex.make(3, [[0, 0, 1]])

    def test_vertex_out_of_range(self):
        with pytest.raises(ValueError, match="outside"):
            SimplicialComplex.make(2, [[0, 2]])

    def test_isolated_vertices_are_cells(self):
        X = SimplicialComplex.make(3, [[0, 1]])
        assert X.cells_of_dim(0) == [(0,), (1,), (2,)]

    def test_face_signs(self):
        assert SimplicialComplex.faces((0, 1, 2)) == [((1, 2), 1), ((0, 2), -1), ((0, 1), 1)]

    def test_cell_name(self):
        assert cell_name((0, 1, 2)) == "s0_1_2"

    def test_boundary_squares_to_zero(self):
        X = build_simplicial("torus")
        d1, d2 = X.boundary_matrix(1), X.boundary_matrix(2)
        for row in d1:
            for j in range(len(d2[0])):
                assert sum(row[i] * d2[i][j] for i in range(len(row))) == 0


class TestSmithDiagonal:
    """Invariant factors of integer matrices."""

    def test_examples(self):
        assert smith_diagonal([[2, 4], [6, 8]]) == [2, 4]
        assert smith_diagonal([[2, 0], [0, 3]]) == [1, 6]
        assert smith_diagonal([[4, 6]]) == [2]

    def test_zero_and_empty(self):
        assert smith_diagonal([[0]]) == []
        assert smith_diagonal([]) == []


class TestSimplicialHomology:
    """Integral homology oracle."""

    def test_point(self):
        assert integer_groups(simplicial_homology(build_simplicial("point"))) == {0: (1, [])}

    def test_circle(self):
        H = simplicial_homology(build_simplicial("circle"))
        assert integer_groups(H) == {0: (1, []), 1: (1, [])}

    def test_rp2(self):
        H = simplicial_homology(build_simplicial("rp2"))
        assert integer_groups(H) == {0: (1, []), 1: (0, [2]), 2: (0, [])}

    def test_klein(self):
        H = simplicial_homology(build_simplicial("klein"))
        assert integer_groups(H) == {0: (1, []), 1: (1, [2]), 2: (0, [])}

    def test_torus(self):
        H = simplicial_homology(build_simplicial("torus"))
        assert integer_groups(H) == {0: (1, []), 1: (2, []), 2: (1, [])}

    def test_rp2_cohomology_by_universal_coefficients(self):
        H = simplicial_homology(build_simplicial("rp2")).to_cohomology()
        assert H.group(0).free_rank == 1
        assert H.group(1).free_rank == 0 and H.group(1).torsion_count == 0
        assert H.group(2).integer_torsion() == (2,)


class TestDiscreteGradient:
    """Greedy acyclic matchings."""

    def test_point_has_no_pairs(self):
        V = discrete_gradient(build_simplicial("point"))
        assert V.pairs == ()
        assert V.critical == [(0,)]

    def test_interval(self):
        V = discrete_gradient(build_simplicial("interval"))
        assert V.pairs == (((1,), (0, 1)),)
        assert V.critical == [(0,)]

    @pytest.mark.parametrize("name,expected", sorted(SURFACES.items()))
    def test_surfaces_reach_minimal_critical_count(self, name, expected):
        V = discrete_gradient(build_simplicial(name))
        assert len(V.critical) == expected
        assert V.check() == []
        assert [len(c) for c in V.critical].count(1) == 1
        assert [len(c) for c in V.critical].count(3) == 1

    def test_deterministic(self):
        X = build_simplicial("klein")
        assert discrete_gradient(X).pairs == discrete_gradient(X).pairs

    def test_unknown_strategy(self):
        with pytest.raises(ValueError, match="Unknown matching strategy"):
            discrete_gradient(build_simplicial("circle"), "random")

    def test_cyclic_matching_detected(self):
        X = build_simplicial("circle")
        V = DiscreteGradient(X, (((1,), (0, 1)), ((0,), (0, 2)), ((2,), (1, 2))))
        findings = V.check()
        assert [f.code for f in findings] == ["CyclicMatching"]
        assert not V.is_acyclic()

    def test_not_a_cofacet(self):
        V = DiscreteGradient(build_simplicial("circle"), (((0,), (1, 2)),))
        assert [f.code for f in V.check()] == ["NotACofacet"]

    def test_double_match(self):
        V = DiscreteGradient(build_simplicial("circle"), (((1,), (0, 1)), ((1,), (1, 2))))
        assert "DoubleMatch" in [f.code for f in V.check()]


class TestMorseComplex:
    """Gradient-path counts and the Morse complex."""

    def test_circle_counts(self):
        M = morse_complex(build_simplicial("circle"))
        assert M.counts == {((1, 2), (0,)): 0}
        assert unsigned_path_counts(M) == {((1, 2), (0,)): 2}

    def test_rejects_cyclic_matching(self):
        X = build_simplicial("circle")
        V = DiscreteGradient(X, (((1,), (0, 1)), ((0,), (0, 2)), ((2,), (1, 2))))
        with pytest.raises(ValueError, match="closed gradient path"):
            morse_complex(X, V)

    @pytest.mark.parametrize("name", sorted(TRIANGULATIONS))
    def test_homology_matches_oracle(self, name):
        X = build_simplicial(name)
        M = morse_complex(X)
        assert M.d_squared_zero()
        assert M.homology().same_as(simplicial_homology(X))

    @pytest.mark.parametrize("name", sorted(TRIANGULATIONS))
    def test_morse_equation(self, name):
        X = build_simplicial(name)
        numbers = morse_numbers(morse_complex(X))
        assert sum((-1) ** k * m for k, m in numbers.items()) == euler_characteristic(X)

    @pytest.mark.parametrize("name", sorted(TRIANGULATIONS))
    def test_morse_inequalities(self, name):
        assert all(row.holds for row in morse_inequalities(morse_complex(build_simplicial(name))))

    def test_rp2_inequalities_tight(self):
        rows = morse_inequalities(morse_complex(build_simplicial("rp2")))
        assert [(r.degree, r.critical, r.bound) for r in rows] == [(0, 1, 1), (1, 1, 1), (2, 1, 1)]

    def test_rp2_boundary_is_two(self):
        M = morse_complex(build_simplicial("rp2"))
        assert abs(M.matrix(2)[0][0]) == 2
        assert M.matrix(1) == [[0]]


class TestMorseFlowCategory:
    """Flow categories from discrete gradients."""

    def test_sphere_has_no_records(self):
        F = to_flow_category(morse_complex(build_simplicial("sphere2")))
        assert len(F.objects) == 2
        assert F.morphisms == ()

    def test_objects_graded_by_dimension(self):
        F = to_flow_category(morse_complex(build_simplicial("rp2")))
        assert sorted(o.mu for o in F.objects) == [0, 1, 2]
        assert all(o.E == o.mu for o in F.objects)

    def test_rp2_rigid_counts(self):
        F = to_flow_category(morse_complex(build_simplicial("rp2")))
        rigid = sorted(abs(m.count) for m in F.morphisms if m.label_size == 0)
        assert rigid == [0, 2]
        assert [m.label_size for m in F.morphisms if m.count is None] == [1]

    def test_torus_counts_vanish(self):
        F = to_flow_category(morse_complex(build_simplicial("torus")))
        assert all(m.count == 0 for m in F.morphisms if m.label_size == 0)

    @pytest.mark.parametrize("name", sorted(TRIANGULATIONS))
    def test_d_squared(self, name):
        ok, witnesses = check_d_squared(to_flow_category(morse_complex(build_simplicial(name))))
        assert ok and witnesses == []

    def test_export_round_trip(self):
        M = morse_complex(build_simplicial("rp2"))
        doc = parse_document(export_document(M))
        assert doc.kind == "flow_category"
        assert doc.build() == to_flow_category(M)


class TestArnoldDemo:
    """End-to-end minimal-rank check on bundled spaces."""

    @pytest.mark.parametrize("name,expected", sorted(SURFACES.items()))
    def test_surfaces_are_tight(self, name, expected):
        report = arnold_demo(name)
        assert report.critical == expected
        assert report.min_rank == expected
        assert report.holds and report.tight
        assert report.oracle_agrees and report.d_squared_zero

    def test_rp2_cohomology(self):
        report = arnold_demo("rp2")
        assert report.cohomology.group(0).free_rank == 1
        assert report.cohomology.group(2).integer_torsion() == (2,)

    def test_to_dict_keys(self):
        out = arnold_demo("circle").to_dict()
        assert out["space"] == "circle"
        assert out["critical"] == 2
        assert set(out) == {
            "space", "critical", "min_rank", "holds", "tight",
            "per_degree", "cohomology", "oracle_agrees", "d_squared_zero",
        }
