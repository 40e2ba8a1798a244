"""Tests for core/documents.py: the JSON document format."""

import json
from fractions import Fraction

import pytest

from core.documents import KINDS, Document, document_for, parse_document, serialize_document
from core.errors import IncompatibleBoundary, ParseError, SchemaError
from core.flowcat import FlowCategoryDesc, FlowObject, MorphismRecord
from core.novikov import NovikovComplex, NovikovMatrix, element, monomial
from core.perturb import BoundaryData, FiniteGroupRep, section_from_strings


def doc(kind, payload, fmt=1):
    return json.dumps({"fmt": fmt, "kind": kind, "payload": payload})


MINIMAL_CATEGORY = {
    "objects": [
        {"id": "x", "mu": 1, "E": 1},
        {"id": "y", "mu": 0, "E": "0"},
    ],
    "morphisms": [{"source": "x", "target": "y", "count": 2}],
}


class TestParseDocument:
    """Envelope and payload validation."""

    def test_minimal_flow_category(self):
        parsed = parse_document(doc("flow_category", MINIMAL_CATEGORY))
        assert parsed.kind == "flow_category"
        F = parsed.build()
        assert isinstance(F, FlowCategoryDesc)
        assert F.objects == (FlowObject("x", 1, Fraction(1)), FlowObject("y", 0, Fraction(0)))
        assert F.morphisms == (MorphismRecord("x", "y", (), 0, 2),)

    def test_rational_forms(self):
        payload = {
            "objects": [
                {"id": "a", "mu": 0, "E": "3/4"},
                {"id": "b", "mu": 0, "E": {"num": -1, "den": 2}},
            ],
        }
        F = parse_document(doc("flow_category", payload)).build()
        assert [o.E for o in F.objects] == [Fraction(3, 4), Fraction(-1, 2)]

    def test_zero_denominator(self):
        payload = {"objects": [{"id": "a", "mu": 0, "E": "1/0"}]}
        with pytest.raises(SchemaError, match="zero denominator") as info:
            parse_document(doc("flow_category", payload))
        assert info.value.path.startswith("payload.objects.0.E")

    def test_float_rejected(self):
        payload = {"objects": [{"id": "a", "mu": 0, "E": 0.5}]}
        with pytest.raises(SchemaError, match="not an exact rational"):
            parse_document(doc("flow_category", payload))

    def test_float_matrix_entry_rejected(self):
        with pytest.raises(SchemaError, match="not exact"):
            parse_document(doc("novikov_matrix", {"rows": [[1.5]]}))

    def test_unknown_field(self):
        payload = dict(MINIMAL_CATEGORY, colour="blue")
        with pytest.raises(SchemaError) as info:
            parse_document(doc("flow_category", payload))
        assert info.value.path == "payload.colour"

    def test_unknown_kind(self):
        with pytest.raises(SchemaError) as info:
            parse_document(doc("manifold", {}))
        assert info.value.path == "kind"

    def test_wrong_format_version(self):
        with pytest.raises(SchemaError) as info:
            parse_document(doc("flow_category", MINIMAL_CATEGORY, fmt=2))
        assert info.value.path == "fmt"

    def test_not_an_object(self):
        with pytest.raises(SchemaError, match="JSON object"):
            parse_document("[1, 2]")

    def test_parse_error_position(self):
        with pytest.raises(ParseError) as info:
            parse_document('{\n  "fmt": 1,\n  "kind": }')
        assert info.value.line == 3
        assert info.value.column == 11

    def test_ragged_matrix_is_schema_error(self):
        parsed = parse_document(doc("novikov_matrix", {"rows": [["1"], ["1", "T^(1/2)"]]}))
        with pytest.raises(SchemaError, match="columns"):
            parsed.build()

    def test_domain_errors_pass_through(self):
        payload = {
            "corner_dim": 2,
            "free_dim": 0,
            "faces": [
                {"stratum": [1], "components": ["x + 1"]},
                {"stratum": [2], "components": ["y"]},
            ],
        }
        parsed = parse_document(doc("boundary_data", payload))
        with pytest.raises(IncompatibleBoundary):
            parsed.build()

    def test_all_kinds_have_payloads(self):
        assert set(KINDS) == {
            "novikov_matrix", "complex", "flow_category", "strat_space",
            "section", "group_rep", "boundary_data",
        }


class TestSerializeDocument:
    """Canonical output and re-parsing."""

    def test_canonical_text(self):
        text = serialize_document(parse_document(doc("flow_category", MINIMAL_CATEGORY)))
        assert text.endswith("}\n")
        body = json.loads(text)
        assert list(body) == ["fmt", "kind", "payload"]
        assert body["payload"]["objects"][0]["E"] == {"num": 1, "den": 1}

    def test_serialize_is_stable(self):
        first = serialize_document(parse_document(doc("flow_category", MINIMAL_CATEGORY)))
        again = serialize_document(parse_document(first))
        assert first == again

    def test_unsupported_object(self):
        with pytest.raises(TypeError, match="No document kind"):
            document_for(42)


class TestDocumentFor:
    """Domain objects survive a trip through document text."""

    def round_trip(self, obj):
        return parse_document(serialize_document(document_for(obj))).build()

    def test_matrix(self):
        M = NovikovMatrix.make([["1 + T^(1/2)", 0], [monomial(-3, "2/3"), 2]], truncation=5)
        assert self.round_trip(M) == M

    def test_complex(self):
        C = NovikovComplex.from_entries(
            [("a", 0), ("b", 1)],
            {("b", "a"): element("2*T^(1/3)")},
        )
        again = self.round_trip(C)
        assert again.degrees() == C.degrees()
        assert again.entries() == C.entries()

    def test_flow_category(self):
        F = parse_document(doc("flow_category", MINIMAL_CATEGORY)).build()
        assert self.round_trip(F) == F

    def test_group_rep(self):
        rep = FiniteGroupRep.make(2, 2, [([[0, 1], [1, 0]], [[0, 1], [1, 0]])])
        again = self.round_trip(rep)
        assert again.order == rep.order == 2

    def test_section(self):
        s = section_from_strings(["x - 1/4", "y - 1/2"], ["x", "y"], corner_dim=1)
        again = self.round_trip(s)
        assert again.corner_dim == 1
        assert again.map.equals(s.map)

    def test_boundary_data(self):
        bd = BoundaryData.make(1, 1, {frozenset(): ["y - 1/2"]})
        again = self.round_trip(bd)
        assert set(again.faces) == {frozenset()}
        assert again.faces[frozenset()].equals(bd.faces[frozenset()])

    def test_document_is_frozen(self):
        d = document_for(NovikovMatrix.make([[1]]))
        assert isinstance(d, Document)
        with pytest.raises(Exception):
            d.kind = "complex"
