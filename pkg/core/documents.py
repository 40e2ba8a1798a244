"""JSON documents for every input kind.

A document is ``{"fmt": 1, "kind": ..., "payload": {...}}``. Rationals are
written as ``{"num": p, "den": q}``; integers and ``"p/q"`` strings are
accepted on input. Novikov elements use their text form
(``3*T^(1/2) - 1 mod T^(5)``) or a term list. Floats are refused
everywhere, since every quantity must be exact.

Parsing happens in two stages: the envelope, then the payload model for
the declared kind. Payload models turn themselves into domain objects
with ``build()``; ``document_for`` goes the other way.
"""

import json
import logging
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, get_args

import sympy as sp
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    ValidationError,
)

from core.data_loader import DEFAULTS, example_path
from core.errors import NovCalcError, ParseError, SchemaError
from core.flowcat import FlowCategoryDesc, FlowObject, MorphismRecord
from core.novikov import (
    NovikovComplex,
    NovikovElement,
    NovikovGroupDesc,
    NovikovMatrix,
    element,
    format_element,
)
from core.perturb import BoundaryData, FiniteGroupRep, SectionOnBox, section_from_strings
from core.strata import Cell, CombStratSpace, StratumLabel

LOGGER = logging.getLogger(__name__)

Kind = Literal[
    "novikov_matrix",
    "complex",
    "flow_category",
    "strat_space",
    "section",
    "group_rep",
    "boundary_data",
]
KINDS = get_args(Kind)


# ---------------------------------------------------------------------------
# Exact scalar fields
# ---------------------------------------------------------------------------

def _as_rational(value: Any) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool) or isinstance(value, float):
        raise ValueError(
            f"{value!r} is not an exact rational. Write an integer, a 'p/q' "
            "string or {\"num\": p, \"den\": q}."
        )
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, sp.Rational):
        return Fraction(int(value.p), int(value.q))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ZeroDivisionError:
            raise ValueError(f"'{value}' has a zero denominator.")
        except ValueError:
            raise ValueError(f"'{value}' is not a rational; write it as p/q.")
    if isinstance(value, dict) and set(value) == {"num", "den"}:
        num, den = value["num"], value["den"]
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in (num, den)):
            raise ValueError("'num' and 'den' must both be integers.")
        if den == 0:
            raise ValueError(f"{num}/{den} has a zero denominator.")
        return Fraction(num, den)
    raise ValueError(
        f"Expected an integer, a 'p/q' string or {{\"num\", \"den\"}}, got {value!r}."
    )


def _dump_rational(value: Fraction) -> dict:
    return {"num": value.numerator, "den": value.denominator}


def _as_element(value: Any) -> NovikovElement:
    if isinstance(value, NovikovElement):
        return value
    if isinstance(value, float):
        raise ValueError(f"{value!r} is not exact; write Novikov elements as text.")
    if isinstance(value, dict):
        extra = set(value) - {"terms", "truncation"}
        if extra:
            raise ValueError(f"Unknown element fields {sorted(extra)}.")
        terms = [(int(c), _as_rational(e)) for c, e in value.get("terms", [])]
        tau = value.get("truncation")
        return NovikovElement.make(terms, None if tau is None else _as_rational(tau))
    return element(value)


Rational = Annotated[Fraction, BeforeValidator(_as_rational), PlainSerializer(_dump_rational)]
Element = Annotated[NovikovElement, BeforeValidator(_as_element), PlainSerializer(format_element)]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)


# ---------------------------------------------------------------------------
# Payloads
# ---------------------------------------------------------------------------

class NovikovMatrixPayload(_Model):
    rows: list[list[Element]]
    truncation: Optional[Rational] = None

    def build(self) -> NovikovMatrix:
        return NovikovMatrix.make(self.rows, self.truncation)


class GeneratorModel(_Model):
    id: str
    degree: int


class EntryModel(_Model):
    target: str
    source: str
    value: Element


class ComplexPayload(_Model):
    generators: list[GeneratorModel]
    entries: list[EntryModel] = []
    period: int = Field(default=0, ge=0)
    truncation: Optional[Rational] = None

    def build(self) -> NovikovComplex:
        return NovikovComplex.from_entries(
            [(g.id, g.degree) for g in self.generators],
            {(e.target, e.source): e.value for e in self.entries},
            period=self.period,
            truncation=self.truncation,
        )


class GroupModel(_Model):
    E: list[Rational] = []
    mu: list[int] = []


class ObjectModel(_Model):
    id: str
    mu: int
    E: Rational = Fraction(0)


class MorphismModel(_Model):
    source: str
    target: str
    g: list[int] = []
    label_size: Optional[int] = 0
    count: Optional[int] = None


class FlowCategoryPayload(_Model):
    group: GroupModel = GroupModel()
    objects: list[ObjectModel]
    morphisms: list[MorphismModel] = []
    proper: bool = True
    E_proper: bool = True
    E_positive: bool = True
    gapped: bool = True

    def build(self) -> FlowCategoryDesc:
        return FlowCategoryDesc(
            NovikovGroupDesc.make(self.group.E, self.group.mu),
            tuple(FlowObject(o.id, o.mu, o.E) for o in self.objects),
            tuple(
                MorphismRecord(m.source, m.target, tuple(m.g), m.label_size, m.count)
                for m in self.morphisms
            ),
            self.proper, self.E_proper, self.E_positive, self.gapped,
        )


class CellModel(_Model):
    id: str
    dim: int = Field(ge=0)
    label: list[int]
    tag: str = ""


class StratSpacePayload(_Model):
    k: int = Field(ge=0)
    cells: list[CellModel]
    faces: list[tuple[str, str, int]] = []

    def build(self) -> CombStratSpace:
        return CombStratSpace(
            self.k,
            tuple(Cell(c.id, c.dim, StratumLabel.make(self.k, c.label), c.tag) for c in self.cells),
            tuple(tuple(f) for f in self.faces),
        )


class GeneratorPairModel(_Model):
    V: list[list[Rational]]
    W: list[list[Rational]]


class GroupRepPayload(_Model):
    n_V: int = Field(ge=0)
    n_W: int = Field(ge=0)
    generators: list[GeneratorPairModel] = []

    def build(self) -> FiniteGroupRep:
        return FiniteGroupRep.make(
            self.n_V, self.n_W, [(g.V, g.W) for g in self.generators],
            max_order=DEFAULTS["caps"]["group_order"],
        )


class SectionPayload(_Model):
    variables: list[str]
    corner_dim: int = Field(ge=0)
    components: list[str]
    group: Optional[GroupRepPayload] = None

    def build(self) -> SectionOnBox:
        rep = self.group.build() if self.group else None
        return section_from_strings(self.components, self.variables, self.corner_dim, rep)


class FaceModel(_Model):
    stratum: list[int]
    components: list[str]


class BoundaryDataPayload(_Model):
    corner_dim: int = Field(ge=0)
    free_dim: int = Field(ge=0)
    variables: Optional[list[str]] = None
    faces: list[FaceModel]
    group: Optional[GroupRepPayload] = None

    def build(self) -> BoundaryData:
        return BoundaryData.make(
            self.corner_dim, self.free_dim,
            {frozenset(f.stratum): f.components for f in self.faces},
            variables=self.variables,
            rep=self.group.build() if self.group else None,
        )


PAYLOADS = {
    "novikov_matrix": NovikovMatrixPayload,
    "complex": ComplexPayload,
    "flow_category": FlowCategoryPayload,
    "strat_space": StratSpacePayload,
    "section": SectionPayload,
    "group_rep": GroupRepPayload,
    "boundary_data": BoundaryDataPayload,
}


class _Envelope(_Model):
    fmt: Literal[1]
    kind: Kind
    payload: dict


# ---------------------------------------------------------------------------
# Documents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Document:
    kind: str
    payload: BaseModel
    fmt: int = 1

    def build(self) -> Any:
        """The domain object described by the payload.

        Raises:
            SchemaError: If the payload is well-typed but describes an
                impossible object (wrong matrix shape, float coefficient).
            NovCalcError: Domain errors such as IncompatibleBoundary pass
                through with their witnesses.
        """
        try:
            return self.payload.build()
        except NovCalcError:
            raise
        except (ValueError, TypeError) as exc:
            raise SchemaError(f"payload: {exc}", path="payload") from exc


def _schema_error(exc: ValidationError, prefix: str = "") -> SchemaError:
    first = exc.errors()[0]
    parts = ([prefix] if prefix else []) + [str(p) for p in first["loc"]]
    path = ".".join(parts)
    return SchemaError(f"{path or 'document'}: {first['msg']}", path=path)


def parse_document(text: str) -> Document:
    """Parse document text.

    Raises:
        ParseError: If the text is not JSON; carries line and column.
        SchemaError: If the JSON does not match the schema; carries the
            dotted path of the first offending field.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"Document is not valid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno}).",
            line=exc.lineno, column=exc.colno,
        ) from exc
    if not isinstance(raw, dict):
        raise SchemaError("document: expected a JSON object with fmt, kind and payload.")
    try:
        envelope = _Envelope.model_validate(raw)
    except ValidationError as exc:
        raise _schema_error(exc) from exc
    try:
        payload = PAYLOADS[envelope.kind].model_validate(envelope.payload)
    except ValidationError as exc:
        raise _schema_error(exc, "payload") from exc
    LOGGER.debug("parsed %s document", envelope.kind)
    return Document(envelope.kind, payload, envelope.fmt)


def read_document(source: str, kinds: Optional[tuple] = None) -> Document:
    """Read a document from a file, from stdin ('-') or by bundled example name.

    Raises:
        ParseError: If the text is not JSON.
        SchemaError: If it does not match the schema or its kind is not
            one of ``kinds``.
        ValueError: If the source names neither a file nor a bundled example.
    """
    if source == "-":
        text = sys.stdin.read()
    else:
        path = Path(source)
        if not path.is_file():
            path = example_path(source)
        text = path.read_text(encoding="utf-8")
    doc = parse_document(text)
    if kinds and doc.kind not in kinds:
        raise SchemaError(
            f"kind: expected {' or '.join(kinds)}, got '{doc.kind}'.", path="kind",
        )
    return doc


def serialize_document(doc: Document) -> str:
    """Canonical document text: sorted keys, two-space indent, trailing newline."""
    body = {"fmt": doc.fmt, "kind": doc.kind, "payload": doc.payload.model_dump(mode="json")}
    return json.dumps(body, sort_keys=True, indent=2) + "\n"


def _strings(values) -> list[str]:
    return [str(v) for v in values]


def _group_payload(rep: FiniteGroupRep) -> dict:
    return {
        "n_V": rep.n_V,
        "n_W": rep.n_W,
        "generators": [{"V": gv.tolist(), "W": gw.tolist()} for gv, gw in rep.generators],
    }


def document_for(obj: Any) -> Document:
    """Wrap a domain object in a document.

    Raises:
        TypeError: If the object has no document kind.
    """
    if isinstance(obj, NovikovMatrix):
        kind, data = "novikov_matrix", {"rows": [list(row) for row in obj.entries], "truncation": obj.truncation}
    elif isinstance(obj, NovikovComplex):
        kind, data = "complex", {
            "generators": [{"id": g, "degree": d} for g, d in obj.generators],
            "entries": [
                {"target": t, "source": s, "value": v} for (t, s), v in sorted(obj.entries().items())
            ],
            "period": obj.period,
            "truncation": obj.truncation,
        }
    elif isinstance(obj, FlowCategoryDesc):
        kind, data = "flow_category", {
            "group": {"E": list(obj.group.E), "mu": list(obj.group.mu)},
            "objects": [{"id": o.id, "mu": o.mu, "E": o.E} for o in obj.objects],
            "morphisms": [
                {
                    "source": m.source, "target": m.target, "g": list(m.g),
                    "label_size": m.label_size, "count": m.count,
                }
                for m in obj.morphisms
            ],
            "proper": obj.proper,
            "E_proper": obj.E_proper,
            "E_positive": obj.E_positive,
            "gapped": obj.gapped,
        }
    elif isinstance(obj, CombStratSpace):
        kind, data = "strat_space", {
            "k": obj.k,
            "cells": [
                {"id": c.id, "dim": c.dim, "label": c.label.sorted(), "tag": c.tag} for c in obj.cells
            ],
            "faces": [list(f) for f in obj.faces],
        }
    elif isinstance(obj, SectionOnBox):
        kind, data = "section", {
            "variables": _strings(obj.map.variables),
            "corner_dim": obj.corner_dim,
            "components": _strings(obj.map.components),
            "group": _group_payload(obj.rep) if obj.rep else None,
        }
    elif isinstance(obj, FiniteGroupRep):
        kind, data = "group_rep", _group_payload(obj)
    elif isinstance(obj, BoundaryData):
        kind, data = "boundary_data", {
            "corner_dim": obj.corner_dim,
            "free_dim": obj.free_dim,
            "variables": _strings(obj.variables),
            "faces": [
                {"stratum": sorted(T), "components": _strings(p.components)}
                for T, p in sorted(obj.faces.items(), key=lambda item: (len(item[0]), sorted(item[0])))
            ],
            "group": _group_payload(obj.rep) if obj.rep else None,
        }
    else:
        raise TypeError(f"No document kind for {type(obj).__name__}.")
    return Document(kind, PAYLOADS[kind].model_validate(data))


def payload_of(obj: Any) -> dict:
    """JSON-ready payload of a domain object, as it appears in its document."""
    return document_for(obj).payload.model_dump(mode="json")
