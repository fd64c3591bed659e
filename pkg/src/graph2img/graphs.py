"""Scene-graph data model: JSON ingestion, pruning, salience, diffing.

A scene graph is a set of entities (optionally carrying a bounding box)
plus an ordered list of directed relation triplets (subject, relation,
object).  All values are immutable after construction and every function
here is pure, so graphs are safe to share across threads.

The JSON wire format (UTF-8, exact field names)::

    { "entities":  [ {"id": "<string>", "box": [x, y, w, h]?}, ... ],
      "relations": [ {"s": "<id>", "r": "<string>", "o": "<id>"}, ... ] }

"box" is optional; all numbers must be finite.  Serialization emits
entities and relations in stored order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from .errors import ParseError, ReferentialIntegrityError, ValidationError


@dataclass(frozen=True)
class EntityBox:
    """Axis-aligned bounding box in absolute pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValidationError(f"box field {name!r} must be finite, got {v!r}")
        if self.w < 0 or self.h < 0:
            raise ValidationError(f"box width/height must be non-negative, got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class RelationTriplet:
    """One (subject, relation, object) edge.

    Equality and hashing consider only the three labels; the cached
    salience is diagnostic and never participates in set semantics.
    """

    subject: str
    relation: str
    object: str
    salience: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.subject or not self.relation or not self.object:
            raise ValidationError(f"triplet labels must be non-empty, got {self.key()}")
        if self.salience is not None and not (math.isfinite(self.salience) and self.salience >= 0):
            raise ValidationError(f"salience must be a non-negative real, got {self.salience!r}")

    def key(self) -> tuple[str, str, str]:
        return (self.subject, self.relation, self.object)

    def reversed_key(self) -> tuple[str, str, str]:
        return (self.object, self.relation, self.subject)


@dataclass(frozen=True)
class SceneGraph:
    """Entities keyed by id plus relations in insertion order.

    Every subject/object id must be a declared entity; duplicate
    triplets are permitted until prune_relations collapses them.
    """

    entities: dict[str, EntityBox | None]
    relations: tuple[RelationTriplet, ...]

    def __post_init__(self):
        object.__setattr__(self, "relations", tuple(self.relations))
        for t in self.relations:
            for eid in (t.subject, t.object):
                if eid not in self.entities:
                    raise ReferentialIntegrityError(
                        f"relation {t.key()} references undeclared entity {eid!r}", entity_id=eid
                    )


@dataclass(frozen=True)
class GraphDelta:
    """Relation-set difference between an original and an edited graph."""

    background: frozenset[RelationTriplet]
    novel: frozenset[RelationTriplet]
    removed: frozenset[RelationTriplet]

    def __post_init__(self):
        if self.background & self.novel or self.background & self.removed:
            raise ValidationError("delta sets must be pairwise disjoint")


def _reject_nonfinite(token: str):
    raise ValueError(f"non-finite number {token!r} is not allowed")


def parse_scene_graph(text: str) -> SceneGraph:
    """Parse the JSON wire format into a SceneGraph.

    Raises ParseError (with a byte offset) for malformed JSON,
    ValidationError for schema violations, and ReferentialIntegrityError
    for relations that name undeclared entities.
    """
    try:
        doc = json.loads(text, parse_constant=_reject_nonfinite)
    except json.JSONDecodeError as e:
        offset = len(text[: e.pos].encode("utf-8")) if e.pos is not None else None
        raise ParseError(f"malformed JSON at byte {offset}: {e.msg}", byte_offset=offset) from e
    except ValueError as e:
        raise ParseError(str(e)) from e

    if not isinstance(doc, dict):
        raise ValidationError("graph document must be a JSON object")
    for key in ("entities", "relations"):
        if key not in doc or not isinstance(doc[key], list):
            raise ValidationError(f"graph document needs a {key!r} array")

    entities: dict[str, EntityBox | None] = {}
    for i, ent in enumerate(doc["entities"]):
        if not isinstance(ent, dict) or not isinstance(ent.get("id"), str):
            raise ValidationError(f"entity #{i} must be an object with a string 'id'")
        eid = ent["id"]
        if eid in entities:
            raise ValidationError(f"duplicate entity id {eid!r}")
        box = None
        if "box" in ent and ent["box"] is not None:
            raw = ent["box"]
            if not isinstance(raw, list) or len(raw) != 4 or not all(isinstance(v, (int, float)) for v in raw):
                raise ValidationError(f"entity {eid!r}: 'box' must be a [x, y, w, h] number array")
            box = EntityBox(*(float(v) for v in raw))
        entities[eid] = box

    relations = []
    for i, rel in enumerate(doc["relations"]):
        if not isinstance(rel, dict) or not all(isinstance(rel.get(k), str) for k in ("s", "r", "o")):
            raise ValidationError(f"relation #{i} must be an object with string 's', 'r', 'o'")
        relations.append(RelationTriplet(rel["s"], rel["r"], rel["o"]))

    return SceneGraph(entities=entities, relations=tuple(relations))


def serialize_scene_graph(g: SceneGraph) -> str:
    """Serialize a graph back to the JSON wire format, preserving order."""
    doc = {
        "entities": [
            {"id": eid} if box is None else {"id": eid, "box": [box.x, box.y, box.w, box.h]}
            for eid, box in g.entities.items()
        ],
        "relations": [{"s": t.subject, "r": t.relation, "o": t.object} for t in g.relations],
    }
    return json.dumps(doc)


def salience(t: RelationTriplet, g: SceneGraph) -> float:
    """Subject box area plus object box area; a missing box contributes 0."""
    total = 0.0
    for eid in (t.subject, t.object):
        if eid not in g.entities:
            raise ReferentialIntegrityError(f"unknown entity {eid!r}", entity_id=eid)
        box = g.entities[eid]
        if box is not None:
            total += box.area
    return total


def order_by_salience(g: SceneGraph) -> list[RelationTriplet]:
    """Relations sorted by salience, descending, stable on ties.

    Each returned triplet carries its computed salience.
    """
    scored = [replace(t, salience=salience(t, g)) for t in g.relations]
    return sorted(scored, key=lambda t: -t.salience)


def prune_relations(g: SceneGraph, cap: int) -> SceneGraph:
    """Collapse duplicate and bidirectional relations, then keep the top `cap`.

    Exact duplicates collapse to their first occurrence.  When both
    (a, r, b) and (b, r, a) are present, the first in insertion order
    survives.  Survivors are ranked by order_by_salience and truncated
    to `cap`; the output keeps that ranked order.
    """
    if cap < 1:
        raise ValidationError(f"relation cap must be a positive integer, got {cap}")
    seen: set[tuple[str, str, str]] = set()
    kept = []
    for t in g.relations:
        if t.key() in seen or t.reversed_key() in seen:
            continue
        seen.add(t.key())
        kept.append(t)
    ordered = order_by_salience(SceneGraph(entities=g.entities, relations=tuple(kept)))
    return SceneGraph(entities=g.entities, relations=tuple(ordered[:cap]))


def graph_diff(g: SceneGraph, g_edited: SceneGraph) -> GraphDelta:
    """Split relations into background (shared), novel, and removed sets."""
    before = {replace(t, salience=None) for t in g.relations}
    after = {replace(t, salience=None) for t in g_edited.relations}
    return GraphDelta(
        background=frozenset(before & after),
        novel=frozenset(after - before),
        removed=frozenset(before - after),
    )
