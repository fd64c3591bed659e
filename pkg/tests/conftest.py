"""Shared fixtures and seeded random-input builders."""

from __future__ import annotations

from pathlib import Path

import pytest

from graph2img import SceneGraph, EntityBox, RelationTriplet, SplitMix64, load_extraction

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"

RELATION_LABELS = ("on", "under", "next to", "behind", "be in", "holds", "above")


@pytest.fixture
def forest_graph() -> SceneGraph:
    return load_extraction(FIXTURES / "forest_scene.json")


def random_graph(rng: SplitMix64, max_entities: int = 8, max_relations: int = 12, boxed_fraction: float = 0.7) -> SceneGraph:
    """A random valid graph: some entities boxed, relations possibly repeated."""
    n_entities = 2 + int(rng.random() * (max_entities - 1))
    entities: dict[str, EntityBox | None] = {}
    for i in range(n_entities):
        if rng.random() < boxed_fraction:
            box = EntityBox(
                x=rng.random() * 500,
                y=rng.random() * 500,
                w=rng.random() * 200,
                h=rng.random() * 200,
            )
        else:
            box = None
        entities[f"e{i}"] = box
    ids = list(entities)
    n_rel = int(rng.random() * (max_relations + 1))
    relations = []
    for _ in range(n_rel):
        s = ids[int(rng.random() * len(ids))]
        o = ids[int(rng.random() * len(ids))]
        r = RELATION_LABELS[int(rng.random() * len(RELATION_LABELS))]
        relations.append(RelationTriplet(s, r, o))
    return SceneGraph(entities=entities, relations=tuple(relations))


def random_graph_pair(rng: SplitMix64) -> tuple[SceneGraph, SceneGraph]:
    """Two graphs over one entity pool with overlapping relation sets."""
    base = random_graph(rng, max_entities=8, max_relations=20)
    ids = list(base.entities)
    kept = tuple(t for t in base.relations if rng.random() < 0.6)
    added = []
    for _ in range(int(rng.random() * 8)):
        s = ids[int(rng.random() * len(ids))]
        o = ids[int(rng.random() * len(ids))]
        r = RELATION_LABELS[int(rng.random() * len(RELATION_LABELS))]
        added.append(RelationTriplet(s, r, o))
    edited = SceneGraph(entities=base.entities, relations=kept + tuple(added))
    return base, edited
