"""Unified dispatch: one entry point covering generation and editing.

A request either carries just a scene graph (generation: caption the
graph, sample tokens, decode pixels) or a source latent plus a graph and
an edit script (editing: apply the script, build source/target prompts,
run the joint-conditioned diffusion editor).  Every request maps to
exactly one pathway.

Scene graphs enter through a one-method extraction adapter so that the
file-reading reference implementation can later be swapped for a live
extractor without touching the pipeline.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .captions import DEFAULT_RELATION_CAP, s2cap, sg2prompts
from .diffusion import DiffusionSchedule, EditConfig, as_latent, edit
from .errors import CollisionError, ConfigurationError, NotFoundError, ValidationError
from .graphs import EntityBox, RelationTriplet, SceneGraph, parse_scene_graph
from .text_encoding import DEFAULT_EMBED_DIM, encode_text
from .vargen import (
    ARModelParams,
    Codebook,
    decode_tokens,
    default_codebook,
    sample_tokens,
)

DEFAULT_GENERATE_GRID = (4, 4)


# ---------------------------------------------------------------------------
# edit scripts


@dataclass(frozen=True)
class ReplaceEntity:
    from_id: str
    to_id: str


@dataclass(frozen=True)
class AddRelation:
    subject: str
    relation: str
    object: str


@dataclass(frozen=True)
class RemoveRelation:
    subject: str
    relation: str
    object: str


@dataclass(frozen=True)
class AddEntity:
    entity_id: str
    box: EntityBox | None = None


EditOp = ReplaceEntity | AddRelation | RemoveRelation | AddEntity


@dataclass(frozen=True)
class EditScript:
    """Ordered edit operations producing an edited graph from a source graph."""

    ops: tuple[EditOp, ...]


def parse_edit_script(text: str) -> EditScript:
    """Parse the JSON op-list format.

    Example::

        {"ops": [{"op": "replace_entity", "from": "bear", "to": "wolf"},
                 {"op": "add_relation", "s": "tiger", "r": "be in", "o": "field"}]}
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"malformed edit script JSON: {e.msg}") from e
    if not isinstance(doc, dict) or not isinstance(doc.get("ops"), list):
        raise ValidationError("edit script needs an 'ops' array")
    ops: list[EditOp] = []
    for i, raw in enumerate(doc["ops"]):
        if not isinstance(raw, dict) or "op" not in raw:
            raise ValidationError(f"op #{i} must be an object with an 'op' field")
        kind = raw["op"]
        try:
            if kind == "replace_entity":
                ops.append(ReplaceEntity(from_id=raw["from"], to_id=raw["to"]))
            elif kind == "add_relation":
                ops.append(AddRelation(subject=raw["s"], relation=raw["r"], object=raw["o"]))
            elif kind == "remove_relation":
                ops.append(RemoveRelation(subject=raw["s"], relation=raw["r"], object=raw["o"]))
            elif kind == "add_entity":
                box = EntityBox(*(float(v) for v in raw["box"])) if raw.get("box") else None
                ops.append(AddEntity(entity_id=raw["id"], box=box))
            else:
                raise ValidationError(f"op #{i}: unknown op kind {kind!r}")
        except KeyError as e:
            raise ValidationError(f"op #{i} ({kind}): missing field {e}") from e
    return EditScript(ops=tuple(ops))


def apply_instruction(g: SceneGraph, script: EditScript) -> SceneGraph:
    """Apply edit operations in order and return the re-validated graph."""
    entities = dict(g.entities)
    relations = list(g.relations)
    for op in script.ops:
        if isinstance(op, ReplaceEntity):
            if op.from_id not in entities:
                raise NotFoundError(f"replace_entity: unknown entity {op.from_id!r}")
            if op.to_id in entities:
                raise CollisionError(f"replace_entity: entity {op.to_id!r} already exists")
            entities = {op.to_id if eid == op.from_id else eid: box for eid, box in entities.items()}
            relations = [
                RelationTriplet(
                    subject=op.to_id if t.subject == op.from_id else t.subject,
                    relation=t.relation,
                    object=op.to_id if t.object == op.from_id else t.object,
                )
                for t in relations
            ]
        elif isinstance(op, AddRelation):
            for eid in (op.subject, op.object):
                entities.setdefault(eid, None)
            relations.append(RelationTriplet(op.subject, op.relation, op.object))
        elif isinstance(op, RemoveRelation):
            key = (op.subject, op.relation, op.object)
            hits = [i for i, t in enumerate(relations) if t.key() == key]
            if not hits:
                raise NotFoundError(f"remove_relation: no triplet {key}")
            del relations[hits[-1]]  # last occurrence: exact inverse of add_relation
        elif isinstance(op, AddEntity):
            if op.entity_id in entities:
                raise CollisionError(f"add_entity: entity {op.entity_id!r} already exists")
            entities[op.entity_id] = op.box
        else:
            raise ValidationError(f"unsupported edit op {op!r}")
    return SceneGraph(entities=entities, relations=tuple(relations))


# ---------------------------------------------------------------------------
# extraction adapter


class GraphExtractor(Protocol):
    """Anything that can produce a scene graph from a source locator."""

    def extract(self, source: str | Path) -> SceneGraph: ...


class JsonFileExtractor:
    """Reference adapter: reads the scene-graph JSON wire format from disk."""

    def extract(self, source: str | Path) -> SceneGraph:
        path = Path(source)
        text = path.read_text(encoding="utf-8")
        return parse_scene_graph(text)


def load_extraction(path: str | Path) -> SceneGraph:
    """Load a scene graph through the reference file adapter."""
    return JsonFileExtractor().extract(path)


# ---------------------------------------------------------------------------
# unified dispatch


@dataclass(frozen=True)
class GenerateRequest:
    graph: SceneGraph


@dataclass(frozen=True)
class EditRequest:
    source_latent: np.ndarray
    graph: SceneGraph
    instruction: EditScript

    def __post_init__(self):
        object.__setattr__(self, "source_latent", as_latent(self.source_latent))
        if not self.instruction.ops:
            raise ValidationError("edit requests need a non-empty edit script")


UnifiedRequest = GenerateRequest | EditRequest


@dataclass(frozen=True)
class PipelineModels:
    """Per-pathway model parameters; load only what the request needs."""

    ar_params: ARModelParams | None = None
    codebook: Codebook | None = None
    denoiser: object | None = None
    schedule: DiffusionSchedule | None = None


@dataclass(frozen=True)
class PipelineConfig:
    cap: int = DEFAULT_RELATION_CAP
    embed_dim: int = DEFAULT_EMBED_DIM
    temperature: float = 1.0
    seed: int = 0
    grid: tuple[int, int] = DEFAULT_GENERATE_GRID
    edit: EditConfig | None = None


def unified_dispatch(request: UnifiedRequest, models: PipelineModels, config: PipelineConfig):
    """Route a request to token generation or diffusion editing.

    Generation returns an ImageGrid; editing returns the edited latent.
    Deterministic given the seeds in `config`.
    """
    if isinstance(request, GenerateRequest):
        if models.ar_params is None:
            raise ConfigurationError("generation needs autoregressive model parameters")
        codebook = models.codebook if models.codebook is not None else default_codebook()
        caption = s2cap(request.graph, config.cap)
        e_t = encode_text(caption.text, models.ar_params.embed_dim)
        rows, cols = config.grid
        z = sample_tokens(
            e_t,
            models.ar_params,
            length=rows * cols,
            grid=config.grid,
            temperature=config.temperature,
            seed=config.seed,
        )
        return decode_tokens(z, codebook)

    if isinstance(request, EditRequest):
        if models.denoiser is None or models.schedule is None or config.edit is None:
            raise ConfigurationError("editing needs a denoiser, a schedule, and an edit config")
        edited_graph = apply_instruction(request.graph, request.instruction)
        if edited_graph == request.graph:
            warnings.warn("edit script leaves the graph unchanged; proceeding as a null edit", UserWarning)
        prompts = sg2prompts(request.graph, edited_graph, config.cap)
        c_src = encode_text(prompts.source, config.embed_dim)
        c_tgt = encode_text(prompts.target, config.embed_dim)
        c_null = encode_text("", config.embed_dim)
        return edit(
            request.source_latent,
            c_src,
            c_tgt,
            c_null,
            config.edit,
            models.schedule,
            models.denoiser,
        )

    raise ValidationError(f"unsupported request type {type(request).__name__}")
