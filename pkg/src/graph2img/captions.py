"""Graph-to-text transduction: captions and source/target prompt pairs.

Captions linearize a pruned, salience-ordered graph into a single
comma-separated string.  Prompt pairs split an edit into a source prompt
(the shared background relations, anchoring what must be preserved) and
a target prompt (novel relations first, then the background, so the edit
leads while context is retained).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .graphs import RelationTriplet, SceneGraph, graph_diff, order_by_salience, prune_relations

PHRASE_SEPARATOR = ", "
DEFAULT_RELATION_CAP = 15


@dataclass(frozen=True)
class Caption:
    """Ordered phrases plus their joined text; raw_count is the
    pre-prune triplet count."""

    phrases: tuple[str, ...]
    text: str
    raw_count: int


@dataclass(frozen=True)
class PromptPair:
    """Source/target prompt texts with their constituent phrase lists.

    The phrase lists are already truncated to the cap in force; when the
    cap does not bind, target equals novel then background verbatim.
    """

    source: str
    target: str
    background_phrases: tuple[str, ...]
    novel_phrases: tuple[str, ...]


def phrase(t: RelationTriplet) -> str:
    """Join subject, relation and object with single spaces, verbatim."""
    return f"{t.subject} {t.relation} {t.object}"


def s2cap(g: SceneGraph, cap: int = DEFAULT_RELATION_CAP) -> Caption:
    """Prune, order by salience, and phrase a graph into a caption."""
    pruned = prune_relations(g, cap)
    phrases = tuple(phrase(t) for t in order_by_salience(pruned))
    return Caption(phrases=phrases, text=PHRASE_SEPARATOR.join(phrases), raw_count=len(g.relations))


def sg2prompts(g: SceneGraph, g_edited: SceneGraph, cap: int = DEFAULT_RELATION_CAP) -> PromptPair:
    """Build the source/target prompt pair for an edit from g to g_edited.

    Background and novel phrases are each ordered by salience in
    g_edited (ties keep g_edited insertion order).  Each prompt is
    independently truncated to at most `cap` phrases; in the target,
    novel phrases take priority over background fill.
    """
    delta = graph_diff(g, g_edited)
    background: list[str] = []
    novel: list[str] = []
    emitted: set[tuple[str, str, str]] = set()
    for t in order_by_salience(g_edited):
        key = t.key()
        if key in emitted:
            continue
        emitted.add(key)
        bare = replace(t, salience=None)
        if bare in delta.background:
            background.append(phrase(t))
        elif bare in delta.novel:
            novel.append(phrase(t))
    background = background[:cap]
    novel = novel[:cap]
    target = (novel + background)[:cap]
    return PromptPair(
        source=PHRASE_SEPARATOR.join(background),
        target=PHRASE_SEPARATOR.join(target),
        background_phrases=tuple(background),
        novel_phrases=tuple(novel),
    )
