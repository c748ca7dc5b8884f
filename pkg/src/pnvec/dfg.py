"""Petri net -> directly-follows graph -> training tuples.

Places are removed and every pair of transitions joined through a place
becomes an edge.  Each edge witness ``(place, t_in, t_out)`` is kept, so an
edge that is realised through two different places yields two tuples.
"""

from __future__ import annotations

import csv
import enum
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import StructureError
from .pnml_io import PetriNet, natural_key

NONE_TOKEN = "None"


class SilentPolicy(enum.Enum):
    """How silent transitions are turned into tokens."""

    SHARED_NONE = "none"
    UNIQUE_PER_POSITION = "unique"

    @classmethod
    def parse(cls, value) -> "SilentPolicy":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown silent policy {value!r} (expected 'none' or 'unique')") from None


@dataclass
class Dfg:
    model_id: str
    nodes: list
    edges: dict  # (from_token, to_token) -> multiplicity

    @property
    def size(self) -> int:
        return sum(self.edges.values())


def transition_tokens(net: PetriNet, policy) -> dict:
    """Map transition id -> token under ``policy``.

    Under the unique policy the i-th silent transition (in net order) becomes
    ``n_<i>``; the numbering is per model.
    """
    policy = SilentPolicy.parse(policy)
    tokens, k = {}, 0
    for t in net.transitions:
        if not t.silent:
            tokens[t.id] = t.label
        elif policy is SilentPolicy.SHARED_NONE:
            tokens[t.id] = NONE_TOKEN
        else:
            tokens[t.id] = f"n_{k}"
            k += 1
    return tokens


def to_dfg(net: PetriNet, policy=SilentPolicy.SHARED_NONE, model_id=None) -> Dfg:
    tokens = transition_tokens(net, policy)
    place_set = set(net.places)
    producers = {p: set() for p in net.places}
    consumers = {p: set() for p in net.places}
    for a in net.arcs:
        if a.target in place_set and a.source in tokens:
            producers[a.target].add(a.source)
        elif a.source in place_set and a.target in tokens:
            consumers[a.source].add(a.target)

    edges = Counter()
    for p in net.places:
        for t_in in producers[p]:
            for t_out in consumers[p]:
                edges[(tokens[t_in], tokens[t_out])] += 1

    nodes = sorted(set(tokens.values()), key=natural_key)
    ordered = {e: edges[e] for e in sorted(edges, key=lambda e: (natural_key(e[0]), natural_key(e[1])))}
    return Dfg(model_id if model_id is not None else net.id, nodes, ordered)


def extract_tuples(dfg: Dfg, dedup: bool = False) -> list:
    """One ``(t_i, t_next, model)`` tuple per edge witness, sorted by token pair."""
    out = []
    for (a, b), m in dfg.edges.items():
        out.extend([(a, b, dfg.model_id)] * (1 if dedup else m))
    return out


@dataclass
class Vocabulary:
    tokens: dict  # token -> index
    models: dict  # model id -> index
    frequency: dict = field(default_factory=dict)  # token -> count as target

    @property
    def k(self) -> int:
        return len(self.tokens)

    @property
    def n(self) -> int:
        return len(self.models)

    def token_list(self) -> list:
        return list(self.tokens)

    def model_list(self) -> list:
        return list(self.models)


@dataclass
class Corpus:
    tuples: list
    vocab: Vocabulary

    def __len__(self):
        return len(self.tuples)


def build_corpus(dfgs: Iterable[Dfg], dedup: bool = False) -> Corpus:
    dfgs = list(dfgs)
    models = {}
    for g in dfgs:
        if g.model_id in models:
            raise StructureError(f"duplicate model id {g.model_id!r}")
        models[g.model_id] = len(models)

    tuples = [tup for g in dfgs for tup in extract_tuples(g, dedup=dedup)]
    all_tokens = {tok for g in dfgs for tok in g.nodes}
    tokens = {tok: i for i, tok in enumerate(sorted(all_tokens, key=natural_key))}
    freq = Counter({tok: 0 for tok in tokens})
    for _, b, _ in tuples:
        freq[b] += 1
    return Corpus(tuples, Vocabulary(tokens, models, dict(freq)))


def corpus_from_nets(nets: Iterable[PetriNet], policy=SilentPolicy.SHARED_NONE, dedup: bool = False) -> Corpus:
    return build_corpus([to_dfg(n, policy) for n in nets], dedup=dedup)


def task_histogram(corpus: Corpus) -> dict:
    """Token occurrence counts over both tuple positions."""
    counts = Counter()
    for a, b, _ in corpus.tuples:
        counts[a] += 1
        counts[b] += 1
    return {tok: counts[tok] for tok in sorted(counts, key=natural_key)}


def write_corpus_jsonl(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a, b, m in corpus.tuples:
            fh.write(json.dumps({"t": a, "t_next": b, "model": m}) + "\n")


def read_corpus_jsonl(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [(r["t"], r["t_next"], r["model"]) for r in map(json.loads, filter(str.strip, fh))]


def write_histogram_csv(hist: dict, path) -> None:
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["token", "count"])
        for tok, c in hist.items():
            w.writerow([tok, c])
