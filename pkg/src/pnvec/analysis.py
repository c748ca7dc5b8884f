"""Downstream tasks on trained embeddings."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import stats

from .cluster import NOISE, cosine_similarity_matrix, pairwise_distances
from .embedder import EmbeddingSpace
from .errors import NoVariance, SingleClass, StratifyError
from .netgen import RULES, RuleConfig


# --------------------------------------------------------------------------
# retrieval and similarity


def query_nearest(space: EmbeddingSpace, m, topk: int) -> list:
    """The ``topk`` other models ranked by cosine similarity to model ``m``."""
    qi = space.model_index(m)
    n = space.X.shape[0]
    if not 0 <= topk <= n - 1:
        raise ValueError(f"topk must lie in [0, {n - 1}]")
    sims = cosine_similarity_matrix(space.X[qi:qi + 1], space.X)[0]
    ids = space.vocab.model_list()
    ranked = sorted((i for i in range(n) if i != qi), key=lambda i: (-sims[i], ids[i]))
    return [(ids[i], float(sims[i])) for i in ranked[:topk]]


def query_models_for_task(space: EmbeddingSpace, t, topk: int) -> list:
    """Models ranked by cosine similarity between their vector and task ``t``'s vector."""
    ti = space.token_index(t)
    sims = cosine_similarity_matrix(space.T[ti:ti + 1], space.X)[0]
    ids = space.vocab.model_list()
    ranked = sorted(range(len(ids)), key=lambda i: (-sims[i], ids[i]))
    return [(ids[i], float(sims[i])) for i in ranked[:topk]]


def task_similarity_matrix(space: EmbeddingSpace) -> np.ndarray:
    return cosine_similarity_matrix(space.T)


def task_model_matrix(space: EmbeddingSpace) -> np.ndarray:
    """k x n cosine similarities between task input vectors and model vectors.

    The two sets of vectors are trained in different roles, so these scores
    are a relevance signal rather than a model-to-model style similarity.
    """
    return cosine_similarity_matrix(space.T, space.X)


def write_matrix_csv(M, row_ids, col_ids, path) -> None:
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([""] + list(col_ids))
        for rid, row in zip(row_ids, M):
            w.writerow([rid] + [repr(float(x)) for x in row])


# --------------------------------------------------------------------------
# k-NN classification


@dataclass
class ConfusionMatrix:
    classes: list
    counts: np.ndarray  # rows: true class, columns: predicted class

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total if self.total else float("nan")

    def to_text(self) -> str:
        width = max(5, *(len(str(c)) for c in self.classes))
        head = " " * width + " | " + " ".join(f"{str(c):>{width}}" for c in self.classes)
        lines = [head, "-" * len(head)]
        for c, row in zip(self.classes, self.counts):
            lines.append(f"{str(c):>{width}} | " + " ".join(f"{int(x):>{width}}" for x in row))
        lines.append(f"accuracy = {self.accuracy:.4f}")
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        with open(Path(path), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["true\\pred"] + [str(c) for c in self.classes])
            for c, row in zip(self.classes, self.counts):
                w.writerow([str(c)] + [int(x) for x in row])


def stratified_folds(labels, folds: int, rng) -> np.ndarray:
    """Fold index per instance; every class is spread evenly over the folds.

    ``folds == len(labels)`` means leave-one-out and skips stratification.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if folds < 2:
        raise ValueError("need at least two folds")
    if folds == n:
        return rng.permutation(n)
    assign = np.empty(n, dtype=int)
    offset = 0
    for c in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == c)
        if len(idx) < folds:
            raise StratifyError(f"class {c!r} has {len(idx)} members, fewer than {folds} folds")
        idx = rng.permutation(idx)
        assign[idx] = (offset + np.arange(len(idx))) % folds
        offset = (offset + len(idx)) % folds
    return assign


def knn_predict(D_test_train: np.ndarray, train_labels, k: int = 1) -> list:
    """Majority vote among the ``k`` nearest training points.

    Equal distances are ordered by label and vote ties go to the class with
    the nearest member, so the result does not depend on training order.
    """
    train_labels = list(train_labels)
    out = []
    for row in D_test_train:
        order = sorted(range(len(row)), key=lambda j: (row[j], train_labels[j]))[:k]
        votes = Counter(train_labels[j] for j in order)
        best = max(votes.values())
        tied = {c for c, v in votes.items() if v == best}
        out.append(next(train_labels[j] for j in order if train_labels[j] in tied))
    return out


def knn_cross_validate(X, labels, k: int = 1, folds: int = 5, seed: int = 0) -> ConfusionMatrix:
    labels = list(labels)
    D = pairwise_distances(X)
    rng = np.random.default_rng(seed)
    fold_of = stratified_folds(labels, folds, rng)
    classes = sorted(set(labels))
    pos = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=int)
    for f in range(folds):
        test = np.flatnonzero(fold_of == f)
        train = np.flatnonzero(fold_of != f)
        if not len(test):
            continue
        pred = knn_predict(D[np.ix_(test, train)], [labels[j] for j in train], k)
        for i, p in zip(test, pred):
            counts[pos[labels[i]], pos[p]] += 1
    return ConfusionMatrix(classes, counts)


def majority_baseline(labels) -> float:
    counts = Counter(labels)
    return max(counts.values()) / sum(counts.values())


# --------------------------------------------------------------------------
# rule tree


@dataclass
class TreeNode:
    counts: dict  # cluster label -> number of training instances
    rule: Optional[str] = None
    branches: list = field(default_factory=list)  # (tuple of field values, TreeNode)

    @property
    def is_leaf(self) -> bool:
        return self.rule is None

    @property
    def label(self):
        return max(sorted(self.counts), key=lambda c: self.counts[c])

    @property
    def size(self) -> int:
        return sum(self.counts.values())

    @property
    def purity(self) -> float:
        return self.counts[self.label] / self.size


@dataclass
class RuleTree:
    root: TreeNode

    def leaves(self) -> list:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.extend(child for _, child in reversed(node.branches))
        return out

    @property
    def purity(self) -> float:
        leaves = self.leaves()
        return sum(leaf.counts[leaf.label] for leaf in leaves) / sum(leaf.size for leaf in leaves)

    @property
    def depth(self) -> int:
        def walk(node):
            return 0 if node.is_leaf else 1 + max(walk(c) for _, c in node.branches)
        return walk(self.root)

    def predict(self, cfg: RuleConfig):
        node = self.root
        while not node.is_leaf:
            value = getattr(cfg, node.rule)
            nxt = next((c for vals, c in node.branches if value in vals), None)
            if nxt is None:
                break
            node = nxt
        return node.label

    def to_text(self) -> str:
        lines = []

        def walk(node, indent, prefix):
            pad = "  " * indent
            if node.is_leaf:
                lines.append(f"{pad}{prefix}cluster {node.label} (n={node.size}, purity={node.purity:.3f})")
                return
            lines.append(f"{pad}{prefix}split on {node.rule}")
            for vals, child in node.branches:
                walk(child, indent + 1, f"{node.rule}={','.join(map(str, vals))}: ")

        walk(self.root, 0, "")
        return "\n".join(lines)

    def to_dot(self) -> str:
        lines = ["digraph rule_tree {", "  node [shape=box];"]
        counter = [0]

        def walk(node):
            nid = f"n{counter[0]}"
            counter[0] += 1
            if node.is_leaf:
                lines.append(f'  {nid} [label="cluster {node.label}\\nn={node.size} purity={node.purity:.2f}", style=rounded];')
            else:
                lines.append(f'  {nid} [label="{node.rule}"];')
                for vals, child in node.branches:
                    cid = walk(child)
                    lines.append(f'  {nid} -> {cid} [label="{",".join(map(str, vals))}"];')
            return nid

        walk(self.root)
        lines.append("}")
        return "\n".join(lines) + "\n"


def _gini(labels) -> Fraction:
    n = len(labels)
    return 1 - sum(Fraction(c, n) ** 2 for c in Counter(labels).values())


def _candidate_splits(cfgs):
    for f in RULES:
        present = sorted({getattr(c, f) for c in cfgs})
        if len(present) < 2:
            continue
        if f == "B":
            low = [v for v in present if v == 0]
            high = tuple(v for v in present if v > 0)
            if low and high:
                yield f, [(0,), high]
            if len(present) == 3:
                yield f, [(0,), (1,), (2,)]
            elif not low:
                yield f, [(v,) for v in present]
        else:
            yield f, [(v,) for v in present]


def fit_rule_tree(configs: Sequence[RuleConfig], cluster_labels, skip_noise: bool = True) -> RuleTree:
    """Greedy Gini tree on rule flags that predicts cluster labels.

    Growth stops only at pure nodes or when no flag separates the node's
    instances, so labels that are a function of the flags are always fit
    exactly.  Ties in gain prefer fewer branches, then earlier flags.
    """
    configs = list(configs)
    labels = list(cluster_labels)
    if len(configs) != len(labels):
        raise ValueError("configs and labels differ in length")
    pairs = [(c, y) for c, y in zip(configs, labels) if not (skip_noise and y == NOISE)]
    if len({y for _, y in pairs}) < 2:
        raise SingleClass("need at least two distinct cluster labels")

    def grow(items):
        ys = [y for _, y in items]
        node = TreeNode(dict(sorted(Counter(ys).items())))
        if len(node.counts) == 1:
            return node
        base = _gini(ys)
        best = None
        for f, groups in _candidate_splits([c for c, _ in items]):
            parts = [[(c, y) for c, y in items if getattr(c, f) in g] for g in groups]
            impurity = sum(Fraction(len(p), len(items)) * _gini([y for _, y in p]) for p in parts)
            key = (base - impurity, -len(groups))
            if best is None or key > best[0]:
                best = (key, f, groups, parts)
        if best is None:
            return node
        _, f, groups, parts = best
        node.rule = f
        node.branches = [(tuple(g), grow(p)) for g, p in zip(groups, parts)]
        return node

    return RuleTree(grow(pairs))


def cluster_rule_purity(cluster_labels, configs: Sequence[RuleConfig], fields, binary_b: bool = False) -> float:
    """Share of clustered models whose flag combination equals their cluster's mode."""
    labels = list(cluster_labels)
    configs = list(configs)
    if len(labels) != len(configs):
        raise ValueError("labels and configs differ in length")

    def key(cfg):
        return tuple(int(getattr(cfg, f) > 0) if (f == "B" and binary_b) else getattr(cfg, f) for f in fields)

    groups = {}
    for y, cfg in zip(labels, configs):
        if y != NOISE:
            groups.setdefault(y, []).append(key(cfg))
    total = sum(len(v) for v in groups.values())
    if total == 0:
        return float("nan")
    hits = sum(Counter(v).most_common(1)[0][1] for v in groups.values())
    return hits / total


# --------------------------------------------------------------------------
# statistics


class WelchResult(NamedTuple):
    t: float
    p: float
    reject: bool
    df: float


def welch_t_test(a, b, alpha: float = 0.01, strict: bool = False) -> WelchResult:
    """Two-sided Welch t-test.

    When both samples are constant with equal means the statistic is
    undefined; that case returns ``reject=False`` (or raises
    :class:`NoVariance` with ``strict=True``).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least two values")
    va, vb = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    diff = a.mean() - b.mean()
    se2 = va + vb
    if se2 == 0:
        if diff == 0:
            if strict:
                raise NoVariance("both samples are constant and equal")
            return WelchResult(0.0, 1.0, False, float("nan"))
        return WelchResult(float(np.copysign(np.inf, diff)), 0.0, True, float("nan"))
    t = diff / np.sqrt(se2)
    # df is scale-free; normalising first keeps tiny variances from underflowing when squared
    ra, rb = va / max(va, vb), vb / max(va, vb)
    df = (ra + rb) ** 2 / (ra ** 2 / (len(a) - 1) + rb ** 2 / (len(b) - 1))
    p = float(2 * stats.t.sf(abs(t), df))
    return WelchResult(float(t), p, p < alpha, float(df))


def flag_distance(a: RuleConfig, b: RuleConfig) -> int:
    """Number of rule flags on which two configurations differ."""
    return sum(getattr(a, f) != getattr(b, f) for f in RULES)

