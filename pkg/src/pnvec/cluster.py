"""HDBSCAN under cosine distance, and silhouette scores.

Cosine distance is not a metric, but nothing below relies on the triangle
inequality: core distances, mutual reachability and the spanning tree are all
well defined for any symmetric dissimilarity.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DegenerateVector, TooFewPoints, UndefinedSilhouette

NOISE = -1


def cosine_distance(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise DegenerateVector("cosine distance of a zero vector is undefined")
    d = 1.0 - float(u @ v) / (nu * nv)
    return min(max(d, 0.0), 2.0)


def pairwise_distances(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    norms = np.linalg.norm(X, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DegenerateVector(f"row {zero[0]} is all zeros", index=int(zero[0]))
    U = X / norms[:, None]
    D = 1.0 - U @ U.T
    D = np.clip((D + D.T) / 2.0, 0.0, 2.0)
    np.fill_diagonal(D, 0.0)
    return D


def cosine_similarity_matrix(A, B=None) -> np.ndarray:
    """Row-wise cosine similarities between ``A`` and ``B`` (or ``A`` itself)."""
    A = np.asarray(A, dtype=float)
    B = A if B is None else np.asarray(B, dtype=float)
    for name, M in (("A", A), ("B", B)):
        nz = np.flatnonzero(np.linalg.norm(M, axis=1) == 0)
        if nz.size:
            raise DegenerateVector(f"row {nz[0]} of {name} is all zeros", index=int(nz[0]))
    Ua = A / np.linalg.norm(A, axis=1)[:, None]
    Ub = B / np.linalg.norm(B, axis=1)[:, None]
    S = np.clip(Ua @ Ub.T, -1.0, 1.0)
    if B is A:
        S = (S + S.T) / 2.0
        np.fill_diagonal(S, 1.0)
    return S


# --------------------------------------------------------------------------
# HDBSCAN


def core_distances(D: np.ndarray, min_samples: int) -> np.ndarray:
    # the point itself counts as its first neighbour
    return np.sort(D, axis=1)[:, min_samples - 1]


def mutual_reachability(D: np.ndarray, min_samples: int) -> np.ndarray:
    core = core_distances(D, min_samples)
    M = np.maximum(D, np.maximum.outer(core, core))
    np.fill_diagonal(M, 0.0)
    return M


def minimum_spanning_tree(M: np.ndarray) -> list:
    """Kruskal over the complete graph; ties broken by ``(min index, max index)``."""
    n = M.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    w = M[iu, ju]
    order = np.lexsort((ju, iu, w))
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    edges = []
    for e in order:
        a, b = int(iu[e]), int(ju[e])
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
            edges.append((a, b, float(w[e])))
            if len(edges) == n - 1:
                break
    return edges


def _lambda(dist: float) -> float:
    return np.inf if dist <= 0 else 1.0 / dist


@dataclass
class CondensedCluster:
    id: int
    parent: Optional[int]
    points: frozenset
    birth: float  # lambda at which the cluster appears
    death: float = np.inf
    children: list = field(default_factory=list)
    stability: float = 0.0


def condense(mst: list, n: int, min_cluster_size: int) -> list:
    """Condensed cluster tree from spanning-tree edges.

    Edges are removed in descending weight, all edges of one weight at once.
    A cluster whose points break into two or more pieces of at least
    ``min_cluster_size`` dies and spawns those pieces as children; smaller
    pieces fall out as noise at that level.
    """
    root = CondensedCluster(0, None, frozenset(range(n)), 0.0)
    clusters = [root]
    active = {0: set(range(n))}
    adjacency = {i: set() for i in range(n)}
    for a, b, _ in mst:
        adjacency[a].add(b)
        adjacency[b].add(a)

    by_weight = {}
    for a, b, w in mst:
        by_weight.setdefault(w, []).append((a, b))

    for w in sorted(by_weight, reverse=True):
        lam = _lambda(w)
        for a, b in by_weight[w]:
            adjacency[a].discard(b)
            adjacency[b].discard(a)
        for cid in list(active):
            members = active[cid]
            pieces = _components(members, adjacency)
            if len(pieces) == 1:
                continue
            c = clusters[cid]
            big = [p for p in pieces if len(p) >= min_cluster_size]
            for p in pieces:
                if len(p) < min_cluster_size:
                    c.stability += len(p) * (lam - c.birth)
            if len(big) >= 2:
                c.death = lam
                del active[cid]
                for p in sorted(big, key=min):
                    child = CondensedCluster(len(clusters), cid, frozenset(p), lam)
                    clusters.append(child)
                    c.children.append(child.id)
                    c.stability += len(p) * (lam - c.birth)
                    active[child.id] = set(p)
            elif len(big) == 1:
                active[cid] = set(big[0])
            else:
                c.death = lam
                del active[cid]
    return clusters


def _components(members: set, adjacency: dict) -> list:
    seen, pieces = set(), []
    for start in sorted(members):
        if start in seen:
            continue
        stack, piece = [start], set()
        seen.add(start)
        while stack:
            v = stack.pop()
            piece.add(v)
            for u in adjacency[v]:
                if u in members and u not in seen:
                    seen.add(u)
                    stack.append(u)
        pieces.append(piece)
    return pieces


def select_clusters(clusters: list) -> list:
    """Excess-of-mass selection; the root is never selected."""
    selected = {}
    subtree = {}
    for c in reversed(clusters):
        if c.parent is None:
            continue
        if not c.children:
            selected[c.id] = True
            subtree[c.id] = c.stability
            continue
        child_total = sum(subtree[k] for k in c.children)
        if child_total > c.stability:
            selected[c.id] = False
            subtree[c.id] = child_total
        else:
            selected[c.id] = True
            subtree[c.id] = c.stability
            stack = list(c.children)
            while stack:
                k = stack.pop()
                selected[k] = False
                stack.extend(clusters[k].children)
    return sorted((cid for cid, ok in selected.items() if ok), key=lambda cid: min(clusters[cid].points))


def hdbscan_labels(D: np.ndarray, min_cluster_size: int, min_samples: Optional[int] = None) -> np.ndarray:
    """HDBSCAN labels from a precomputed dissimilarity matrix (noise = -1)."""
    n = D.shape[0]
    if min_cluster_size < 2:
        raise ValueError("min_cluster_size must be >= 2")
    if n < min_cluster_size:
        raise TooFewPoints(f"{n} points but min_cluster_size={min_cluster_size}")
    min_samples = min_cluster_size if min_samples is None else min_samples
    if not 1 <= min_samples <= n:
        raise ValueError(f"min_samples must lie in [1, {n}]")
    M = mutual_reachability(D, min_samples)
    clusters = condense(minimum_spanning_tree(M), n, min_cluster_size)
    labels = np.full(n, NOISE, dtype=int)
    for label, cid in enumerate(select_clusters(clusters)):
        labels[list(clusters[cid].points)] = label
    return labels


def hdbscan(X, min_cluster_size: int, min_samples: Optional[int] = None) -> np.ndarray:
    """Cluster the rows of ``X`` under cosine distance."""
    return hdbscan_labels(pairwise_distances(X), min_cluster_size, min_samples)


# --------------------------------------------------------------------------
# silhouette


def silhouette_from_distances(D: np.ndarray, labels) -> tuple:
    labels = np.asarray(labels)
    ids = sorted(set(labels[labels != NOISE].tolist()))
    if len(ids) < 2:
        raise UndefinedSilhouette("silhouette needs at least two clusters")
    s = np.full(len(labels), np.nan)
    members = {c: np.flatnonzero(labels == c) for c in ids}
    for c, idx in members.items():
        for i in idx:
            if len(idx) == 1:
                s[i] = 0.0
                continue
            a = D[i, idx].sum() / (len(idx) - 1)
            b = min(D[i, members[o]].mean() for o in ids if o != c)
            top = max(a, b)
            s[i] = 0.0 if top == 0 else (b - a) / top
    return s, float(np.nanmean(s))


def silhouette(X, labels) -> tuple:
    """Per-point silhouette (NaN for noise) and the mean over non-noise points."""
    return silhouette_from_distances(pairwise_distances(X), labels)


@dataclass
class ClusterResult:
    labels: np.ndarray
    per_point_silhouette: np.ndarray
    mean_silhouette: float
    min_cluster_size: int = 0

    @property
    def n_clusters(self) -> int:
        return len(set(self.labels.tolist()) - {NOISE})

    @property
    def n_noise(self) -> int:
        return int((self.labels == NOISE).sum())


def cluster_embeddings(X, min_cluster_size: int, min_samples: Optional[int] = None) -> ClusterResult:
    """HDBSCAN plus silhouette; the silhouette is NaN when fewer than two clusters form."""
    D = pairwise_distances(X)
    labels = hdbscan_labels(D, min_cluster_size, min_samples)
    try:
        s, mean = silhouette_from_distances(D, labels)
    except UndefinedSilhouette:
        s, mean = np.full(len(labels), np.nan), float("nan")
    return ClusterResult(labels, s, mean, min_cluster_size)


def write_cluster_csv(result: ClusterResult, model_ids, path) -> None:
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["model_id", "label", "silhouette"])
        for m, lab, s in zip(model_ids, result.labels, result.per_point_silhouette):
            w.writerow([m, int(lab), "" if np.isnan(s) else repr(float(s))])
