"""Distributed-memory embedding of models and tasks with negative sampling.

For a tuple ``(t_i, t_next, m)`` the context vector is the mean of the task
input vector ``T[t_i]`` and the model vector ``X[m]``.  The target token has
its own output vector ``T_out[t_next]`` and the step minimises

    L = -log s(h . o_pos) - sum_neg log s(-h . o_neg)

with ``s`` the logistic function.  The update is the exact gradient of
``L`` evaluated at the pre-step parameters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .dfg import Corpus, Vocabulary
from .errors import CannotSample, EmptyCorpus, UnknownToken

NOISE_POWER = 0.75


@dataclass
class EmbeddingSpace:
    X: np.ndarray
    T: np.ndarray
    T_out: np.ndarray
    vocab: Vocabulary

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def copy(self) -> "EmbeddingSpace":
        return EmbeddingSpace(self.X.copy(), self.T.copy(), self.T_out.copy(), self.vocab)

    def model_index(self, m) -> int:
        try:
            return self.vocab.models[m]
        except KeyError:
            raise UnknownToken(f"unknown model id {m!r}") from None

    def token_index(self, t) -> int:
        try:
            return self.vocab.tokens[t]
        except KeyError:
            raise UnknownToken(f"unknown task token {t!r}") from None


@dataclass
class TrainConfig:
    epochs: int = 500
    negatives: int = 5
    lr_start: float = 0.025
    lr_end: float = 1e-4
    seed: int = 0
    deterministic: bool = True

    def __post_init__(self):
        if self.epochs < 1 or self.negatives < 1:
            raise ValueError("epochs and negatives must be positive")
        if not (self.lr_start >= self.lr_end > 0):
            raise ValueError("need lr_start >= lr_end > 0")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass
class TrainReport:
    epoch_loss: list = field(default_factory=list)
    final_positive_prob: float = float("nan")


def init_space(corpus: Corpus, d: int, seed: int) -> EmbeddingSpace:
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if len(corpus.tuples) == 0:
        raise EmptyCorpus("cannot initialise an embedding space from an empty corpus")
    rng = np.random.default_rng(seed)
    half = 0.5 / d
    X = rng.uniform(-half, half, size=(corpus.vocab.n, d))
    T = rng.uniform(-half, half, size=(corpus.vocab.k, d))
    return EmbeddingSpace(X, T, np.zeros((corpus.vocab.k, d)), corpus.vocab)


# --------------------------------------------------------------------------
# numeric kernels


@numba.njit(cache=True)
def _neg_log_sigmoid(x):
    # -log(sigmoid(x)) without overflow
    if x >= 0:
        return math.log1p(math.exp(-x))
    return -x + math.log1p(math.exp(x))


@numba.njit(cache=True)
def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


@numba.njit(cache=True)
def _step(X, T, T_out, ti, tn, m, negs, lr):
    d = X.shape[1]
    h = 0.5 * (T[ti] + X[m])
    n_neg = negs.shape[0]
    coef = np.empty(n_neg + 1)
    rows = np.empty(n_neg + 1, dtype=np.int64)

    s = 0.0
    for j in range(d):
        s += h[j] * T_out[tn, j]
    loss = _neg_log_sigmoid(s)
    coef[0] = _sigmoid(s) - 1.0
    rows[0] = tn
    for k in range(n_neg):
        o = negs[k]
        s = 0.0
        for j in range(d):
            s += h[j] * T_out[o, j]
        loss += _neg_log_sigmoid(-s)
        coef[k + 1] = _sigmoid(s)
        rows[k + 1] = o

    if lr == 0.0:
        return loss

    # dL/dh from the pre-step output vectors
    grad_h = np.zeros(d)
    for k in range(n_neg + 1):
        r = rows[k]
        c = coef[k]
        for j in range(d):
            grad_h[j] += c * T_out[r, j]
    for k in range(n_neg + 1):
        r = rows[k]
        c = lr * coef[k]
        for j in range(d):
            T_out[r, j] -= c * h[j]
    for j in range(d):
        g = 0.5 * lr * grad_h[j]
        T[ti, j] -= g
        X[m, j] -= g
    return loss


@numba.njit(cache=True)
def _run_epoch(X, T, T_out, ti, tn, mi, order, negs, lr_start, lr_slope, step0):
    total = 0.0
    for s in range(order.shape[0]):
        q = order[s]
        lr = lr_start + lr_slope * (step0 + s)
        total += _step(X, T, T_out, ti[q], tn[q], mi[q], negs[s], lr)
    return total


@numba.njit(cache=True, parallel=True)
def _run_epoch_parallel(X, T, T_out, ti, tn, mi, order, negs, lr_start, lr_slope, step0):
    # lock-free shared updates; races between shards are tolerated
    total = 0.0
    for s in numba.prange(order.shape[0]):
        q = order[s]
        lr = lr_start + lr_slope * (step0 + s)
        total += _step(X, T, T_out, ti[q], tn[q], mi[q], negs[s], lr)
    return total


@numba.njit(cache=True)
def _positive_probs(X, T, T_out, ti, tn, mi):
    out = np.empty(ti.shape[0])
    for q in range(ti.shape[0]):
        h = 0.5 * (T[ti[q]] + X[mi[q]])
        out[q] = _sigmoid(np.dot(h, T_out[tn[q]]))
    return out


# --------------------------------------------------------------------------
# sampling


def noise_distribution(vocab: Vocabulary) -> np.ndarray:
    """Unigram target frequencies raised to 0.75, normalised, in token-index order."""
    f = np.array([vocab.frequency.get(t, 0) for t in vocab.tokens], dtype=float)
    w = f ** NOISE_POWER
    if w.sum() <= 0:
        raise CannotSample("no token has a positive frequency")
    return w / w.sum()


def _draw(cdf, rng, size):
    idx = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
    return np.minimum(idx, len(cdf) - 1)


def _sample_excluding(cdf, probs, exclude, count, rng):
    """Draw ``count`` indices per entry of ``exclude``, redrawing collisions."""
    exclude = np.asarray(exclude, dtype=np.int64)
    if np.any(probs[exclude] >= 1.0 - 1e-12):
        raise CannotSample("noise distribution has no mass outside the excluded token")
    out = _draw(cdf, rng, (exclude.shape[0], count))
    bad = out == exclude[:, None]
    while bad.any():
        out[bad] = _draw(cdf, rng, int(bad.sum()))
        bad = out == exclude[:, None]
    return out


def negative_sample(vocab: Vocabulary, exclude, count: int, rng) -> list:
    if vocab.k < 2:
        raise CannotSample("need at least two tokens to draw negatives")
    probs = noise_distribution(vocab)
    cdf = np.cumsum(probs)
    if exclude in vocab.tokens:
        idx = _sample_excluding(cdf, probs, [vocab.tokens[exclude]], count, rng)[0]
    else:
        idx = _draw(cdf, rng, count)
    tokens = vocab.token_list()
    return [tokens[i] for i in idx]


# --------------------------------------------------------------------------
# public operations


def positive_score(space: EmbeddingSpace, t_i, t_next, m) -> float:
    h = 0.5 * (space.T[space.token_index(t_i)] + space.X[space.model_index(m)])
    z = float(h @ space.T_out[space.token_index(t_next)])
    return float(_sigmoid(z))


def sgd_step(space: EmbeddingSpace, tup, negatives, lr: float) -> float:
    """One update on ``tup = (t_i, t_next, m)``; returns the loss before the update."""
    t_i, t_next, m = tup
    if len(negatives) == 0:
        raise ValueError("need at least one negative")
    if t_next in negatives:
        raise ValueError("negatives must not contain the target token")
    negs = np.array([space.token_index(t) for t in negatives], dtype=np.int64)
    return float(_step(space.X, space.T, space.T_out, space.token_index(t_i), space.token_index(t_next),
                       space.model_index(m), negs, float(lr)))


def corpus_arrays(space: EmbeddingSpace, corpus: Corpus):
    tok, mod = space.vocab.tokens, space.vocab.models
    ti = np.array([tok[a] for a, _, _ in corpus.tuples], dtype=np.int64)
    tn = np.array([tok[b] for _, b, _ in corpus.tuples], dtype=np.int64)
    mi = np.array([mod[m] for _, _, m in corpus.tuples], dtype=np.int64)
    return ti, tn, mi


def train(space: EmbeddingSpace, corpus: Corpus, cfg: TrainConfig) -> TrainReport:
    """Run ``cfg.epochs`` shuffled passes over the corpus, updating ``space`` in place."""
    if len(corpus.tuples) == 0:
        raise EmptyCorpus("nothing to train on")
    if space.vocab.k < 2:
        raise CannotSample("need at least two tokens to draw negatives")
    ti, tn, mi = corpus_arrays(space, corpus)
    probs = noise_distribution(space.vocab)
    cdf = np.cumsum(probs)
    rng = np.random.default_rng(cfg.seed)

    n = len(ti)
    total_steps = cfg.epochs * n
    slope = (cfg.lr_end - cfg.lr_start) / max(total_steps - 1, 1)
    run = _run_epoch if cfg.deterministic else _run_epoch_parallel

    losses = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        negs = _sample_excluding(cdf, probs, tn[order], cfg.negatives, rng)
        total = run(space.X, space.T, space.T_out, ti, tn, mi, order, negs, cfg.lr_start, slope, epoch * n)
        losses.append(total / n)

    final = float(_positive_probs(space.X, space.T, space.T_out, ti, tn, mi).mean())
    return TrainReport(losses, final)


def fit(corpus: Corpus, d: int = 8, cfg: TrainConfig | None = None, init_seed=None):
    """Initialise and train in one call; returns ``(space, report)``."""
    cfg = cfg or TrainConfig()
    space = init_space(corpus, d, cfg.seed if init_seed is None else init_seed)
    report = train(space, corpus, cfg)
    return space, report


def model_vector(space: EmbeddingSpace, m) -> np.ndarray:
    return space.X[space.model_index(m)].copy()


def task_vector(space: EmbeddingSpace, t) -> np.ndarray:
    return space.T[space.token_index(t)].copy()


# --------------------------------------------------------------------------
# persistence


def save_embeddings(space: EmbeddingSpace, path) -> None:
    """Write ``{d, models, tasks}`` JSON; floats use round-trip repr."""
    doc = {
        "d": space.d,
        "models": {m: space.X[i].tolist() for m, i in space.vocab.models.items()},
        "tasks": {t: space.T[i].tolist() for t, i in space.vocab.tokens.items()},
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_embeddings(path) -> EmbeddingSpace:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    d = int(doc["d"])
    models = {m: i for i, m in enumerate(doc["models"])}
    tokens = {t: i for i, t in enumerate(doc["tasks"])}
    X = np.array(list(doc["models"].values()), dtype=float).reshape(len(models), d)
    T = np.array(list(doc["tasks"].values()), dtype=float).reshape(len(tokens), d)
    return EmbeddingSpace(X, T, np.zeros_like(T), Vocabulary(tokens, models, {}))
