"""
Linear-chain CRF over AOI symbols with indicator features.

Weights are one transition weight per (previous label, label) pair and one
state weight per (label, symbol) pair, stored flat as
``[transition.ravel(), state.ravel()]``. Training maximizes the
Gaussian-penalized conditional log-likelihood with L-BFGS.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .errors import DegenerateCorpus, EmptySequence, FormatError, LengthMismatch, ValidationError
from .vectorize import ObservationSequence

FORMAT_VERSION = 1
DEFAULT_SIGMA2 = 10.0
DEFAULT_TOL = 1e-2
DEFAULT_MAX_ITER = 500


@dataclass(frozen=True, eq=False)
class CrfModel:
    labels: tuple[str, ...]
    alphabet: tuple[str, ...]
    weights: np.ndarray
    sigma2: float = DEFAULT_SIGMA2
    train_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        w = np.array(self.weights, dtype=float).ravel()
        if len(w) != n_features(len(self.labels), len(self.alphabet)):
            raise ValidationError(
                f"expected {n_features(len(self.labels), len(self.alphabet))} weights, got {len(w)}"
            )
        if not np.all(np.isfinite(w)):
            raise ValidationError("CRF weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def transition(self) -> np.ndarray:
        L = len(self.labels)
        return self.weights[: L * L].reshape(L, L)

    @property
    def state(self) -> np.ndarray:
        L = len(self.labels)
        return self.weights[L * L:].reshape(L, len(self.alphabet))

    def with_weights(self, weights) -> CrfModel:
        return CrfModel(self.labels, self.alphabet, weights, self.sigma2)

    def encode(self, seq: ObservationSequence) -> np.ndarray:
        obs = seq.encode(self.alphabet)
        if len(obs) == 0:
            raise EmptySequence("cannot score an empty observation sequence")
        return obs

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "labels": list(self.labels),
            "alphabet": list(self.alphabet),
            "sigma2": self.sigma2,
            "transition_weights": self.transition.tolist(),
            "state_weights": self.state.tolist(),
            "train_meta": dict(self.train_meta),
        }

    @classmethod
    def from_dict(cls, d: Mapping, path=None) -> CrfModel:
        try:
            if d["version"] != FORMAT_VERSION:
                raise FormatError(f"unsupported CRF model version {d['version']}", path)
            trans = np.array(d["transition_weights"], dtype=float)
            state = np.array(d["state_weights"], dtype=float)
            L, M = len(d["labels"]), len(d["alphabet"])
            if trans.shape != (L, L) or state.shape != (L, M):
                raise FormatError("weight shapes do not match labels/alphabet", path)
            return cls(
                d["labels"], d["alphabet"], np.concatenate([trans.ravel(), state.ravel()]),
                float(d["sigma2"]), dict(d.get("train_meta", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"malformed CRF model: {exc}", path) from exc

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> CrfModel:
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), path)


def n_features(n_labels: int, n_symbols: int) -> int:
    return n_labels * n_labels + n_labels * n_symbols


def path_score(model: CrfModel, seq: ObservationSequence, labels: Sequence[int]) -> float:
    obs = model.encode(seq)
    if len(labels) != len(obs):
        raise LengthMismatch("label path and sequence differ in length")
    trans, state = model.transition, model.state
    s = state[labels[0], obs[0]]
    for t in range(1, len(obs)):
        s += trans[labels[t - 1], labels[t]] + state[labels[t], obs[t]]
    return float(s)


def log_partition(model: CrfModel, seq: ObservationSequence) -> float:
    obs = model.encode(seq)
    log_alpha = np.empty((len(obs), len(model.labels)))
    return float(_kernels.crf_forward(model.transition, model.state, obs, log_alpha))


def label_path(seq: ObservationSequence, labels: Sequence[str]) -> np.ndarray:
    """Per-step labels for a task-labeled sequence: its class at every step."""
    if seq.label not in labels:
        raise ValidationError(f"sequence label {seq.label!r} is not one of {list(labels)}")
    return np.full(len(seq), labels.index(seq.label), dtype=np.int64)


def _prepare(model: CrfModel, corpus):
    """Flatten a corpus of (sequence, label path) pairs for the kernels."""
    obs, lab, lengths = [], [], []
    for seq, path in corpus:
        o = seq.encode(model.alphabet)
        p = np.asarray(path, dtype=np.int64)
        if len(o) != len(p):
            raise LengthMismatch(f"sequence of length {len(o)} has a label path of length {len(p)}")
        if len(o) == 0:
            continue
        obs.append(o)
        lab.append(p)
        lengths.append(len(o))
    offsets = np.zeros(len(lengths) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(lengths)
    if obs:
        return np.concatenate(obs), np.concatenate(lab), offsets
    return np.zeros(0, np.int64), np.zeros(0, np.int64), offsets


def _value_and_grad(model: CrfModel, data, sigma2: float, weights=None):
    obs, lab, offsets = data
    w = model.weights if weights is None else weights
    L, M = len(model.labels), len(model.alphabet)
    trans = w[: L * L].reshape(L, L)
    state = w[L * L:].reshape(L, M)
    g_trans = np.zeros((L, L))
    g_state = np.zeros((L, M))
    value = _kernels.crf_objective(trans, state, obs, lab, offsets, g_trans, g_state)
    grad = np.concatenate([g_trans.ravel(), g_state.ravel()])
    if math.isfinite(sigma2):
        value -= float(w @ w) / (2 * sigma2)
        grad -= w / sigma2
    return float(value), grad


def conditional_log_likelihood(model: CrfModel, corpus, sigma2: float | None = None) -> float:
    """Penalized conditional log-likelihood of (sequence, label path) pairs.

    `sigma2` defaults to the model's; pass ``math.inf`` for no penalty.
    """
    sigma2 = model.sigma2 if sigma2 is None else sigma2
    return _value_and_grad(model, _prepare(model, corpus), sigma2)[0]


def gradient(model: CrfModel, corpus, sigma2: float | None = None) -> np.ndarray:
    """Empirical minus expected feature counts, minus the penalty term."""
    sigma2 = model.sigma2 if sigma2 is None else sigma2
    return _value_and_grad(model, _prepare(model, corpus), sigma2)[1]


def train_crf(
    corpus: Sequence[ObservationSequence],
    sigma2: float = DEFAULT_SIGMA2,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = 0,
    *,
    alphabet: Sequence[str] | None = None,
) -> CrfModel:
    """Fit a CRF to task-labeled sequences.

    Every step of a sequence is labeled with its task class. Optimization
    starts from zero weights, so `seed` only matters for reproducibility
    bookkeeping; the result is deterministic.
    """
    labels = tuple(sorted({s.label for s in corpus if s.label is not None}))
    if len(labels) < 2:
        raise DegenerateCorpus(f"CRF training needs at least two classes, got {list(labels)}")
    if any(s.label is None for s in corpus):
        raise ValidationError("every training sequence needs a label")
    if alphabet is None:
        alphabet = sorted({x for s in corpus for x in s})
    model = CrfModel(labels, alphabet, np.zeros(n_features(len(labels), len(alphabet))), sigma2)
    data = _prepare(model, [(s, label_path(s, labels)) for s in corpus])

    trace = []

    def fun(w):
        v, g = _value_and_grad(model, data, sigma2, w)
        return -v, -g

    def record(intermediate_result):
        trace.append(-float(intermediate_result.fun))

    trace.append(-fun(model.weights)[0])
    res = minimize(
        fun, np.zeros_like(model.weights), jac=True, method="L-BFGS-B", callback=record,
        options={"maxiter": max_iter, "gtol": tol, "ftol": 0.0, "maxcor": 20},
    )
    meta = {
        "seed": int(seed), "iters": int(res.nit), "objective": -float(res.fun),
        "grad_inf_norm": float(np.abs(res.jac).max()), "converged": bool(res.success), "trace": trace,
    }
    return CrfModel(labels, alphabet, res.x, sigma2, meta)


def viterbi_labels(model: CrfModel, seq: ObservationSequence) -> list[int]:
    """Highest-scoring label path; ties go to the lowest label index."""
    obs = model.encode(seq)
    trans, state = model.transition, model.state
    L, T = len(model.labels), len(obs)
    back = np.zeros((T, L), dtype=np.int64)
    delta = state[:, obs[0]].copy()
    for t in range(1, T):
        cand = delta[:, None] + trans
        back[t] = cand.argmax(axis=0)
        delta = cand[back[t], np.arange(L)] + state[:, obs[t]]
    path = [int(delta.argmax())]
    for t in range(T - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    return path[::-1]


def classify_crf(model: CrfModel, seq: ObservationSequence) -> str:
    """Majority label of the Viterbi path; ties go to the lowest label index."""
    counts = np.bincount(viterbi_labels(model, seq), minlength=len(model.labels))
    return model.labels[int(counts.argmax())]
