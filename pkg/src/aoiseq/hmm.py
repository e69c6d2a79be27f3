"""
Discrete hidden Markov models: likelihood, Viterbi decoding and Baum-Welch.

Every probability table is kept at or above a small floor so that symbols
never seen in training still get a finite likelihood. The floor is enforced
inside the M-step as a constrained maximization, which keeps the EM
log-likelihood trace non-decreasing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import EmptySequence, EmptyTrainingSet, FormatError, ValidationError
from .vectorize import ObservationSequence

FORMAT_VERSION = 1
DEFAULT_STATES = 5
DEFAULT_RESTARTS = 3
DEFAULT_MAX_ITER = 100
DEFAULT_TOL = 1e-4
FLOOR = 1e-6
_ROW_TOL = 1e-9


def _check_stochastic(name, m):
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)) or np.any(m < 0):
        raise ValidationError(f"{name} has negative or non-finite entries")
    if not np.allclose(m.sum(axis=-1), 1.0, rtol=0, atol=_ROW_TOL):
        raise ValidationError(f"{name} rows must sum to 1")


@dataclass(frozen=True, eq=False)
class HmmModel:
    alphabet: tuple[str, ...]
    A: np.ndarray
    B: np.ndarray
    pi: np.ndarray
    train_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        A, B, pi = (np.array(v, dtype=float) for v in (self.A, self.B, self.pi))
        n = len(pi)
        if n < 1 or A.shape != (n, n) or B.shape != (n, len(self.alphabet)):
            raise ValidationError(f"inconsistent shapes: pi {pi.shape}, A {A.shape}, B {B.shape}")
        _check_stochastic("A", A)
        _check_stochastic("B", B)
        _check_stochastic("pi", pi)
        for v in (A, B, pi):
            v.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "pi", pi)

    @property
    def n_states(self) -> int:
        return len(self.pi)

    def encode(self, seq: ObservationSequence) -> np.ndarray:
        obs = seq.encode(self.alphabet)
        if len(obs) == 0:
            raise EmptySequence("cannot score an empty observation sequence")
        return obs

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "alphabet": list(self.alphabet),
            "n_states": self.n_states,
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "pi": self.pi.tolist(),
            "train_meta": dict(self.train_meta),
        }

    @classmethod
    def from_dict(cls, d: Mapping, path=None) -> HmmModel:
        try:
            if d["version"] != FORMAT_VERSION:
                raise FormatError(f"unsupported HMM model version {d['version']}", path)
            model = cls(d["alphabet"], d["A"], d["B"], d["pi"], dict(d.get("train_meta", {})))
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed HMM model: {exc}", path) from exc
        except ValidationError as exc:
            raise FormatError(str(exc), path) from exc
        if model.n_states != d["n_states"]:
            raise FormatError("n_states does not match the matrices", path)
        return model

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> HmmModel:
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), path)


def log_likelihood(model: HmmModel, seq: ObservationSequence) -> float:
    """log P(seq | model) by the scaled forward recursion."""
    obs = model.encode(seq)
    alpha = np.empty((len(obs), model.n_states))
    scale = np.empty(len(obs))
    return float(_kernels.hmm_forward(model.pi, model.A, model.B, obs, alpha, scale))


def _log(m):
    with np.errstate(divide="ignore"):
        return np.log(m)


def path_log_prob(model: HmmModel, seq: ObservationSequence, path: Sequence[int]) -> float:
    obs = model.encode(seq)
    logA, logB, logpi = _log(model.A), _log(model.B), _log(model.pi)
    lp = logpi[path[0]] + logB[path[0], obs[0]]
    for t in range(1, len(obs)):
        lp += logA[path[t - 1], path[t]] + logB[path[t], obs[t]]
    return float(lp)


def viterbi_decode(model: HmmModel, seq: ObservationSequence) -> list[int]:
    """Most probable hidden-state path; ties go to the lowest state index."""
    obs = model.encode(seq)
    logA, logB, logpi = _log(model.A), _log(model.B), _log(model.pi)
    T = len(obs)
    back = np.zeros((T, model.n_states), dtype=np.int64)
    delta = logpi + logB[:, obs[0]]
    for t in range(1, T):
        cand = delta[:, None] + logA
        back[t] = cand.argmax(axis=0)
        delta = cand[back[t], np.arange(model.n_states)] + logB[:, obs[t]]
    path = [int(delta.argmax())]
    for t in range(T - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    return path[::-1]


def floor_normalize(counts: np.ndarray, floor: float = FLOOR) -> np.ndarray:
    """Row-wise argmax of sum(c * log p) subject to p >= floor and sum(p) = 1.

    Entries whose proportional share would fall under the floor are clamped
    to it and the remaining mass is shared out proportionally. Rows with no
    counts become uniform.
    """
    counts = np.atleast_2d(np.asarray(counts, dtype=float))
    n = counts.shape[1]
    if n * floor > 1:
        raise ValidationError(f"floor {floor} is too large for {n} outcomes")
    out = np.empty_like(counts)
    for r, c in enumerate(counts):
        clamped = np.zeros(n, dtype=bool)
        if c.sum() <= 0:
            out[r] = 1.0 / n
            continue
        while True:
            free = ~clamped
            mass = 1.0 - floor * clamped.sum()
            p = np.where(free, mass * (c / c[free].sum()), floor)
            low = free & (p < floor)
            if not low.any():
                break
            clamped |= low
        out[r] = p / p.sum()
    return out


def _flatten(seqs: Sequence[np.ndarray]):
    offsets = np.zeros(len(seqs) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(s) for s in seqs])
    obs = np.concatenate(seqs).astype(np.int64) if seqs else np.zeros(0, dtype=np.int64)
    return obs, offsets


def _em(obs, offsets, pi, A, B, max_iter, tol, floor):
    trace = []
    for it in range(max_iter + 1):
        c_pi = np.zeros_like(pi)
        c_A = np.zeros_like(A)
        c_B = np.zeros_like(B)
        ll = _kernels.hmm_expected_counts(pi, A, B, obs, offsets, c_pi, c_A, c_B)
        trace.append(float(ll))
        if it == max_iter or (it > 0 and trace[-1] - trace[-2] < tol):
            break
        pi = floor_normalize(c_pi, floor)[0]
        A = floor_normalize(c_A, floor)
        B = floor_normalize(c_B, floor)
    return pi, A, B, trace


def baum_welch_train(
    seqs: Sequence[ObservationSequence],
    n_states: int = DEFAULT_STATES,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    *,
    alphabet: Sequence[str] | None = None,
    restarts: int = DEFAULT_RESTARTS,
    floor: float = FLOOR,
) -> HmmModel:
    """Fit an HMM to a set of sequences with multi-sequence Baum-Welch.

    Expected counts are pooled over all sequences before each
    re-estimation. Each of the `restarts` runs starts from seeded random
    row-stochastic matrices; the run with the highest final likelihood is
    kept. `alphabet` defaults to the sorted set of symbols seen.

    Raises
    ------
    EmptyTrainingSet
        If there is no non-empty sequence to learn from.
    """
    if n_states < 1:
        raise ValidationError("n_states must be >= 1")
    if alphabet is None:
        alphabet = sorted({s for seq in seqs for s in seq})
    alphabet = tuple(alphabet)
    encoded = [seq.encode(alphabet) for seq in seqs]
    encoded = [e for e in encoded if len(e)]
    if not encoded:
        raise EmptyTrainingSet("Baum-Welch needs at least one non-empty sequence")
    obs, offsets = _flatten(encoded)
    M = len(alphabet)

    best = None
    children = np.random.SeedSequence(seed).spawn(max(1, restarts))
    for r, ss in enumerate(children):
        rng = np.random.default_rng(ss)
        pi0 = floor_normalize(rng.uniform(size=(1, n_states)), floor)[0]
        A0 = floor_normalize(rng.uniform(size=(n_states, n_states)), floor)
        B0 = floor_normalize(rng.uniform(size=(n_states, M)), floor)
        pi, A, B, trace = _em(obs, offsets, pi0, A0, B0, max_iter, tol, floor)
        if best is None or trace[-1] > best[3][-1]:
            best = (pi, A, B, trace, r)

    pi, A, B, trace, r = best
    meta = {"seed": int(seed), "iters": len(trace) - 1, "loglik": trace[-1], "restart": r, "trace": trace}
    return HmmModel(alphabet, A, B, pi, meta)


def classify_hmm(models: Mapping[str, HmmModel], seq: ObservationSequence) -> str:
    """Class whose model gives `seq` the highest likelihood; ties go to the earlier class."""
    if len(models) < 2:
        raise ValidationError("classification needs at least two class models")
    alphabets = {m.alphabet for m in models.values()}
    if len(alphabets) != 1:
        raise ValidationError("class models must share one alphabet")
    best_label, best_ll = None, -np.inf
    for label, model in models.items():
        ll = log_likelihood(model, seq)
        if best_label is None or ll > best_ll:
            best_label, best_ll = label, ll
    return best_label


def train_class_models(
    seqs: Sequence[ObservationSequence],
    alphabet: Sequence[str],
    n_states: int = DEFAULT_STATES,
    seed: int = 0,
    **kwargs,
) -> dict[str, HmmModel]:
    """One HMM per class label, in sorted label order."""
    labels = sorted({s.label for s in seqs if s.label is not None})
    children = np.random.SeedSequence(seed).spawn(len(labels))
    models = {}
    for label, ss in zip(labels, children):
        sub_seed = int(ss.generate_state(1)[0])
        models[label] = baum_welch_train(
            [s for s in seqs if s.label == label], n_states, sub_seed, alphabet=alphabet, **kwargs
        )
    return models
