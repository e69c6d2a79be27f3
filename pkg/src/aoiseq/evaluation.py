"""
Leave-one-out evaluation of vectorizer + classifier pipelines.

Each fold holds out one trajectory, calibrates attraction statistics on the
rest, vectorizes everything, trains on the rest and classifies the held-out
sequence. Fold seeds come from the held-out trajectory's id and training
sets are sorted by id, so results do not depend on dataset order or on how
folds are scheduled across processes.
"""

from __future__ import annotations

import csv
import io
import logging
import zlib
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import crf as crf_mod
from . import hmm as hmm_mod
from .errors import AoiseqError, ValidationError
from .geometry import InterfaceLayout, Trajectory, stats_from_counts
from .vectorize import (
    ObservationSequence,
    VectorizerParams,
    _sample,
    classical_indices,
    possibilistic_indices,
)

log = logging.getLogger(__name__)

FAILED = "<failed>"
VECTORIZERS = ("classical", "possibilistic")
CLASSIFIERS = ("hmm", "crf")


@dataclass(frozen=True)
class HmmParams:
    n_states: int = hmm_mod.DEFAULT_STATES
    restarts: int = hmm_mod.DEFAULT_RESTARTS
    max_iter: int = hmm_mod.DEFAULT_MAX_ITER
    tol: float = hmm_mod.DEFAULT_TOL


@dataclass(frozen=True)
class CrfParams:
    sigma2: float = crf_mod.DEFAULT_SIGMA2
    tol: float = crf_mod.DEFAULT_TOL
    max_iter: int = crf_mod.DEFAULT_MAX_ITER


@dataclass(frozen=True)
class PipelineConfig:
    vectorizer: str = "classical"
    params: VectorizerParams = VectorizerParams()
    classifier: str = "hmm"
    hmm: HmmParams = HmmParams()
    crf: CrfParams = CrfParams()
    seed: int = 0

    def __post_init__(self):
        if self.vectorizer not in VECTORIZERS:
            raise ValidationError(f"vectorizer must be one of {VECTORIZERS}, got {self.vectorizer!r}")
        if self.classifier not in CLASSIFIERS:
            raise ValidationError(f"classifier must be one of {CLASSIFIERS}, got {self.classifier!r}")

    def to_dict(self) -> dict:
        return asdict(self)


# trainer(train_sequences, alphabet, seed) -> predict(sequence) -> label
Trainer = Callable[[Sequence[ObservationSequence], Sequence[str], int], Callable[[ObservationSequence], str]]


def pipeline_trainer(config: PipelineConfig) -> Trainer:
    if config.classifier == "hmm":
        h = config.hmm

        def train(seqs, alphabet, seed):
            models = hmm_mod.train_class_models(
                seqs, alphabet, h.n_states, seed, max_iter=h.max_iter, tol=h.tol, restarts=h.restarts
            )
            return lambda seq: hmm_mod.classify_hmm(models, seq)

        return train

    c = config.crf

    def train(seqs, alphabet, seed):
        model = crf_mod.train_crf(seqs, c.sigma2, c.tol, c.max_iter, seed, alphabet=alphabet)
        return lambda seq: crf_mod.classify_crf(model, seq)

    return train


@dataclass(frozen=True)
class ClassRow:
    label: str
    samples: int
    errors: int

    @property
    def accuracy_pct(self) -> float:
        return 100.0 * (self.samples - self.errors) / self.samples if self.samples else 0.0


@dataclass
class AccuracyReport:
    rows: list[ClassRow]
    config: dict = field(default_factory=dict)

    @property
    def total(self) -> ClassRow:
        return ClassRow("TOTAL", sum(r.samples for r in self.rows), sum(r.errors for r in self.rows))

    @property
    def accuracy_pct(self) -> float:
        return self.total.accuracy_pct

    @property
    def correct(self) -> int:
        t = self.total
        return t.samples - t.errors

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "samples", "errors", "accuracy_pct"])
        for r in [*self.rows, self.total]:
            w.writerow([r.label, r.samples, r.errors, f"{r.accuracy_pct:.2f}"])
        return buf.getvalue()


@dataclass
class FoldResult:
    id: str
    true: str
    predicted: str | None
    error: str | None = None


@dataclass
class LoocvResult:
    report: AccuracyReport
    folds: list[FoldResult]

    @property
    def failures(self) -> list[FoldResult]:
        return [f for f in self.folds if f.error is not None]

    def confusion(self) -> dict[tuple[str, str], int]:
        labels = [r.label for r in self.report.rows]
        counts = Counter((f.true, f.predicted if f.predicted is not None else FAILED) for f in self.folds)
        predicted = sorted({p for _, p in counts} - set(labels))
        return {(t, p): counts.get((t, p), 0) for t in labels for p in [*labels, *predicted]}

    def confusion_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true", "predicted", "count"])
        for (t, p), n in self.confusion().items():
            w.writerow([t, p, n])
        return buf.getvalue()


def fold_seed(master: int, trajectory_id: str) -> int:
    ss = np.random.SeedSequence([master, zlib.crc32(trajectory_id.encode())])
    return int(ss.generate_state(1)[0])


class _Prepared:
    """Per-trajectory quantities reused by every fold and sweep point."""

    def __init__(self, trajectories: Sequence[Trajectory], layout: InterfaceLayout, ds: int):
        ids = [t.id for t in trajectories]
        if any(i is None for i in ids) or len(set(ids)) != len(ids):
            raise ValidationError("LOOCV needs trajectories with unique ids")
        if any(t.label is None for t in trajectories):
            raise ValidationError("LOOCV needs labeled trajectories")
        order = sorted(range(len(trajectories)), key=lambda i: ids[i])
        self.trajectories = [trajectories[i] for i in order]
        self.layout = layout
        self.dist = [layout.distances(_sample(t, ds)) for t in self.trajectories]
        # attraction counts use every recorded fixation, not only the emitted ticks
        self.counts = np.array([(layout.distances(t.xy) == 0).sum(axis=0) for t in self.trajectories], dtype=float)
        names = layout.names
        self.classical = [
            ObservationSequence(tuple(names[i] for i in classical_indices(d)), t.label, t.id)
            for d, t in zip(self.dist, self.trajectories)
        ]


def _fold_sequences(prep: _Prepared, held: int, config: PipelineConfig) -> list[ObservationSequence]:
    if config.vectorizer == "classical":
        return prep.classical
    p = config.params
    train_counts = prep.counts.sum(axis=0) - prep.counts[held]
    stats = stats_from_counts(prep.layout, train_counts, p.omega)
    names = prep.layout.names
    return [
        ObservationSequence(
            tuple(names[i] for i in possibilistic_indices(d, stats.psi, p.m, p.threshold)), t.label, t.id
        )
        for d, t in zip(prep.dist, prep.trajectories)
    ]


def _run_fold(prep: _Prepared, held: int, config: PipelineConfig, trainer: Trainer) -> FoldResult:
    traj = prep.trajectories[held]
    try:
        seqs = _fold_sequences(prep, held, config)
        train = [s for i, s in enumerate(seqs) if i != held]
        predict = trainer(train, prep.layout.names, fold_seed(config.seed, traj.id))
        return FoldResult(traj.id, traj.label, predict(seqs[held]))
    except AoiseqError as exc:
        log.warning("fold %s failed: %s", traj.id, exc)
        return FoldResult(traj.id, traj.label, None, f"{type(exc).__name__}: {exc}")


_WORKER_PREP: _Prepared | None = None


def _init_worker(prep):
    global _WORKER_PREP
    _WORKER_PREP = prep


def _worker(task):
    held, config = task
    return _run_fold(_WORKER_PREP, held, config, pipeline_trainer(config))


def _run_tasks(prep: _Prepared, tasks, trainer: Trainer | None, jobs: int) -> list[FoldResult]:
    if jobs > 1 and trainer is None and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(prep,)) as pool:
            return list(pool.map(_worker, tasks, chunksize=1))
    return [_run_fold(prep, held, cfg, trainer or pipeline_trainer(cfg)) for held, cfg in tasks]


def _summarize(prep: _Prepared, folds: list[FoldResult], config: PipelineConfig) -> LoocvResult:
    labels = sorted({t.label for t in prep.trajectories})
    rows = []
    for label in labels:
        mine = [f for f in folds if f.true == label]
        rows.append(ClassRow(label, len(mine), sum(f.predicted != f.true for f in mine)))
    return LoocvResult(AccuracyReport(rows, config.to_dict()), folds)


def _check_dataset(trajectories):
    if len(trajectories) < 2 or len({t.label for t in trajectories}) < 2:
        raise ValidationError("LOOCV needs at least two trajectories spanning at least two classes")


def run_loocv(
    trajectories: Sequence[Trajectory],
    layout: InterfaceLayout,
    config: PipelineConfig,
    *,
    jobs: int = 1,
    trainer: Trainer | None = None,
) -> LoocvResult:
    """Leave-one-out accuracy of one pipeline.

    `trainer` replaces the configured classifier (used for harness checks);
    custom trainers always run in-process.
    """
    _check_dataset(trajectories)
    prep = _Prepared(trajectories, layout, config.params.ds)
    folds = _run_tasks(prep, [(i, config) for i in range(len(prep.trajectories))], trainer, jobs)
    return _summarize(prep, folds, config)


@dataclass
class SweepPoint:
    omega: float
    result: LoocvResult

    @property
    def accuracy_pct(self) -> float:
        return self.result.report.accuracy_pct


def omega_sweep(
    trajectories: Sequence[Trajectory],
    layout: InterfaceLayout,
    base: PipelineConfig,
    omegas: Sequence[float],
    *,
    threshold: float | None = None,
    m: float | None = None,
    jobs: int = 1,
    trainer: Trainer | None = None,
) -> list[SweepPoint]:
    """Possibilistic LOOCV at every omega, rebuilding statistics and sequences each time."""
    _check_dataset(trajectories)
    p = base.params
    configs = []
    for omega in omegas:
        params = VectorizerParams(
            float(omega), p.m if m is None else m, p.threshold if threshold is None else threshold, p.ds
        )
        configs.append(PipelineConfig("possibilistic", params, base.classifier, base.hmm, base.crf, base.seed))
    prep = _Prepared(trajectories, layout, p.ds)
    n = len(prep.trajectories)
    tasks = [(i, cfg) for cfg in configs for i in range(n)]
    folds = _run_tasks(prep, tasks, trainer, jobs)
    return [
        SweepPoint(cfg.params.omega, _summarize(prep, folds[k * n:(k + 1) * n], cfg))
        for k, cfg in enumerate(configs)
    ]


def format_omega(omega: float) -> str:
    return f"{omega:g}"


def sweep_csv(points: Sequence[SweepPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["omega", "accuracy_pct"])
    for pt in points:
        w.writerow([format_omega(pt.omega), f"{pt.accuracy_pct:.2f}"])
    return buf.getvalue()
