"""
Synthetic labeled cursor trajectories over a 15-area grapher interface.

Each task class is a Markov chain over the areas it visits. A trajectory is
a seeded walk: pick the next target from the chain, travel towards it with
Gaussian jitter, then rest for a sampled number of ticks either inside the
kernel or, with the overshoot probability, a few pixels outside it.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import FormatError, ValidationError
from .geometry import AreaOfInterest, InterfaceLayout, Trajectory

CANVAS = (1024, 768)
DATASET_FORMAT = 1
TASKS = ("DEG2", "DEG1", "INT")


def builtin_layout() -> InterfaceLayout:
    """Fifteen kernels, A to O, loosely following an equation-grapher screen."""
    boxes = [
        ("A", 30, 70, 600, 600),    # graph canvas
        ("B", 690, 110, 130, 22),   # a-coefficient slider
        ("C", 690, 160, 130, 22),   # b-coefficient slider
        ("D", 690, 210, 130, 22),   # c-coefficient slider
        ("E", 680, 40, 300, 36),    # equation display
        ("F", 840, 110, 48, 22),    # a value box
        ("G", 840, 160, 48, 22),    # b value box
        ("H", 840, 210, 48, 22),    # c value box
        ("I", 690, 270, 90, 28),    # save curve
        ("J", 800, 270, 90, 28),    # erase curves
        ("K", 690, 330, 18, 18),    # show tangent
        ("L", 690, 370, 18, 18),    # show roots
        ("M", 690, 410, 18, 18),    # show vertex
        ("N", 660, 620, 36, 36),    # zoom in
        ("O", 716, 620, 36, 36),    # zoom out
    ]
    return InterfaceLayout(AreaOfInterest(n, l, t, w, h) for n, l, t, w, h in boxes)


@dataclass(frozen=True)
class TaskScript:
    label: str
    areas: tuple[str, ...]
    transitions: np.ndarray
    initial: np.ndarray
    dwell_mean: float = 30.0
    dwell_sd: float = 10.0
    travel_noise: float = 3.0
    overshoot: float = 0.3
    overshoot_max: int = 5
    speed: float = 25.0

    def __post_init__(self):
        n = len(self.areas)
        T = np.array(self.transitions, dtype=float)
        p0 = np.array(self.initial, dtype=float)
        if T.shape != (n, n) or p0.shape != (n,):
            raise ValidationError(f"script {self.label}: transition shape {T.shape} does not match {n} areas")
        if np.any(T < 0) or not np.allclose(T.sum(axis=1), 1, rtol=0, atol=1e-9):
            raise ValidationError(f"script {self.label}: transition rows must be stochastic")
        if np.any(p0 < 0) or abs(p0.sum() - 1) > 1e-9:
            raise ValidationError(f"script {self.label}: initial distribution must be stochastic")
        if self.dwell_mean < 1 or self.dwell_sd < 0:
            raise ValidationError(f"script {self.label}: dwell mean must be >= 1 tick")
        if self.travel_noise < 0 or not (0 <= self.overshoot <= 1) or self.overshoot_max < 1 or self.speed <= 0:
            raise ValidationError(f"script {self.label}: invalid motion parameters")
        object.__setattr__(self, "areas", tuple(self.areas))
        object.__setattr__(self, "transitions", T)
        object.__setattr__(self, "initial", p0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["areas"] = list(self.areas)
        d["transitions"] = self.transitions.tolist()
        d["initial"] = self.initial.tolist()
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> TaskScript:
        return cls(**d)


def _chain(names: Sequence[str], used: str, flow: Mapping[str, str], mix: float) -> np.ndarray:
    """Transition matrix: `flow` successors get weight `1 - mix`, the rest spreads over `used` areas."""
    idx = {n: i for i, n in enumerate(names)}
    T = np.zeros((len(names), len(names)))
    background = np.array([n in used for n in names], dtype=float)
    for n in names:
        row = background.copy()
        row[idx[n]] = 0
        row /= row.sum()
        nxt = flow.get(n, "")
        if nxt:
            focus = np.zeros(len(names))
            for s in nxt:
                focus[idx[s]] += 1
            row = mix * row + (1 - mix) * focus / focus.sum()
        T[idx[n]] = row
    return T


def builtin_scripts(layout: InterfaceLayout | None = None) -> dict[str, TaskScript]:
    """The three grapher tasks.

    DEG2 tunes all three coefficients, DEG1 never touches the a-coefficient
    controls, and INT draws a full quadratic, saves it, then reworks b alone
    and hunts for the intersection with the root and zoom tools.
    """
    names = (layout or builtin_layout()).names
    deg2 = _chain(
        names,
        "ABCDEFGHILM",
        {"E": "B", "B": "FB", "F": "C", "C": "GC", "G": "D", "D": "HD", "H": "A",
         "A": "LMEA", "L": "AM", "M": "AI", "I": "EA"},
        0.3,
    )
    deg1 = _chain(
        names,
        "ACDEGHIKL",
        {"E": "C", "C": "GC", "G": "D", "D": "HD", "H": "A", "A": "KLEA", "K": "A",
         "L": "AI", "I": "EA"},
        0.3,
    )
    intx = _chain(
        names,
        "ABCDEFGIJLNO",
        {"E": "B", "B": "C", "C": "DGI", "D": "A", "A": "ILNOA", "I": "CJ", "J": "C",
         "G": "A", "L": "NA", "N": "AO", "O": "A", "F": "C"},
        0.3,
    )

    def start(s):
        p = np.array([n == s for n in names], dtype=float)
        return p

    return {
        "DEG2": TaskScript("DEG2", names, deg2, start("E"), dwell_mean=28, dwell_sd=10, overshoot=0.35),
        "DEG1": TaskScript("DEG1", names, deg1, start("E"), dwell_mean=28, dwell_sd=10, overshoot=0.35),
        "INT": TaskScript("INT", names, intx, start("E"), dwell_mean=28, dwell_sd=10, overshoot=0.35),
    }


def _overshoot_point(area: AreaOfInterest, k: int, rng) -> tuple[int, int]:
    """A point `k` pixels outside a random edge of the kernel, within the edge's span."""
    left, top = int(np.ceil(area.left)), int(np.ceil(area.top))
    right, bottom = int(np.floor(area.right)), int(np.floor(area.bottom))
    side = rng.integers(4)
    if side == 0:
        return left - k, int(rng.integers(top, bottom + 1))
    if side == 1:
        return right + k, int(rng.integers(top, bottom + 1))
    if side == 2:
        return int(rng.integers(left, right + 1)), top - k
    return int(rng.integers(left, right + 1)), bottom + k


def _clip(p):
    return (min(max(int(p[0]), 0), CANVAS[0] - 1), min(max(int(p[1]), 0), CANVAS[1] - 1))


def simulate_walk(script: TaskScript, layout: InterfaceLayout, rng, duration: int) -> tuple[np.ndarray, np.ndarray]:
    """Cursor samples of one walk and, per sample, the dwell target's index (-1 while travelling)."""
    by_name = {a.name: a for a in layout}
    index = {n: i for i, n in enumerate(layout.names)}
    pos = (CANVAS[0] / 2, CANVAS[1] / 2)
    state = int(rng.choice(len(script.areas), p=script.initial))
    points: list[tuple[int, int]] = []
    targets: list[int] = []

    while len(points) < duration:
        area = by_name[script.areas[state]]
        lo = (int(np.ceil(area.left)), int(np.ceil(area.top)))
        hi = (int(np.floor(area.right)), int(np.floor(area.bottom)))
        if rng.random() < script.overshoot:
            rest = _overshoot_point(area, int(rng.integers(1, script.overshoot_max + 1)), rng)
            jitter = False
        else:
            cx, cy = area.center
            rest = (int(round(cx + rng.normal(0, area.width / 6))), int(round(cy + rng.normal(0, area.height / 6))))
            rest = (min(max(rest[0], lo[0]), hi[0]), min(max(rest[1], lo[1]), hi[1]))
            jitter = True

        gap = np.hypot(rest[0] - pos[0], rest[1] - pos[1])
        steps = max(1, int(np.ceil(gap / script.speed)))
        for s in range(1, steps):
            f = s / steps
            p = (
                pos[0] + f * (rest[0] - pos[0]) + rng.normal(0, script.travel_noise),
                pos[1] + f * (rest[1] - pos[1]) + rng.normal(0, script.travel_noise),
            )
            points.append(_clip(np.round(p)))
            targets.append(-1)

        dwell = max(1, int(round(rng.normal(script.dwell_mean, script.dwell_sd))))
        for _ in range(dwell):
            p = rest
            if jitter and rng.random() < 0.2:
                # small tremor, kept inside the kernel
                p = (
                    min(max(rest[0] + int(rng.integers(-1, 2)), lo[0]), hi[0]),
                    min(max(rest[1] + int(rng.integers(-1, 2)), lo[1]), hi[1]),
                )
            points.append(_clip(p))
            targets.append(index[area.name])
        pos = rest
        state = int(rng.choice(len(script.areas), p=script.transitions[state]))

    return np.array(points[:duration], dtype=float), np.array(targets[:duration], dtype=np.int64)


def generate_trajectory(
    script: TaskScript,
    layout: InterfaceLayout,
    seed,
    duration: int = 600,
    ds: int = 1,
    id: str | None = None,
) -> Trajectory:
    """One labeled trajectory of exactly `duration` integer-pixel samples."""
    if set(script.areas) != set(layout.names):
        raise ValidationError("script and layout disagree on area names")
    if duration < 1:
        raise ValidationError("duration must be >= 1 tick")
    xy, _ = simulate_walk(script, layout, np.random.default_rng(seed), duration)
    return Trajectory(xy, ds=ds, label=script.label, id=id)


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 2024
    per_task: int = 17
    duration: tuple[int, int] = (300, 500)
    ds: int = 1

    def __post_init__(self):
        object.__setattr__(self, "duration", tuple(int(v) for v in self.duration))
        lo, hi = self.duration
        if self.per_task < 1 or lo < 1 or hi < lo or self.ds < 1:
            raise ValidationError(f"invalid generator config {self}")

    def to_dict(self) -> dict:
        return {"seed": self.seed, "per_task": self.per_task, "duration": list(self.duration), "ds": self.ds}


def trajectory_seed(master: int, task_index: int, i: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master, task_index, i])


def generate_dataset(
    config: GeneratorConfig = GeneratorConfig(),
    layout: InterfaceLayout | None = None,
    scripts: Mapping[str, TaskScript] | None = None,
) -> list[Trajectory]:
    """`per_task` trajectories for each task, ordered by task then index."""
    layout = layout or builtin_layout()
    scripts = scripts or builtin_scripts(layout)
    out = []
    for k, (label, script) in enumerate(scripts.items()):
        for i in range(config.per_task):
            ss = trajectory_seed(config.seed, k, i)
            rng = np.random.default_rng(ss.spawn(1)[0])
            duration = int(rng.integers(config.duration[0], config.duration[1] + 1))
            out.append(
                generate_trajectory(script, layout, ss, duration, config.ds, id=f"{label}_{i + 1:02d}")
            )
    return out


@dataclass
class Dataset:
    trajectories: list[Trajectory]
    layout: InterfaceLayout
    seed: int | None = None
    config: dict = field(default_factory=dict)


def save_dataset(out_dir, trajectories: Sequence[Trajectory], layout: InterfaceLayout, seed=None, config=None):
    """Write trajectories as CSV files plus `manifest.json` and `layout.json`."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for traj in trajectories:
        name = f"{traj.id}.csv"
        traj.save(out_dir / name)
        entries.append({"file": name, "label": traj.label})
    layout.save(out_dir / "layout.json")
    manifest = {"version": DATASET_FORMAT, "seed": seed, "config": config or {}, "entries": entries}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_dataset(path) -> Dataset:
    """Read a dataset directory (or its manifest file)."""
    path = Path(path)
    manifest_path = path / "manifest.json" if path.is_dir() else path
    root = manifest_path.parent
    try:
        manifest = json.loads(manifest_path.read_text())
        entries = manifest["entries"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"malformed dataset manifest: {exc}", manifest_path) from exc
    trajectories = []
    for e in entries:
        file = root / e["file"]
        trajectories.append(Trajectory.load(file, label=e.get("label"), id=Path(e["file"]).stem))
    layout_path = root / "layout.json"
    layout = InterfaceLayout.load(layout_path) if layout_path.exists() else builtin_layout()
    return Dataset(trajectories, layout, manifest.get("seed"), manifest.get("config", {}))
