import itertools
import json
from dataclasses import replace

import numpy as np
import pytest

from aoiseq.errors import ValidationError
from aoiseq.geometry import compute_attraction_stats, kernel_counts
from aoiseq.synthetic import (
    CANVAS,
    GeneratorConfig,
    TaskScript,
    builtin_layout,
    builtin_scripts,
    generate_dataset,
    generate_trajectory,
    load_dataset,
    save_dataset,
    simulate_walk,
)

LAYOUT = builtin_layout()
SCRIPTS = builtin_scripts(LAYOUT)


class TestLayout:
    def test_fifteen_named_areas(self):
        assert LAYOUT.names == tuple("ABCDEFGHIJKLMNO")

    def test_disjoint_on_canvas(self):
        for a, b in itertools.combinations(LAYOUT, 2):
            assert not a.intersects(b)
        for a in LAYOUT:
            assert 0 <= a.left and a.right < CANVAS[0] and 0 <= a.top and a.bottom < CANVAS[1]


class TestScripts:
    def test_three_classes(self):
        assert list(SCRIPTS) == ["DEG2", "DEG1", "INT"]

    def test_stochastic(self):
        for s in SCRIPTS.values():
            np.testing.assert_allclose(s.transitions.sum(axis=1), 1, atol=1e-9)
            assert s.initial.sum() == pytest.approx(1)

    def test_pairwise_distinct(self):
        for a, b in itertools.combinations(SCRIPTS.values(), 2):
            assert np.any(np.abs(a.transitions - b.transitions).max(axis=1) > 0)

    def test_deg1_skips_a_coefficient(self):
        s = SCRIPTS["DEG1"]
        for name in "BF":
            assert np.all(s.transitions[:, LAYOUT.names.index(name)] == 0)

    def test_rejects_bad_rows(self):
        s = SCRIPTS["DEG2"]
        bad = s.transitions.copy()
        bad[0, 0] += 0.1
        with pytest.raises(ValidationError):
            TaskScript("X", s.areas, bad, s.initial)

    def test_rejects_short_dwell(self):
        s = SCRIPTS["DEG2"]
        with pytest.raises(ValidationError):
            replace(s, dwell_mean=0.5)


def walk(script, seed=0, duration=3000):
    return simulate_walk(script, LAYOUT, np.random.default_rng(seed), duration)


class TestTrajectory:
    def test_deterministic(self):
        a = generate_trajectory(SCRIPTS["INT"], LAYOUT, 7, 400)
        b = generate_trajectory(SCRIPTS["INT"], LAYOUT, 7, 400)
        assert a == b

    def test_seeds_differ(self):
        a = generate_trajectory(SCRIPTS["INT"], LAYOUT, 7, 400)
        b = generate_trajectory(SCRIPTS["INT"], LAYOUT, 8, 400)
        assert a != b

    def test_integer_coordinates_on_canvas(self):
        t = generate_trajectory(SCRIPTS["DEG2"], LAYOUT, 1, 500)
        assert len(t.xy) == 500
        assert np.all(t.xy == np.round(t.xy))
        assert np.all(t.xy[:, 0] < CANVAS[0]) and np.all(t.xy[:, 1] < CANVAS[1])

    def test_no_overshoot_dwells_inside(self):
        script = replace(SCRIPTS["DEG2"], overshoot=0.0, travel_noise=0.0)
        xy, target = walk(script)
        d = LAYOUT.distances(xy)
        dwell = target >= 0
        assert dwell.any()
        assert np.all(d[dwell, target[dwell]] == 0)

    def test_full_overshoot_lands_in_band(self):
        script = replace(SCRIPTS["INT"], overshoot=1.0)
        xy, target = walk(script)
        dwell = target >= 0
        d = LAYOUT.distances(xy)[dwell]
        # psi scale: omega chosen so the band covers the overshoot range
        stats = compute_attraction_stats(LAYOUT, generate_dataset(GeneratorConfig(per_task=3)), omega=3)
        bound = 2 * stats.psi.max()
        assert np.all(np.any((d > 0) & (d < bound), axis=1))
        assert np.all(d.min(axis=1) > 0)

    def test_label_and_id(self):
        t = generate_trajectory(SCRIPTS["DEG1"], LAYOUT, 0, 50, id="x")
        assert (t.label, t.id) == ("DEG1", "x")


class TestDataset:
    def test_defaults(self):
        data = generate_dataset()
        assert len(data) == 51
        labels = [t.label for t in data]
        assert {lab: labels.count(lab) for lab in set(labels)} == {"DEG2": 17, "DEG1": 17, "INT": 17}
        assert len({t.id for t in data}) == 51

    def test_per_task(self):
        assert len(generate_dataset(GeneratorConfig(per_task=5))) == 15

    def test_master_seed_matters(self):
        a = generate_dataset(GeneratorConfig(seed=1, per_task=2))
        b = generate_dataset(GeneratorConfig(seed=2, per_task=2))
        assert any(x != y for x, y in zip(a, b))

    def test_coverage(self):
        counts = np.zeros(len(LAYOUT))
        for t in generate_dataset():
            counts += kernel_counts(LAYOUT, [t])
        assert np.all(counts > 0)

    def test_coverage_per_fold(self):
        # every leave-one-out training half still sees every kernel
        per = np.array([kernel_counts(LAYOUT, [t]) for t in generate_dataset()])
        total = per.sum(axis=0)
        assert np.all((total - per) > 0)

    def test_saved_bytes_identical(self, tmp_path):
        cfg = GeneratorConfig(seed=42, per_task=3)
        for out in ("a", "b"):
            save_dataset(tmp_path / out, generate_dataset(cfg), LAYOUT, cfg.seed, cfg.to_dict())
        files = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert len(files) == 11
        for name in files:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_round_trip(self, tmp_path):
        cfg = GeneratorConfig(seed=3, per_task=2)
        data = generate_dataset(cfg)
        save_dataset(tmp_path, data, LAYOUT, cfg.seed, cfg.to_dict())
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["seed"] == 3 and len(manifest["entries"]) == 6
        back = load_dataset(tmp_path)
        assert back.layout == LAYOUT
        assert [(t.id, t.label) for t in back.trajectories] == [(t.id, t.label) for t in data]
        assert all(a == b for a, b in zip(back.trajectories, data))
