import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoiseq.errors import FormatError, ValidationError
from aoiseq.geometry import AreaOfInterest, InterfaceLayout, Trajectory, compute_attraction_stats, stats_from_counts
from aoiseq.vectorize import (
    ObservationSequence,
    VectorizerParams,
    classical_emissions,
    possibilistic_emissions,
    read_sequences,
    vectorize_classical,
    vectorize_possibilistic,
    write_sequences,
)

from conftest import traj
from test_possibility import near_pair_layout


class TestClassical:
    def test_inside(self, two_areas):
        seq = vectorize_classical(traj([(15, 15)] * 10, label="X", id="t1"), two_areas)
        assert seq.symbols == ("A",) * 10
        assert seq.label == "X" and seq.source == "t1"

    def test_outside(self, two_areas):
        assert vectorize_classical(traj([(0, 0), (45, 45), (99, 5)]), two_areas).symbols == ()

    def test_crossing(self, two_areas):
        points = [(20, 20)] * 4 + [(35, 20), (45, 20), (55, 20)] + [(70, 20)] * 5
        assert vectorize_classical(traj(points), two_areas).symbols == ("A",) * 4 + ("B",) * 5


class TestPossibilistic:
    def test_kernel_fixation_emits_its_area(self, two_areas):
        stats = stats_from_counts(two_areas, [1, 4], omega=5)
        seq = vectorize_possibilistic(traj([(15, 15)]), two_areas, stats, VectorizerParams(omega=5))
        assert seq.symbols == ("A",)

    def test_near_pair_emits_a1(self):
        layout, stats = near_pair_layout()
        seq = vectorize_possibilistic(traj([(100, 100)]), layout, stats, VectorizerParams(omega=1))
        assert seq.symbols == ("A1",)

    def test_far_fixation_above_threshold(self, two_areas):
        # 3 px from A (psi = 2): possibility 2/3
        stats = stats_from_counts(two_areas, [4, 1], omega=1)
        t = traj([(7, 20)])
        assert vectorize_possibilistic(t, two_areas, stats, VectorizerParams(1, threshold=0.5)).symbols == ("A",)
        assert vectorize_possibilistic(t, two_areas, stats, VectorizerParams(1, threshold=0.7)).symbols == ()

    def test_omega_mismatch(self, two_areas):
        stats = stats_from_counts(two_areas, [1, 1], omega=1)
        with pytest.raises(ValidationError):
            vectorize_possibilistic(traj([(0, 0)]), two_areas, stats, VectorizerParams(omega=2))

    def test_tie_prefers_nearer_kernel(self):
        # Far possibilities 1 * 1/4 and (4/8)^2 * 8/8 are both exactly 0.25
        dist = np.array([[4.0, 8.0]])
        assert possibilistic_emissions(dist, np.array([1.0, 8.0]), 2.0, 0.0)[0] == 0
        assert possibilistic_emissions(dist[:, ::-1], np.array([8.0, 1.0]), 2.0, 0.0)[0] == 1

    def test_tie_falls_back_to_layout_order(self):
        dist = np.array([[3.0, 3.0]])
        assert possibilistic_emissions(dist, np.array([1.0, 1.0]), 2.0, 0.0)[0] == 0

    def test_deterministic(self, two_areas):
        rng = np.random.default_rng(1)
        t = traj(rng.integers(0, 90, size=(200, 2)))
        stats = stats_from_counts(two_areas, [3, 1], omega=4)
        p = VectorizerParams(omega=4)
        assert vectorize_possibilistic(t, two_areas, stats, p) == vectorize_possibilistic(t, two_areas, stats, p)


LAYOUT = InterfaceLayout(
    [
        AreaOfInterest("A", 10, 10, 20, 20),
        AreaOfInterest("B", 36, 10, 8, 30),
        AreaOfInterest("C", 10, 40, 15, 5),
        AreaOfInterest("D", 60, 60, 30, 10),
    ]
)

integer_paths = st.lists(st.tuples(st.integers(0, 100), st.integers(0, 80)), min_size=1, max_size=60)


@settings(max_examples=300)
@given(integer_paths, st.lists(st.integers(0, 20), min_size=4, max_size=4).filter(any))
def test_degenerates_to_classical(points, counts):
    t = traj(points)
    stats = stats_from_counts(LAYOUT, counts, omega=0)
    p = VectorizerParams(omega=0, threshold=1.0)
    assert vectorize_possibilistic(t, LAYOUT, stats, p) == vectorize_classical(t, LAYOUT)


@settings(max_examples=300)
@given(
    st.lists(st.tuples(st.floats(0, 100), st.floats(0, 80)), min_size=1, max_size=60),
    st.lists(st.integers(0, 20), min_size=4, max_size=4).filter(any),
    st.floats(0, 30),
    st.floats(0, 1),
)
def test_classical_emissions_are_kept(points, counts, omega, threshold):
    stats = stats_from_counts(LAYOUT, counts, omega)
    dist = LAYOUT.distances(points)
    c = classical_emissions(dist)
    p = possibilistic_emissions(dist, stats.psi, 2.0, threshold)
    kept = c >= 0
    np.testing.assert_array_equal(p[kept], c[kept])
    assert set(p[p >= 0]) <= set(range(len(LAYOUT)))


class TestSequenceFile:
    def test_round_trip(self, tmp_path):
        seqs = [
            ObservationSequence(("A", "B", "A"), "DEG2"),
            ObservationSequence((), "INT"),
            ObservationSequence(("C",)),
            ObservationSequence(()),
        ]
        path = tmp_path / "seqs.txt"
        write_sequences(path, seqs)
        assert path.read_text() == "DEG2\tA B A\nINT\t\nC\n\n"
        assert read_sequences(path) == seqs

    @given(
        st.lists(
            st.tuples(
                st.one_of(st.none(), st.text("abcXYZ_1", min_size=1, max_size=6)),
                st.lists(st.text("ABCDEFGHIJKLMNO", min_size=1, max_size=3), max_size=20),
            ),
            max_size=10,
        )
    )
    def test_round_trip_property(self, tmp_path_factory, rows):
        seqs = [ObservationSequence(tuple(s), label) for label, s in rows]
        path = tmp_path_factory.mktemp("seq") / "s.txt"
        write_sequences(path, seqs)
        assert read_sequences(path) == seqs

    def test_bad_label(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("A B\nbad label\tA\n")
        with pytest.raises(FormatError, match=":2"):
            read_sequences(path)
