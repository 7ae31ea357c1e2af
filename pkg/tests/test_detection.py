import math
import warnings

import numpy as np
import pytest

from spfl.detection import (DIFF_WITNESS, SAME_WITNESS, CountRecord, DetectorSpec, SourceSpec,
                            _apply_dead_time, expected_true_coincidence, power_sweep,
                            routing_at, simulate_counts, sweep_experiment, true_coincidence)
from spfl.errors import InvalidArgument
from spfl.pairstate import RoutingProbabilities

from conftest import setup_spectral

IDEAL = DetectorSpec(1.0, 0.0, dead_time=0.0)
SPLIT = RoutingProbabilities(0.0, 1.0)
HALF = RoutingProbabilities(0.5, 0.5)


def three_sigma_binomial(p, n):
    return 3 * math.sqrt(p * (1 - p) / n)


def test_dark_counts_only():
    n = 2_000_000
    d = 1e-3
    rec = simulate_counts(SourceSpec(0.0), DetectorSpec(0.1, d, dead_time=0.0), HALF, n, 5)
    rec.check()
    for det in ("spd1", "spd2", "spd3"):
        assert abs(rec.singles[det] / n - d) < three_sigma_binomial(d, n)
    for pair in (SAME_WITNESS, DIFF_WITNESS):
        ct, err = true_coincidence(rec, pair)
        assert abs(ct) <= 3 * max(err, rec.gate_rate_hz / n)


def test_split_routing_coincidences_equal_pairs():
    n, mu = 1_000_000, 0.01
    rec = simulate_counts(SourceSpec(mu), IDEAL, SPLIT, n, 11)
    # Signal-in-a/idler-in-b pairs: half of all pairs, both detected with unit efficiency.
    expected = mu / 2 * n
    assert abs(rec.coinc_same_pulse[DIFF_WITNESS] - expected) < 3 * math.sqrt(expected) + 0.01 * expected
    # SPD1-SPD2 only sees accidentals: same order as the adjacent-pulse count.
    acc = rec.coinc_adjacent_pulse[SAME_WITNESS]
    assert abs(rec.coinc_same_pulse[SAME_WITNESS] - acc) < 4 * math.sqrt(acc + 1) + 5


def test_dead_time_saturation():
    det = DetectorSpec(1.0, 0.0, dead_time=100.0)
    with pytest.warns(RuntimeWarning):
        rec = simulate_counts(SourceSpec(2.0), det, HALF, 1_000_000, 1)
    k = det.dead_gates(3.1e6)
    assert k == 310
    for d in ("spd1", "spd2", "spd3"):
        assert rec.singles[d] / rec.gates <= 1 / (k + 1)
        # nearly saturated: a click almost every k + 1 gates
        assert rec.singles[d] / rec.gates > 0.9 / (k + 1)


def test_dead_gates_rounding():
    assert DetectorSpec(dead_time=10.0).dead_gates(3.1e6) == 31
    assert DetectorSpec(dead_time=0.0).dead_gates(3.1e6) == 0


def test_apply_dead_time():
    clicks = np.array([0, 1, 2, 5, 6, 9, 20])
    np.testing.assert_array_equal(_apply_dead_time(clicks, 2), [0, 5, 9, 20])
    np.testing.assert_array_equal(_apply_dead_time(clicks, 0), clicks)


def test_dead_time_monotone():
    rates = []
    for dt in (0.0, 2.0, 10.0, 30.0):
        rec = simulate_counts(SourceSpec(0.05), DetectorSpec(0.5, 1e-4, dead_time=dt), HALF,
                              500_000, 42)
        rates.append([rec.singles[d] for d in ("spd1", "spd2", "spd3")])
    rates = np.array(rates)
    assert np.all(np.diff(rates, axis=0) <= 0)


def test_determinism_and_batch_independence():
    src, det = SourceSpec(0.03), DetectorSpec(0.3, 1e-4)
    a = simulate_counts(src, det, HALF, 300_000, 99, batch_size=65536)
    b = simulate_counts(src, det, HALF, 300_000, 99, batch_size=65536)
    c = simulate_counts(src, det, HALF, 300_000, 99, batch_size=65536, workers=4)
    assert a == b == c
    assert a != simulate_counts(src, det, HALF, 300_000, 100, batch_size=65536)


def test_batch_boundary_adjacency_counted():
    # Every gate clicks on every detector: adjacent coincidences = gates - 1, across batches too.
    det = DetectorSpec(1.0, 1.0, dead_time=0.0)
    rec = simulate_counts(SourceSpec(0.0), det, HALF, 1000, 0, batch_size=64)
    assert rec.coinc_same_pulse[SAME_WITNESS] == 1000
    assert rec.coinc_adjacent_pulse[SAME_WITNESS] == 999


def test_true_coincidence_arithmetic():
    rec = CountRecord(1000, {"spd1": 500, "spd2": 500, "spd3": 500},
                      {SAME_WITNESS: 100, DIFF_WITNESS: 150, ("spd1", "spd3"): 0},
                      {SAME_WITNESS: 100, DIFF_WITNESS: 50, ("spd1", "spd3"): 0}, 1000.0)
    assert true_coincidence(rec, SAME_WITNESS) == (0.0, pytest.approx(math.sqrt(200)))
    ct, err = true_coincidence(rec, ("spd3", "spd2"))
    assert ct == 100.0 and err == pytest.approx(math.sqrt(200))
    with pytest.raises(InvalidArgument):
        true_coincidence(rec, ("spd1", "spd4"))


def test_independent_streams_zero_mean():
    # Darks only: independent Bernoulli click streams on each detector.
    cts = []
    for seed in range(30):
        rec = simulate_counts(SourceSpec(0.0), DetectorSpec(0.1, 3e-3), HALF, 200_000, seed)
        cts.append(true_coincidence(rec, DIFF_WITNESS)[0])
    cts = np.array(cts)
    assert abs(cts.mean()) < 3 * cts.std(ddof=1) / math.sqrt(cts.size)


def test_pure_pairs_match_closed_form():
    src = SourceSpec(0.05)
    det = DetectorSpec(0.5, 0.0, dead_time=0.0)
    rec = simulate_counts(src, det, HALF, 4_000_000, 8)
    for pair in (SAME_WITNESS, DIFF_WITNESS):
        ct, err = true_coincidence(rec, pair)
        want = expected_true_coincidence(src, det, HALF, pair)
        assert abs(ct - want) < 3 * err
        # first-order term mu * p / 2 * eta^2 with an O(mu) correction
        first = src.mu * 0.25 * 0.25 * 3.1e6
        assert want == pytest.approx(first, rel=2 * src.mu)


def test_seed_means_match_analytic():
    src, det = SourceSpec(0.02), DetectorSpec(0.5, 1e-4, dead_time=0.0)
    r = RoutingProbabilities(0.3, 0.7)
    cts = np.array([true_coincidence(simulate_counts(src, det, r, 200_000, s), DIFF_WITNESS)[0]
                    for s in range(30)])
    want = expected_true_coincidence(src, det, r, DIFF_WITNESS)
    assert abs(cts.mean() - want) < 3 * cts.std(ddof=1) / math.sqrt(cts.size)


def test_multipair_flag():
    with pytest.warns(RuntimeWarning):
        rec = simulate_counts(SourceSpec(0.8), IDEAL, HALF, 1000, 0)
    assert rec.multipair_flag
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert not simulate_counts(SourceSpec(0.05), IDEAL, HALF, 1000, 0).multipair_flag


def test_invalid_inputs():
    with pytest.raises(InvalidArgument):
        simulate_counts(SourceSpec(0.1), IDEAL, HALF, 0, 0)
    with pytest.raises(InvalidArgument):
        DetectorSpec(1.5)
    with pytest.raises(InvalidArgument):
        SourceSpec(-0.1)


def test_quadratic_power_scaling_of_mu():
    s = SourceSpec(0.02, pump_power_mw=0.46, power_ref_mw=0.23)
    assert s.mu_eff == pytest.approx(0.08)
    assert s.pump_rep_rate_hz == pytest.approx(24.8e6)


def test_power_sweep_empty_and_validation():
    assert power_sweep(SourceSpec(0.01), IDEAL, SPLIT, [], 1000, 0) == []
    with pytest.raises(InvalidArgument):
        power_sweep(SourceSpec(0.01), IDEAL, SPLIT, [0.2, 0.1], 1000, 0)


def test_dead_time_lowers_power_slope():
    # Detector saturation bends the power law below 2.
    powers = np.geomspace(0.04, 0.4, 4)

    def slope(dead):
        pts = power_sweep(SourceSpec(0.0165), DetectorSpec(0.5, 5e-5, dead_time=dead), SPLIT,
                          powers, 2_000_000, 3)
        y = np.array([p.ct_diff for p in pts])
        return np.polyfit(np.log(powers), np.log(y), 1)[0]

    assert slope(10.0) < slope(0.0) - 0.1


def test_sweep_experiment_singles_flat_and_validation():
    cfg = setup_spectral()
    grid = [6.0, 9.0, 10.75, 13.0, 15.2]
    curve = sweep_experiment(cfg, SourceSpec(0.05), DetectorSpec(0.1, 5e-5), grid, 1_000_000, 4)
    assert curve.singles.shape == (5, 3)
    # Singles per detector are flat across the grid (binomial 3 sigma).
    for j in range(3):
        rates = curve.singles[:, j] / 3.1e6
        p = rates.mean()
        assert np.all(np.abs(rates - p) < 2 * three_sigma_binomial(p, 1_000_000))
    with pytest.raises(InvalidArgument):
        sweep_experiment(cfg, SourceSpec(0.05), IDEAL, grid, 0, 4)
    with pytest.raises(InvalidArgument):
        sweep_experiment(cfg, SourceSpec(0.05), IDEAL, [], 10, 4)


def test_routing_at():
    cfg = setup_spectral()
    r = routing_at(cfg, 10.75)
    assert r.p_diff == pytest.approx((1 - math.cos(3.1538393613205753)) / 2, rel=1e-12)
    ra = routing_at(cfg, 10.75, averaged=True)
    assert ra.p_same > r.p_same
