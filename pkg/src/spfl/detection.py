"""Monte Carlo of the gated coincidence-counting experiment.

Detector roles:

* SPD1: idler photons leaving port a (dual-band filter, idler band)
* SPD2: signal photons leaving port a (dual-band filter, signal band)
* SPD3: idler photons leaving port b (tunable filter in the idler band)

SPD1-SPD2 coincidences witness pairs routed to one port; SPD2-SPD3
coincidences witness pairs split across the ports.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgument
from .pairstate import RoutingProbabilities
from .spectral import SpectralConfig, SweepCurve, averaged_cos, fringe_argument

log = logging.getLogger(__name__)

DETECTORS = ("spd1", "spd2", "spd3")
PAIRS = (("spd1", "spd2"), ("spd2", "spd3"), ("spd1", "spd3"))
SAME_WITNESS = ("spd1", "spd2")
DIFF_WITNESS = ("spd2", "spd3")
MULTIPAIR_MU = 0.5
DEFAULT_BATCH = 1 << 20

# Pair outcomes: both in a, both in b, signal a / idler b, idler a / signal b.
# Row o lists which detectors receive a photon for outcome o.
_OUTCOME_HITS = np.array([
    [1, 1, 0],
    [0, 0, 1],
    [0, 1, 1],
    [1, 0, 0],
], dtype=bool)


@dataclass(frozen=True)
class DetectorSpec:
    """Gated InGaAs detector. ``efficiency`` includes filter and coupling loss."""

    efficiency: float = 0.10
    dark_prob: float = 5e-5
    gate_width: float = 2.5     # ns
    dead_time: float = 10.0     # us

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise InvalidArgument(f"efficiency must be in [0, 1], got {self.efficiency}")
        if not 0.0 <= self.dark_prob <= 1.0:
            raise InvalidArgument(f"dark_prob must be in [0, 1], got {self.dark_prob}")
        if self.dead_time < 0 or self.gate_width <= 0:
            raise InvalidArgument("dead_time must be >= 0 and gate_width > 0")

    def dead_gates(self, gate_rate_hz: float) -> int:
        """Gates skipped after a click: ceil(dead_time * gate_rate)."""
        x = self.dead_time * 1e-6 * gate_rate_hz
        return int(math.ceil(round(x, 9)))


@dataclass(frozen=True)
class SourceSpec:
    """Pair source. ``mu`` is the mean pair number per gated pulse at ``power_ref_mw``."""

    mu: float
    pump_power_mw: float = 0.23
    power_ref_mw: float = 0.23
    gate_rate_hz: float = 3.1e6
    rep_divisor: int = 8

    def __post_init__(self):
        if self.mu < 0 or not math.isfinite(self.mu):
            raise InvalidArgument(f"mu must be finite and >= 0, got {self.mu}")
        if self.pump_power_mw < 0 or self.power_ref_mw <= 0:
            raise InvalidArgument("pump powers must be positive")
        if self.gate_rate_hz <= 0 or self.rep_divisor < 1:
            raise InvalidArgument("gate_rate_hz must be > 0 and rep_divisor >= 1")

    @property
    def mu_eff(self) -> float:
        """Pairs per gate at the current pump power; SFWM scales as power squared."""
        return self.mu * (self.pump_power_mw / self.power_ref_mw) ** 2

    @property
    def pump_rep_rate_hz(self) -> float:
        return self.gate_rate_hz * self.rep_divisor


@dataclass
class CountRecord:
    gates: int
    singles: dict[str, int]
    coinc_same_pulse: dict[tuple[str, str], int]
    coinc_adjacent_pulse: dict[tuple[str, str], int]
    gate_rate_hz: float = 3.1e6
    multipair_flag: bool = False

    def check(self) -> None:
        for d, n in self.singles.items():
            assert 0 <= n <= self.gates, d
        for (a, b), n in self.coinc_same_pulse.items():
            assert 0 <= n <= min(self.singles[a], self.singles[b]), (a, b)
        for (a, b), n in self.coinc_adjacent_pulse.items():
            assert 0 <= n <= min(self.singles[a], self.singles[b]), (a, b)

    def singles_rate(self, detector: str) -> float:
        return self.singles[detector] * self.gate_rate_hz / self.gates


@dataclass
class _Batch:
    record: CountRecord
    first: frozenset = field(default_factory=frozenset)   # detectors clicking in gate 0
    last: frozenset = field(default_factory=frozenset)    # detectors clicking in the last gate


def _as_detectors(detectors) -> tuple[DetectorSpec, DetectorSpec, DetectorSpec]:
    if isinstance(detectors, DetectorSpec):
        return (detectors,) * 3
    if isinstance(detectors, dict):
        detectors = [detectors[d] for d in DETECTORS]
    detectors = tuple(detectors)
    if len(detectors) != 3:
        raise InvalidArgument("need exactly three detectors (SPD1, SPD2, SPD3)")
    return detectors


def _bernoulli_positions(rng: np.random.Generator, p: float, n: int) -> np.ndarray:
    """Sorted indices in [0, n) of a Bernoulli(p) process, via geometric gaps."""
    if p <= 0.0 or n == 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(n, dtype=np.int64)
    out = []
    pos = -1
    chunk = max(16, int(n * p * 1.1) + 16)
    while True:
        gaps = rng.geometric(p, size=chunk)
        idx = pos + np.cumsum(gaps)
        out.append(idx[idx < n])
        if idx[-1] >= n:
            break
        pos = int(idx[-1])
    return np.concatenate(out).astype(np.int64)


def _apply_dead_time(clicks: np.ndarray, dead: int) -> np.ndarray:
    """Drop candidate clicks that fall inside the dead window of an accepted click."""
    if dead == 0 or clicks.size < 2:
        return clicks
    # Only clicks closer than `dead` to their predecessor can be affected.
    if np.all(np.diff(clicks) > dead):
        return clicks
    keep = np.empty(clicks.size, dtype=bool)
    live_from = -1
    for k, g in enumerate(clicks.tolist()):
        if g >= live_from:
            keep[k] = True
            live_from = g + dead + 1
        else:
            keep[k] = False
    return clicks[keep]


def batch_seed(seed: int, batch_index: int) -> np.random.SeedSequence:
    """Seed of one batch: a hash of (seed, batch_index) through SeedSequence mixing."""
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(batch_index)])


def _simulate_batch(mu_eff: float, dets, routing: RoutingProbabilities, n: int,
                    gate_rate_hz: float, seed: int, batch_index: int) -> _Batch:
    rng = np.random.default_rng(batch_seed(seed, batch_index))
    pairs = rng.poisson(mu_eff, size=n) if mu_eff > 0 else np.zeros(n, dtype=np.int64)
    total = int(pairs.sum())
    gate_of_pair = np.repeat(np.arange(n, dtype=np.int64), pairs)
    probs = np.array([routing.p_same, routing.p_same, routing.p_diff, routing.p_diff]) / 2.0
    outcome = np.searchsorted(np.cumsum(probs)[:-1], rng.random(total), side="right")
    hits = _OUTCOME_HITS[outcome]                                   # (total, 3)

    clicks = []
    for j, det in enumerate(dets):
        detected = hits[:, j] & (rng.random(total) < det.efficiency)
        photon_gates = gate_of_pair[detected]
        dark_gates = _bernoulli_positions(rng, det.dark_prob, n)
        cand = np.union1d(photon_gates, dark_gates)
        clicks.append(_apply_dead_time(cand, det.dead_gates(gate_rate_hz)))

    singles = {d: int(c.size) for d, c in zip(DETECTORS, clicks)}
    by_name = dict(zip(DETECTORS, clicks))
    same, adj = {}, {}
    for a, b in PAIRS:
        ca, cb = by_name[a], by_name[b]
        same[(a, b)] = int(np.intersect1d(ca, cb, assume_unique=True).size)
        adj[(a, b)] = int(np.intersect1d(ca + 1, cb, assume_unique=True).size)
    rec = CountRecord(n, singles, same, adj, gate_rate_hz)
    first = frozenset(d for d, c in by_name.items() if c.size and c[0] == 0)
    last = frozenset(d for d, c in by_name.items() if c.size and c[-1] == n - 1)
    return _Batch(rec, first, last)


def merge_batches(batches: Sequence[_Batch]) -> CountRecord:
    """Sum batch records in order, adding adjacent-gate coincidences across boundaries."""
    if not batches:
        raise InvalidArgument("nothing to merge")
    r0 = batches[0].record
    gates = 0
    singles = dict.fromkeys(DETECTORS, 0)
    same = dict.fromkeys(PAIRS, 0)
    adj = dict.fromkeys(PAIRS, 0)
    for k, b in enumerate(batches):
        gates += b.record.gates
        for d in DETECTORS:
            singles[d] += b.record.singles[d]
        for p in PAIRS:
            same[p] += b.record.coinc_same_pulse[p]
            adj[p] += b.record.coinc_adjacent_pulse[p]
            if k > 0 and p[0] in batches[k - 1].last and p[1] in b.first:
                adj[p] += 1
    return CountRecord(gates, singles, same, adj, r0.gate_rate_hz,
                       any(b.record.multipair_flag for b in batches))


def simulate_counts(source: SourceSpec, detectors, routing: RoutingProbabilities,
                    n_gates: int, seed: int, batch_size: int = DEFAULT_BATCH,
                    workers: int = 1) -> CountRecord:
    """Simulate ``n_gates`` detector gates and accumulate singles and coincidences.

    Gates are processed in batches of ``batch_size`` with independent streams
    seeded by ``batch_seed(seed, index)``; each batch starts with live detectors.
    For a fixed (seed, batch_size) the result is bit-identical regardless of
    ``workers``.
    """
    if int(n_gates) != n_gates or n_gates <= 0:
        raise InvalidArgument(f"n_gates must be a positive integer, got {n_gates}")
    if batch_size <= 0:
        raise InvalidArgument("batch_size must be positive")
    dets = _as_detectors(detectors)
    mu_eff = source.mu_eff
    flag = mu_eff > MULTIPAIR_MU
    if flag:
        warnings.warn(f"mean pairs per gate {mu_eff:.3g} > {MULTIPAIR_MU}: "
                      "independent-pair routing model is unreliable", RuntimeWarning, stacklevel=2)
    sizes = [batch_size] * (int(n_gates) // batch_size)
    if n_gates % batch_size:
        sizes.append(int(n_gates) % batch_size)

    def run(k):
        return _simulate_batch(mu_eff, dets, routing, sizes[k], source.gate_rate_hz, seed, k)

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(workers) as ex:
            batches = list(ex.map(run, range(len(sizes))))
    else:
        batches = [run(k) for k in range(len(sizes))]
    rec = merge_batches(batches)
    rec.multipair_flag = flag
    return rec


def true_coincidence(record: CountRecord, pair: tuple[str, str]) -> tuple[float, float]:
    """Accidental-subtracted coincidence rate and its Poisson error, both in counts/s."""
    if record.gates <= 0:
        raise InvalidArgument("record has no gates")
    pair = tuple(pair)
    if pair not in record.coinc_same_pulse:
        pair = pair[::-1]
    if pair not in record.coinc_same_pulse:
        raise InvalidArgument(f"unknown detector pair {pair}")
    c_same = record.coinc_same_pulse[pair]
    c_adj = record.coinc_adjacent_pulse[pair]
    scale = record.gate_rate_hz / record.gates
    return (c_same - c_adj) * scale, math.sqrt(c_same + c_adj) * scale


def expected_true_coincidence(source: SourceSpec, detectors, routing: RoutingProbabilities,
                              pair: tuple[str, str]) -> float:
    """Closed-form C_T (counts/s) for Poisson pairs, ignoring dead time.

    Poisson thinning splits pairs into independent streams that fire only a,
    only b, or both; C_T per gate is P(no a, no b) - P(no a) P(no b).
    """
    dets = _as_detectors(detectors)
    ia, ib = DETECTORS.index(pair[0]), DETECTORS.index(pair[1])
    q = np.array([routing.p_same, routing.p_same, routing.p_diff, routing.p_diff]) / 2.0
    ea = _OUTCOME_HITS[:, ia] * dets[ia].efficiency
    eb = _OUTCOME_HITS[:, ib] * dets[ib].efficiency
    mu = source.mu_eff
    lam_ab = mu * float(q @ (ea * eb))
    lam_a = mu * float(q @ (ea * (1 - eb)))
    lam_b = mu * float(q @ ((1 - ea) * eb))
    da, db = dets[ia].dark_prob, dets[ib].dark_prob
    per_gate = ((1 - da) * (1 - db) * math.exp(-lam_a - lam_b - lam_ab)
                * -math.expm1(-lam_ab))
    return per_gate * source.gate_rate_hz


# ---------------------------------------------------------------------------
# Experiments

@dataclass(frozen=True)
class PowerPoint:
    power_mw: float
    ct_same: float
    err_same: float
    ct_diff: float
    err_diff: float


def _derived_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0])


def power_sweep(source: SourceSpec, detectors, routing: RoutingProbabilities,
                powers: Iterable[float], n_gates: int, seed: int,
                **kw) -> list[PowerPoint]:
    """C_T of both witnesses versus average pump power (pair number scales as power^2)."""
    powers = [float(p) for p in powers]
    if any(p <= 0 for p in powers):
        raise InvalidArgument("powers must be positive")
    if any(b <= a for a, b in zip(powers, powers[1:])):
        raise InvalidArgument("powers must be strictly increasing")
    out = []
    for k, p in enumerate(powers):
        src = SourceSpec(source.mu, p, source.power_ref_mw, source.gate_rate_hz,
                         source.rep_divisor)
        rec = simulate_counts(src, detectors, routing, n_gates, _derived_seed(seed, k), **kw)
        cs, es = true_coincidence(rec, SAME_WITNESS)
        cd, ed = true_coincidence(rec, DIFF_WITNESS)
        out.append(PowerPoint(p, cs, es, cd, ed))
    return out


def routing_at(config: SpectralConfig, delta_lambda: float,
               averaged: bool = False) -> RoutingProbabilities:
    """Pair routing at one detuning (HR-tuned loop, so the pair phase is the dispersion phase).

    With ``averaged`` the phase is averaged over the port-a passbands.
    """
    if averaged:
        c = averaged_cos(config, delta_lambda, "same")
    else:
        c = math.cos(fringe_argument(config, delta_lambda))
    p_same = min(1.0, max(0.0, 0.5 * (1.0 + c)))
    return RoutingProbabilities(p_same, 1.0 - p_same)


def sweep_experiment(config: SpectralConfig, source: SourceSpec, detectors,
                     grid: Sequence[float], n_gates: int, seed: int,
                     averaged: bool = False, **kw) -> SweepCurve:
    """Monte Carlo version of the detuning sweep: C_T for both witnesses plus singles rates."""
    grid = [float(x) for x in grid]
    if not grid:
        raise InvalidArgument("empty detuning grid")
    if int(n_gates) != n_gates or n_gates <= 0:
        raise InvalidArgument(f"n_gates must be a positive integer, got {n_gates}")
    for x in grid:
        if not 0 < x < config.lambda_p0 / 2:
            raise InvalidArgument(f"detuning {x} outside (0, lambda_p0/2)")
    same, diff, es, ed, singles = [], [], [], [], []
    for k, dl in enumerate(grid):
        rec = simulate_counts(source, detectors, routing_at(config, dl, averaged), n_gates,
                              _derived_seed(seed, k), **kw)
        cs, s_err = true_coincidence(rec, SAME_WITNESS)
        cd, d_err = true_coincidence(rec, DIFF_WITNESS)
        same.append(cs)
        diff.append(cd)
        es.append(s_err)
        ed.append(d_err)
        singles.append([rec.singles_rate(d) for d in DETECTORS])
        log.debug("dl=%.3f nm C_same=%.4g C_diff=%.4g", dl, cs, cd)
    return SweepCurve(grid, same, diff, es, ed, np.array(singles))
