"""Inverse design: fiber imbalance or detuning for a target routing, and contrast budgets."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .dispersion import detuning_to_omega, omega_to_detuning
from .errors import InvalidArgument, NoSwitchingPossible, RootNotBracketed
from .pairstate import switching_detuning, target_phase
from .spectral import FilterSpec, SpectralConfig, contrast_ratio, fringe_root


class Routing(str, Enum):
    SAME_PORT = "same"
    DIFFERENT_PORT = "diff"


@dataclass(frozen=True)
class DesignTarget:
    """Routing goal at fringe order ``n``; exactly one of the two quantities is left as None."""

    target: Routing
    n: int = 0
    detuning: float | None = None            # nm
    length_difference: float | None = None   # m, L2 - L1

    def __post_init__(self):
        object.__setattr__(self, "target", Routing(self.target))
        if self.n < 0:
            raise InvalidArgument("order n must be >= 0")
        if (self.detuning is None) == (self.length_difference is None):
            raise InvalidArgument("exactly one of detuning / length_difference must be unknown")


def solve_length_difference(beta2: float, delta_lambda: float, lambda_p0: float,
                            n: int, target: str) -> float:
    """|L2 - L1| (m) placing ``delta_lambda`` on the requested fringe.

    Only the magnitude is determined: +|dL| and -|dL| give the same routing.
    """
    if beta2 == 0.0 or not math.isfinite(beta2):
        raise NoSwitchingPossible("beta2 = 0: fiber imbalance cannot produce a phase")
    dw = detuning_to_omega(delta_lambda, lambda_p0)
    if dw == 0.0:
        raise NoSwitchingPossible("zero detuning has no dispersion phase")
    return target_phase(n, Routing(target).value) / (abs(beta2) * dw * dw)


def solve(design: DesignTarget, beta2: float, lambda_p0: float) -> float:
    """Fill in the unknown of ``design``: detuning in nm or |L2 - L1| in m."""
    if design.length_difference is None:
        return solve_length_difference(beta2, design.detuning, lambda_p0, design.n,
                                       design.target.value)
    dw = switching_detuning(beta2, 0.0, design.length_difference, design.n, design.target.value)
    return omega_to_detuning(dw, lambda_p0)


@dataclass(frozen=True)
class SwitchingRow:
    n: int
    delta_lambda_diff: float    # nm, nan if unreachable
    delta_lambda_same: float
    phase_diff: float
    phase_same: float

    @property
    def reachable(self) -> bool:
        return not (math.isnan(self.delta_lambda_diff) or math.isnan(self.delta_lambda_same))


@dataclass(frozen=True)
class SwitchingTable:
    rows: tuple[SwitchingRow, ...]

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "delta_lambda_diff_nm", "delta_lambda_same_nm"])
        for r in self.rows:
            w.writerow([r.n, repr(r.delta_lambda_diff), repr(r.delta_lambda_same)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _refined_detuning(alpha: float, lambda_p0: float, phase: float) -> float:
    """Detuning where alpha * dW(dl)^2 = phase, or nan beyond lambda_p0 / 2."""
    seed = omega_to_detuning(math.sqrt(phase / abs(alpha)), lambda_p0)
    limit = lambda_p0 / 2
    if seed >= limit:
        return math.nan
    # Closed-form seed already includes the idler-wavelength dependence; the
    # bracketed solve re-derives it from the fringe argument as a check.
    cfg = _root_config(alpha, lambda_p0)
    lo, hi = 0.98 * seed, min(1.02 * seed, limit * (1 - 1e-12))
    try:
        return fringe_root(cfg, phase, (lo, hi))
    except RootNotBracketed:
        return math.nan


def _root_config(alpha: float, lambda_p0: float) -> SpectralConfig:
    f = FilterSpec(lambda_p0, 1.0)
    return SpectralConfig(lambda_p0, f, f, f, alpha, 0.0, 0.0)


def switching_table(beta2: float, L1: float, L2: float, lambda_p0: float,
                    n_max: int) -> SwitchingTable:
    """Split- and same-port detunings for orders 0..n_max; unreachable rows hold nan."""
    if int(n_max) != n_max or n_max < 0:
        raise InvalidArgument(f"n_max must be a non-negative integer, got {n_max}")
    alpha = beta2 * (L2 - L1)
    rows = []
    for n in range(int(n_max) + 1):
        ph_d, ph_s = target_phase(n, "diff"), target_phase(n, "same")
        if alpha == 0.0 or not math.isfinite(alpha):
            dl_d = dl_s = math.nan
        else:
            dl_d = _refined_detuning(alpha, lambda_p0, ph_d)
            dl_s = _refined_detuning(alpha, lambda_p0, ph_s)
        rows.append(SwitchingRow(n, dl_d, dl_s, ph_d, ph_s))
    return SwitchingTable(tuple(rows))


def detuning_sensitivity(config: SpectralConfig, delta_lambda_nominal: float,
                         delta: float) -> tuple[float, float, float]:
    """Averaged contrast at nominal - delta, nominal, nominal + delta."""
    return tuple(contrast_ratio(config, delta_lambda_nominal + s * delta, averaged=True)
                 for s in (-1.0, 0.0, 1.0))


def with_alpha_from_loop(config: SpectralConfig, beta2: float, L1: float,
                         L2: float) -> SpectralConfig:
    return replace(config, alpha=beta2 * (L2 - L1))
