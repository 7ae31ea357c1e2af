"""Wavelength-domain coincidence fringe, passband averaging, root finding and fitting.

The pair phase is modeled as ``alpha * dW**2`` where ``dW`` is the angular
detuning of the pair from the pump center and ``alpha = beta2 * (L2 - L1)``.
Filter passbands of the pump (two photons) and of both detection arms spread
that phase; :func:`bandwidth_averaged_fringe` integrates over the spread.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import brentq

from .dispersion import C_NM_PER_PS, detuning_to_omega
from .errors import (FitDegenerate, InvalidArgument, InvalidConfiguration,
                     MaxIterations, RootNotBracketed)

Branch = Literal["same", "diff"]
Shape = Literal["rectangular", "gaussian"]

# Gaussian passbands are integrated out to this many FWHM on each side.
GAUSS_SUPPORT_FWHM = 2.0
GAUSS_PANELS = 4
_FOUR_LN2 = 4.0 * math.log(2.0)


@dataclass(frozen=True)
class FilterSpec:
    """Band-pass filter. ``center`` is informational for tunable filters,
    which are retuned to the pair wavelengths at each detuning."""

    center: float
    fwhm: float
    shape: Shape = "rectangular"

    def __post_init__(self):
        if not (math.isfinite(self.fwhm) and self.fwhm > 0):
            raise InvalidArgument(f"filter fwhm must be > 0, got {self.fwhm}")
        if not (math.isfinite(self.center) and self.center > 0):
            raise InvalidArgument(f"filter center must be > 0, got {self.center}")
        if self.shape not in ("rectangular", "gaussian"):
            raise InvalidArgument(f"unknown filter shape {self.shape!r}")

    def omega_fwhm(self, lambda_nm: float) -> float:
        """FWHM in rad/ps when the filter sits at ``lambda_nm``."""
        return 2.0 * math.pi * C_NM_PER_PS * self.fwhm / lambda_nm ** 2

    def half_support(self, lambda_nm: float) -> float:
        w = self.omega_fwhm(lambda_nm)
        return 0.5 * w if self.shape == "rectangular" else GAUSS_SUPPORT_FWHM * w

    def weight(self, offset: np.ndarray, lambda_nm: float) -> np.ndarray | float:
        if self.shape == "rectangular":
            return 1.0
        w = self.omega_fwhm(lambda_nm)
        return np.exp(-_FOUR_LN2 * (offset / w) ** 2)


@dataclass(frozen=True)
class SpectralConfig:
    """Fringe parameters.

    ``signal_filter``/``idler_filter`` are the two bands of the port-a dual-band
    filter; ``port_b_filter`` is the idler filter in front of the port-b
    detector and, when set, replaces ``idler_filter`` for the ``diff`` branch.
    """

    lambda_p0: float
    pump_filter: FilterSpec
    signal_filter: FilterSpec
    idler_filter: FilterSpec
    alpha: float
    xi_same: float
    xi_diff: float
    port_b_filter: FilterSpec | None = None
    quad_order: int = 16

    def __post_init__(self):
        if not (math.isfinite(self.lambda_p0) and self.lambda_p0 > 0):
            raise InvalidConfiguration(f"lambda_p0 must be > 0, got {self.lambda_p0}")
        if not math.isfinite(self.alpha):
            raise InvalidConfiguration("alpha must be finite")
        if self.xi_same < 0 or self.xi_diff < 0:
            raise InvalidConfiguration("xi values must be >= 0")
        if self.quad_order < 2:
            raise InvalidConfiguration(f"quadrature order must be >= 2, got {self.quad_order}")

    def xi(self, branch: Branch) -> float:
        return self.xi_same if _check_branch(branch) == "same" else self.xi_diff

    def arm_filters(self, branch: Branch) -> tuple[FilterSpec, FilterSpec]:
        """(signal, idler) filters seen by the coincidence witness of ``branch``."""
        if _check_branch(branch) == "diff" and self.port_b_filter is not None:
            return self.signal_filter, self.port_b_filter
        return self.signal_filter, self.idler_filter


def _check_branch(branch: str) -> str:
    if branch not in ("same", "diff"):
        raise InvalidArgument(f"branch must be 'same' or 'diff', got {branch!r}")
    return branch


def _check_detuning(delta_lambda: float, lambda_p0: float) -> None:
    if not (math.isfinite(delta_lambda) and 0 < delta_lambda < lambda_p0):
        raise InvalidArgument(f"detuning must lie in (0, {lambda_p0}) nm, got {delta_lambda}")


def fringe_argument(config: SpectralConfig, delta_lambda):
    """|alpha| * dW^2 with dW = 2 pi c dl / (lambda_p0 * lambda_i0); vectorized."""
    dl = np.asarray(delta_lambda, dtype=float)
    lp = config.lambda_p0
    dw = 2.0 * math.pi * C_NM_PER_PS * dl / (lp * (lp - dl))
    out = abs(config.alpha) * dw * dw
    return float(out) if out.ndim == 0 else out


def fringe_model(config: SpectralConfig, delta_lambda: float, branch: Branch) -> float:
    """Center-frequency coincidence rate xi * (1 +/- cos(arg))."""
    _check_detuning(delta_lambda, config.lambda_p0)
    sign = 1.0 if _check_branch(branch) == "same" else -1.0
    return config.xi(branch) * (1.0 + sign * math.cos(fringe_argument(config, delta_lambda)))


def fringe_root(config: SpectralConfig, target_phase: float,
                bracket: tuple[float, float]) -> float:
    """Detuning (nm) inside ``bracket`` where the fringe argument equals ``target_phase``."""
    lo, hi = bracket
    if not (0 < lo < hi < config.lambda_p0):
        raise InvalidArgument(f"bad bracket {bracket}")

    def f(dl):
        return fringe_argument(config, dl) - target_phase

    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise RootNotBracketed(
            f"fringe argument does not cross {target_phase} on [{lo}, {hi}] nm")
    root = brentq(f, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=200)
    if abs(f(root)) >= 1e-10:
        raise RootNotBracketed(f"root refinement stalled at {root} (residual {f(root)})")
    return root


# fringe_argument_root is the name used across the CLI and design modules.
fringe_argument_root = fringe_root


@lru_cache(maxsize=None)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


@lru_cache(maxsize=None)
def _composite(n: int, panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on [0, 1] with equal panels."""
    x, w = _legendre(n)
    edges = np.arange(panels) / panels
    nodes = (edges[:, None] + (x + 1.0) / (2 * panels)).ravel()
    weights = np.tile(w / (2 * panels), panels)
    return nodes, weights


def _map_nodes(lo, hi, n, panels=1):
    """Quadrature nodes/weights on [lo, hi]; lo, hi broadcast, new last axis."""
    x, w = _composite(n, panels)
    lo = np.asarray(lo)[..., None]
    hi = np.asarray(hi)[..., None]
    span = hi - lo
    return lo + span * x, span * w


def averaged_cos(config: SpectralConfig, delta_lambda: float, branch: Branch) -> float:
    """Passband-weighted mean of cos(phase) for the coincidence witness of ``branch``.

    Integration variables are the pair sum frequency S = ws + wi, the pair
    half-difference D = (wi - ws)/2 and the pump half-difference P; the pump
    photons sit at S/2 +/- P. With those, the phase is alpha * (D^2 - P^2) and
    every passband edge is a straight line, so the domain splits into pieces
    on which the integrand is smooth and Gauss-Legendre converges spectrally.
    """
    _check_detuning(delta_lambda, config.lambda_p0)
    n = config.quad_order
    lp = config.lambda_p0
    dw = detuning_to_omega(delta_lambda, lp)
    lam_i = lp - delta_lambda
    lam_s = 2.0 * math.pi * C_NM_PER_PS / (2.0 * math.pi * C_NM_PER_PS / lp - dw)
    f_sig, f_idl = config.arm_filters(branch)
    f_pump = config.pump_filter

    hs, hi_, hp = f_sig.half_support(lam_s), f_idl.half_support(lam_i), f_pump.half_support(lp)
    # Offsets from the pump center frequency; idler on the blue side.
    i_lo, i_hi = dw - hi_, dw + hi_
    s_lo, s_hi = -dw - hs, -dw + hs
    lo, hi = max(i_lo + s_lo, -2.0 * hp), min(i_hi + s_hi, 2.0 * hp)
    if not lo < hi:
        raise InvalidConfiguration("pump band cannot feed the selected signal/idler bands")
    cuts = {lo, hi}
    for b in (i_lo + s_hi, i_hi + s_lo, 0.0):
        if lo < b < hi:
            cuts.add(b)
    cuts = sorted(cuts)

    # Gaussian weights vary across the support; resolve them with composite panels.
    m = 1 if all(f.shape == "rectangular" for f in (f_sig, f_idl, f_pump)) else GAUSS_PANELS
    alpha = config.alpha
    num = den = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        S, wS = _map_nodes(a, b, n, m)
        d_lo = np.maximum(i_lo - S / 2, S / 2 - s_hi)
        d_hi = np.minimum(i_hi - S / 2, S / 2 - s_lo)
        D, wD = _map_nodes(d_lo, d_hi, n, m)
        p_half = hp - np.abs(S) / 2
        P, wP = _map_nodes(-p_half, p_half, n, m)
        Sg = S[:, None, None]
        Dg = D[:, :, None]
        Pg = P[:, None, :]
        w = wS[:, None, None] * wD[:, :, None] * wP[:, None, :]
        w = w * f_idl.weight(Sg / 2 + Dg - dw, lam_i) * f_sig.weight(Sg / 2 - Dg + dw, lam_s)
        w = w * f_pump.weight(Sg / 2 + Pg, lp) * f_pump.weight(Sg / 2 - Pg, lp)
        num += float(np.sum(w * np.cos(alpha * (Dg * Dg - Pg * Pg))))
        den += float(np.sum(w))
    return num / den


def bandwidth_averaged_fringe(config: SpectralConfig, delta_lambda: float,
                              branch: Branch) -> float:
    sign = 1.0 if _check_branch(branch) == "same" else -1.0
    return config.xi(branch) * (1.0 + sign * averaged_cos(config, delta_lambda, branch))


def contrast_ratio(config: SpectralConfig, delta_lambda: float, averaged: bool = True) -> float:
    """Favored over suppressed branch rate; ``inf`` when the suppressed rate is exactly zero."""
    model = bandwidth_averaged_fringe if averaged else fringe_model
    c_same = model(config, delta_lambda, "same")
    c_diff = model(config, delta_lambda, "diff")
    hi, lo = max(c_same, c_diff), min(c_same, c_diff)
    if lo <= 0.0:
        return math.inf
    return hi / lo


# ---------------------------------------------------------------------------
# Sweep data

CSV_COLUMNS = ["delta_lambda_nm", "ct_same", "ct_diff", "err_same", "err_diff"]
SINGLES_COLUMNS = ["rs_spd1", "rs_spd2", "rs_spd3"]


class CsvParseError(InvalidArgument):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _col(values) -> np.ndarray:
    return np.asarray(values, dtype=float).reshape(-1)


@dataclass
class SweepCurve:
    """True-coincidence rates (counts/s) on a strictly increasing detuning grid."""

    delta_lambda: np.ndarray
    c_t_same: np.ndarray
    c_t_diff: np.ndarray
    err_same: np.ndarray | None = None
    err_diff: np.ndarray | None = None
    singles: np.ndarray | None = None   # shape (n, 3): SPD1..SPD3 rates

    def __post_init__(self):
        self.delta_lambda = _col(self.delta_lambda)
        n = self.delta_lambda.size
        self.c_t_same = _col(self.c_t_same)
        self.c_t_diff = _col(self.c_t_diff)
        self.err_same = np.zeros(n) if self.err_same is None else _col(self.err_same)
        self.err_diff = np.zeros(n) if self.err_diff is None else _col(self.err_diff)
        for arr in (self.c_t_same, self.c_t_diff, self.err_same, self.err_diff):
            if arr.size != n:
                raise InvalidArgument("sweep columns have different lengths")
        if self.singles is not None:
            self.singles = np.asarray(self.singles, dtype=float).reshape(n, 3)
        if n > 1 and not np.all(np.diff(self.delta_lambda) > 0):
            raise InvalidArgument("delta_lambda must be strictly increasing")

    def __len__(self):
        return self.delta_lambda.size

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = CSV_COLUMNS + (SINGLES_COLUMNS if self.singles is not None else [])
        w.writerow(cols)
        for k in range(len(self)):
            row = [self.delta_lambda[k], self.c_t_same[k], self.c_t_diff[k],
                   self.err_same[k], self.err_diff[k]]
            if self.singles is not None:
                row.extend(self.singles[k])
            w.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source: str | Path, *, text: str | None = None) -> "SweepCurve":
        """Parse the sweep CSV dialect. Errors name the offending line."""
        if text is None:
            text = Path(source).read_text()
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise CsvParseError("empty file", 1)
        header = [h.strip() for h in rows[0]]
        if header[:5] != CSV_COLUMNS:
            raise CsvParseError(f"expected header {','.join(CSV_COLUMNS)}", 1)
        has_singles = header[5:] == SINGLES_COLUMNS
        if len(header) > 5 and not has_singles:
            raise CsvParseError(f"unexpected columns {header[5:]}", 1)
        data = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
            try:
                vals = [float(x) for x in row]
            except ValueError:
                raise CsvParseError(f"non-numeric field in {row}", lineno) from None
            if not all(math.isfinite(v) for v in vals[:3]):
                raise CsvParseError("non-finite value", lineno)
            if data and vals[0] <= data[-1][0]:
                raise CsvParseError("delta_lambda_nm must be strictly increasing", lineno)
            data.append(vals)
        if not data:
            raise CsvParseError("no data rows", len(rows))
        a = np.array(data)
        return cls(a[:, 0], a[:, 1], a[:, 2], a[:, 3], a[:, 4],
                   a[:, 5:8] if has_singles else None)


def analytic_sweep(config: SpectralConfig, grid: Sequence[float],
                   averaged: bool = True) -> SweepCurve:
    model = bandwidth_averaged_fringe if averaged else fringe_model
    grid = _col(grid)
    same = [model(config, float(x), "same") for x in grid]
    diff = [model(config, float(x), "diff") for x in grid]
    return SweepCurve(grid, same, diff)


# ---------------------------------------------------------------------------
# Fitting

@dataclass
class FitResult:
    xi_same: float
    xi_diff: float
    alpha: float
    residual: float
    iterations: int
    converged: bool = True
    history: list = field(default_factory=list, repr=False)

    @property
    def params(self) -> tuple[float, float, float]:
        return self.xi_same, self.xi_diff, self.alpha


def _fit_residuals(theta, dw2, y_same, y_diff, w_same, w_diff):
    xs, xd, a = theta
    c = np.cos(a * dw2)
    return np.concatenate([(xs * (1 + c) - y_same) * w_same, (xd * (1 - c) - y_diff) * w_diff])


def _fit_jacobian(theta, dw2, w_same, w_diff):
    xs, xd, a = theta
    c = np.cos(a * dw2)
    s = np.sin(a * dw2)
    z = np.zeros_like(c)
    top = np.column_stack([(1 + c) * w_same, z, -xs * s * dw2 * w_same])
    bot = np.column_stack([z, (1 - c) * w_diff, xd * s * dw2 * w_diff])
    return np.vstack([top, bot])


def _linear_xis(a, dw2, y_same, y_diff, w_same, w_diff):
    """Best xi pair for fixed alpha, and the resulting cost."""
    c = np.cos(a * dw2)
    bs, bd = (1 + c) * w_same, (1 - c) * w_diff
    ys, yd = y_same * w_same, y_diff * w_diff
    xs = float(bs @ ys / (bs @ bs)) if bs @ bs > 0 else 0.0
    xd = float(bd @ yd / (bd @ bd)) if bd @ bd > 0 else 0.0
    cost = float(np.sum((xs * bs - ys) ** 2) + np.sum((xd * bd - yd) ** 2))
    return xs, xd, cost


def _scan_costs(alphas, dw2, y_same, y_diff, w_same, w_diff):
    """Vectorized cost of :func:`_linear_xis` over a grid of alphas."""
    c = np.cos(np.outer(alphas, dw2))
    total = np.zeros(alphas.size)
    for basis, y in (((1 + c) * w_same, y_same * w_same), ((1 - c) * w_diff, y_diff * w_diff)):
        bb = np.einsum("ij,ij->i", basis, basis)
        by = basis @ y
        xi = np.divide(by, bb, out=np.zeros_like(by), where=bb > 0)
        total += np.sum((xi[:, None] * basis - y) ** 2, axis=1)
    return total


def fit_fringe(delta_lambda, ct_same, ct_diff, initial: tuple[float, float, float],
               lambda_p0: float, err_same=None, err_diff=None,
               max_iter: int = 200, xtol: float = 1e-10, scan: bool = True) -> FitResult:
    """Joint damped least-squares fit of (xi_same, xi_diff, alpha) to both branches.

    Alpha enters only through cos, so its sign is unidentifiable; the magnitude
    is reported. With ``scan`` the starting alpha is refined by a 1-D search
    over [0.5, 1.5] x initial alpha with the xi's solved linearly, which keeps
    Levenberg-Marquardt out of neighbouring fringe minima.
    """
    dl = _col(delta_lambda)
    y_same, y_diff = _col(ct_same), _col(ct_diff)
    if dl.size != y_same.size or dl.size != y_diff.size:
        raise InvalidArgument("data columns have different lengths")
    xs0, xd0, a0 = (float(v) for v in initial)
    if a0 == 0 or not math.isfinite(a0):
        raise InvalidArgument("initial alpha must be finite and nonzero")
    if dl.size < 4 or np.unique(dl).size < 2:
        raise FitDegenerate(f"need >= 4 points at distinct detunings, got {dl.size}")
    if np.any(dl <= 0) or np.any(dl >= lambda_p0):
        raise InvalidArgument("detunings must lie in (0, lambda_p0)")
    dw = 2.0 * math.pi * C_NM_PER_PS * dl / (lambda_p0 * (lambda_p0 - dl))
    dw2 = dw * dw
    a0 = abs(a0)
    if a0 * (dw2.max() - dw2.min()) < math.pi:
        raise FitDegenerate("data span less than half a fringe period")

    def weights(err):
        if err is None:
            return np.ones_like(dl)
        e = _col(err)
        return 1.0 / e if np.all(e > 0) else np.ones_like(dl)

    w_same, w_diff = weights(err_same), weights(err_diff)

    if scan:
        alphas = np.linspace(0.5 * a0, 1.5 * a0, 4001)
        a0 = float(alphas[int(np.argmin(_scan_costs(alphas, dw2, y_same, y_diff,
                                                     w_same, w_diff)))])
        xs0, xd0, _ = _linear_xis(a0, dw2, y_same, y_diff, w_same, w_diff)

    theta = np.array([xs0, xd0, a0])
    r = _fit_residuals(theta, dw2, y_same, y_diff, w_same, w_diff)
    cost = float(r @ r)
    lam = 1e-3
    history = [cost]
    for it in range(1, max_iter + 1):
        J = _fit_jacobian(theta, dw2, w_same, w_diff)
        g = J.T @ r
        A = J.T @ J
        diag = np.diag(A).copy()
        if not np.all(np.isfinite(A)) or np.all(diag == 0):
            raise FitDegenerate("singular normal equations")
        diag[diag == 0] = 1.0
        while True:
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                raise FitDegenerate("singular normal equations") from None
            trial = theta + step
            trial[2] = abs(trial[2])
            r_new = _fit_residuals(trial, dw2, y_same, y_diff, w_same, w_diff)
            cost_new = float(r_new @ r_new)
            if cost_new <= cost:
                lam = max(lam / 10.0, 1e-12)
                break
            lam *= 10.0
            if lam > 1e16:
                # No descent direction left: already at the minimum to float precision.
                return FitResult(*theta, residual=cost, iterations=it, history=history)
        rel_step = np.max(np.abs(trial - theta) / np.maximum(np.abs(trial), 1e-300))
        theta, r, cost = trial, r_new, cost_new
        history.append(cost)
        if rel_step < xtol:
            return FitResult(*theta, residual=cost, iterations=it, history=history)
    raise MaxIterations(f"no convergence in {max_iter} iterations",
                        best=tuple(float(v) for v in theta), residual=cost)


def fit_sweep(curve: SweepCurve, initial, lambda_p0: float, weighted: bool = False,
              **kw) -> FitResult:
    errs = (curve.err_same, curve.err_diff) if weighted else (None, None)
    return fit_fringe(curve.delta_lambda, curve.c_t_same, curve.c_t_diff, initial,
                      lambda_p0, err_same=errs[0], err_diff=errs[1], **kw)
