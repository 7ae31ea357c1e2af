"""Fiber dispersion and the dispersion-induced phase of counter-propagating pairs.

Units: angular frequency in rad/ps, length in m, beta_n in ps^n/m, wavelength in nm.
With these, ``k * L`` comes out directly in radians.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidArgument

C_NM_PER_PS = 299792.458
ENERGY_REL_TOL = 1e-12


def _finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise InvalidArgument(f"non-finite input: {v!r}")


def wavelength_to_omega(lambda_nm: float) -> float:
    """Angular frequency (rad/ps) of a vacuum wavelength in nm."""
    if not lambda_nm > 0:
        raise InvalidArgument(f"wavelength must be positive, got {lambda_nm}")
    return 2.0 * math.pi * C_NM_PER_PS / lambda_nm


def omega_to_wavelength(omega: float) -> float:
    if not omega > 0:
        raise InvalidArgument(f"angular frequency must be positive, got {omega}")
    return 2.0 * math.pi * C_NM_PER_PS / omega


@dataclass(frozen=True)
class FiberSpec:
    """One fiber segment: length plus Taylor dispersion coefficients at ``lambda_ref``."""

    length: float
    lambda_ref: float
    beta2: float
    beta1: float = 0.0
    beta3: float = 0.0

    def __post_init__(self):
        _finite(self.length, self.lambda_ref, self.beta1, self.beta2, self.beta3)
        if self.length < 0:
            raise InvalidArgument(f"fiber length must be >= 0, got {self.length}")
        if self.lambda_ref <= 0:
            raise InvalidArgument(f"lambda_ref must be > 0, got {self.lambda_ref}")

    @property
    def omega_ref(self) -> float:
        return wavelength_to_omega(self.lambda_ref)

    def same_dispersion(self, other: "FiberSpec") -> bool:
        return (self.lambda_ref, self.beta1, self.beta2, self.beta3) == (
            other.lambda_ref, other.beta1, other.beta2, other.beta3)


@dataclass(frozen=True)
class FrequencyQuad:
    """Pump, signal and idler angular frequencies of one four-wave-mixing event."""

    omega_p1: float
    omega_p2: float
    omega_s: float
    omega_i: float

    def __post_init__(self):
        _finite(self.omega_p1, self.omega_p2, self.omega_s, self.omega_i)
        lhs = self.omega_p1 + self.omega_p2
        rhs = self.omega_s + self.omega_i
        if abs(lhs - rhs) > ENERGY_REL_TOL * max(abs(lhs), abs(rhs)):
            raise InvalidArgument(
                f"energy not conserved: p1+p2={lhs!r} vs s+i={rhs!r}")

    @classmethod
    def nondegenerate(cls, omega_p: float, delta_omega: float) -> "FrequencyQuad":
        """Single pump, pair at omega_p +/- delta_omega."""
        return cls(omega_p, omega_p, omega_p + delta_omega, omega_p - delta_omega)

    @classmethod
    def degenerate(cls, omega_si: float, delta_omega: float) -> "FrequencyQuad":
        """Two pumps at omega_si -/+ delta_omega, both photons at omega_si."""
        return cls(omega_si - delta_omega, omega_si + delta_omega, omega_si, omega_si)

    @property
    def detuning(self) -> float:
        """Half the spread of whichever pair (pumps or photons) is non-degenerate."""
        return max(abs(self.omega_s - self.omega_i), abs(self.omega_p1 - self.omega_p2)) / 2.0


@dataclass(frozen=True)
class LoopConfig:
    nlf: FiberSpec
    smf1: FiberSpec
    smf2: FiberSpec
    phi_p1: float = 0.0
    phi_p2: float = 0.0
    coupler_ratio: float = 0.5

    def __post_init__(self):
        _finite(self.phi_p1, self.phi_p2, self.coupler_ratio)
        if self.coupler_ratio != 0.5:
            raise InvalidArgument("only a 50/50 coupler is modeled")

    def hr_condition(self, atol: float = 1e-12) -> bool:
        """True when the loop fully reflects the pump (phi_p1 + phi_p2 = 0 mod 2pi)."""
        r = math.remainder(self.phi_p1 + self.phi_p2, 2.0 * math.pi)
        return abs(r) <= atol

    @property
    def alpha(self) -> float:
        """beta2 * (L2 - L1) in ps^2, assuming both SMFs share one beta2."""
        return self.smf1.beta2 * (self.smf2.length - self.smf1.length)


def wavevector(fiber: FiberSpec, omega: float) -> float:
    """k(omega) - k0 from the Taylor expansion about the fiber reference frequency.

    The constant k0 is dropped; it cancels in every four-wave combination.
    """
    _finite(omega)
    if omega <= 0:
        raise InvalidArgument(f"omega must be > 0, got {omega}")
    d = omega - fiber.omega_ref
    return fiber.beta1 * d + 0.5 * fiber.beta2 * d * d + fiber.beta3 * d * d * d / 6.0


def phase_mismatch(fiber: FiberSpec, freqs: FrequencyQuad) -> float:
    """k_p1 + k_p2 - k_s - k_i in rad/m.

    Offsets are taken from the mean frequency (equal for pumps and photons by
    energy conservation), so the beta1 terms cancel analytically rather than
    through floating-point subtraction.
    """
    center = 0.5 * (freqs.omega_p1 + freqs.omega_p2)
    shift = center - fiber.omega_ref
    offs_p = (freqs.omega_p1 - center, freqs.omega_p2 - center)
    offs_x = (freqs.omega_s - center, freqs.omega_i - center)
    # Expand k(shift + x) about the shared center; linear-in-x terms cancel.
    sq = sum(x * x for x in offs_p) - sum(x * x for x in offs_x)
    cube = sum(x ** 3 for x in offs_p) - sum(x ** 3 for x in offs_x)
    b2_eff = fiber.beta2 + fiber.beta3 * shift
    return 0.5 * b2_eff * sq + fiber.beta3 * cube / 6.0


def phi_d_exact(smf1: FiberSpec, smf2: FiberSpec, freqs: FrequencyQuad) -> float:
    """Dispersion phase difference between the CCW and CW pair paths (radians).

    Written literally as mismatch(SMF2) * L2 - mismatch(SMF1) * L1.
    """
    return phase_mismatch(smf2, freqs) * smf2.length - phase_mismatch(smf1, freqs) * smf1.length


def phi_d_approx(beta2: float, L1: float, L2: float, delta_omega: float) -> float:
    """Quadratic-detuning approximation -dW^2 * beta2 * (L1 - L2).

    Opposite in sign to :func:`phi_d_exact` for a single-pump pair; every
    observable is even in the phase so the two are interchangeable downstream.
    """
    _finite(beta2, L1, L2, delta_omega)
    return -delta_omega * delta_omega * beta2 * (L1 - L2)


def detuning_to_omega(delta_lambda: float, lambda_p0: float) -> float:
    """Wavelength detuning lambda_p0 - lambda_i0 (nm) to angular detuning (rad/ps)."""
    _finite(delta_lambda, lambda_p0)
    if lambda_p0 <= 0:
        raise InvalidArgument(f"lambda_p0 must be > 0, got {lambda_p0}")
    if not 0 <= delta_lambda < lambda_p0:
        raise InvalidArgument(
            f"detuning must lie in [0, lambda_p0={lambda_p0}), got {delta_lambda}")
    lambda_i0 = lambda_p0 - delta_lambda
    return 2.0 * math.pi * C_NM_PER_PS * delta_lambda / (lambda_p0 * lambda_i0)


def omega_to_detuning(delta_omega: float, lambda_p0: float) -> float:
    """Inverse of :func:`detuning_to_omega`."""
    _finite(delta_omega, lambda_p0)
    if lambda_p0 <= 0 or delta_omega < 0:
        raise InvalidArgument("need lambda_p0 > 0 and delta_omega >= 0")
    two_pi_c = 2.0 * math.pi * C_NM_PER_PS
    return delta_omega * lambda_p0 ** 2 / (two_pi_c + delta_omega * lambda_p0)


def pump_reflectivity(phi_p: float) -> float:
    """Fraction of one pump reflected back out of the input port: cos^2(phi/2)."""
    _finite(phi_p)
    return math.cos(0.5 * phi_p) ** 2
