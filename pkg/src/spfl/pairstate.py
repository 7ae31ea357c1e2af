"""Two-photon output state of the loop and its routing statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from .dispersion import LoopConfig
from .errors import InvalidArgument, InvalidState, NoSwitchingPossible

Target = Literal["same", "diff"]
NORM_TOL = 1e-9
_SQRT_HALF = math.sqrt(0.5)


@dataclass(frozen=True)
class TwoPhotonState:
    """Real amplitudes of the four port assignments of a signal/idler pair.

    ``amp_same_*``: both photons leave through port a (or b).
    ``amp_split_sa_ib``: signal in a, idler in b; ``amp_split_ia_sb`` the converse.
    """

    amp_same_a: float
    amp_same_b: float
    amp_split_sa_ib: float
    amp_split_ia_sb: float
    phi: float = float("nan")

    @property
    def norm(self) -> float:
        return (self.amp_same_a ** 2 + self.amp_same_b ** 2
                + self.amp_split_sa_ib ** 2 + self.amp_split_ia_sb ** 2)

    def check(self) -> None:
        if abs(self.norm - 1.0) > NORM_TOL:
            raise InvalidState(f"state not normalized: norm={self.norm!r}")


@dataclass(frozen=True)
class RoutingProbabilities:
    p_same: float
    p_diff: float

    def __post_init__(self):
        for p in (self.p_same, self.p_diff):
            if not 0.0 <= p <= 1.0:
                raise InvalidState(f"probability out of range: {p}")
        if abs(self.p_same + self.p_diff - 1.0) > NORM_TOL:
            raise InvalidState("routing probabilities do not sum to 1")

    @classmethod
    def from_phase(cls, phi: float) -> "RoutingProbabilities":
        return routing_probabilities(output_state(phi))


def output_state(phi: float) -> TwoPhotonState:
    """cos(phi/2)|same> + sin(phi/2)|split>, each symmetrized over the ports."""
    if not math.isfinite(phi):
        raise InvalidArgument(f"non-finite phase {phi!r}")
    c = math.cos(0.5 * phi) * _SQRT_HALF
    s = math.sin(0.5 * phi) * _SQRT_HALF
    return TwoPhotonState(c, c, s, s, phi)


def total_phase(loop: LoopConfig, phi_d: float) -> float:
    """Pair phase difference: pump loop phases plus the dispersion phase."""
    if loop.hr_condition():
        return phi_d
    return loop.phi_p1 + loop.phi_p2 + phi_d


def routing_probabilities(state: TwoPhotonState) -> RoutingProbabilities:
    state.check()
    p_same = state.amp_same_a ** 2 + state.amp_same_b ** 2
    p_diff = state.amp_split_sa_ib ** 2 + state.amp_split_ia_sb ** 2
    # Renormalize away rounding so the pair sums to 1 to machine precision.
    tot = p_same + p_diff
    p_same, p_diff = p_same / tot, p_diff / tot
    return RoutingProbabilities(min(1.0, p_same), min(1.0, p_diff))


def single_counts_marginal(state: TwoPhotonState) -> dict[str, dict[str, float]]:
    """Probability of each photon leaving through each port.

    Returns ``{"signal": {"a": .., "b": ..}, "idler": {"a": .., "b": ..}}``.
    """
    state.check()
    same_a = state.amp_same_a ** 2
    same_b = state.amp_same_b ** 2
    sa_ib = state.amp_split_sa_ib ** 2
    ia_sb = state.amp_split_ia_sb ** 2
    return {
        "signal": {"a": same_a + sa_ib, "b": same_b + ia_sb},
        "idler": {"a": same_a + ia_sb, "b": same_b + sa_ib},
    }


def target_phase(n: int, target: Target) -> float:
    if n < 0:
        raise InvalidArgument(f"order n must be >= 0, got {n}")
    if target == "diff":
        return (2 * n + 1) * math.pi
    if target == "same":
        return 2 * (n + 1) * math.pi
    raise InvalidArgument(f"target must be 'same' or 'diff', got {target!r}")


def switching_detuning(beta2: float, L1: float, L2: float, n: int, target: Target) -> float:
    """Angular detuning (rad/ps) that routes pairs to ``target`` at order ``n``.

    ``diff`` solves |phi_d| = (2n+1)pi; ``same`` solves |phi_d| = 2(n+1)pi,
    skipping the trivial zero-detuning solution.
    """
    phase = target_phase(n, target)
    ab = beta2 * (L2 - L1)
    if ab == 0.0 or not math.isfinite(ab):
        raise NoSwitchingPossible("beta2 * (L2 - L1) is zero; phi_d vanishes at every detuning")
    return math.sqrt(abs(phase / ab))
