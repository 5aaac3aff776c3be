"""Per-user utility functions of the achievable rate and their derivatives."""

import math
from dataclasses import dataclass

__all__ = ["UTILITY_KINDS", "UtilitySpec"]

UTILITY_KINDS = ("wsr", "proportional_fair", "harmonic_mean")


@dataclass(frozen=True)
class UtilitySpec:
    """Utility ``f(R)`` applied to a user's rate ``R`` (in nats).

    Parameters
    ----------
    kind : {"wsr", "proportional_fair", "harmonic_mean"}
        ``wsr`` is ``w*R``, ``proportional_fair`` is ``w*ln R`` and
        ``harmonic_mean`` is ``-w/R``.
    weight : float
        Nonnegative priority ``w``.
    rate_floor : float
        Rates below this value are clamped before evaluating the two kinds
        that diverge at ``R = 0``.
    """

    kind: str = "wsr"
    weight: float = 1.0
    rate_floor: float = 1e-8

    def __post_init__(self):
        if self.kind not in UTILITY_KINDS:
            raise ValueError(f"unknown utility kind {self.kind!r}; expected one of {UTILITY_KINDS}")
        if self.weight < 0:
            raise ValueError("utility weight must be nonnegative")
        if self.rate_floor <= 0:
            raise ValueError("rate_floor must be positive")

    def value(self, rate):
        if self.kind == "wsr":
            return self.weight * rate
        r = max(rate, self.rate_floor)
        if self.kind == "proportional_fair":
            return self.weight * math.log(r)
        return -self.weight / r

    def alpha(self, rate):
        """Derivative ``df/dR`` at ``rate``."""
        if self.kind == "wsr":
            return self.weight
        r = max(rate, self.rate_floor)
        if self.kind == "proportional_fair":
            return self.weight / r
        return self.weight / (r * r)
