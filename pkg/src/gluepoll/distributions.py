"""Nonnegative distributions used for service, switchover and glue times."""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath

KINDS = ("deterministic", "exponential", "gamma")

# Highest raw moment order served by ``raw_moment``.
MOMENT_CAP = 12


@dataclass(frozen=True)
class DistributionSpec:
    """A deterministic, exponential or gamma distribution.

    Parameters are kind-specific: ``value`` for deterministic, ``mean`` for
    exponential, ``shape``/``scale`` for gamma.  Use the constructors
    :meth:`deterministic`, :meth:`exponential` and :meth:`gamma`.
    """

    kind: str
    value: float = 0.0
    mean_: float = 0.0
    shape: float = 0.0
    scale: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "deterministic":
            if not self.value >= 0.0 or math.isinf(self.value):
                raise ValueError(f"deterministic value must be finite and >= 0, got {self.value}")
        elif self.kind == "exponential":
            if not self.mean_ > 0.0 or math.isinf(self.mean_):
                raise ValueError(f"exponential mean must be finite and > 0, got {self.mean_}")
        else:
            if not (self.shape > 0.0 and self.scale > 0.0) or math.isinf(self.shape * self.scale):
                raise ValueError(
                    f"gamma shape and scale must be finite and > 0, got {self.shape}, {self.scale}"
                )

    @classmethod
    def deterministic(cls, value: float) -> "DistributionSpec":
        return cls("deterministic", value=float(value))

    @classmethod
    def exponential(cls, mean: float) -> "DistributionSpec":
        return cls("exponential", mean_=float(mean))

    @classmethod
    def gamma(cls, shape: float, scale: float) -> "DistributionSpec":
        return cls("gamma", shape=float(shape), scale=float(scale))

    @property
    def params(self) -> dict[str, float]:
        """Kind-specific parameters, keyed as in config documents."""
        if self.kind == "deterministic":
            return {"value": self.value}
        if self.kind == "exponential":
            return {"mean": self.mean_}
        return {"shape": self.shape, "scale": self.scale}

    @property
    def mean(self) -> float:
        return dist_mean(self)

    def raw_moment(self, n: int) -> float:
        return dist_raw_moment(self, n)

    def lst(self, s):
        return dist_lst(self, s)

    @property
    def variance(self) -> float:
        return dist_raw_moment(self, 2) - dist_mean(self) ** 2

    def with_mean(self, mean: float) -> "DistributionSpec":
        """Same family rescaled to the given mean (gamma keeps its shape)."""
        if self.kind == "deterministic":
            return DistributionSpec.deterministic(mean)
        if self.kind == "exponential":
            return DistributionSpec.exponential(mean)
        return DistributionSpec.gamma(self.shape, mean / self.shape)

    def __str__(self) -> str:
        args = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.kind}({args})"


def dist_mean(d: DistributionSpec) -> float:
    if d.kind == "deterministic":
        return d.value
    if d.kind == "exponential":
        return d.mean_
    return d.shape * d.scale


def dist_raw_moment(d: DistributionSpec, n: int) -> float:
    """E[X^n] for integer ``0 <= n <= MOMENT_CAP``."""
    if n < 0 or n > MOMENT_CAP:
        raise ValueError(f"moment order must lie in [0, {MOMENT_CAP}], got {n}")
    if d.kind == "deterministic":
        return d.value**n
    if d.kind == "exponential":
        return math.factorial(n) * d.mean_**n
    rising = 1.0
    for j in range(n):
        rising *= d.shape + j
    return d.scale**n * rising


def dist_lst(d: DistributionSpec, s):
    """Laplace-Stieltjes transform E[exp(-sX)].

    Accepts floats and ``mpmath.mpf`` values; negative ``s`` is allowed
    inside the region of convergence (finite-difference oracles use it).
    """
    if d.kind == "deterministic":
        if isinstance(s, mpmath.mpf):
            return mpmath.exp(-s * d.value)
        return math.exp(-s * d.value)
    if d.kind == "exponential":
        return 1 / (1 + d.mean_ * s)
    return (1 + d.scale * s) ** (-d.shape)
