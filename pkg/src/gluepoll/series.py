"""Taylor coefficients of generating functions that depend on z only via u(z).

Every generating function the exact engine differentiates is a function of
``u(z) = sum_j lambda_j (1 - z_j)``: the arrival transforms
``beta_i(z) = B_i~(u)`` and ``sigma_i(z) = S_i~(u)`` and products, powers and
quotients of them.  Such a function is carried as a truncated power series
``F(u) = sum_n a_n u^n``; the multivariate scaled derivative at ``z = 1`` is
then a single coefficient times a multinomial factor (see :func:`multi_coeff`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .distributions import DistributionSpec
from .model import SystemConfig

DEFAULT_ORDER = 4

# Largest constant term tolerated (and dropped) when dividing by u.
DIVISION_RESIDUAL = 1e-12


@dataclass(frozen=True)
class USeries:
    """Power series in u truncated after ``u**order``."""

    coeffs: tuple[float, ...]

    @classmethod
    def of(cls, values: Sequence[float]) -> "USeries":
        return cls(tuple(float(v) for v in values))

    @classmethod
    def constant(cls, c: float, order: int) -> "USeries":
        return cls.of([c] + [0.0] * order)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, n: int) -> float:
        return self.coeffs[n] if 0 <= n < len(self.coeffs) else 0.0

    def _check(self, other: "USeries") -> None:
        if other.order != self.order:
            raise ValueError(f"series orders differ: {self.order} vs {other.order}")

    def __add__(self, other: "USeries") -> "USeries":
        self._check(other)
        return USeries.of(np.add(self.coeffs, other.coeffs))

    def __sub__(self, other: "USeries") -> "USeries":
        self._check(other)
        return USeries.of(np.subtract(self.coeffs, other.coeffs))

    def __neg__(self) -> "USeries":
        return USeries.of(-np.asarray(self.coeffs))

    def scale(self, c: float) -> "USeries":
        return USeries.of(c * np.asarray(self.coeffs))

    def __mul__(self, other: "USeries") -> "USeries":
        self._check(other)
        full = np.convolve(self.coeffs, other.coeffs)
        return USeries.of(full[: self.order + 1])

    def __pow__(self, m: int) -> "USeries":
        out = USeries.constant(1.0, self.order)
        for _ in range(m):
            out = out * self
        return out

    def div_u(self) -> "USeries":
        """F(u)/u; the last coefficient becomes unknown and is dropped.

        The result therefore has order ``self.order - 1``.
        """
        a0 = self.coeffs[0]
        if abs(a0) > DIVISION_RESIDUAL:
            raise ValueError(f"series has nonzero constant term {a0!r}; cannot divide by u")
        return USeries(self.coeffs[1:])


def series_from_lst(d: DistributionSpec, order: int) -> USeries:
    """Expansion of the LST about 0: a_n = (-1)^n E[X^n] / n!."""
    return USeries.of((-1) ** n * d.raw_moment(n) / math.factorial(n) for n in range(order + 1))


def multinomial_factor(l: Sequence[int], lambdas: Sequence[float]) -> float:
    """(-1)^|l| (|l|!/l!) prod lambda_j^l_j.

    For f(z) = F(u(z)) with F(u) = sum a_n u^n, the scaled derivative
    (1/l!) d^l f / dz^l at z = 1 equals ``multinomial_factor(l) * a_|l|``.
    """
    total = sum(l)
    factor = float(math.factorial(total))
    for lj, lam in zip(l, lambdas):
        if lj:
            factor *= lam**lj / math.factorial(lj)
    return -factor if total % 2 else factor


def multi_coeff(a: float, l: Sequence[int], lambdas: Sequence[float]) -> float:
    return multinomial_factor(l, lambdas) * a


class CoefficientTables:
    """Univariate coefficient arrays of the Gamma/eta/zeta/Delta families.

    Index as ``gamma_u[i][m][n]``: the u^n coefficient of
    ``(beta_i - 1)^m sigma_i`` (and likewise for the others).  The
    multivariate tensor at multi-index ``l`` is ``multi_coeff(arr[|l|], l)``.
    """

    def __init__(self, cfg: SystemConfig, order: int = DEFAULT_ORDER):
        self.cfg = cfg
        self.order = order
        self.lambdas = cfg.lambdas
        # one extra term so the quotient by u still reaches ``order``
        k = order + 1
        self._beta = [series_from_lst(st.service, k) for st in cfg.stations]
        self._sigma = [series_from_lst(st.switchover, k) for st in cfg.stations]

    @cached_property
    def _bm1_powers(self) -> list[list[USeries]]:
        k = self.order + 1
        one = USeries.constant(1.0, k)
        out = []
        for beta in self._beta:
            b = beta - one
            pows = [one]
            for _ in range(k + 1):
                pows.append(pows[-1] * b)
            out.append(pows)
        return out

    def _trim(self, s: USeries) -> np.ndarray:
        return np.asarray(s.coeffs[: self.order + 1])

    @cached_property
    def gamma_u(self) -> list[list[np.ndarray]]:
        return [
            [self._trim(p * sig) for p in pows]
            for pows, sig in zip(self._bm1_powers, self._sigma)
        ]

    @cached_property
    def delta_u(self) -> list[list[np.ndarray]]:
        return [[self._trim(p) for p in pows] for pows in self._bm1_powers]

    @cached_property
    def eta_u(self) -> list[list[np.ndarray]]:
        # eta_m: -(beta - 1)^(m+1) / u
        return [
            [np.asarray((-pows[m + 1]).div_u().coeffs) for m in range(len(pows) - 1)]
            for pows in self._bm1_powers
        ]

    @cached_property
    def zeta_u(self) -> list[np.ndarray]:
        k = self.order + 1
        one = USeries.constant(1.0, k)
        return [np.asarray((one - sig).div_u().coeffs) for sig in self._sigma]

    def _lookup(self, arr: np.ndarray, l: Sequence[int]) -> float:
        n = sum(l)
        if n >= len(arr):
            raise ValueError(f"multi-index order {n} exceeds truncation order {len(arr) - 1}")
        return multi_coeff(float(arr[n]), l, self.lambdas)

    def gamma(self, i: int, m: int, l: Sequence[int]) -> float:
        if m > sum(l):
            return 0.0
        return self._lookup(self.gamma_u[i % self.cfg.n][m], l)

    def delta(self, i: int, m: int, l: Sequence[int]) -> float:
        if m > sum(l):
            return 0.0
        return self._lookup(self.delta_u[i % self.cfg.n][m], l)

    def eta(self, i: int, m: int, l: Sequence[int]) -> float:
        if m > sum(l):
            return 0.0
        return self._lookup(self.eta_u[i % self.cfg.n][m], l)

    def zeta(self, i: int, l: Sequence[int]) -> float:
        return self._lookup(self.zeta_u[i % self.cfg.n], l)


def gamma_coeff(cfg: SystemConfig, i: int, m: int, l: Sequence[int]) -> float:
    """(1/l!) d^l/dz^l [(beta_i - 1)^m sigma_i] at z = 1."""
    return CoefficientTables(cfg, max(sum(l), 1)).gamma(i, m, l)


def eta_coeff(cfg: SystemConfig, i: int, m: int, l: Sequence[int]) -> float:
    """(1/l!) d^l/dz^l [-(beta_i - 1)^(m+1) / u] at z = 1."""
    return CoefficientTables(cfg, max(sum(l), 1)).eta(i, m, l)


def zeta_coeff(cfg: SystemConfig, i: int, l: Sequence[int]) -> float:
    """(1/l!) d^l/dz^l [(1 - sigma_i) / u] at z = 1."""
    return CoefficientTables(cfg, max(sum(l), 1)).zeta(i, l)


def delta_coeff(cfg: SystemConfig, i: int, m: int, l: Sequence[int]) -> float:
    """(1/l!) d^l/dz^l (beta_i - 1)^m at z = 1."""
    return CoefficientTables(cfg, max(sum(l), 1)).delta(i, m, l)
