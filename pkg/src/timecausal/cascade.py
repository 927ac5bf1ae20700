"""Parameterization of cascades of first-order recursive filters.

A cascade is fixed by the distribution parameter ``c`` (ratio between adjacent
scale levels in units of standard deviation), a reference scale ``tau0`` and
the number of layers ``K``.  Layer ``k`` (1-based) carries the cumulative
temporal variance ``tau_k = tau0 * c**(2k)``.  All ``tau`` values are variances
in user time units squared; ``dt`` converts them to sample units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._peaks import parabolic_offset

__all__ = [
    "CascadeSpec",
    "DelayMeasure",
    "DelayKind",
    "scale_levels",
    "mu_limit",
    "mu_truncated",
    "mu_discrete",
    "build_cascade",
    "cascade_for_range",
    "mean_delay_continuous",
    "tmax_delay_approx",
    "delay_measures_discrete",
    "continuous_delay_measures",
    "variance_residuals",
    "DEFAULT_LAYERS_BELOW",
]

# number of layers kept at or below the finest requested output scale
DEFAULT_LAYERS_BELOW = 8


def _check_c(c: float) -> None:
    if not (math.isfinite(c) and c > 1.0):
        raise ValueError(f"distribution parameter c must be > 1, got {c!r}")


def _check_positive(name: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0.0):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")


def _check_layers(K: int) -> None:
    if isinstance(K, bool) or int(K) != K or K < 1:
        raise ValueError(f"layer count K must be an integer >= 1, got {K!r}")


class DelayKind(str, Enum):
    continuous_closed_form = "continuous_closed_form"
    discrete_empirical = "discrete_empirical"


@dataclass(frozen=True)
class DelayMeasure:
    mean_delay: float
    tmax_delay: float
    kind: DelayKind

    def __post_init__(self):
        for name in ("mean_delay", "tmax_delay"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v!r}")


@dataclass(frozen=True)
class CascadeSpec:
    """Full parameterization of one filter cascade.

    ``mu_cont`` are the continuous time constants of the truncated cascade at
    ``tau_levels[-1]`` (user time units); ``mu_disc`` are the per-layer discrete
    time constants in samples, derived from the scale increments between
    successive levels.
    """

    c: float
    tau0: float
    K: int
    mu_cont: tuple[float, ...]
    mu_disc: tuple[float, ...]
    tau_levels: tuple[float, ...]
    dt: float = 1.0

    def __post_init__(self):
        _check_c(self.c)
        _check_positive("tau0", self.tau0)
        _check_positive("dt", self.dt)
        _check_layers(self.K)
        for name in ("mu_cont", "mu_disc", "tau_levels"):
            if len(getattr(self, name)) != self.K:
                raise ValueError(f"{name} must have K={self.K} entries")
        if any(m <= 0 for m in self.mu_disc) or any(m <= 0 for m in self.mu_cont):
            raise ValueError("time constants must be strictly positive")
        if any(b <= a for a, b in zip(self.tau_levels, self.tau_levels[1:])):
            raise ValueError("tau_levels must be strictly increasing")

    @property
    def sigmas(self) -> np.ndarray:
        """Standard deviations sqrt(tau_k) in user time units."""
        return np.sqrt(np.asarray(self.tau_levels))

    @property
    def gains(self) -> tuple[float, ...]:
        """Per-layer update multipliers 1/(1 + mu_disc)."""
        return tuple(1.0 / (1.0 + m) for m in self.mu_disc)

    def mean_delays(self) -> np.ndarray:
        """Discrete temporal mean of the cascade up to each layer, in user time units."""
        return np.cumsum(self.mu_disc) * self.dt

    def truncated(self, k: int) -> "CascadeSpec":
        """The sub-cascade made of layers 1..k."""
        if not 1 <= k <= self.K:
            raise ValueError(f"layer index must lie in 1..{self.K}, got {k}")
        return build_cascade(self.c, self.tau0, k, self.dt)


def scale_levels(c: float, tau0: float, K: int) -> list[float]:
    """Temporal scale levels ``tau0 * c**(2k)`` for ``k = 1..K``."""
    _check_c(c)
    _check_positive("tau0", tau0)
    _check_layers(K)
    return [tau0 * c ** (2 * k) for k in range(1, int(K) + 1)]


def mu_limit(c: float, tau: float, k: int) -> float:
    """k-th time constant of the infinite cascade defining the limit kernel at
    variance ``tau`` (largest first): ``c**-k * sqrt(c**2 - 1) * sqrt(tau)``.
    """
    _check_c(c)
    _check_positive("tau", tau)
    if int(k) != k or k < 1:
        raise ValueError(f"k must be an integer >= 1, got {k!r}")
    return c ** (-k) * math.sqrt(c * c - 1.0) * math.sqrt(tau)


def mu_truncated(c: float, tau: float, K: int) -> list[float]:
    """Continuous time constants of the K-layer truncated cascade, finest first.

    The first layer takes over the variance of every discarded finer layer, so
    the sum of squares is exactly ``tau``.
    """
    _check_c(c)
    _check_positive("tau", tau)
    _check_layers(K)
    K = int(K)
    root = math.sqrt(tau)
    mus = [c ** (1 - K) * root]
    mus += [c ** (k - K - 1) * math.sqrt(c * c - 1.0) * root for k in range(2, K + 1)]
    return mus


def mu_discrete(delta_tau: float) -> float:
    """Time constant (in samples) of a first-order recursive filter whose
    variance ``mu**2 + mu`` equals ``delta_tau`` (in squared samples)."""
    if not math.isfinite(delta_tau) or delta_tau < 0:
        raise ValueError(f"scale increment must be finite and >= 0, got {delta_tau!r}")
    # 2*dtau / (sqrt(1 + 4 dtau) + 1) is the cancellation-free form of
    # (sqrt(1 + 4 dtau) - 1) / 2
    return 2.0 * delta_tau / (math.sqrt(1.0 + 4.0 * delta_tau) + 1.0)


def build_cascade(c: float, tau0: float, K: int, dt: float = 1.0, mode: str = "discrete") -> CascadeSpec:
    """Build a :class:`CascadeSpec`.

    Both time-constant sets are always populated.  ``mode`` names the
    representation the caller intends to use and is only validated.
    """
    if mode not in ("discrete", "continuous_truncated"):
        raise ValueError(f"unknown cascade mode {mode!r}")
    _check_positive("dt", dt)
    taus = scale_levels(c, tau0, K)
    increments = [taus[0]] + [b - a for a, b in zip(taus, taus[1:])]
    mu_disc = tuple(mu_discrete(d / (dt * dt)) for d in increments)
    mu_cont = tuple(mu_truncated(c, taus[-1], K))
    return CascadeSpec(
        c=float(c),
        tau0=float(tau0),
        K=int(K),
        mu_cont=mu_cont,
        mu_disc=mu_disc,
        tau_levels=tuple(taus),
        dt=float(dt),
    )


def cascade_for_range(
    c: float,
    sigma_min: float,
    sigma_max: float,
    dt: float = 1.0,
    layers_below: int = DEFAULT_LAYERS_BELOW,
) -> tuple[CascadeSpec, int]:
    """Cascade covering ``[sigma_min, sigma_max]`` on the grid ``sigma_min * c**j``.

    ``layers_below`` layers sit at or below ``sigma_min`` (the finest of them
    absorbing all discarded finer scales).  Returns the spec and the 0-based
    index of the first output layer, i.e. the layer at ``sigma_min``.
    """
    _check_c(c)
    _check_positive("sigma_min", sigma_min)
    _check_positive("sigma_max", sigma_max)
    if sigma_max < sigma_min:
        raise ValueError("sigma_max must be >= sigma_min")
    if layers_below < 1:
        raise ValueError("layers_below must be >= 1")
    n_out = int(math.floor(math.log(sigma_max / sigma_min) / math.log(c) + 1e-9)) + 1
    first = layers_below - 1
    K = first + n_out
    sigma_first = sigma_min / c ** first
    tau0 = sigma_first**2 / c**2
    return build_cascade(c, tau0, K, dt), first


def mean_delay_continuous(c: float, tau: float) -> float:
    """Temporal mean of the continuous limit kernel."""
    _check_c(c)
    _check_positive("tau", tau)
    return math.sqrt((c + 1.0) / (c - 1.0)) * math.sqrt(tau)


def tmax_delay_approx(c: float, tau: float) -> float:
    """Approximate position of the maximum of the continuous limit kernel."""
    _check_c(c)
    _check_positive("tau", tau)
    return (c + 1.0) ** 2 * math.sqrt(tau) / (2.0 * math.sqrt(2.0) * math.sqrt((c - 1.0) * c**3))


def delay_measures_discrete(kernel) -> DelayMeasure:
    """Temporal mean and interpolated argmax of a sampled nonnegative kernel.

    ``kernel`` is anything with ``values``, ``t0`` and ``dt`` attributes
    (see :class:`timecausal.engine.KernelSamples`).
    """
    values = np.asarray(kernel.values, dtype=float)
    if values.size == 0:
        raise ValueError("empty kernel")
    mass = values.sum()
    if not mass > 0:
        raise ValueError("kernel has no positive mass")
    idx = np.arange(values.size)
    mean_idx = float((idx * values).sum() / mass)
    i = int(np.argmax(values))
    peak = float(i)
    if 0 < i < values.size - 1:
        peak += parabolic_offset(values[i - 1], values[i], values[i + 1])
    dt = float(kernel.dt)
    t0 = float(kernel.t0)
    return DelayMeasure(
        mean_delay=t0 + mean_idx * dt,
        tmax_delay=float(t0 + peak * dt),
        kind=DelayKind.discrete_empirical,
    )


def continuous_delay_measures(c: float, tau: float) -> DelayMeasure:
    """Closed-form delay measures of the continuous limit kernel."""
    return DelayMeasure(
        mean_delay=mean_delay_continuous(c, tau),
        tmax_delay=tmax_delay_approx(c, tau),
        kind=DelayKind.continuous_closed_form,
    )


def variance_residuals(spec: CascadeSpec) -> tuple[float, float]:
    """Relative residuals of the continuous and discrete variance identities."""
    tau_K = spec.tau_levels[-1]
    cont = sum(m * m for m in spec.mu_cont)
    disc = sum(m * m + m for m in spec.mu_disc)
    target = tau_K / spec.dt**2
    return abs(cont - tau_K) / tau_K, abs(disc - target) / target

