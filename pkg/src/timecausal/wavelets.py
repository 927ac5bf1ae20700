"""Time-causal wavelet representations built from smoothed scale channels.

Derivatives are causal backward differences of the smoothed channels,
``delta_t = (-1, +1)`` and ``delta_tt = (1, -2, 1)``, divided by ``dt**n``.
Scale normalization multiplies order-``n`` responses at level ``tau_k`` by
``tau_k**(n*gamma/2)``; with ``gamma = 1`` the responses of the underlying
kernels have scale-independent L1 norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cascade import CascadeSpec
from .engine import KernelSamples, equivalent_kernel
from .scalogram import Scalogram

__all__ = [
    "backward_differences",
    "temporal_derivative",
    "scale_normalize",
    "gamma_to_p",
    "p_to_gamma",
    "mother_wavelet_normalize",
    "derivative_kernel",
    "discrete_kernel_norms",
    "quasi_quadrature",
    "bandpass",
    "reconstruct",
    "ShiftResidual",
    "bandpass_shift_relation_check",
    "normalize",
    "DEFAULT_QUAD_C",
    "quasi_quadrature_response",
]

DEFAULT_QUAD_C = 1.0 / math.sqrt(2.0)


def backward_differences(rows: np.ndarray, n: int) -> np.ndarray:
    """Order-``n`` backward differences along axis 0, dropping the first ``n`` rows.

    The second difference is evaluated as ``(a - b) - (b - c)``; the streaming
    path uses this same function so batch and stream agree bit for bit.
    """
    rows = np.asarray(rows, dtype=float)
    if n == 0:
        return rows.copy()
    if n == 1:
        return rows[1:] - rows[:-1]
    if n == 2:
        return (rows[2:] - rows[1:-1]) - (rows[1:-1] - rows[:-2])
    raise ValueError(f"unsupported derivative order {n}; use 0, 1 or 2")


def temporal_derivative(channels: Scalogram, n: int) -> Scalogram:
    """Causal difference approximation of the ``n``-th temporal derivative.

    When ``channels`` carries the preceding rows in ``history`` every output
    row is exact; otherwise the first ``n`` rows are warm-up rows set to NaN.
    """
    if n not in (1, 2):
        raise ValueError(f"unsupported derivative order {n}; use 1 or 2")
    if channels.order != 0:
        raise ValueError("temporal_derivative expects undifferentiated channels (order 0)")
    data = channels.data
    T, K = data.shape
    hist = channels.history
    if hist is not None and hist.shape[0] >= n:
        ext = np.vstack([hist[-n:], data])
        out = backward_differences(ext, n)
        valid_from = 0
    else:
        out = np.full((T, K), np.nan)
        if T > n:
            out[n:] = backward_differences(data, n)
        valid_from = min(n, T)
    out = out / channels.dt**n
    return channels.replace(data=out, order=n, normalization="none", valid_from=valid_from, history=None)


def scale_normalize(s: Scalogram, gamma: float) -> Scalogram:
    """Multiply column ``k`` by ``tau_k**(n*gamma/2)``."""
    if not (math.isfinite(gamma) and gamma > 0):
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    if s.normalization not in ("none",):
        raise ValueError(f"scalogram is already normalized ({s.normalization})")
    factors = s.scales ** (s.order * gamma / 2.0)
    return s.replace(data=s.data * factors, gamma=float(gamma), normalization="gamma")


def gamma_to_p(n: int, gamma: float) -> float:
    """Exponent ``p`` for which L_p normalization of order-``n`` kernels matches
    scale normalization with power ``gamma``: ``1 / (1 + n (1 - gamma))``."""
    if n < 1:
        raise ValueError("derivative order must be >= 1")
    denom = 1.0 + n * (1.0 - gamma)
    if denom <= 0:
        raise ValueError(f"no positive p for n={n}, gamma={gamma}")
    return 1.0 / denom


def p_to_gamma(n: int, p: float) -> float:
    if n < 1:
        raise ValueError("derivative order must be >= 1")
    if not p > 0:
        raise ValueError(f"p must be positive, got {p!r}")
    return 1.0 - (1.0 / p - 1.0) / n


def mother_wavelet_normalize(s: Scalogram, p: float, norms) -> Scalogram:
    """Divide column ``k`` by the L_p norm ``norms[k]`` of its analysing kernel."""
    norms = np.asarray(norms, dtype=float).ravel()
    if norms.size != s.scales.size:
        raise ValueError(f"expected {s.scales.size} norms, got {norms.size}")
    if np.any(~(norms > 0)):
        raise ValueError("kernel norms must be strictly positive")
    return s.replace(data=s.data / norms, normalization=f"mother:{p:g}")


def derivative_kernel(spec: CascadeSpec, k: int, n: int, tol: float = 1e-8) -> KernelSamples:
    """``delta^n`` applied to the equivalent smoothing kernel at layer ``k``.

    The result has one extra trailing sample so the sum telescopes over the
    full support; weights are per-sample, not divided by ``dt``.
    """
    base = equivalent_kernel(spec, k, tol=tol)
    padded = np.concatenate([np.zeros(n), base.values, np.zeros(1)])
    values = backward_differences(padded, n)
    meta = dict(base.meta, order=n)
    return KernelSamples(values, t0=0.0, dt=spec.dt, meta=meta)


def discrete_kernel_norms(
    spec: CascadeSpec,
    n: int,
    p: float,
    gamma: float | None = None,
    layers=None,
    tol: float = 1e-10,
) -> np.ndarray:
    """L_p norms of the equivalent order-``n`` derivative kernels per layer.

    Norms are expressed in user units (the weights are converted to a
    derivative density on the ``dt`` grid).  With ``gamma`` given, the kernel
    is first multiplied by ``tau_k**(n*gamma/2)``.
    """
    layers = range(1, spec.K + 1) if layers is None else layers
    dt = spec.dt
    out = []
    for k in layers:
        w = derivative_kernel(spec, k, n, tol=tol).values / dt ** (n + 1)
        if gamma is not None:
            w = w * spec.tau_levels[k - 1] ** (n * gamma / 2.0)
        out.append(float((np.sum(np.abs(w) ** p) * dt) ** (1.0 / p)))
    return np.array(out)


def quasi_quadrature(first: Scalogram, second: Scalogram, C: float = DEFAULT_QUAD_C) -> Scalogram:
    """Phase-insensitive energy ``sqrt(L_z**2 + C * L_zz**2)``."""
    if first.data.shape != second.data.shape or not np.array_equal(first.scales, second.scales):
        raise ValueError("quasi quadrature needs scalograms of identical shape and scales")
    if not C > 0:
        raise ValueError(f"weight C must be positive, got {C!r}")
    data = np.sqrt(first.data**2 + C * second.data**2)
    return first.replace(
        data=data,
        valid_from=max(first.valid_from, second.valid_from),
        normalization=f"quasi_quadrature:{first.normalization}",
    )


def bandpass(channels: Scalogram, signal) -> Scalogram:
    """Differences between adjacent smoothed levels; the first column is
    ``L(tau_1) - f`` (the input plays the role of scale level zero)."""
    if channels.order != 0:
        raise ValueError("bandpass expects undifferentiated channels")
    f = np.asarray(signal, dtype=float).ravel()
    if f.size != channels.data.shape[0]:
        raise ValueError(f"signal length {f.size} does not match {channels.data.shape[0]} rows")
    L = channels.data
    prev = np.column_stack([f, L[:, :-1]]) if L.shape[1] else L
    return channels.replace(data=L - prev, normalization="bandpass", history=None)


def reconstruct(bands: Scalogram, coarsest, j: int = 0) -> np.ndarray:
    """Smoothed signal at level ``j`` (``j = 0``: the input) from the coarsest
    channel and the bandpass columns above ``j``."""
    K = bands.scales.size
    if not 0 <= j <= K:
        raise ValueError(f"target level must lie in 0..{K}, got {j}")
    out = np.array(coarsest, dtype=float).ravel()
    if out.size != bands.data.shape[0]:
        raise ValueError("coarsest channel length does not match the bandpass rows")
    for k in range(K, j, -1):
        out = out - bands.data[:, k - 1]
    return out


@dataclass(frozen=True)
class ShiftResidual:
    max_abs: float
    per_layer: np.ndarray


def bandpass_shift_relation_check(channels: Scalogram, spec: CascadeSpec, signal=None) -> ShiftResidual:
    """Residual of ``L_k(t-1) - L_{k-1}(t) + (1 + mu_k) * delta_t L_k(t)``.

    Uses the channel history for ``t = 0`` when present.  Layer 1 is only
    checked when the input ``signal`` is supplied.
    """
    if channels.order != 0:
        raise ValueError("shift relation is defined on undifferentiated channels")
    if not np.allclose(channels.scales, spec.tau_levels, rtol=1e-12) or channels.c != spec.c:
        raise ValueError("channels were not produced by this cascade")
    L = channels.data
    if channels.history is not None:
        Lprev = np.vstack([channels.history[-1:], L[:-1]])
        rows = slice(0, None)
    else:
        Lprev = np.vstack([np.full((1, L.shape[1]), np.nan), L[:-1]])
        rows = slice(1, None)
    lower = np.empty_like(L)
    lower[:, 1:] = L[:, :-1]
    lower[:, 0] = np.nan if signal is None else np.asarray(signal, dtype=float).ravel()
    mu = np.asarray(spec.mu_disc)
    resid = Lprev - lower + (1.0 + mu) * (L - Lprev)
    resid = np.abs(resid[rows])
    per_layer = np.array([np.nanmax(col) if np.any(np.isfinite(col)) else np.nan for col in resid.T]) if resid.size else np.zeros(L.shape[1])
    finite = per_layer[np.isfinite(per_layer)]
    return ShiftResidual(max_abs=float(finite.max()) if finite.size else 0.0, per_layer=per_layer)


def normalize(deriv: Scalogram, mode: str, gamma: float, spec: CascadeSpec | None = None) -> Scalogram:
    """Apply one of the normalization modes ``gamma``, ``lp:P`` or ``mother``.

    ``lp:P`` uses the scale-normalization power that gives constant L_P norms
    for the derivative order; ``mother`` divides by the discrete L_p norms
    (``p`` from ``gamma``) of the equivalent derivative kernels and needs the
    cascade ``spec``.
    """
    n = deriv.order
    if mode == "none":
        return deriv
    if n == 0:
        return deriv.replace(normalization="gamma", gamma=gamma)
    if mode == "gamma":
        return scale_normalize(deriv, gamma)
    if mode.startswith("lp:"):
        p = float(mode[3:])
        return scale_normalize(deriv, p_to_gamma(n, p)).replace(normalization=f"lp:{p:g}")
    if mode == "mother":
        if spec is None:
            raise ValueError("mother-wavelet normalization needs the cascade spec")
        p = gamma_to_p(n, gamma)
        cols = [int(np.argmin(np.abs(np.asarray(spec.tau_levels) - tau))) + 1 for tau in deriv.scales]
        norms = discrete_kernel_norms(spec, n, p, layers=cols)
        return mother_wavelet_normalize(deriv, p, norms).replace(gamma=gamma)
    raise ValueError(f"unknown normalization mode {mode!r}")


def quasi_quadrature_response(
    channels: Scalogram,
    gamma: float = 1.0,
    C: float = DEFAULT_QUAD_C,
    mode: str = "gamma",
    spec: CascadeSpec | None = None,
) -> Scalogram:
    """Quasi quadrature of the normalized first- and second-order responses."""
    first = normalize(temporal_derivative(channels, 1), mode, gamma, spec)
    second = normalize(temporal_derivative(channels, 2), mode, gamma, spec)
    return quasi_quadrature(first, second, C)
