"""Continuous-theory reference values for the discrete pipeline.

The continuous limit kernel truncated to ``K`` truncated exponential kernels
has the Laplace transform ``prod 1 / (1 + mu_k q)``.  For distinct time
constants it has the partial-fraction series

    d^n/dt^n Psi(t) = sum_k (-1/mu_k)**n * A_k / mu_k * exp(-t / mu_k),  t >= 0

with ``A_k = prod_{i != k} 1 / (1 - mu_i / mu_k)``.  When time constants
coincide (the truncated cascade for ``c = sqrt(2)`` has ``mu_1 == mu_2``) the
kernel is evaluated by explicit convolutions of exponentials instead, giving polynomial-times-exponential
terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, linalg, optimize

from .cascade import CascadeSpec, mu_limit, mu_truncated

__all__ = [
    "SeriesKernel",
    "QuadratureError",
    "series_coefficients",
    "eval_series",
    "limit_time_constants",
    "kernel_function",
    "PolyExpKernel",
    "state_space_function",
    "continuous_lp_norm",
    "continuous_moments",
    "norm_recurrence",
    "gaussian_kernel",
    "gaussian_derivative_norms",
    "discrete_gaussian",
    "discrete_gaussian_kernel",
    "dog_vs_gtt_check",
    "fourier_magnitude",
    "discrete_frequency_response",
    "fourier_magnitude_check",
    "half_power_frequency",
    "PUBLISHED_NORM_TABLE",
]

# L_p norms at tau = 1 of the K = 8 truncated limit kernel derivatives, keyed
# by (c, n, p), as tabulated alongside the method.
PUBLISHED_NORM_TABLE = {
    (2.0, 1, 2): 0.635,
    (2.0, 1, 1): 0.995,
    (2.0, 2, 2): 2.084,
    (2.0, 2, 1): 2.385,
    (math.sqrt(2.0), 1, 2): 0.513,
    (math.sqrt(2.0), 1, 1): 0.924,
    (math.sqrt(2.0), 2, 2): 0.983,
    (math.sqrt(2.0), 2, 1): 1.555,
}

_DUPLICATE_GAP = 1e-9


class QuadratureError(RuntimeError):
    pass


def series_coefficients(mus: Sequence[float]) -> np.ndarray:
    mus = np.asarray(mus, dtype=float)
    if mus.ndim != 1 or mus.size == 0 or np.any(~(mus > 0)):
        raise ValueError("time constants must be a nonempty sequence of positive values")
    srt = np.sort(mus)
    gaps = np.diff(srt) / srt[1:]
    if np.any(gaps < _DUPLICATE_GAP):
        raise ValueError("time constants must be distinct for the partial-fraction series")
    A = np.empty_like(mus)
    for k, mk in enumerate(mus):
        others = np.delete(mus, k)
        A[k] = np.prod(1.0 / (1.0 - others / mk))
    return A


@dataclass(frozen=True)
class SeriesKernel:
    mus: tuple[float, ...]
    A: tuple[float, ...]
    order: int = 0

    @classmethod
    def from_mus(cls, mus: Sequence[float], order: int = 0) -> "SeriesKernel":
        A = series_coefficients(mus)
        return cls(tuple(float(m) for m in mus), tuple(float(a) for a in A), int(order))

    @property
    def tau(self) -> float:
        return float(sum(m * m for m in self.mus))

    def with_order(self, order: int) -> "SeriesKernel":
        return SeriesKernel(self.mus, self.A, int(order))

    def identities(self) -> tuple[float, float]:
        """``(sum A_k, sum A_k / mu_k)``: 1 and (for K >= 2) 0 in exact arithmetic."""
        A = np.asarray(self.A)
        mu = np.asarray(self.mus)
        return float(A.sum()), float((A / mu).sum())


def eval_series(kernel: SeriesKernel, t) -> np.ndarray | float:
    """Value of the order-``kernel.order`` derivative; zero for ``t < 0``."""
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    mu = np.asarray(kernel.mus)[:, None]
    A = np.asarray(kernel.A)[:, None]
    n = kernel.order
    tt = np.where(t >= 0, t, 0.0)[None, :]
    vals = np.sum((-1.0 / mu) ** n * A / mu * np.exp(-tt / mu), axis=0)
    vals = np.where(t >= 0, vals, 0.0)
    return float(vals[0]) if scalar else vals


def state_space_function(mus: Sequence[float], n: int = 0) -> Callable[[float], float]:
    """Kernel derivative evaluated through the matrix exponential of the
    cascade of first-order integrators.  Slow and only accurate to roughly
    1e-10, but independent of any pole bookkeeping."""
    # x' = M x with x(0) = e_1 / mu_1 is the impulse response of the cascade;
    # the last state is the kernel and M^n gives its n-th derivative for t > 0.
    mus = np.asarray(mus, dtype=float)
    K = mus.size
    M = np.diag(-1.0 / mus)
    M[np.arange(1, K), np.arange(K - 1)] = 1.0 / mus[1:]
    x0 = np.zeros(K)
    x0[0] = 1.0 / mus[0]
    row = np.linalg.matrix_power(M, n)[-1]

    def f(t: float) -> float:
        if t < 0:
            return 0.0
        return float(row @ (linalg.expm(M * t) @ x0))

    return f


class PolyExpKernel:
    """Cascade kernel written as ``sum_g P_g(t) exp(-t / mu_g)``.

    Built by convolving the truncated exponential kernels one at a time, so
    repeated time constants give polynomial factors instead of the division
    by zero of the plain partial-fraction series.  Time constants closer than
    a relative ``1e-9`` are merged.
    """

    def __init__(self, mus: Sequence[float], order: int = 0):
        mus = [float(m) for m in mus]
        if not mus or any(not m > 0 for m in mus):
            raise ValueError("time constants must be a nonempty sequence of positive values")
        poles: list[float] = []
        terms: dict[int, np.ndarray] = {}
        for b in mus:
            gb = next((i for i, a in enumerate(poles) if abs(a - b) <= _DUPLICATE_GAP * max(a, b)), None)
            if gb is None:
                poles.append(b)
                gb = len(poles) - 1
            b = poles[gb]
            if not terms:
                terms[gb] = np.array([1.0 / b])
                continue
            new: dict[int, np.ndarray] = {}

            def add(g, coeffs):
                cur = new.get(g, np.zeros(0))
                size = max(cur.size, coeffs.size)
                new[g] = np.pad(cur, (0, size - cur.size)) + np.pad(coeffs, (0, size - coeffs.size))

            for ga, P in terms.items():
                a = poles[ga]
                if ga == gb:
                    j = np.arange(P.size)
                    add(ga, np.concatenate([[0.0], P / ((j + 1) * b)]))
                    continue
                lam = 1.0 / a - 1.0 / b
                for j, pj in enumerate(P):
                    if pj == 0.0:
                        continue
                    cj = pj * math.factorial(j) / (b * lam ** (j + 1))
                    add(gb, np.array([cj]))
                    i = np.arange(j + 1)
                    add(ga, -cj * lam**i / np.array([math.factorial(k) for k in i], dtype=float))
            terms = new
        self.poles = np.array(poles)
        self.order = int(order)
        self._terms = {g: self._differentiate(P, poles[g], self.order) for g, P in terms.items()}

    @staticmethod
    def _differentiate(P: np.ndarray, mu: float, n: int) -> np.ndarray:
        for _ in range(n):
            dP = P[1:] * np.arange(1, P.size) if P.size > 1 else np.zeros(1)
            dP = np.pad(dP, (0, P.size - dP.size))
            P = dP - P / mu
        return P

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tt = np.where(t >= 0, t, 0.0)
        out = np.zeros_like(tt)
        for g, P in self._terms.items():
            out += np.polynomial.polynomial.polyval(tt, P) * np.exp(-tt / self.poles[g])
        out = np.where(t >= 0, out, 0.0)
        return float(out[0]) if scalar else out

    def envelope(self, t: float) -> float:
        """Upper bound of ``|f|`` on ``[t, inf)`` for ``t`` past every polynomial peak."""
        total = 0.0
        for g, P in self._terms.items():
            mu = self.poles[g]
            total += float(np.sum(np.abs(P) * t ** np.arange(P.size))) * math.exp(-t / mu)
        return total


def limit_time_constants(c: float, tau: float = 1.0, K: int = 8, truncated: bool = True) -> list[float]:
    """Time constants of a K-term approximation of the limit kernel.

    ``truncated=True`` compensates the discarded finer layers in the first
    time constant (variance exactly ``tau``); otherwise the ``K`` largest time
    constants of the infinite cascade are used as they are.
    """
    if truncated:
        return mu_truncated(c, tau, K)
    return [mu_limit(c, tau, k) for k in range(1, K + 1)]


def _is_well_conditioned(mus: Sequence[float]) -> bool:
    try:
        A = series_coefficients(mus)
    except ValueError:
        return False
    return float(np.max(np.abs(A))) < 1e6


def kernel_function(mus: Sequence[float], n: int = 0) -> Callable[[float], float]:
    """Scalar callable for the order-``n`` derivative of the cascade kernel.

    Uses the partial-fraction series when it is well conditioned and the
    state-space form otherwise.
    """
    if _is_well_conditioned(mus):
        ker = SeriesKernel.from_mus(mus, n)
        return lambda t: eval_series(ker, t)
    return PolyExpKernel(mus, n)


def _tail_cut(mus: np.ndarray, n: int, p: float, weight_pow: int = 0, tol: float = 1e-14) -> float:
    # Find t with  sup_{s>t} |f|^(p-1) * int_t^inf |f| * (1+t)^weight_pow < tol,
    # bounding |f| by a sum of decaying exponential envelopes.
    mu_max = float(mus.max())
    ker = PolyExpKernel(mus, n)
    t = 10.0 * mu_max
    for _ in range(400):
        sup = ker.envelope(t)
        integral = sup * mu_max * 4.0
        bound = sup ** (p - 1.0) * integral * (1.0 + t) ** weight_pow
        if bound < tol:
            return t
        t *= 1.1
    raise QuadratureError("could not bound the kernel tail")


def _segments(f: Callable[[float], float], mus: np.ndarray, t_cut: float) -> list[float]:
    grid = np.unique(np.concatenate([[0.0], np.geomspace(float(mus.min()) * 1e-3, t_cut, 3000)]))
    vals = np.array([f(t) for t in grid])
    points = [0.0]
    for i in range(grid.size - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0 and i > 0:
            points.append(float(grid[i]))
        elif a * b < 0:
            points.append(optimize.brentq(f, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-14))
    points.append(t_cut)
    return sorted(set(points))


def _integrate(g: Callable[[float], float], points: list[float], tol: float) -> float:
    total = 0.0
    err = 0.0
    for a, b in zip(points, points[1:]):
        if b <= a:
            continue
        val, e = integrate.quad(g, a, b, epsabs=1e-14, epsrel=1e-11, limit=200)
        total += val
        err += e
    if err > tol * max(abs(total), 1.0):
        raise QuadratureError(f"quadrature did not converge (error estimate {err:.3g})")
    return total


def continuous_lp_norm(
    kernel: SeriesKernel | Sequence[float],
    p: float,
    gamma: float | None = None,
    n: int | None = None,
    tol: float = 1e-8,
) -> float:
    """L_p norm of ``tau**(n*gamma/2) * d^n/dt^n Psi`` over ``t > 0``.

    ``kernel`` is a :class:`SeriesKernel` (its ``order`` is ``n`` unless given)
    or a plain sequence of time constants, which may contain repeats.  ``tau``
    is the kernel variance ``sum mu_k**2``.  Without ``gamma`` no scale factor
    is applied.
    """
    if not p > 0:
        raise ValueError(f"p must be positive, got {p!r}")
    if isinstance(kernel, SeriesKernel):
        mus = np.asarray(kernel.mus)
        n = kernel.order if n is None else n
    else:
        mus = np.asarray(kernel, dtype=float)
        n = 0 if n is None else n
    tau = float(np.sum(mus**2))
    scale = 1.0 if gamma is None else tau ** (n * gamma / 2.0)
    f = kernel_function(mus, n)
    t_cut = _tail_cut(mus, n, p)
    pts = _segments(f, mus, t_cut)
    value = _integrate(lambda t: abs(f(t)) ** p, pts, tol)
    return scale * value ** (1.0 / p)


def continuous_moments(mus: Sequence[float], tol: float = 1e-10) -> tuple[float, float, float]:
    """``(mass, mean, variance)`` of the cascade kernel by quadrature."""
    mus = np.asarray(mus, dtype=float)
    f = kernel_function(mus, 0)
    t_cut = _tail_cut(mus, 0, 1.0, weight_pow=2, tol=1e-16)
    pts = [0.0] + list(np.geomspace(float(mus.min()), t_cut, 40))
    m0 = _integrate(f, pts, tol)
    m1 = _integrate(lambda t: t * f(t), pts, tol)
    m2 = _integrate(lambda t: t * t * f(t), pts, tol)
    mean = m1 / m0
    return m0, mean, m2 / m0 - mean * mean


def norm_recurrence(base_norm: float, c: float, j: int, n: int, p: float) -> float:
    """Norm at ``tau = c**(2j)`` from the norm at ``tau = 1`` (unnormalized derivatives)."""
    return c ** (-j * (n + 1) + j / p) * base_norm


def gaussian_kernel(t, tau: float, n: int = 0):
    """Non-causal Gaussian kernel of variance ``tau`` or its derivative of order ``n``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    t = np.asarray(t, dtype=float)
    g = np.exp(-(t**2) / (2.0 * tau)) / math.sqrt(2.0 * math.pi * tau)
    if n == 0:
        out = g
    elif n == 1:
        out = -(t / tau) * g
    elif n == 2:
        out = ((t**2 - tau) / tau**2) * g
    else:
        raise ValueError(f"unsupported order {n}")
    return float(out) if out.ndim == 0 else out


def gaussian_derivative_norms(tau: float, n: int, p: int) -> float:
    """Closed-form L_1 / L_2 norms of first- and second-order Gaussian derivatives."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    pi = math.pi
    table = {
        (1, 2): 1.0 / (2.0 * pi**0.25 * tau**0.75),
        (1, 1): math.sqrt(2.0 / pi) / math.sqrt(tau),
        (2, 2): math.sqrt(1.5) / (2.0 * pi**0.25 * tau**1.25),
        (2, 1): math.sqrt(8.0 / (math.e * pi)) / tau,
    }
    try:
        return table[(n, p)]
    except KeyError:
        raise ValueError(f"no closed form for order {n} and p={p}") from None


_SERIES_MAX_TAU = 20.0


def _bessel_series(m: int, tau: float) -> float:
    # e^{-tau} I_m(tau) = sum_k e^{-tau} (tau/2)^{2k+m} / (k! (k+m)!)
    if tau == 0.0:
        return 1.0 if m == 0 else 0.0
    half = 0.5 * tau
    log_first = m * math.log(half) - math.lgamma(m + 1) - tau
    term = math.exp(log_first)
    if term == 0.0:
        return 0.0
    total = term
    k = 0
    q = half * half
    while True:
        k += 1
        term *= q / (k * (k + m))
        total += term
        if term <= 1e-17 * total:
            return total


def discrete_gaussian_kernel(tau: float, m_max: int) -> np.ndarray:
    """``T(m; tau) = e^{-tau} I_m(tau)`` for ``m = -m_max..m_max``.

    Small ``tau`` sums the Bessel power series; larger ``tau`` runs Miller's
    normalized backward recurrence ``I_{m-1} = I_{m+1} + (2m/tau) I_m`` using
    ``I_0 + 2 sum_{m>0} I_m = e^tau``.
    """
    if not (math.isfinite(tau) and tau >= 0):
        raise ValueError(f"tau must be finite and >= 0, got {tau!r}")
    m_max = int(m_max)
    if m_max < 0:
        raise ValueError("m_max must be >= 0")
    if tau <= _SERIES_MAX_TAU:
        half = np.array([_bessel_series(m, tau) for m in range(m_max + 1)])
    else:
        start = max(m_max, int(tau)) + int(40.0 * math.sqrt(tau)) + 60
        vals = np.zeros(start + 2)
        vals[start] = 1e-300
        for m in range(start, 0, -1):
            vals[m - 1] = vals[m + 1] + (2.0 * m / tau) * vals[m]
            if vals[m - 1] > 1e250:
                vals[m - 1 :] *= 1e-250
        norm = vals[0] + 2.0 * vals[1:].sum()
        half = vals[: m_max + 1] / norm
    return np.concatenate([half[:0:-1], half])


def discrete_gaussian(m: int, tau: float) -> float:
    m = abs(int(m))
    return float(discrete_gaussian_kernel(tau, m)[-1])


def dog_vs_gtt_check(tau: float, dtau: float, grid=None) -> float:
    """Relative max deviation of the difference of Gaussians from
    ``(dtau / 2) * g_tt`` on a grid spanning ±8 standard deviations."""
    if not (tau > 0 and dtau > 0):
        raise ValueError("tau and dtau must be positive")
    if grid is None:
        s = math.sqrt(tau + dtau)
        grid = np.linspace(-8 * s, 8 * s, 4001)
    dog = gaussian_kernel(grid, tau + dtau) - gaussian_kernel(grid, tau)
    approx = 0.5 * dtau * gaussian_kernel(grid, tau, 2)
    return float(np.max(np.abs(dog - approx)) / np.max(np.abs(approx)))


def fourier_magnitude(mus: Sequence[float], omega) -> np.ndarray:
    """``|prod 1 / (1 + i mu_k omega)|`` of the continuous cascade."""
    mus = np.asarray(mus, dtype=float)[:, None]
    omega = np.atleast_1d(np.asarray(omega, dtype=float))[None, :]
    return np.prod(1.0 / np.sqrt(1.0 + (mus * omega) ** 2), axis=0)


def discrete_frequency_response(spec: CascadeSpec, omega) -> np.ndarray:
    """Magnitude response of the recursive cascade at angular frequency
    ``omega`` (user units), i.e. at ``z = exp(i omega dt)``."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    z = np.exp(-1j * omega * spec.dt)
    H = np.ones_like(z)
    for g in spec.gains:
        H = H * g / (1.0 - (1.0 - g) * z)
    return np.abs(H)


def fourier_magnitude_check(spec: CascadeSpec, omega_grid) -> float:
    """Max deviation between continuous and discrete magnitude responses."""
    cont = fourier_magnitude(spec.mu_cont, omega_grid)
    disc = discrete_frequency_response(spec, omega_grid)
    return float(np.max(np.abs(cont - disc)))


def half_power_frequency(mus: Sequence[float]) -> float:
    """Angular frequency where the continuous squared magnitude drops to 1/2."""
    mus = np.asarray(mus, dtype=float)
    hi = 1.0 / mus.max()
    while fourier_magnitude(mus, hi)[0] ** 2 > 0.5:
        hi *= 2.0
    return optimize.brentq(lambda w: fourier_magnitude(mus, w)[0] ** 2 - 0.5, 0.0, hi, xtol=1e-14, rtol=1e-13)
