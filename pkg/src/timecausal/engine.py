"""Time-recursive smoothing with a cascade of first-order recursive filters.

Each layer ``k`` updates as

    L_k(t) = L_k(t-1) + (L_{k-1}(t) - L_k(t-1)) / (1 + mu_k)

with ``L_0(t)`` the input sample.  Layer ``k`` reads the value of layer
``k-1`` already updated in the same frame.  The complete memory of the past
is the current channel vector plus the two previous frames kept for the
temporal difference operators.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .cascade import CascadeSpec, build_cascade
from .scalogram import Scalogram

__all__ = ["ChannelBank", "KernelSamples", "equivalent_kernel", "kernel_length", "StateFormatError"]

_MAGIC = b"TCWB"
_VERSION = 1
_HEADER = struct.Struct("<4sHBxIdddQ")


class StateFormatError(ValueError):
    """Raised for unreadable or inconsistent serialized bank state."""


class ChannelBank:
    """Streaming state of one cascade applied to one signal.

    State is ``level`` (current frame), ``level_prev`` and ``prev2`` (one and
    two frames back) plus a frame counter; its size is independent of the
    stream length.  A bank is single-writer: serialize calls per bank.

    With ``prime=True`` the first processed sample initializes all channels
    to its value, which suppresses the onset transient of signals with a
    nonzero baseline.
    """

    def __init__(self, spec: CascadeSpec, initial_value: float = 0.0, prime: bool = False):
        self.spec = spec
        self.prime = bool(prime)
        self._gains = spec.gains
        self.reset(initial_value)

    def reset(self, initial_value: float = 0.0) -> "ChannelBank":
        """Set every channel and both history frames to ``initial_value``."""
        v = float(initial_value)
        if not math.isfinite(v):
            raise ValueError(f"initial value must be finite, got {initial_value!r}")
        K = self.spec.K
        self.level = [v] * K
        self.level_prev = [v] * K
        self.prev2 = [v] * K
        self.frame_index = 0
        return self

    @property
    def K(self) -> int:
        return self.spec.K

    def _advance(self, x: float) -> list[float]:
        if self.prime and self.frame_index == 0:
            self.level = [x] * self.spec.K
            self.level_prev = list(self.level)
        current = self.level
        new = [0.0] * len(current)
        for k, g in enumerate(self._gains):
            prev = current[k]
            x = prev + (x - prev) * g
            new[k] = x
        self.prev2 = self.level_prev
        self.level_prev = current
        self.level = new
        self.frame_index += 1
        return new

    def step(self, sample: float) -> np.ndarray:
        """Feed one sample; return the K updated channel values."""
        x = float(sample)
        if not math.isfinite(x):
            raise ValueError(f"non-finite sample {sample!r} at frame {self.frame_index}")
        return np.array(self._advance(x))

    def run(self, samples: Iterable[float]) -> Scalogram:
        """Feed a finite sequence; return the ``T x K`` channel trajectories.

        Equivalent, bit for bit, to calling :meth:`step` on every sample.  The
        input is validated up front so that a bad sample leaves the state
        untouched.
        """
        x = np.asarray(samples, dtype=float).ravel()
        bad = np.flatnonzero(~np.isfinite(x))
        if bad.size:
            raise ValueError(f"non-finite sample at position {bad[0]}")
        if self.prime and self.frame_index == 0 and x.size:
            history = np.full((2, self.spec.K), x[0])
        else:
            history = np.array([self.level_prev, self.level])
        t0 = self.frame_index * self.spec.dt
        rows = [self._advance(v) for v in x.tolist()]
        data = np.array(rows, dtype=float).reshape(len(rows), self.spec.K)
        return Scalogram(
            data=data,
            scales=np.asarray(self.spec.tau_levels),
            c=self.spec.c,
            tau0=self.spec.tau0,
            dt=self.spec.dt,
            order=0,
            t0=t0,
            delays=self.spec.mean_delays(),
            history=history,
        )

    def state(self) -> dict:
        return {
            "level": list(self.level),
            "level_prev": list(self.level_prev),
            "prev2": list(self.prev2),
            "frame_index": self.frame_index,
        }

    def copy(self) -> "ChannelBank":
        other = ChannelBank(self.spec, prime=self.prime)
        other.level = list(self.level)
        other.level_prev = list(self.level_prev)
        other.prev2 = list(self.prev2)
        other.frame_index = self.frame_index
        return other

    def to_bytes(self) -> bytes:
        """Versioned little-endian snapshot: header, mu_disc, level,
        level_prev, prev2."""
        s = self.spec
        head = _HEADER.pack(_MAGIC, _VERSION, int(self.prime), s.K, s.c, s.tau0, s.dt, self.frame_index)
        body = struct.pack(f"<{4 * s.K}d", *s.mu_disc, *self.level, *self.level_prev, *self.prev2)
        return head + body

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ChannelBank":
        if len(blob) < _HEADER.size:
            raise StateFormatError("state file truncated")
        magic, version, prime, K, c, tau0, dt, frame = _HEADER.unpack_from(blob)
        if magic != _MAGIC:
            raise StateFormatError("not a channel-bank state file")
        if version != _VERSION:
            raise StateFormatError(f"unsupported state version {version}")
        expected = _HEADER.size + 8 * 4 * K
        if len(blob) != expected:
            raise StateFormatError(f"state file has {len(blob)} bytes, expected {expected}")
        values = struct.unpack_from(f"<{4 * K}d", blob, _HEADER.size)
        spec = build_cascade(c, tau0, K, dt)
        if tuple(values[:K]) != spec.mu_disc:
            raise StateFormatError("stored time constants do not match the rebuilt cascade")
        bank = cls(spec, prime=bool(prime))
        bank.level = list(values[K : 2 * K])
        bank.level_prev = list(values[2 * K : 3 * K])
        bank.prev2 = list(values[3 * K :])
        bank.frame_index = frame
        return bank


@dataclass(frozen=True)
class KernelSamples:
    """A sampled kernel: ``values[i]`` sits at time ``t0 + i * dt``.

    Values are discrete filter weights (they sum to the DC gain), not
    densities; divide by ``dt`` to compare with a continuous kernel.
    """

    values: np.ndarray
    t0: float = 0.0
    dt: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if not self.dt > 0:
            raise ValueError("kernel grid spacing must be positive")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    @property
    def tail_mass(self) -> float:
        """Smoothing-kernel mass beyond the last sample (1 - sum, clipped at 0)."""
        return max(0.0, 1.0 - float(self.values.sum()))


def _impulse_columns(spec: CascadeSpec, N: int) -> np.ndarray:
    bank = ChannelBank(spec)
    x = np.zeros(N)
    if N:
        x[0] = 1.0
    return bank.run(x).data


def kernel_length(spec: CascadeSpec, k: int | None = None, tol: float = 1e-8) -> int:
    """Smallest length whose truncated tail mass at layer ``k`` is below ``tol``."""
    k = spec.K if k is None else k
    sub = spec.truncated(k)
    bank = ChannelBank(sub)
    total = 0.0
    n = 0
    x = 1.0
    # the kernel is unimodal, so once past the mean the tail only shrinks
    while True:
        total += bank._advance(x)[-1]
        x = 0.0
        n += 1
        if 1.0 - total < tol:
            return n
        if n > 10_000_000:
            raise RuntimeError("kernel length search did not converge")


def equivalent_kernel(
    spec: CascadeSpec,
    k: int | None = None,
    N: int | None = None,
    tol: float = 1e-8,
) -> KernelSamples:
    """Impulse response of layers ``1..k`` sampled at ``N`` points.

    ``N`` defaults to the shortest length meeting ``tol``; an explicit ``N``
    that leaves more than ``tol`` of the mass in the tail is an error.
    """
    k = spec.K if k is None else int(k)
    if not 1 <= k <= spec.K:
        raise ValueError(f"layer index must lie in 1..{spec.K}, got {k}")
    auto = N is None
    if auto:
        N = kernel_length(spec, k, tol)
    sub = spec.truncated(k)
    meta = {"c": spec.c, "tau": spec.tau_levels[k - 1], "layer": k, "order": 0}
    kern = KernelSamples(_impulse_columns(sub, int(N))[:, -1].copy(), t0=0.0, dt=spec.dt, meta=meta)
    # the running sum in kernel_length and the array sum can differ in the last bit
    while auto and kern.tail_mass >= tol and N < 10_000_000:
        N = int(N * 1.01) + 1
        kern = KernelSamples(_impulse_columns(sub, N)[:, -1].copy(), t0=0.0, dt=spec.dt, meta=meta)
    if kern.tail_mass >= tol:
        need = kernel_length(spec, k, tol)
        raise ValueError(f"N={N} leaves tail mass {kern.tail_mass:.3g} >= {tol:g}; need N >= {need}")
    return kern
