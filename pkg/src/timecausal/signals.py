"""Synthetic test signals and readers for sampled real signals.

Blob samples are rounded to multiples of ``2**-53`` so that every partial sum
is exact in double precision; the first difference of :func:`gen_edge` is then
bit-identical to :func:`gen_blob`.
"""

from __future__ import annotations

import csv
import math
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .oracle import discrete_gaussian_kernel

__all__ = [
    "SignalBuffer",
    "SignalFormatError",
    "gen_blob",
    "gen_edge",
    "gen_chirp",
    "gen_impulse",
    "gen_step",
    "read_csv",
    "read_wav",
    "write_wav",
    "demean",
]

_GRID = 2.0**53
_EXP_LIMIT = 700.0


class SignalFormatError(ValueError):
    """A signal file could not be parsed."""


@dataclass(frozen=True)
class SignalBuffer:
    samples: np.ndarray
    dt: float = 1.0
    origin_time: float = 0.0
    label: str = ""

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float).ravel()
        bad = np.flatnonzero(~np.isfinite(x))
        if bad.size:
            raise ValueError(f"non-finite sample at index {bad[0]}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.origin_time + self.dt * np.arange(self.samples.size)


def demean(buf: SignalBuffer) -> SignalBuffer:
    """Remove the mean so the DC level is zero."""
    x = buf.samples
    return SignalBuffer(x - x.mean() if x.size else x, buf.dt, buf.origin_time, buf.label + ",demeaned")


def _blob_values(sigma_ref: float, length: int, center: int) -> np.ndarray:
    if not (math.isfinite(sigma_ref) and sigma_ref > 0):
        raise ValueError(f"sigma_ref must be positive, got {sigma_ref!r}")
    length, center = int(length), int(center)
    reach = 8.0 * sigma_ref
    if center - reach < 0 or center + reach > length - 1:
        raise ValueError(
            f"length {length} with center {center} does not cover +-8 sigma ({reach:g}) around the center"
        )
    m_max = max(center, length - 1 - center)
    kern = discrete_gaussian_kernel(sigma_ref**2, m_max)
    vals = kern[m_max - center : m_max - center + length]
    return np.round(vals * _GRID) / _GRID


def gen_blob(sigma_ref: float, length: int, center: int) -> SignalBuffer:
    """Discrete Gaussian of variance ``sigma_ref**2`` centred at sample ``center``."""
    return SignalBuffer(_blob_values(sigma_ref, length, center), label=f"blob:sigma={sigma_ref:g}")


def gen_edge(sigma_ref: float, length: int, center: int) -> SignalBuffer:
    """Inclusive cumulative sum of the blob, rising from 0 to 1."""
    return SignalBuffer(np.cumsum(_blob_values(sigma_ref, length, center)), label=f"edge:sigma={sigma_ref:g}")


def gen_chirp(a: float = 200.0, b: float = 1000.0, length: int = 1000) -> SignalBuffer:
    """``sin(exp((b - t) / a))`` at integer ``t``; frequency falls as ``t`` grows.

    Exponent arguments above 700 are clamped and the label records it.
    """
    if a == 0 or not math.isfinite(a) or not math.isfinite(b):
        raise ValueError("chirp needs finite a != 0 and finite b")
    arg = (b - np.arange(int(length), dtype=float)) / a
    clamped = bool(np.any(arg > _EXP_LIMIT))
    x = np.sin(np.exp(np.minimum(arg, _EXP_LIMIT)))
    label = f"chirp:a={a:g},b={b:g}" + (",clamped" if clamped else "")
    return SignalBuffer(x, label=label)


def gen_impulse(length: int, position: int = 0, amplitude: float = 1.0) -> SignalBuffer:
    if not 0 <= position < length:
        raise ValueError(f"impulse position {position} outside 0..{length - 1}")
    x = np.zeros(int(length))
    x[position] = amplitude
    return SignalBuffer(x, label=f"impulse:{position}")


def gen_step(length: int, position: int = 0) -> SignalBuffer:
    if not 0 <= position <= length:
        raise ValueError(f"step position {position} outside 0..{length}")
    x = np.zeros(int(length))
    x[position:] = 1.0
    return SignalBuffer(x, label=f"step:{position}")


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_csv(path, column: int | str | None = None, dt: float = 1.0, demean_: bool = False) -> SignalBuffer:
    """Read one column of a UTF-8 CSV file.

    A first row that does not parse as numbers is taken as a header.  ``column``
    is a 0-based index or a header name; the default is the first column.
    """
    path = Path(path)
    try:
        text = path.read_bytes().decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise SignalFormatError(f"{path}: not valid UTF-8 at byte {exc.start}") from exc
    rows = [(i + 1, r) for i, r in enumerate(csv.reader(text.splitlines())) if r and any(f.strip() for f in r)]
    header = None
    if rows and not all(_is_number(f) for f in rows[0][1]):
        header = [f.strip() for f in rows[0][1]]
        rows = rows[1:]
    if column is None:
        idx = 0
    elif isinstance(column, str) and not column.lstrip("-").isdigit():
        if header is None or column not in header:
            avail = ", ".join(header) if header else "none (file has no header)"
            raise SignalFormatError(f"{path}: no column {column!r}; available: {avail}")
        idx = header.index(column)
    else:
        idx = int(column)
    values = []
    for lineno, fields in rows:
        if idx >= len(fields) or idx < -len(fields):
            raise SignalFormatError(f"{path}:{lineno}: row has {len(fields)} fields, column {idx} requested")
        try:
            v = float(fields[idx])
        except ValueError:
            raise SignalFormatError(f"{path}:{lineno}: cannot parse {fields[idx]!r} as a number") from None
        if not math.isfinite(v):
            raise SignalFormatError(f"{path}:{lineno}: non-finite value {fields[idx]!r}")
        values.append(v)
    buf = SignalBuffer(np.array(values), dt=dt, label=f"csv:{path.name}")
    return demean(buf) if demean_ else buf


def read_wav(path, demean_: bool = False) -> SignalBuffer:
    """16-bit PCM WAV as floats in [-1, 1); stereo is averaged to mono."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as w:
            if w.getsampwidth() != 2:
                raise SignalFormatError(f"{path}: {8 * w.getsampwidth()}-bit samples, only 16-bit PCM is supported")
            channels, rate, frames = w.getnchannels(), w.getframerate(), w.getnframes()
            raw = w.readframes(frames)
    except (wave.Error, EOFError) as exc:
        raise SignalFormatError(f"{path}: malformed WAV file ({exc})") from exc
    usable = len(raw) - len(raw) % (2 * channels)
    data = np.frombuffer(raw[:usable], dtype="<i2").astype(float) / 32768.0
    data = data.reshape(-1, channels).mean(axis=1)
    buf = SignalBuffer(data, dt=1.0 / rate, label=f"wav:{path.name}")
    return demean(buf) if demean_ else buf


def write_wav(path, buf: SignalBuffer, rate: int | None = None) -> None:
    """Write a mono 16-bit PCM WAV; samples are clipped to [-1, 1)."""
    rate = int(round(1.0 / buf.dt)) if rate is None else int(rate)
    q = np.clip(np.round(buf.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(q.tobytes())
