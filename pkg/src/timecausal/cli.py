"""Command-line interface: ``timecausal {analyze,kernel,norms,scalesel,stream}``.

Every command writes CSV: ``# key=value`` metadata lines, one header line,
then data rows with floats printed to 17 significant digits.
Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import math
import os
import signal as _signal
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .cascade import CascadeSpec, build_cascade, cascade_for_range
from .engine import ChannelBank, StateFormatError, kernel_length
from .oracle import QuadratureError, continuous_lp_norm, limit_time_constants
from .scalogram import Scalogram
from .selection import scale_selection_sweep, write_sweep_csv
from .signals import (
    SignalBuffer,
    SignalFormatError,
    demean,
    gen_blob,
    gen_chirp,
    gen_edge,
    gen_impulse,
    gen_step,
    read_csv,
    read_wav,
)
from .wavelets import (
    DEFAULT_QUAD_C,
    backward_differences,
    discrete_kernel_norms,
    normalize,
    quasi_quadrature_response,
    temporal_derivative,
)

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4


class ConfigError(Exception):
    pass


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _row(values) -> str:
    return ",".join(fmt(v) for v in values)


# ---------------------------------------------------------------- config


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _add_cascade_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--c", type=_positive, default=math.sqrt(2.0), help="scale ratio between levels (> 1)")
    p.add_argument("--tau0", type=_positive, default=None, help="base variance; level k has tau0*c**(2k)")
    p.add_argument("--sigma-min", type=_positive, default=None, help="finest standard deviation (alternative to --tau0)")
    size = p.add_mutually_exclusive_group()
    size.add_argument("--levels", type=int, default=None, metavar="K", help="number of scale levels")
    size.add_argument("--sigma-max", type=_positive, default=None, help="coarsest standard deviation")
    p.add_argument("--dt", type=_positive, default=None, help="sample spacing (default: from input, else 1)")


def _add_analysis_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gamma", type=_positive, default=1.0, help="scale-normalization power")
    p.add_argument("--order", type=int, choices=(0, 1, 2), default=0, help="temporal derivative order")
    p.add_argument("--normalization", default="gamma", help="gamma | lp:P | mother | none")
    p.add_argument("--quad-C", dest="quad_C", type=_positive, default=DEFAULT_QUAD_C, help="quasi-quadrature weight")


def _add_input_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="csv:PATH[:col] | wav:PATH | gen:blob:S | gen:edge:S | gen:chirp:A,B | gen:impulse[:POS] | gen:step[:POS]")
    p.add_argument("--length", type=int, default=2000, help="length of generated signals")
    p.add_argument("--demean", action="store_true", help="remove the mean of the input")


def cascade_from_args(args, dt: float = 1.0) -> CascadeSpec:
    if args.tau0 is not None and args.sigma_min is not None:
        raise ConfigError("give at most one of --tau0 and --sigma-min")
    c = args.c
    if not c > 1:
        raise ConfigError(f"--c must exceed 1, got {c}")
    if args.sigma_max is not None:
        if args.sigma_min is not None:
            sigma_min = args.sigma_min
        else:
            sigma_min = math.sqrt(args.tau0 if args.tau0 is not None else 1.0) * c
        spec, _ = cascade_for_range(c, sigma_min, args.sigma_max, dt, layers_below=1)
        return spec
    tau0 = args.tau0 if args.tau0 is not None else (args.sigma_min / c) ** 2 if args.sigma_min is not None else 1.0
    K = 8 if args.levels is None else args.levels
    return build_cascade(c, tau0, K, dt)


def load_input(spec: str, length: int, do_demean: bool) -> SignalBuffer:
    kind, _, rest = spec.partition(":")
    if kind == "csv":
        path, column = rest, None
        if not Path(rest).exists() and ":" in rest:
            path, column = rest.rsplit(":", 1)
        buf = read_csv(path, column)
    elif kind == "wav":
        buf = read_wav(rest)
    elif kind == "gen":
        name, _, param = rest.partition(":")
        try:
            if name in ("blob", "edge"):
                sigma = float(param)
                gen = gen_blob if name == "blob" else gen_edge
                buf = gen(sigma, length, length // 2)
            elif name == "chirp":
                a, b = (float(v) for v in param.split(",")) if param else (200.0, 1000.0)
                buf = gen_chirp(a, b, length)
            elif name == "impulse":
                buf = gen_impulse(length, int(param) if param else 0)
            elif name == "step":
                buf = gen_step(length, int(param) if param else 0)
            else:
                raise ConfigError(f"unknown generator {name!r}")
        except ValueError as exc:
            raise ConfigError(f"bad generator spec {spec!r}: {exc}") from None
    else:
        raise ConfigError(f"unknown input kind {kind!r}; use csv:, wav: or gen:")
    return demean(buf) if do_demean else buf


# ---------------------------------------------------------------- output


@contextmanager
def _open_out(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _meta_lines(meta: dict) -> list[str]:
    return [f"# {k}={v}" for k, v in meta.items()]


def spec_meta(spec: CascadeSpec) -> dict:
    return {
        "c": fmt(spec.c),
        "tau0": fmt(spec.tau0),
        "K": spec.K,
        "dt": fmt(spec.dt),
        "tau_levels": " ".join(fmt(t) for t in spec.tau_levels),
    }


def scale_header(K: int) -> str:
    return "t," + ",".join(f"scale_{k}" for k in range(1, K + 1))


def write_scalogram(fh, s: Scalogram, meta: dict) -> None:
    for line in _meta_lines(meta):
        fh.write(line + "\n")
    fh.write(scale_header(s.scales.size) + "\n")
    for t, row in zip(s.times, s.data):
        fh.write(fmt(t) + ("," + _row(row) if row.size else "") + "\n")


def analysis_scalogram(channels: Scalogram, spec: CascadeSpec, args) -> tuple[Scalogram, str]:
    mode = args.normalization
    if args.quasi:
        return quasi_quadrature_response(channels, args.gamma, args.quad_C, mode, spec), "quasi_quadrature"
    if args.order == 0:
        return channels, "smoothed"
    return normalize(temporal_derivative(channels, args.order), mode, args.gamma, spec), f"derivative_{args.order}"


def kernel_table(spec: CascadeSpec, n: int, tol: float = 1e-8) -> Scalogram:
    """Equivalent kernels of every level as columns of one impulse response."""
    N = kernel_length(spec, spec.K, tol) + n
    x = np.zeros(N)
    x[0] = 1.0
    channels = ChannelBank(spec).run(x)
    return channels if n == 0 else temporal_derivative(channels, n)


def _check_finite(s: Scalogram) -> None:
    d = s.data[s.valid_from :]
    if d.size and not np.all(np.isfinite(d)):
        raise FloatingPointError("non-finite values in output")


# ---------------------------------------------------------------- commands


def cmd_analyze(args) -> int:
    if args.normalization not in ("none", "gamma", "mother") and not args.normalization.startswith("lp:"):
        raise ConfigError(f"unknown normalization {args.normalization!r}")
    buf = load_input(args.input, args.length, args.demean)
    dt = args.dt if args.dt is not None else buf.dt
    spec = cascade_from_args(args, dt)
    channels = ChannelBank(spec, prime=args.prime).run(buf.samples)
    out, kind = analysis_scalogram(channels, spec, args)
    _check_finite(out)
    meta = dict(spec_meta(spec), kind=kind, order=out.order, gamma=fmt(args.gamma), normalization=out.normalization, input=args.input)
    with _open_out(args.out) as fh:
        write_scalogram(fh, out, meta)
    if args.dump_kernels:
        target = args.dump_kernels
        for n in (0, 1, 2):
            path = f"{target}.n{n}.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                write_scalogram(fh, kernel_table(spec, n), dict(spec_meta(spec), kind="kernel", order=n))
    return EXIT_OK


def cmd_kernel(args) -> int:
    spec = cascade_from_args(args, args.dt or 1.0)
    table = kernel_table(spec, args.order, args.tol)
    with _open_out(args.out) as fh:
        write_scalogram(fh, table, dict(spec_meta(spec), kind="kernel", order=args.order, tol=fmt(args.tol)))
    return EXIT_OK


def cmd_norms(args) -> int:
    spec = cascade_from_args(args, args.dt or 1.0)
    c = spec.c
    rows = []
    for n in args.orders:
        if n not in (1, 2):
            raise ConfigError(f"norm orders must be 1 or 2, got {n}")
        for p in args.p:
            base = continuous_lp_norm(limit_time_constants(c, 1.0, args.truncation), p, n=n)
            discrete = discrete_kernel_norms(spec, n, p, gamma=args.gamma)
            for tau, d in zip(spec.tau_levels, discrete):
                # self-similarity of the limit kernel: norms scale as a power of tau
                cont = base * tau ** (n * args.gamma / 2.0 - (n + 1) / 2.0 + 1.0 / (2.0 * p))
                rows.append((math.sqrt(tau), n, p, args.gamma, cont, d))
    with _open_out(args.out) as fh:
        for line in _meta_lines(dict(spec_meta(spec), kind="norms", truncation=args.truncation)):
            fh.write(line + "\n")
        fh.write("sigma,n,p,gamma,continuous,discrete\n")
        for sigma, n, p, g, cont, d in rows:
            fh.write(f"{fmt(sigma)},{n},{fmt(p)},{fmt(g)},{fmt(cont)},{fmt(d)}\n")
    return EXIT_OK


def cmd_scalesel(args) -> int:
    if args.sigma_min is None:
        args.sigma_min = 1.0 / 8.0
    if args.sigma_max is None:
        args.sigma_max = 64.0
    rows = scale_selection_sweep(
        args.model,
        args.sigma_refs,
        args.c,
        gamma=args.gamma,
        n=args.order,
        sigma_range=(args.sigma_min, args.sigma_max),
    )
    with _open_out(args.out) as fh:
        write_sweep_csv(rows, fh)
    return EXIT_OK


def _stream_bank(args) -> tuple[ChannelBank, bool]:
    spec = cascade_from_args(args, args.dt or 1.0)
    path = args.state_file
    if path and os.path.exists(path):
        with open(path, "rb") as fh:
            bank = ChannelBank.from_bytes(fh.read())
        if bank.spec.mu_disc != spec.mu_disc or bank.spec.dt != spec.dt:
            raise ConfigError(f"state file {path} was written for a different cascade")
        return bank, True
    return ChannelBank(spec, prime=args.prime), False


def _save_state(bank: ChannelBank, path: str | None) -> None:
    if not path:
        return
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(bank.to_bytes())
    os.replace(tmp, path)


def stream_row(bank: ChannelBank, order: int, factors: np.ndarray | None) -> list[float]:
    """Channel values of the latest frame, followed by the derivative columns."""
    out = list(bank.level)
    if order:
        rows = np.array([bank.prev2, bank.level_prev, bank.level])
        d = backward_differences(rows, order)[-1] / bank.spec.dt**order
        out.extend(d * factors if factors is not None else d)
    return out


def cmd_stream(args) -> int:
    bank, resumed = _stream_bank(args)
    spec = bank.spec
    if args.normalization not in ("none", "gamma"):
        raise ConfigError("stream supports --normalization gamma or none")
    factors = None
    if args.order and args.normalization == "gamma":
        factors = np.asarray(spec.tau_levels) ** (args.order * args.gamma / 2.0)
    out = sys.stdout
    if not resumed:
        meta = dict(spec_meta(spec), kind="stream", order=args.order, gamma=fmt(args.gamma), normalization=args.normalization)
        for line in _meta_lines(meta):
            out.write(line + "\n")
        header = scale_header(spec.K)
        if args.order:
            header += "," + ",".join(f"d{args.order}_{k}" for k in range(1, spec.K + 1))
        out.write(header + "\n")
        out.flush()

    def _terminate(signum, frame):
        _save_state(bank, args.state_file)
        sys.exit(128 + signum)

    previous = _signal.signal(_signal.SIGTERM, _terminate)
    every = args.checkpoint_every
    try:
        for lineno, line in enumerate(sys.stdin, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                x = float(text.split(",")[0])
                if not math.isfinite(x):
                    raise ValueError
            except ValueError:
                print(f"stdin:{lineno}: skipping malformed sample {text!r}", file=sys.stderr)
                continue
            t = bank.frame_index * spec.dt
            bank.step(x)
            out.write(fmt(t) + "," + _row(stream_row(bank, args.order, factors)) + "\n")
            out.flush()
            if every and bank.frame_index % every == 0:
                _save_state(bank, args.state_file)
    except KeyboardInterrupt:
        _save_state(bank, args.state_file)
        return 130
    finally:
        _signal.signal(_signal.SIGTERM, previous)
    _save_state(bank, args.state_file)
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="timecausal", description="Time-causal scale-space and wavelet analysis of sampled signals.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="smoothed, derivative or quasi-quadrature scalograms")
    _add_cascade_args(p)
    _add_analysis_args(p)
    _add_input_args(p)
    p.add_argument("--quasi", action="store_true", help="output the quasi-quadrature energy")
    p.add_argument("--prime", action="store_true", help="initialize channels to the first sample")
    p.add_argument("--out", default="-", help="output CSV path (default stdout)")
    p.add_argument("--dump-kernels", metavar="PREFIX", default=None, help="also write PREFIX.n{0,1,2}.csv kernel tables")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("kernel", help="equivalent discrete kernels")
    _add_cascade_args(p)
    p.add_argument("--order", type=int, choices=(0, 1, 2), default=0)
    p.add_argument("--tol", type=_positive, default=1e-8, help="tail mass left beyond the last sample")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("norms", help="continuous and discrete L_p norms per scale")
    _add_cascade_args(p)
    p.add_argument("--gamma", type=_positive, default=1.0)
    p.add_argument("--orders", type=lambda s: [int(v) for v in s.split(",")], default=[1, 2])
    p.add_argument("--p", type=_float_list, default=[1.0, 2.0])
    p.add_argument("--truncation", type=int, default=8, help="layers of the continuous reference cascade")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_norms)

    p = sub.add_parser("scalesel", help="scale-selection sweep over blob or edge widths")
    p.add_argument("--c", type=_positive, default=math.sqrt(2.0))
    p.add_argument("--model", choices=("blob", "edge"), default="blob")
    p.add_argument("--sigma-refs", type=_float_list, default=[4.0, 8.0, 16.0, 32.0])
    p.add_argument("--sigma-min", type=_positive, default=None)
    p.add_argument("--sigma-max", type=_positive, default=None)
    p.add_argument("--gamma", type=_positive, default=None, help="default 3/4 (blob) or 1/2 (edge)")
    p.add_argument("--order", type=int, choices=(1, 2), default=None, help="default 2 (blob) or 1 (edge)")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_scalesel)

    p = sub.add_parser("stream", help="causal line-by-line filtering of stdin")
    _add_cascade_args(p)
    p.add_argument("--gamma", type=_positive, default=1.0)
    p.add_argument("--order", type=int, choices=(0, 1, 2), default=0)
    p.add_argument("--normalization", default="gamma")
    p.add_argument("--state-file", default=None, help="resume from and save to this state file")
    p.add_argument("--checkpoint-every", type=int, default=0, metavar="N", help="save state every N samples")
    p.add_argument("--prime", action="store_true", help="initialize channels to the first sample")
    p.set_defaults(func=cmd_stream)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        # non-finite results are detected explicitly and reported with exit code 4
        with np.errstate(over="ignore", invalid="ignore"):
            return args.func(args)
    except (SignalFormatError, StateFormatError, OSError) as exc:
        print(f"timecausal: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FloatingPointError, QuadratureError, OverflowError) as exc:
        print(f"timecausal: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError) as exc:
        print(f"timecausal: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
