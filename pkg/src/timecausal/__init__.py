"""Streaming time-causal scale-space and wavelet analysis built on the
time-causal limit kernel."""

__version__ = "0.1.0"

from .cascade import (
    CascadeSpec,
    DelayKind,
    DelayMeasure,
    build_cascade,
    cascade_for_range,
    continuous_delay_measures,
    delay_measures_discrete,
    mean_delay_continuous,
    mu_discrete,
    mu_limit,
    mu_truncated,
    scale_levels,
    tmax_delay_approx,
    variance_residuals,
)
from .engine import ChannelBank, KernelSamples, StateFormatError, equivalent_kernel, kernel_length
from .scalogram import Scalogram
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
    write_wav,
)
from .wavelets import (
    bandpass,
    bandpass_shift_relation_check,
    normalize,
    quasi_quadrature,
    quasi_quadrature_response,
    reconstruct,
    scale_normalize,
    temporal_derivative,
)
from .selection import (
    ScaleEstimate,
    blob_scale_formula,
    detect_global_extremum,
    detect_local_extrema,
    edge_scale_formula,
    scale_selection_sweep,
)
