"""Three-point parabolic peak refinement shared by the delay and scale detectors."""

from __future__ import annotations


def parabolic_offset(left: float, centre: float, right: float) -> float:
    """Sub-sample offset of the vertex of the parabola through three equispaced
    samples, in units of the sample spacing, relative to the centre sample.

    Returns 0 for a degenerate (flat or linear) triple. The result lies in
    [-1/2, 1/2] whenever ``centre`` is a maximum of the three.
    """
    denom = left - 2.0 * centre + right
    if denom == 0.0:
        return 0.0
    offset = 0.5 * (left - right) / denom
    # guard against non-maximal triples fed in by callers at plateaus
    return max(-1.0, min(1.0, offset))


def parabolic_peak(left: float, centre: float, right: float) -> tuple[float, float]:
    """Return ``(offset, value)`` of the interpolated vertex."""
    offset = parabolic_offset(left, centre, right)
    value = centre - 0.25 * (left - right) * offset
    return offset, value
