"""
Log-log regression used by every dimension and decay estimate.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from core.errors import LabError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScalingFit:
    """Result of a straight-line fit in log-log coordinates.

    ``log_scales``/``log_values`` hold every point that was offered; the
    fit itself only uses the half-open index range ``scale_window``.
    """
    log_scales: Tuple[float, ...]
    log_values: Tuple[float, ...]
    slope: float
    intercept: float
    r_squared: float
    scale_window: Tuple[int, int]

    @property
    def points_used(self) -> int:
        return self.scale_window[1] - self.scale_window[0]

    def to_dict(self) -> dict:
        return {
            "log_scales": list(self.log_scales),
            "log_values": list(self.log_values),
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "scale_window": list(self.scale_window),
        }


def fit_scaling(log_scales: Sequence[float],
                log_values: Sequence[float],
                window: Optional[Tuple[int, int]] = None,
                min_points: int = 4) -> ScalingFit:
    """
    Fit ``log_values ~ slope * log_scales + intercept``.

    Args:
        log_scales: Abscissae (already logged)
        log_values: Ordinates (already logged)
        window: Optional ``(start, stop)`` index range to fit; defaults to all points
        min_points: Minimum number of points the window must contain

    Returns:
        ScalingFit with slope, intercept and coefficient of determination

    Raises:
        LabError: ``insufficient_scales`` if the window is too short
    """
    x_all = np.asarray(log_scales, dtype=float)
    y_all = np.asarray(log_values, dtype=float)
    if x_all.shape != y_all.shape:
        raise LabError("dimension", "log_scales and log_values differ in length")

    start, stop = window if window is not None else (0, x_all.size)
    x = x_all[start:stop]
    y = y_all[start:stop]
    if x.size < min_points:
        raise LabError("insufficient_scales",
                       f"need at least {min_points} points to fit, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise LabError("degenerate_input", "non-finite values in log-log fit")

    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    ss_res = float(np.sum(residual ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot > 0.0:
        r_squared = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    else:
        r_squared = 1.0 if ss_res <= 1e-24 else 0.0

    logger.debug(f"Fitted slope {slope:.4f} over {x.size} points (r^2={r_squared:.4f})")
    return ScalingFit(
        log_scales=tuple(float(v) for v in x_all),
        log_values=tuple(float(v) for v in y_all),
        slope=float(slope),
        intercept=float(intercept),
        r_squared=float(r_squared),
        scale_window=(int(start), int(stop)),
    )
