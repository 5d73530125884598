"""
Fourier analysis of discrete measures.

Transforms use the convention mu^(xi) = sum_j w_j exp(-2 pi i xi . y_j) and are
evaluated directly. On top of them sit the spherical, annulus, cone and
directional averages of |mu^|^2, and the Riesz energy on both sides of the
identity I_s(mu) = c(d, s) int |mu^(xi)|^2 |xi|^{s-d} dxi.
"""

import math
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.spatial.distance import cdist
from scipy.special import gamma, hyp1f1

from core.errors import LabError
from core.measure import (
    PAIR_CHUNK,
    DiscreteMeasure,
    MeasureLike,
    ProductMeasure,
    sphere_area,
    unit_ball_volume,
)
from core.rotations import RotationMeasure
from core.scaling import ScalingFit, fit_scaling
from utils.seeding import sample_rng

logger = logging.getLogger(__name__)

SPHERE_DIMS = (1, 2, 3)
MIN_SPHERE_NODES = {1: 2, 2: 64, 3: 512}
MAX_SPHERE_NODES = 200_000
PROFILE_KINDS = ("spherical", "annulus", "cone", "directional", "ball", "sigma_theta")

# Gaussian mollifier width as a fraction of the diameter, per ambient dimension
MOLLIFIER_DIVISOR = {1: 512, 2: 64, 3: 16}
TRUNCATION_THRESHOLD = 0.2
LOG_PANELS = 8
# hyp1f1 is replaced by its large-argument expansion beyond this point
HYP1F1_SWITCH = 50.0

DEFAULT_BATCH = 4096
DEFAULT_MAX_SAMPLES = 1 << 20


@dataclass(frozen=True)
class SpectralEstimate:
    """Monte Carlo (or quadrature, with zero stderr) estimate."""
    value: float
    stderr: float
    samples: int
    converged: bool = True

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr,
                "samples": self.samples, "converged": self.converged}


@dataclass(frozen=True)
class SpectralProfile:
    """Values of one spectral average at increasing radii R > 1."""
    radii: Tuple[float, ...]
    values: Tuple[float, ...]
    kind: str
    quadrature_nodes: Tuple[int, ...]
    stderr: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise LabError("unknown_kind", f"unknown profile kind '{self.kind}'")
        radii = tuple(float(r) for r in self.radii)
        values = tuple(float(v) for v in self.values)
        if len(radii) != len(values):
            raise LabError("dimension", f"{len(radii)} radii but {len(values)} values")
        if any(r <= 1.0 for r in radii):
            raise LabError("below_valid_range", "profile radii must exceed 1")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise LabError("unsorted_scales", "profile radii must be strictly increasing")
        if any(v < 0 or not math.isfinite(v) for v in values):
            raise LabError("degenerate_input", "profile values must be finite and nonnegative")
        stderr = tuple(float(e) for e in self.stderr) or tuple(0.0 for _ in radii)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "quadrature_nodes", tuple(int(q) for q in self.quadrature_nodes))
        object.__setattr__(self, "stderr", stderr)

    def fit(self, min_points: int = 4) -> ScalingFit:
        """Log-log regression of value against R."""
        values = np.asarray(self.values)
        if np.any(values <= 0):
            raise LabError("degenerate_input", "cannot fit a profile containing zeros")
        return fit_scaling(np.log(self.radii), np.log(values), min_points=min_points)

    def rows(self) -> List[Tuple[float, float, float, int]]:
        return list(zip(self.radii, self.values, self.stderr, self.quadrature_nodes))


@dataclass(frozen=True)
class SpatialEnergy:
    """Off-diagonal double sum sum_{i != j} w_i w_j |x_i - x_j|^{-s}."""
    s: float
    value: float
    clamped_pairs: int
    infinite: bool = False


@dataclass(frozen=True)
class EnergyReport:
    """Both sides of the Riesz energy identity for one mollified measure."""
    s: float
    spatial_value: float
    fourier_value: float
    constant_used: float
    relative_gap: float
    mollifier_width: float
    atomic_value: float
    tail_estimate: float
    xi_max: float
    radial_nodes: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


# Pointwise transforms

def _atomic_transform(mu: DiscreteMeasure, freqs: np.ndarray) -> np.ndarray:
    out = np.empty(freqs.shape[0], dtype=complex)
    chunk = max(1, PAIR_CHUNK // mu.atom_count)
    for start in range(0, freqs.shape[0], chunk):
        phase = freqs[start:start + chunk] @ mu.points.T
        phase -= np.round(phase)
        out[start:start + chunk] = np.exp(-2j * np.pi * phase) @ mu.weights
    return out


def fourier_transform(mu: MeasureLike, freqs: np.ndarray) -> np.ndarray:
    """
    Evaluate mu^ at every row of ``freqs``.

    Products are evaluated factor by factor, so a ProductMeasure never has
    to be materialised.

    Args:
        mu: Atomic or lazy product measure in R^d
        freqs: (M, d) array of frequencies

    Returns:
        Complex array of length M
    """
    freqs = np.atleast_2d(np.asarray(freqs, dtype=float))
    if freqs.shape[1] != mu.ambient_dim:
        raise LabError("dimension", f"frequencies live in R^{freqs.shape[1]}, measure in R^{mu.ambient_dim}")
    if isinstance(mu, ProductMeasure):
        out = np.ones(freqs.shape[0], dtype=complex)
        for factor, part in zip(mu.factors, mu.factor_slices()):
            out *= _atomic_transform(factor, freqs[:, part])
        return out
    return _atomic_transform(mu, freqs)


def fourier_at(mu: MeasureLike, xi: Sequence[float]) -> complex:
    """Single-frequency transform with compensated summation of the real and imaginary parts."""
    xi_arr = np.asarray(xi, dtype=float).reshape(-1)
    if xi_arr.size != mu.ambient_dim:
        raise LabError("dimension", f"frequency lives in R^{xi_arr.size}, measure in R^{mu.ambient_dim}")
    if isinstance(mu, ProductMeasure):
        value = complex(1.0, 0.0)
        for factor, part in zip(mu.factors, mu.factor_slices()):
            value *= fourier_at(factor, xi_arr[part])
        return value
    phase = mu.points @ xi_arr
    angle = 2.0 * np.pi * (phase - np.round(phase))
    return complex(math.fsum(mu.weights * np.cos(angle)), -math.fsum(mu.weights * np.sin(angle)))


def _power_spectrum(mu: MeasureLike, freqs: np.ndarray) -> np.ndarray:
    return np.abs(fourier_transform(mu, freqs)) ** 2


# Spheres

def _check_sphere_dim(d: int):
    if d not in SPHERE_DIMS:
        raise LabError("unsupported_dimension", f"spherical quadrature is available for d in {SPHERE_DIMS}, got {d}")


def sphere_nodes(d: int, count: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Quadrature nodes on S^{d-1} with weights summing to the sphere's area.

    d = 1 uses the two points +-1, d = 2 an equal-angle grid (exact for
    trigonometric polynomials of degree below ``count``), d = 3 a Fibonacci
    lattice with equal weights.

    Raises:
        LabError: ``insufficient_nodes`` below the per-dimension minimum
    """
    _check_sphere_dim(d)
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.ones(2)
    if count < MIN_SPHERE_NODES[d]:
        raise LabError("insufficient_nodes", f"S^{d - 1} needs at least {MIN_SPHERE_NODES[d]} nodes, got {count}")
    k = np.arange(count) + 0.5
    if d == 2:
        angles = 2.0 * np.pi * k / count
        nodes = np.column_stack([np.cos(angles), np.sin(angles)])
    else:
        z = 1.0 - 2.0 * k / count
        rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        phi = np.pi * (1.0 + math.sqrt(5.0)) * k
        nodes = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    return nodes, np.full(count, sphere_area(d) / count)


def default_node_count(d: int, r: float, diameter: float) -> int:
    """Nodes needed to resolve the angular oscillation of |mu^|^2 on the sphere of radius r."""
    if d == 1:
        return 2
    band = 2.0 * math.pi * r * max(diameter, 1e-12)
    if d == 2:
        return max(MIN_SPHERE_NODES[2], int(math.ceil(2.0 * band)) + 64)
    count = max(MIN_SPHERE_NODES[3], int(math.ceil(2.0 * band * band)))
    if count > MAX_SPHERE_NODES:
        logger.warning(f"Capping S^2 quadrature at {MAX_SPHERE_NODES} nodes (wanted {count}) at r={r:.3g}")
        count = MAX_SPHERE_NODES
    return count


def random_directions(rng: np.random.Generator, d: int, count: int) -> np.ndarray:
    """Uniform points on S^{d-1}."""
    if d == 1:
        return rng.choice([-1.0, 1.0], size=count).reshape(count, 1)
    gaussian = rng.standard_normal((count, d))
    return gaussian / np.linalg.norm(gaussian, axis=1, keepdims=True)


def _sphere_sum(mu: MeasureLike, rho: float, count: Optional[int] = None) -> Tuple[float, int]:
    d = mu.ambient_dim
    if count is None:
        count = default_node_count(d, rho, mu.diameter())
    nodes, weights = sphere_nodes(d, count)
    return float(weights @ _power_spectrum(mu, rho * nodes)), nodes.shape[0]


def spherical_average(mu: MeasureLike, r: float, nodes: Optional[int] = None) -> float:
    """
    sigma(mu)(r) = integral of |mu^(r v)|^2 over v in S^{d-1}, unnormalised sphere measure.

    Raises:
        LabError: ``below_valid_range`` for r <= 1, ``insufficient_nodes``
            for too coarse an explicit node count
    """
    _check_sphere_dim(mu.ambient_dim)
    if not r > 1.0:
        raise LabError("below_valid_range", f"spherical averages are estimated for r > 1, got {r}")
    return _sphere_sum(mu, r, nodes)[0]


def spherical_profile(mu: MeasureLike, radii: Sequence[float], nodes: Optional[int] = None) -> SpectralProfile:
    values, counts = [], []
    for r in radii:
        if not r > 1.0:
            raise LabError("below_valid_range", f"spherical averages are estimated for r > 1, got {r}")
        _check_sphere_dim(mu.ambient_dim)
        value, used = _sphere_sum(mu, float(r), nodes)
        values.append(value)
        counts.append(used)
    logger.debug(f"Spherical profile over {len(values)} radii, up to {max(counts)} nodes")
    return SpectralProfile(tuple(radii), tuple(values), "spherical", tuple(counts))


def profile_from_estimates(kind: str, radii: Sequence[float],
                           estimates: Sequence[SpectralEstimate]) -> SpectralProfile:
    return SpectralProfile(tuple(radii), tuple(e.value for e in estimates), kind,
                           tuple(e.samples for e in estimates), tuple(e.stderr for e in estimates))


# Monte Carlo plumbing

def _adaptive_mean(sampler: Callable[[np.random.Generator, int], np.ndarray], seed: int,
                   rel_tolerance: float, batch_size: int, max_samples: int, label: str) -> SpectralEstimate:
    total = 0.0
    total_sq = 0.0
    count = 0
    batch = 0
    mean = stderr = 0.0
    while count < max_samples:
        size = min(batch_size, max_samples - count)
        values = sampler(sample_rng(seed, batch), size)
        batch += 1
        total += float(values.sum())
        total_sq += float(np.dot(values, values))
        count += size
        mean = total / count
        variance = max(total_sq / count - mean * mean, 0.0) * count / max(count - 1, 1)
        stderr = math.sqrt(variance / count)
        if stderr <= rel_tolerance * abs(mean):
            return SpectralEstimate(mean, stderr, count, True)
    logger.warning(f"{label}: relative stderr {stderr / mean if mean else math.inf:.3f} "
                   f"above {rel_tolerance} after {count} samples")
    return SpectralEstimate(mean, stderr, count, False)


def annulus_average(mu: MeasureLike, r: float, width: float = 1.0, seed: int = 0,
                    rel_tolerance: float = 0.05, batch_size: int = DEFAULT_BATCH,
                    max_samples: int = DEFAULT_MAX_SAMPLES) -> SpectralEstimate:
    """
    r^{1-d} times the integral of |mu^|^2 over the annulus r - width < |x| < r + width.

    Points are drawn uniformly in the annulus; batches continue until the
    standard error is within ``rel_tolerance`` of the value.
    """
    if not r > 1.0 + width:
        raise LabError("below_valid_range", f"annulus average needs r > 1 + width, got r={r}, width={width}")
    d = mu.ambient_dim
    inner, outer = r - width, r + width
    volume = unit_ball_volume(d) * (outer ** d - inner ** d)

    def sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        radius = (inner ** d + rng.random(count) * (outer ** d - inner ** d)) ** (1.0 / d)
        return _power_spectrum(mu, radius[:, None] * random_directions(rng, d, count))

    estimate = _adaptive_mean(sampler, seed, rel_tolerance, batch_size, max_samples, "annulus average")
    scale = r ** (1 - d) * volume
    return SpectralEstimate(scale * estimate.value, scale * estimate.stderr,
                            estimate.samples, estimate.converged)


def ball_integral(mu: MeasureLike, R: float, nodes_per_panel: int = 8) -> float:
    """
    Integral of |mu^|^2 over the ball |y| <= R.

    Radial Gauss-Legendre panels of width about 1/diam(mu) times the
    spherical quadrature at each node.
    """
    if not R > 0:
        raise LabError("bad_radius", f"ball radius must be positive, got {R}")
    d = mu.ambient_dim
    _check_sphere_dim(d)
    diam = mu.diameter() or 1.0
    panels = max(1, int(math.ceil(R * diam)))
    edges = np.linspace(0.0, R, panels + 1)
    x, w = leggauss(nodes_per_panel)
    terms = []
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        for rho, weight in zip(0.5 * (a + b) + half * x, half * w):
            terms.append(weight * rho ** (d - 1) * _sphere_sum(mu, float(rho))[0])
    return float(math.fsum(terms))


# Riesz energies

def _check_exponent(s: float, d: int):
    if not 0.0 < s < d:
        raise LabError("bad_exponent", f"energy exponent must lie in (0, {d}), got {s}")


def riesz_constant(d: int, s: float) -> float:
    """c(d, s) = pi^{s - d/2} Gamma((d - s)/2) / Gamma(s/2), the transform constant of |x|^{-s}."""
    _check_exponent(s, d)
    return float(math.pi ** (s - d / 2.0) * gamma((d - s) / 2.0) / gamma(s / 2.0))


def _as_atomic(mu: MeasureLike) -> DiscreteMeasure:
    return mu.materialize() if isinstance(mu, ProductMeasure) else mu


def riesz_energy_spatial(mu: MeasureLike, s: float) -> SpatialEnergy:
    """
    Off-diagonal s-energy of an atomic measure.

    Pairs closer than the resolution floor are clamped to the floor and
    counted; coincident distinct atoms with no floor make the energy infinite.
    """
    mu = _as_atomic(mu)
    _check_exponent(s, mu.ambient_dim)
    floor = mu.resolution
    points, weights = mu.points, mu.weights
    chunk = max(1, PAIR_CHUNK // mu.atom_count)
    partial = []
    clamped = 0
    for start in range(0, mu.atom_count, chunk):
        dist = cdist(points[start:start + chunk], points)
        rows = dist.shape[0]
        dist[np.arange(rows), start + np.arange(rows)] = np.inf
        if floor > 0:
            close = dist < floor
            clamped += int(np.count_nonzero(close))
            dist[close] = floor
        elif np.any(dist == 0.0):
            logger.debug("Coincident atoms without a resolution floor: energy is infinite")
            return SpatialEnergy(s, math.inf, 0, True)
        partial.append(float(weights[start:start + rows] @ (dist ** -s @ weights)))
    return SpatialEnergy(s, math.fsum(partial), clamped // 2)


def mollified_energy_spatial(mu: MeasureLike, s: float, width: float) -> float:
    """
    Exact s-energy of mu convolved with a centred Gaussian of standard deviation ``width``.

    The difference of two independent smeared atoms is Gaussian with
    covariance 2 width^2 I, and its mean of |z|^{-s} is a confluent
    hypergeometric function; the diagonal contributes a finite term.
    """
    mu = _as_atomic(mu)
    d = mu.ambient_dim
    _check_exponent(s, d)
    if not width > 0:
        raise LabError("bad_radius", f"mollifier width must be positive, got {width}")
    tau = math.sqrt(2.0) * width
    a, b = s / 2.0, d / 2.0
    prefactor = tau ** -s * 2.0 ** (-a) * gamma((d - s) / 2.0) / gamma(b)
    points, weights = mu.points, mu.weights
    chunk = max(1, PAIR_CHUNK // mu.atom_count)
    partial = []
    for start in range(0, mu.atom_count, chunk):
        dist = cdist(points[start:start + chunk], points)
        x = dist * dist / (2.0 * tau * tau)
        kernel = np.empty_like(dist)
        near = x <= HYP1F1_SWITCH
        kernel[near] = prefactor * hyp1f1(a, b, -x[near])
        far_x = x[~near]
        kernel[~near] = dist[~near] ** -s * (
            1.0 + a * (a - b + 1.0) / far_x
            + a * (a + 1.0) * (a - b + 1.0) * (a - b + 2.0) / (2.0 * far_x * far_x))
        partial.append(float(weights[start:start + dist.shape[0]] @ (kernel @ weights)))
    return math.fsum(partial)


def default_mollifier_width(mu: MeasureLike) -> float:
    divisor = MOLLIFIER_DIVISOR.get(mu.ambient_dim, 16)
    return max(mu.resolution, (mu.diameter() or 1.0) / divisor)


def riesz_energy_fourier(mu: MeasureLike, s: float, width: Optional[float] = None,
                         xi_max: Optional[float] = None, radial_nodes: int = 8,
                         strict: bool = True,
                         truncation_threshold: float = TRUNCATION_THRESHOLD) -> EnergyReport:
    """
    Fourier side of the s-energy of the Gaussian-mollified measure, checked against the spatial side.

    The radial integral c(d,s) int rho^{s-1} S(rho) exp(-4 pi^2 width^2 rho^2) drho,
    with S the spherical sum of |mu^|^2, is split into an analytic piece on
    [0, 0.01/diam], geometric panels up to 1/diam and panels of width 1/diam
    up to ``xi_max`` (default 1/width). Panel edges do not depend on
    ``xi_max``, so the value is nondecreasing in it. The tail beyond
    ``xi_max`` is extrapolated from the decay slope over [xi_max/2, xi_max].

    Args:
        mu: Measure in R^d, d <= 3
        s: Exponent in (0, d)
        width: Mollifier standard deviation; defaults to ``default_mollifier_width``
        xi_max: Radial cut-off, rounded up to a panel edge
        radial_nodes: Gauss-Legendre nodes per panel
        strict: Raise instead of returning a truncation-dominated report
        truncation_threshold: Tail fraction above which the result is truncation dominated

    Returns:
        EnergyReport

    Raises:
        LabError: ``truncation_dominated`` (with the report in ``detail``)
            when the tail estimate exceeds ``truncation_threshold`` of the value
    """
    d = mu.ambient_dim
    _check_sphere_dim(d)
    constant = riesz_constant(d, s)
    diam = mu.diameter() or 1.0
    sigma = float(width) if width else default_mollifier_width(mu)
    xi_low = 1.0 / diam
    xi_top = max(xi_low, float(xi_max) if xi_max else 1.0 / sigma)
    panels = max(1, int(math.ceil((xi_top - xi_low) * diam - 1e-9)))
    xi_top = xi_low + panels / diam

    x, w = leggauss(radial_nodes)
    xi_min = 0.01 / diam
    log_edges = np.geomspace(xi_min, xi_low, LOG_PANELS + 1)
    lin_edges = xi_low + np.arange(panels + 1) / diam
    edges = np.concatenate([log_edges, lin_edges[1:]])
    half = 0.5 * np.diff(edges)
    rhos = (0.5 * (edges[:-1] + edges[1:])[:, None] + half[:, None] * x[None, :]).ravel()
    quad_weights = (half[:, None] * w[None, :]).ravel()

    if d == 1:
        spectrum = _power_spectrum(mu, np.concatenate([rhos, -rhos])[:, None])
        sphere = spectrum[:rhos.size] + spectrum[rhos.size:]
    else:
        sphere = np.array([_sphere_sum(mu, float(rho))[0] for rho in rhos])
    integrand = rhos ** (s - 1.0) * sphere * np.exp(-4.0 * np.pi ** 2 * sigma ** 2 * rhos ** 2)

    head = sphere_area(d) * mu.total_mass ** 2 * xi_min ** s / s
    integral = head + math.fsum(quad_weights * integrand)
    fourier_value = constant * integral

    upper = (rhos >= xi_top / 2.0) & (integrand > 0)
    tail = 0.0
    if np.count_nonzero(upper) >= 2:
        slope = float(np.polyfit(np.log(rhos[upper]), np.log(integrand[upper]), 1)[0])
        last_panel = integrand[-radial_nodes:].mean()
        tail = last_panel * xi_top / (-slope - 1.0) if slope < -1.0 else math.inf
    tail_estimate = constant * tail

    atomic = _as_atomic(mu)
    spatial_value = mollified_energy_spatial(atomic, s, sigma)
    report = EnergyReport(
        s=float(s),
        spatial_value=spatial_value,
        fourier_value=fourier_value,
        constant_used=constant,
        relative_gap=abs(spatial_value - fourier_value) / spatial_value,
        mollifier_width=sigma,
        atomic_value=riesz_energy_spatial(atomic, s).value,
        tail_estimate=tail_estimate,
        xi_max=xi_top,
        radial_nodes=int(rhos.size),
    )
    logger.debug(f"Energy s={s}: spatial {spatial_value:.6g}, fourier {fourier_value:.6g}, "
                 f"gap {report.relative_gap:.2e}, tail {tail_estimate:.2e}, {rhos.size} radii")
    if strict and not tail_estimate <= truncation_threshold * fourier_value:
        raise LabError("truncation_dominated",
                       f"tail estimate {tail_estimate:.3g} exceeds {truncation_threshold:.0%} "
                       f"of the truncated value {fourier_value:.3g}", detail=report)
    return report


# Decay integrals of the projection theorems

def _check_half_dim(mu: MeasureLike) -> int:
    d = mu.ambient_dim
    n = d // 2
    if d % 2 or n not in (2, 3):
        raise LabError("unsupported_dimension", f"decay integrals need a measure on R^(2n), n in (2, 3); got R^{d}")
    return n


def directional_decay(mu: MeasureLike, theta: RotationMeasure, R: float, seed: int = 0,
                      rel_tolerance: float = 0.1, batch_size: int = DEFAULT_BATCH,
                      max_samples: int = DEFAULT_MAX_SAMPLES) -> SpectralEstimate:
    """
    Raw integral of |mu^(xi, -g^{-1} xi)|^2 over R <= |xi| <= 2R and g ~ theta.

    Monte Carlo in (xi, g): xi uniform in the shell, g drawn by weight; the
    value is theta's mass times the shell volume times the sample mean.
    """
    n = _check_half_dim(mu)
    if theta.dim != n:
        raise LabError("dimension", f"rotation measure on O({theta.dim}) for a measure on R^{2 * n}")
    if not R > 1.0:
        raise LabError("below_valid_range", f"directional decay is estimated for R > 1, got {R}")
    volume = unit_ball_volume(n) * ((2.0 * R) ** n - R ** n)
    probabilities = theta.weights / theta.weights.sum()
    transposed = theta.matrices.transpose(0, 2, 1)

    def sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        radius = (R ** n + rng.random(count) * ((2.0 * R) ** n - R ** n)) ** (1.0 / n)
        xi = radius[:, None] * random_directions(rng, n, count)
        picks = rng.choice(theta.sample_count, size=count, p=probabilities)
        eta = -np.einsum("kij,kj->ki", transposed[picks], xi)
        return _power_spectrum(mu, np.hstack([xi, eta]))

    estimate = _adaptive_mean(sampler, seed, rel_tolerance, batch_size, max_samples, "directional decay")
    scale = theta.total_mass * volume
    return SpectralEstimate(scale * estimate.value, scale * estimate.stderr,
                            estimate.samples, estimate.converged)


def sigma_theta_estimate(nu: MeasureLike, theta: RotationMeasure, xi: Sequence[float]) -> SpectralEstimate:
    """Weighted mean of |nu^(g^{-1} xi)|^2 over theta's samples, with its standard error."""
    n = theta.dim
    xi_arr = np.asarray(xi, dtype=float).reshape(-1)
    if nu.ambient_dim != n or xi_arr.size != n:
        raise LabError("dimension", f"sigma_theta on O({n}) needs a measure and frequency in R^{n}")
    if not np.linalg.norm(xi_arr) > 1.0:
        raise LabError("below_valid_range", "sigma_theta is estimated for |xi| > 1")
    freqs = np.einsum("kji,j->ki", theta.matrices, xi_arr)
    values = _power_spectrum(nu, freqs)
    weights = theta.weights / theta.weights.sum()
    mean = float(weights @ values)
    variance = float(weights @ (values - mean) ** 2)
    effective = 1.0 / float(np.sum(weights ** 2))
    return SpectralEstimate(mean, math.sqrt(variance / effective), theta.sample_count)


def sigma_theta(nu: MeasureLike, theta: RotationMeasure, xi: Sequence[float]) -> float:
    """sigma_theta(nu)(xi); for Haar theta this equals sigma(nu)(|xi|) / area(S^{n-1})."""
    return sigma_theta_estimate(nu, theta, xi).value


def cone_measure_total(n: int) -> float:
    """gamma(Gamma) = area(S^{n-1}) (2^n - 1) / n."""
    return sphere_area(n) * (2 ** n - 1) / n


def cone_average(mu: MeasureLike, R: float, nodes: Optional[int] = None, seed: int = 0,
                 rel_tolerance: float = 0.05, batch_size: int = DEFAULT_BATCH,
                 max_samples: int = DEFAULT_MAX_SAMPLES) -> SpectralEstimate:
    """
    Integral of |mu^(R x, R y)|^2 over the cone 1 <= |x| = |y| <= 2.

    The cone measure is t^{n-1} dt dsigma(u) dsigma(v) / area(S^{n-1}) for
    (x, y) = (t u, t v), so that directional_decay(mu, Haar, R) equals
    R^n cone_average(mu, R). A lazy product that splits at n is integrated
    by quadrature as the product of the two spherical sums; anything else
    goes through Monte Carlo.
    """
    n = _check_half_dim(mu)
    if not R > 1.0:
        raise LabError("below_valid_range", f"cone average is estimated for R > 1, got {R}")
    area = sphere_area(n)
    halves = mu.split_at(n) if isinstance(mu, ProductMeasure) else None

    if halves is not None:
        first, second = halves
        reach = max(first.diameter(), second.diameter(), 1e-12)
        panels = max(4, int(math.ceil(R * reach)))
        edges = np.linspace(1.0, 2.0, panels + 1)
        x, w = leggauss(8)
        terms = []
        evaluations = 0
        for a, b in zip(edges[:-1], edges[1:]):
            half = 0.5 * (b - a)
            for t, weight in zip(0.5 * (a + b) + half * x, half * w):
                left, used_left = _sphere_sum(first, R * t, nodes)
                right, used_right = _sphere_sum(second, R * t, nodes)
                evaluations += used_left + used_right
                terms.append(weight * t ** (n - 1) * left * right)
        logger.debug(f"Cone average at R={R}: separable quadrature with {panels} panels")
        return SpectralEstimate(math.fsum(terms) / area, 0.0, evaluations)

    total = cone_measure_total(n)

    def sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        t = (1.0 + rng.random(count) * (2 ** n - 1)) ** (1.0 / n)
        u = random_directions(rng, n, count)
        v = random_directions(rng, n, count)
        return _power_spectrum(mu, (R * t)[:, None] * np.hstack([u, v]))

    estimate = _adaptive_mean(sampler, seed, rel_tolerance, batch_size, max_samples, "cone average")
    return SpectralEstimate(total * estimate.value, total * estimate.stderr,
                            estimate.samples, estimate.converged)
