"""
The orthogonal group O(n) for n in {1, 2, 3}.

Haar sampling, the embedded-subgroup measures used by the sharpness
experiments, the projection families S_g(x, y) = x - g(y) and
pi_t(x, y) = x - t y, the orthonormal plane basis attached to S_g, and
the ball-concentration audit for measures on O(n).
"""

import math
import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from core.errors import LabError
from utils.seeding import sample_rng

logger = logging.getLogger(__name__)

SUPPORTED_DIMS = (1, 2, 3)
ORTHOGONALITY_TOLERANCE = 1e-12
# Haar batches are drawn in blocks with their own counter-derived generators
SAMPLING_BLOCK = 4096


def _check_dim(n: int):
    if n not in SUPPORTED_DIMS:
        raise LabError("unsupported_dimension", f"O({n}) is not supported; use one of {SUPPORTED_DIMS}")


@dataclass(frozen=True, eq=False)
class Rotation:
    """An element of O(n) stored as an orthogonal matrix (reflections included)."""
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        if mat.ndim == 0:
            mat = mat.reshape(1, 1)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise LabError("dimension", f"rotation must be a square matrix, got shape {mat.shape}")
        residual = np.max(np.abs(mat.T @ mat - np.eye(mat.shape[0])))
        if residual > ORTHOGONALITY_TOLERANCE:
            raise LabError("not_orthogonal", f"g^T g deviates from I by {residual:.2e}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    def inverse(self) -> "Rotation":
        return Rotation(self.matrix.T)

    def apply(self, v: Sequence[float]) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)

    def to_row_major(self) -> List[float]:
        return [float(v) for v in self.matrix.ravel()]


@dataclass(frozen=True, eq=False)
class RotationMeasure:
    """
    Weighted cloud of group elements standing in for a measure theta on O(n).

    ``alpha`` is the claimed Frostman exponent of theta with respect to the
    operator-norm metric, ``beta`` the concentration exponent derived from it.
    """
    matrices: np.ndarray
    weights: np.ndarray
    alpha: float
    label: str = "custom"

    def __post_init__(self):
        mats = np.array(self.matrices, dtype=float)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise LabError("dimension", f"expected a (K, n, n) stack, got shape {mats.shape}")
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if weights.size != mats.shape[0]:
            raise LabError("dimension", f"{mats.shape[0]} samples but {weights.size} weights")
        if np.any(weights < 0):
            raise LabError("negative_weight", "rotation weights must be nonnegative")
        n = mats.shape[1]
        beta = self.alpha - (n - 1) * (n - 2) / 2.0
        if beta > n - 1 + 1e-12:
            raise LabError("bad_config", f"concentration exponent {beta:g} exceeds n - 1 = {n - 1} on O({n})")
        mats.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return int(self.matrices.shape[1])

    @property
    def sample_count(self) -> int:
        return int(self.matrices.shape[0])

    @property
    def beta(self) -> float:
        n = self.dim
        return float(self.alpha - (n - 1) * (n - 2) / 2.0)

    @property
    def samples(self) -> Tuple[Rotation, ...]:
        return tuple(Rotation(m) for m in self.matrices)

    @property
    def total_mass(self) -> float:
        return float(math.fsum(self.weights))

    def to_table(self) -> np.ndarray:
        """Rows of n^2 row-major matrix entries followed by the weight."""
        flat = self.matrices.reshape(self.sample_count, -1)
        return np.column_stack([flat, self.weights])


@dataclass(frozen=True, eq=False)
class PlaneBasis:
    """Orthonormal frame of R^{2n} adapted to S_g: n image directions and n kernel directions."""
    g: Rotation
    vectors_u: np.ndarray
    vectors_kernel: np.ndarray

    def gram(self) -> np.ndarray:
        frame = np.vstack([self.vectors_u, self.vectors_kernel])
        return frame @ frame.T


@dataclass(frozen=True)
class AuditRow:
    radius: float
    measured: float
    bound: float
    stderr: float = 0.0

    @property
    def ratio(self) -> float:
        return self.measured / self.bound if self.bound > 0 else math.inf


def haar_batch(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw ``count`` Haar-distributed elements of O(n) as a (count, n, n) array.

    n = 1 picks +-1; n = 2 composes a uniform rotation with a reflection of
    probability 1/2; n = 3 orthogonalises a Gaussian matrix and fixes the
    column signs by the signs of R's diagonal, which makes the law exactly Haar.
    """
    _check_dim(n)
    if n == 1:
        return rng.choice([-1.0, 1.0], size=count).reshape(count, 1, 1)
    if n == 2:
        angles = rng.uniform(0.0, 2.0 * np.pi, size=count)
        flips = np.where(rng.random(count) < 0.5, -1.0, 1.0)
        c, s = np.cos(angles), np.sin(angles)
        mats = np.empty((count, 2, 2))
        mats[:, 0, 0] = c
        mats[:, 1, 0] = s
        mats[:, 0, 1] = -s * flips
        mats[:, 1, 1] = c * flips
        return mats
    gaussian = rng.standard_normal((count, n, n))
    q, r = np.linalg.qr(gaussian)
    signs = np.sign(np.diagonal(r, axis1=1, axis2=2))
    signs[signs == 0] = 1.0
    return q * signs[:, None, :]


def haar_sample(n: int, rng: np.random.Generator) -> Rotation:
    """A single Haar-distributed element of O(n)."""
    return Rotation(haar_batch(n, 1, rng)[0])


def _blocked_haar(n: int, count: int, seed: int) -> np.ndarray:
    blocks = []
    for block, start in enumerate(range(0, count, SAMPLING_BLOCK)):
        size = min(SAMPLING_BLOCK, count - start)
        blocks.append(haar_batch(n, size, sample_rng(seed, block)))
    return np.concatenate(blocks, axis=0)


def haar_measure(n: int, count: int, seed: int = 0) -> RotationMeasure:
    """Equal-weight Haar sample of O(n); alpha = n(n-1)/2, so beta = n - 1."""
    _check_dim(n)
    mats = _blocked_haar(n, count, seed)
    return RotationMeasure(mats, np.full(count, 1.0 / count), n * (n - 1) / 2.0, "haar")


def subgroup_measure(n: int, count: int, seed: int = 0) -> RotationMeasure:
    """
    Haar sample of O(n-1) embedded in O(n) as (x, t) -> (h(x), t).

    The subgroup has dimension (n-1)(n-2)/2, so its beta is 0.
    """
    _check_subgroup_dim(n)
    mats = _embed_subgroup(_blocked_haar(n - 1, count, seed))
    alpha = (n - 1) * (n - 2) / 2.0
    return RotationMeasure(mats, np.full(count, 1.0 / count), alpha, "subgroup")


def subgroup_sample(n: int, rng: np.random.Generator) -> Rotation:
    """A single Haar element of the embedded O(n-1)."""
    _check_subgroup_dim(n)
    return Rotation(_embed_subgroup(haar_batch(n - 1, 1, rng))[0])


def _check_subgroup_dim(n: int):
    _check_dim(n)
    if n == 1:
        raise LabError("unsupported_dimension", "O(0) has no embedded subgroup measure")


def _embed_subgroup(inner: np.ndarray) -> np.ndarray:
    count, m, _ = inner.shape
    mats = np.zeros((count, m + 1, m + 1))
    mats[:, :m, :m] = inner
    mats[:, m, m] = 1.0
    return mats


def _vector(v: Sequence[float], n: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.size != n:
        raise LabError("dimension", f"{name} has dimension {arr.size}, expected {n}")
    return arr


def apply_S(g: Rotation, x: Sequence[float], y: Sequence[float]) -> np.ndarray:
    """S_g(x, y) = x - g(y)."""
    return _vector(x, g.dim, "x") - g.matrix @ _vector(y, g.dim, "y")


def apply_pi(t: float, x: Sequence[float], y: Sequence[float]) -> np.ndarray:
    """pi_t(x, y) = x - t y."""
    x_arr = np.asarray(x, dtype=float).reshape(-1)
    return x_arr - float(t) * _vector(y, x_arr.size, "y")


def s_map(g: Rotation) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorised S_g acting on an (N, 2n) atom array."""
    n = g.dim
    mat_t = g.matrix.T

    def project(points: np.ndarray) -> np.ndarray:
        if points.shape[1] != 2 * n:
            raise LabError("map_dimension", f"S_g for O({n}) needs points in R^{2 * n}")
        return points[:, :n] - points[:, n:] @ mat_t
    return project


def pi_map(t: float) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorised pi_t acting on an (N, 2n) atom array."""
    def project(points: np.ndarray) -> np.ndarray:
        if points.shape[1] % 2:
            raise LabError("map_dimension", "pi_t needs points in an even-dimensional space")
        n = points.shape[1] // 2
        return points[:, :n] - float(t) * points[:, n:]
    return project


def plane_basis(g: Rotation) -> PlaneBasis:
    """
    Frame u_i = (e_i, -g^{-1} e_i)/sqrt(2), k_i = (e_i, g^{-1} e_i)/sqrt(2).

    (1/sqrt 2) S_g maps u_i to e_i and annihilates every k_i.
    """
    n = g.dim
    identity = np.eye(n)
    # row i of g equals (g^{-1} e_i)^T for orthogonal g
    vectors_u = np.hstack([identity, -g.matrix]) / math.sqrt(2.0)
    vectors_kernel = np.hstack([identity, g.matrix]) / math.sqrt(2.0)
    return PlaneBasis(g, vectors_u, vectors_kernel)


def rotation_distance(g: Rotation, h: Rotation) -> float:
    """Operator-norm distance on O(n)."""
    return float(np.linalg.norm(g.matrix - h.matrix, 2))


def concentration_audit(theta: RotationMeasure, x: Sequence[float], z: Sequence[float],
                        radii: Sequence[float]) -> List[AuditRow]:
    """
    Compare theta({g : |x - g(z)| < r}) with min((r/|z|)^beta, (r/|x|)^beta).

    Raises:
        LabError: ``degenerate_input`` if x or z is the zero vector
    """
    n = theta.dim
    x_arr = _vector(x, n, "x")
    z_arr = _vector(z, n, "z")
    norm_x = float(np.linalg.norm(x_arr))
    norm_z = float(np.linalg.norm(z_arr))
    if norm_x == 0.0 or norm_z == 0.0:
        raise LabError("degenerate_input", "concentration audit needs nonzero x and z")

    distances = np.linalg.norm(x_arr[None, :] - theta.matrices @ z_arr, axis=1)
    weights = theta.weights
    effective = weights.sum() ** 2 / max(float(np.sum(weights ** 2)), np.finfo(float).tiny)
    beta = theta.beta

    rows = []
    for r in np.asarray(radii, dtype=float).reshape(-1):
        if not r > 0:
            raise LabError("bad_radius", "audit radii must be positive")
        measured = float(math.fsum(weights[distances < r]))
        bound = min((r / norm_z) ** beta, (r / norm_x) ** beta)
        p = measured / theta.total_mass if theta.total_mass > 0 else 0.0
        stderr = theta.total_mass * math.sqrt(max(p * (1.0 - p), 0.0) / effective)
        rows.append(AuditRow(float(r), measured, float(bound), stderr))
    return rows


def haar_concentration_exact(n: int, x: Sequence[float], z: Sequence[float], r: float) -> float:
    """
    Exact Haar probability of |x - g(z)| < r.

    g(z) is uniform on the sphere of radius |z|: two points for n = 1, an
    arc fraction for n = 2 and a cap fraction for n = 3.
    """
    _check_dim(n)
    x_arr = _vector(x, n, "x")
    z_arr = _vector(z, n, "z")
    if n == 1:
        return 0.5 * float(abs(x_arr[0] - z_arr[0]) < r) + 0.5 * float(abs(x_arr[0] + z_arr[0]) < r)
    if n == 2:
        return circle_concentration_exact(x_arr, z_arr, r)
    return sphere_concentration_exact(x_arr, z_arr, r)


def _cosine_at(x: np.ndarray, z: np.ndarray, r: float) -> float:
    a = float(np.linalg.norm(x))
    b = float(np.linalg.norm(z))
    if a == 0.0 or b == 0.0:
        raise LabError("degenerate_input", "exact concentration needs nonzero x and z")
    return float(np.clip((a * a + b * b - r * r) / (2.0 * a * b), -1.0, 1.0))


def circle_concentration_exact(x: Sequence[float], z: Sequence[float], r: float) -> float:
    """Arc fraction of the circle of radius |z| inside B(x, r): Haar measure on O(2)."""
    return math.acos(_cosine_at(_vector(x, 2, "x"), _vector(z, 2, "z"), r)) / math.pi


def sphere_concentration_exact(x: Sequence[float], z: Sequence[float], r: float) -> float:
    """Cap fraction of the sphere of radius |z| inside B(x, r): Haar measure on O(3)."""
    return (1.0 - _cosine_at(_vector(x, 3, "x"), _vector(z, 3, "z"), r)) / 2.0
