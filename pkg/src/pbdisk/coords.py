"""Grids, coordinate maps and spectral/finite-difference machinery.

Three coordinate frames are used throughout:

* polar ``(theta, r)`` on the punctured unit disk, ``r in (0, 1]``,
* log-radial ``(theta, s)`` with ``s = -ln r in [0, S_max]`` (the wall is
  ``s = 0``, the origin is pushed to ``s = +infty``),
* boundary-layer ``(theta, Y)`` with ``Y = (r - 1)/eps in [Y_min, 0]``.

theta is always a uniform periodic grid, so fields are stored as real
arrays of shape ``(n_theta, n_radial)`` and all theta-operations go
through the real FFT.  Radial/log/layer derivatives use second-order
finite differences on (possibly graded) node sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import sparse


# --------------------------------------------------------------------------
# grids
# --------------------------------------------------------------------------

def _check_theta_count(n_theta: int) -> None:
    if n_theta < 8 or n_theta % 2 != 0:
        raise ValueError(f"n_theta must be even and >= 8, got {n_theta}")


def theta_nodes(n_theta: int) -> np.ndarray:
    """Uniform angles in [0, 2*pi), endpoint excluded."""
    _check_theta_count(n_theta)
    return 2.0 * np.pi * np.arange(n_theta) / n_theta


@dataclass(frozen=True)
class PolarGrid:
    """Tensor grid on the punctured disk; radii strictly increasing in (0, 1]."""

    n_theta: int
    radii: np.ndarray
    includes_boundary: bool = True

    def __post_init__(self):
        _check_theta_count(self.n_theta)
        r = np.asarray(self.radii, dtype=float)
        if r.ndim != 1 or r.size < 4:
            raise ValueError("radii must be a 1-d array with at least 4 nodes")
        if np.any(np.diff(r) <= 0):
            raise ValueError("radii must be strictly increasing")
        if r[0] <= 0.0 or r[-1] > 1.0:
            raise ValueError("radii must lie in (0, 1]")
        if self.includes_boundary and r[-1] != 1.0:
            raise ValueError("includes_boundary set but last radius != 1")
        object.__setattr__(self, "radii", r)

    @property
    def theta(self) -> np.ndarray:
        return theta_nodes(self.n_theta)

    @property
    def n_r(self) -> int:
        return self.radii.size

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_theta, self.n_r)

    def to_log(self) -> "LogGrid":
        """Same nodes viewed in the log coordinate (wall-first ordering)."""
        s = -np.log(self.radii[::-1])
        s[0] = 0.0  # exact wall, kill -log(1) roundoff
        return LogGrid(self.n_theta, s, float(s[-1]))


@dataclass(frozen=True)
class LogGrid:
    """Half-strip grid in (theta, s); s = 0 is the wall r = 1."""

    n_theta: int
    s_values: np.ndarray
    S_max: float

    def __post_init__(self):
        _check_theta_count(self.n_theta)
        s = np.asarray(self.s_values, dtype=float)
        if s[0] != 0.0:
            raise ValueError("s_values must start at the wall s = 0")
        if np.any(np.diff(s) <= 0):
            raise ValueError("s_values must be strictly increasing")
        if self.S_max <= 0 or abs(s[-1] - self.S_max) > 1e-12:
            raise ValueError("S_max must match the last s node")
        object.__setattr__(self, "s_values", s)

    @property
    def theta(self) -> np.ndarray:
        return theta_nodes(self.n_theta)

    @property
    def n_s(self) -> int:
        return self.s_values.size

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_theta, self.n_s)

    @property
    def radii(self) -> np.ndarray:
        """Radii in wall-first order (decreasing from 1)."""
        return np.exp(-self.s_values)

    def to_polar(self) -> PolarGrid:
        r = np.exp(-self.s_values[::-1])
        r[-1] = 1.0
        return PolarGrid(self.n_theta, r, includes_boundary=True)


@dataclass(frozen=True)
class LayerGrid:
    """Boundary-layer strip grid; Y runs from Y_min < 0 up to the wall Y = 0."""

    n_theta: int
    Y_values: np.ndarray
    Y_min: float

    def __post_init__(self):
        _check_theta_count(self.n_theta)
        Y = np.asarray(self.Y_values, dtype=float)
        if np.any(np.diff(Y) <= 0):
            raise ValueError("Y_values must be strictly increasing")
        if Y[-1] != 0.0:
            raise ValueError("last Y node must be the wall Y = 0")
        if abs(Y[0] - self.Y_min) > 1e-12 or self.Y_min >= 0:
            raise ValueError("Y_min must be negative and match the first node")
        object.__setattr__(self, "Y_values", Y)

    @property
    def theta(self) -> np.ndarray:
        return theta_nodes(self.n_theta)

    @property
    def n_Y(self) -> int:
        return self.Y_values.size

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_theta, self.n_Y)


def uniform_layer_grid(n_theta: int, Y_min: float = -25.0, n_Y: int = 1201) -> LayerGrid:
    Y = np.linspace(Y_min, 0.0, n_Y)
    Y[-1] = 0.0
    return LayerGrid(n_theta, Y, float(Y_min))


def graded_s_nodes(S_max: float = 8.0, epsilon: float = 0.1,
                   wall_fraction: float = 16.0, growth: float = 1.08,
                   h_coarse: float = 0.03) -> np.ndarray:
    """Log-radial nodes refined near the wall.

    Spacing starts at ``epsilon / wall_fraction`` (resolving the layer,
    whose width is O(eps) in s) and grows geometrically until it reaches
    ``h_coarse``; the last step is adjusted to land exactly on S_max.
    """
    if epsilon <= 0 or S_max <= 0:
        raise ValueError("epsilon and S_max must be positive")
    h = min(epsilon / wall_fraction, h_coarse)
    nodes = [0.0]
    s = 0.0
    while True:
        s_next = s + h
        if s_next >= S_max - 0.5 * h:
            break
        nodes.append(s_next)
        s = s_next
        h = min(h * growth, h_coarse)
    nodes.append(S_max)
    return np.asarray(nodes)


def graded_polar_grid(n_theta: int, S_max: float = 8.0, epsilon: float = 0.1,
                      **kwargs) -> PolarGrid:
    """Disk grid whose radii are exp(-s) over graded log-radial nodes."""
    s = graded_s_nodes(S_max=S_max, epsilon=epsilon, **kwargs)
    r = np.exp(-s[::-1])
    r[-1] = 1.0
    return PolarGrid(n_theta, r, includes_boundary=True)


# --------------------------------------------------------------------------
# coordinate maps
# --------------------------------------------------------------------------

def transform_coordinates(theta, radius):
    """Map (theta, r) -> (theta, s) with s = -ln r; r must lie in (0, 1]."""
    r = np.asarray(radius, dtype=float)
    if np.any(r <= 0.0) or np.any(r > 1.0):
        raise ValueError("radius must lie in (0, 1]")
    return theta, -np.log(r)


def inverse_transform_coordinates(theta, s):
    """Map (theta, s) -> (theta, r) with r = exp(-s); s must be >= 0."""
    sv = np.asarray(s, dtype=float)
    if np.any(sv < 0.0):
        raise ValueError("s must be nonnegative")
    return theta, np.exp(-sv)


def layer_coordinate(radius, epsilon: float):
    """Map r -> Y = (r - 1)/eps."""
    return (np.asarray(radius, dtype=float) - 1.0) / epsilon


# --------------------------------------------------------------------------
# Fourier representation in theta
# --------------------------------------------------------------------------

@dataclass
class SpectralField:
    """Real field stored as conjugate-symmetric theta-spectrum.

    ``modes[k, j]`` is the complex coefficient of ``exp(i k theta)`` at
    radial node j, for k = 0 .. n_theta//2 (rfft convention, only k >= 0
    retained).  ``synthesize`` reproduces grid samples.
    """

    modes: np.ndarray
    grid: object
    reality: bool = True

    @property
    def n_modes(self) -> int:
        return self.modes.shape[0]


def fourier_analyze(samples: np.ndarray, grid) -> SpectralField:
    """Forward transform of real samples (n_theta, n_radial) in theta."""
    f = np.asarray(samples, dtype=float)
    if f.shape[0] != grid.n_theta:
        raise ValueError(
            f"theta dimension {f.shape[0]} does not match grid n_theta {grid.n_theta}")
    modes = np.fft.rfft(f, axis=0) / grid.n_theta
    return SpectralField(modes=modes, grid=grid)


def fourier_synthesize(spec: SpectralField) -> np.ndarray:
    """Inverse of :func:`fourier_analyze` back to grid samples."""
    n_theta = spec.grid.n_theta
    return np.fft.irfft(spec.modes * n_theta, n=n_theta, axis=0)


def parseval_mismatch(samples: np.ndarray, spec: SpectralField) -> float:
    """Relative gap between the discrete L2 norm and the modal (Parseval) sum."""
    n_theta = spec.grid.n_theta
    direct = np.sum(np.asarray(samples) ** 2, axis=0) / n_theta
    w = np.full(spec.n_modes, 2.0)
    w[0] = 1.0
    if n_theta % 2 == 0:
        w[-1] = 1.0
    modal = np.einsum("k,kj->j", w, np.abs(spec.modes) ** 2)
    denom = max(float(np.max(direct)), 1e-300)
    return float(np.max(np.abs(direct - modal)) / denom)


def theta_wavenumbers(n_theta: int) -> np.ndarray:
    return np.arange(n_theta // 2 + 1, dtype=float)


def theta_derivative(samples: np.ndarray, order: int = 1) -> np.ndarray:
    """Spectral d^order/dtheta^order of real samples along axis 0."""
    f = np.asarray(samples, dtype=float)
    n_theta = f.shape[0]
    modes = np.fft.rfft(f, axis=0)
    k = theta_wavenumbers(n_theta)
    modes = modes * (1j * k[:, None]) ** order
    if order % 2 == 1 and n_theta % 2 == 0:
        modes[-1] = 0.0  # odd derivative of the unpaired Nyquist mode
    return np.fft.irfft(modes, n=n_theta, axis=0)


# --------------------------------------------------------------------------
# finite differences on nonuniform nodes
# --------------------------------------------------------------------------

def fd_weights(x0: float, x: np.ndarray, m: int) -> np.ndarray:
    """Fornberg weights for the m-th derivative at x0 from nodes x."""
    n = len(x)
    c = np.zeros((n, m + 1), dtype=np.result_type(np.asarray(x), float))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - x0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def fd_matrix(x: np.ndarray, order: int) -> sparse.csr_matrix:
    """Sparse derivative matrix on nodes x.

    First derivative: 3-point stencils (centered inside, one-sided at the
    ends).  Second derivative: 3-point inside, 4-point one-sided at the
    ends so the boundary rows stay second-order accurate.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        raise ValueError("need at least 4 nodes for derivative matrices")
    rows, cols, vals = [], [], []

    def put(i, idx):
        w = fd_weights(x[i], x[idx], order)
        rows.extend([i] * len(idx))
        cols.extend(idx)
        vals.extend(w)

    width = 3 if order == 1 else 4
    put(0, list(range(width)))
    for i in range(1, n - 1):
        put(i, [i - 1, i, i + 1])
    put(n - 1, list(range(n - width, n)))
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


@dataclass
class RadialOperators:
    """Cached first/second derivative matrices for one node set."""

    x: np.ndarray
    d1: sparse.csr_matrix = field(init=False)
    d2: sparse.csr_matrix = field(init=False)

    def __post_init__(self):
        self.d1 = fd_matrix(self.x, 1)
        self.d2 = fd_matrix(self.x, 2)


_OPERATOR_CACHE: dict[bytes, RadialOperators] = {}


def radial_operators(x: np.ndarray) -> RadialOperators:
    key = np.asarray(x, dtype=float).tobytes()
    ops = _OPERATOR_CACHE.get(key)
    if ops is None:
        ops = RadialOperators(np.asarray(x, dtype=float))
        _OPERATOR_CACHE[key] = ops
    return ops


def _radial_coordinate(grid, direction: str) -> np.ndarray:
    if isinstance(grid, PolarGrid) and direction == "r":
        return grid.radii
    if isinstance(grid, LogGrid) and direction == "s":
        return grid.s_values
    if isinstance(grid, LayerGrid) and direction in ("Y", "y"):
        return grid.Y_values
    raise ValueError(f"direction {direction!r} not available on {type(grid).__name__}")


def differentiate_field(samples: np.ndarray, grid, direction: str,
                        order: int = 1) -> np.ndarray:
    """Differentiate grid samples along theta (spectral) or the radial axis (FD).

    direction: 'theta' | 'r' (PolarGrid) | 's' (LogGrid) | 'Y' (LayerGrid).
    """
    f = np.asarray(samples, dtype=float)
    if f.shape != grid.shape:
        raise ValueError(f"field shape {f.shape} does not match grid {grid.shape}")
    if direction == "theta":
        return theta_derivative(f, order=order)
    x = _radial_coordinate(grid, direction)
    ops = radial_operators(x)
    mat = ops.d1 if order == 1 else ops.d2
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    return (mat @ f.T).T


# --------------------------------------------------------------------------
# quadrature / norms
# --------------------------------------------------------------------------

def trapezoid_weights(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w


def theta_mean(samples: np.ndarray) -> np.ndarray:
    """Mean over the periodic theta direction (exact for trig polynomials)."""
    return np.mean(np.asarray(samples), axis=0)


def integrate_theta(samples: np.ndarray) -> np.ndarray:
    return 2.0 * np.pi * theta_mean(samples)


def l2_norm(samples: np.ndarray, x: np.ndarray) -> float:
    """Discrete L2 norm over (theta, x) with dtheta x-trapezoid measure."""
    f = np.asarray(samples, dtype=float)
    w = trapezoid_weights(x)
    dtheta = 2.0 * np.pi / f.shape[0]
    return float(np.sqrt(dtheta * np.sum(w * np.sum(f * f, axis=0))))
