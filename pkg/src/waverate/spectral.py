"""Fourier collocation on periodic grids and the damped wave operator.

Fields are stored either as physical samples on a uniform grid or as Fourier
series coefficients ``c_k`` with ``u(x) = sum_k c_k exp(i k.x 2pi/L)``. With
this convention a constant field 1 has ``c_0 = 1`` and Parseval reads
``||u||_{L^2}^2 = |Omega| * sum_k |c_k|^2``.

The linear operator

    A = [[0, Id], [Delta - alpha, -gamma(x)]]

acts on states ``U = (u, v)``. Norms of ``A``-related operators are taken in
the energy space ``X = H^1 x L^2`` with ``||U||_X^2 = int |grad u|^2 +
alpha |u|^2 + |v|^2``. :meth:`DiscreteWaveOperator.matrix` returns ``A`` in
coordinates where that norm is Euclidean.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on a circle (1D) or a rectangular torus (2D)."""

    lengths: tuple[float, ...]
    shape: tuple[int, ...]

    def __post_init__(self):
        lengths = tuple(float(x) for x in self.lengths)
        shape = tuple(int(n) for n in self.shape)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "shape", shape)
        if len(lengths) != len(shape) or len(shape) not in (1, 2):
            raise ValueError("grid must be 1D or 2D with one length per axis")
        if any(not np.isfinite(x) or x <= 0 for x in lengths):
            raise ValueError("circumferences must be strictly positive")
        for n in shape:
            if n < 8 or n & (n - 1):
                raise ValueError(f"points per axis must be a power of two >= 8, got {n}")

    @classmethod
    def circle(cls, length: float = 2 * np.pi, n: int = 64) -> "Grid":
        return cls((length,), (n,))

    @classmethod
    def torus(cls, l1: float = 2 * np.pi, l2: float = 2 * np.pi,
              n1: int = 32, n2: int = 32) -> "Grid":
        return cls((l1, l2), (n1, n2))

    @property
    def kind(self) -> str:
        return "circle" if len(self.shape) == 1 else "torus"

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.shape))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def axis_points(self, axis: int) -> np.ndarray:
        """Signed fundamental-cell coordinates in [-L/2, L/2) along one axis."""
        L, n = self.lengths[axis], self.shape[axis]
        x = np.arange(n) * (L / n)
        return np.where(x >= L / 2, x - L, x)

    def mesh(self) -> tuple[np.ndarray, ...]:
        return np.meshgrid(*(self.axis_points(a) for a in range(self.ndim)), indexing="ij")

    def integer_wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Integer frequency vectors k on the full FFT layout, one array per axis."""
        ks = [np.fft.fftfreq(n, 1.0 / n).round().astype(int) for n in self.shape]
        return tuple(np.meshgrid(*ks, indexing="ij"))

    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        return tuple(2 * np.pi * k / L for k, L in zip(self.integer_wavenumbers(), self.lengths))

    @cached_property
    def laplacian_multipliers(self) -> np.ndarray:
        """Eigenvalues |2 pi k / L|^2 of -Delta in FFT layout."""
        return sum(w**2 for w in self.wavenumbers())

    @cached_property
    def mode_ranks(self) -> np.ndarray:
        """Rank of each mode when sorted by eigenvalue, ties broken lexicographically on k."""
        lam = self.laplacian_multipliers.ravel()
        scale = max(lam.max(), 1.0)
        keys = [k.ravel() for k in reversed(self.integer_wavenumbers())]
        order = np.lexsort(keys + [np.round(lam / scale, 10)])
        ranks = np.empty(self.size, dtype=int)
        ranks[order] = np.arange(self.size)
        return ranks.reshape(self.shape)

    def _dft_matrix(self) -> np.ndarray:
        """Matrix P with (P c)[x] = sum_k c_k exp(i k x): modal -> physical."""
        mats = []
        for L, n in zip(self.lengths, self.shape):
            x = np.arange(n) * (L / n)
            k = np.fft.fftfreq(n, 1.0 / n) * (2 * np.pi / L)
            mats.append(np.exp(1j * np.outer(x, k)))
        P = mats[0]
        for m in mats[1:]:
            P = np.kron(P, m)
        return P

    def multiplication_matrix(self, g: np.ndarray) -> np.ndarray:
        """Modal-space matrix of pointwise multiplication by the grid function ``g``."""
        P = self._dft_matrix()
        return (P.conj().T * np.asarray(g).ravel()) @ P / self.size


def to_modal(samples: np.ndarray, grid: Grid) -> np.ndarray:
    samples = np.asarray(samples)
    if samples.shape != grid.shape:
        raise ValueError(f"field shape {samples.shape} does not match grid {grid.shape}")
    return np.fft.fftn(samples, norm="forward")


def to_physical(coeffs: np.ndarray, grid: Grid, real: bool | None = None) -> np.ndarray:
    coeffs = np.asarray(coeffs)
    if coeffs.shape != grid.shape:
        raise ValueError(f"coefficient shape {coeffs.shape} does not match grid {grid.shape}")
    out = np.fft.ifftn(coeffs, norm="forward")
    if real is None:
        real = np.abs(out.imag).max(initial=0.0) <= 1e-12 * max(np.abs(out).max(initial=0.0), 1e-300)
    return out.real.copy() if real else out


class SpectralField:
    """A field on a grid, viewable as physical samples or Fourier coefficients.

    Exactly one representation is given at construction; the other is computed
    on first access and cached.
    """

    __slots__ = ("grid", "_physical", "_modal")

    def __init__(self, grid: Grid, physical=None, modal=None):
        if (physical is None) == (modal is None):
            raise ValueError("give exactly one of physical or modal")
        self.grid = grid
        self._physical = None if physical is None else np.asarray(physical)
        self._modal = None if modal is None else np.asarray(modal, dtype=complex)
        arr = self._physical if self._physical is not None else self._modal
        if arr.shape != grid.shape:
            raise ValueError(f"field shape {arr.shape} does not match grid {grid.shape}")

    @classmethod
    def from_function(cls, grid: Grid, func) -> "SpectralField":
        return cls(grid, physical=func(*grid.mesh()))

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, modal=np.zeros(grid.shape, complex))

    @property
    def physical(self) -> np.ndarray:
        if self._physical is None:
            self._physical = to_physical(self._modal, self.grid)
        return self._physical

    @property
    def modal(self) -> np.ndarray:
        if self._modal is None:
            self._modal = to_modal(self._physical, self.grid)
        return self._modal

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, modal=self.modal + other.modal)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, modal=self.modal - other.modal)

    def __mul__(self, s) -> "SpectralField":
        return SpectralField(self.grid, modal=self.modal * s)

    __rmul__ = __mul__

    def __repr__(self):
        return f"SpectralField(grid={self.grid.shape})"


def transform(field: SpectralField, direction: str) -> SpectralField:
    """Return a field holding only the requested representation of ``field``."""
    if direction == "to_modal":
        return SpectralField(field.grid, modal=to_modal(field.physical, field.grid))
    if direction == "to_physical":
        return SpectralField(field.grid, physical=to_physical(field.modal, field.grid))
    raise ValueError(f"unknown direction {direction!r}")


def _check_same_grid(a: Grid, b: Grid):
    if a != b:
        raise ValueError("fields live on different grids")


@dataclass(frozen=True)
class WaveState:
    """Displacement ``u`` and velocity ``v = du/dt`` on a common grid."""

    u: SpectralField
    v: SpectralField

    def __post_init__(self):
        _check_same_grid(self.u.grid, self.v.grid)

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @classmethod
    def from_physical(cls, grid: Grid, u, v=None) -> "WaveState":
        v = np.zeros(grid.shape) if v is None else v
        return cls(SpectralField(grid, physical=u), SpectralField(grid, physical=v))

    @classmethod
    def from_modal(cls, grid: Grid, cu, cv=None) -> "WaveState":
        cv = np.zeros(grid.shape, complex) if cv is None else cv
        return cls(SpectralField(grid, modal=cu), SpectralField(grid, modal=cv))

    @classmethod
    def zeros(cls, grid: Grid) -> "WaveState":
        return cls.from_modal(grid, np.zeros(grid.shape, complex))

    def __add__(self, other: "WaveState") -> "WaveState":
        return WaveState(self.u + other.u, self.v + other.v)

    def __sub__(self, other: "WaveState") -> "WaveState":
        return WaveState(self.u - other.u, self.v - other.v)

    def __mul__(self, s) -> "WaveState":
        return WaveState(self.u * s, self.v * s)

    __rmul__ = __mul__


@dataclass(frozen=True)
class DampingProfile:
    """Nonnegative damping coefficient gamma(x).

    Use the constructors: :meth:`power_abs` (``|x1|^beta``), :meth:`constant`,
    :meth:`indicator_strip`, :meth:`samples`, :meth:`undamped`.
    """

    kind: str
    beta: float = 0.0
    value: float = 0.0
    floor: float = 0.0
    interval: tuple[float, float] = (0.0, 0.0)
    data: np.ndarray | None = None
    undamped_ok: bool = False

    @classmethod
    def power_abs(cls, beta: float) -> "DampingProfile":
        if not beta > 0:
            raise ValueError("beta must be positive")
        return cls("power_abs", beta=float(beta))

    @classmethod
    def constant(cls, c: float) -> "DampingProfile":
        if c < 0:
            raise ValueError("negative damping")
        if c == 0:
            raise ValueError("damping vanishes identically; use DampingProfile.undamped()")
        return cls("constant", value=float(c))

    @classmethod
    def undamped(cls) -> "DampingProfile":
        return cls("constant", value=0.0, undamped_ok=True)

    @classmethod
    def indicator_strip(cls, lo: float, hi: float, value: float = 1.0,
                        floor: float = 0.0) -> "DampingProfile":
        """``value`` where lo <= x1 < hi (fundamental-cell coordinate), ``floor`` elsewhere."""
        if value < 0 or floor < 0:
            raise ValueError("negative damping")
        return cls("indicator_strip", value=float(value), floor=float(floor),
                   interval=(float(lo), float(hi)))

    @classmethod
    def samples(cls, data, undamped: bool = False) -> "DampingProfile":
        data = np.array(data, dtype=float)
        data.setflags(write=False)
        return cls("samples", data=data, undamped_ok=undamped)

    @property
    def first_coordinate_only(self) -> bool:
        if self.kind != "samples":
            return True
        d = self.data
        return d.ndim == 1 or bool(np.all(d == d[:, :1]))

    def evaluate(self, x1, x2=None):
        """Profile value at signed fundamental-cell coordinates (not for ``samples``)."""
        x1 = np.asarray(x1, dtype=float)
        if self.kind == "power_abs":
            return np.abs(x1) ** self.beta
        if self.kind == "constant":
            return np.full_like(x1, self.value)
        if self.kind == "indicator_strip":
            lo, hi = self.interval
            return np.where((x1 >= lo) & (x1 < hi), self.value, self.floor)
        raise ValueError("sampled profiles have no closed form; use sample(grid)")

    def sample(self, grid: Grid) -> np.ndarray:
        if self.kind == "samples":
            d = self.data
            if d.shape == grid.shape:
                return np.array(d)
            if d.ndim == 1 and d.shape[0] == grid.shape[0]:
                return np.broadcast_to(d.reshape((-1,) + (1,) * (grid.ndim - 1)), grid.shape).copy()
            raise ValueError(f"damping samples of shape {d.shape} do not fit grid {grid.shape}")
        return np.asarray(self.evaluate(grid.mesh()[0]), dtype=float)


class DiscreteWaveOperator:
    """Pseudospectral realization of A = [[0, Id], [Delta - alpha - V, -gamma]].

    ``V`` is an optional nonnegative potential (``None`` for the plain damped
    wave operator). Matrices produced here are cached; treat instances as
    immutable.
    """

    def __init__(self, grid: Grid, alpha: float, damping: DampingProfile, potential=None):
        self.grid = grid
        self.alpha = float(alpha)
        self.damping = damping
        self.gamma = damping.sample(grid)
        self.potential = None if potential is None else np.asarray(potential, dtype=float)
        self._cache = {}

    @property
    def laplacian_multipliers(self) -> np.ndarray:
        return self.grid.laplacian_multipliers

    @property
    def xnorm_scaling(self) -> np.ndarray:
        """Per-mode factors sqrt(lambda_k + alpha)."""
        return np.sqrt(self.grid.laplacian_multipliers + self.alpha)

    @property
    def dim(self) -> int:
        return 2 * self.grid.size

    @property
    def is_undamped(self) -> bool:
        return not np.any(self.gamma)

    def with_potential(self, potential) -> "DiscreteWaveOperator":
        return DiscreteWaveOperator(self.grid, self.alpha, self.damping, potential)

    # X-orthonormal coordinates: z = sqrt|Omega| * (D c_u, c_v), D = sqrt(lambda + alpha)
    def to_coords(self, state: WaveState) -> np.ndarray:
        _check_same_grid(self.grid, state.grid)
        s = np.sqrt(self.grid.volume)
        return s * np.concatenate([(self.xnorm_scaling * state.u.modal).ravel(),
                                   state.v.modal.ravel()])

    def from_coords(self, z: np.ndarray) -> WaveState:
        n = self.grid.size
        s = np.sqrt(self.grid.volume)
        cu = (z[:n].reshape(self.grid.shape) / self.xnorm_scaling) / s
        cv = z[n:].reshape(self.grid.shape) / s
        return WaveState.from_modal(self.grid, cu, cv)

    def matrix(self) -> np.ndarray:
        """Dense matrix of A in X-orthonormal coordinates (2N x 2N, complex)."""
        if "matrix" not in self._cache:
            D = self.xnorm_scaling.ravel()
            n = self.grid.size
            M = np.zeros((2 * n, 2 * n), complex)
            M[:n, n:] = np.diag(D)
            M[n:, :n] = -np.diag(D)
            if not self.is_undamped:
                M[n:, n:] = -self.grid.multiplication_matrix(self.gamma)
            if self.potential is not None and np.any(self.potential):
                M[n:, :n] -= self.grid.multiplication_matrix(self.potential) / D
            self._cache["matrix"] = M
        return self._cache["matrix"]

    def _physical_multiplier(self, m: np.ndarray) -> np.ndarray:
        """Real matrix of the Fourier multiplier ``m`` acting on grid samples."""
        n = self.grid.size
        eye = np.eye(n).reshape((n,) + self.grid.shape)
        axes = tuple(range(1, self.grid.ndim + 1))
        out = np.fft.ifftn(m * np.fft.fftn(eye, axes=axes), axes=axes).real
        return out.reshape(n, n).T

    def real_matrix(self) -> np.ndarray:
        """A in real X-orthonormal grid coordinates, orthogonally similar to :meth:`matrix`.

        Coordinates are ``sqrt(h1 h2) * (D u, v)`` with ``D = (alpha - Delta)^(1/2)``
        applied to grid samples, so the eigenvalues and all norms agree with the
        modal form while LAPACK can work in real arithmetic.
        """
        if "real_matrix" not in self._cache:
            D = self.xnorm_scaling
            Dp = self._physical_multiplier(D)
            n = self.grid.size
            M = np.zeros((2 * n, 2 * n))
            M[:n, n:] = Dp
            M[n:, :n] = -Dp
            M[n:, n:] = -np.diag(self.gamma.ravel())
            if self.potential is not None and np.any(self.potential):
                M[n:, :n] -= self.potential.reshape(-1, 1) * self._physical_multiplier(1.0 / D)
            self._cache["real_matrix"] = M
        return self._cache["real_matrix"]

    def block_decomposition(self) -> "BlockDecomposition":
        if self.grid.ndim != 2:
            raise ValueError("block decomposition needs a 2D torus")
        sep = self.damping.first_coordinate_only
        if self.potential is not None:
            sep = sep and bool(np.all(self.potential == self.potential[:, :1]))
        if not sep:
            raise ValueError("blocks require damping depending on the first coordinate only")
        return BlockDecomposition(self)

    def __repr__(self):
        return (f"DiscreteWaveOperator(grid={self.grid.shape}, alpha={self.alpha}, "
                f"damping={self.damping.kind})")


class BlockDecomposition:
    """Split of a 2D operator with x1-only coefficients into 1D transverse-mode blocks.

    The block for transverse index k2 is the circle operator in x1 with mass
    term ``alpha + (2 pi k2 / L2)^2``. Blocks for k2 and -k2 coincide.
    """

    def __init__(self, op: DiscreteWaveOperator):
        self.parent = op
        n2 = op.grid.shape[1]
        self.k2_values = np.fft.fftfreq(n2, 1.0 / n2).round().astype(int)
        g = op.grid
        self.grid1d = Grid.circle(g.lengths[0], g.shape[0])
        if op.damping.kind == "samples":
            self._damping1d = DampingProfile.samples(op.gamma[:, 0], undamped=op.damping.undamped_ok)
        else:
            self._damping1d = op.damping
        self._potential1d = None if op.potential is None else op.potential[:, 0]

    def mass(self, k2: int) -> float:
        L2 = self.parent.grid.lengths[1]
        return self.parent.alpha + (2 * np.pi * k2 / L2) ** 2

    def block(self, k2: int) -> DiscreteWaveOperator:
        return DiscreteWaveOperator(self.grid1d, self.mass(k2), self._damping1d, self._potential1d)

    def distinct_k2(self, k2_max: int | None = None) -> np.ndarray:
        ks = np.unique(np.abs(self.k2_values))
        if k2_max is not None:
            ks = ks[ks <= k2_max]
        return ks

    def multiplicity(self, k2: int) -> int:
        return int(np.sum(np.abs(self.k2_values) == abs(k2)))


def make_operator(grid: Grid, alpha: float, damping: DampingProfile,
                  potential=None) -> DiscreteWaveOperator:
    """Validate inputs and build the discrete damped wave operator."""
    if not np.isfinite(alpha) or alpha <= 0:
        raise ValueError("alpha must be positive")
    gamma = damping.sample(grid)
    if np.any(gamma < 0) or not np.all(np.isfinite(gamma)):
        bad = np.unravel_index(np.argmin(gamma), gamma.shape)
        raise ValueError(f"negative damping: gamma={gamma[bad]:.3g} at grid index {bad}")
    if not np.any(gamma) and not damping.undamped_ok:
        raise ValueError("damping vanishes identically; use DampingProfile.undamped()")
    if potential is not None:
        potential = np.broadcast_to(np.asarray(potential, dtype=float), grid.shape).copy()
        if np.any(potential < 0):
            raise ValueError("negative potential sample")
    return DiscreteWaveOperator(grid, alpha, damping, potential)


def apply_A(op: DiscreteWaveOperator, state: WaveState) -> WaveState:
    """(u, v) -> (v, Delta u - alpha u - V u - gamma v), Laplacian in modal space."""
    _check_same_grid(op.grid, state.grid)
    cu, cv = state.u.modal, state.v.modal
    rhs = -(op.laplacian_multipliers + op.alpha) * cu
    if not op.is_undamped:
        rhs = rhs - to_modal(op.gamma * to_physical(cv, op.grid, real=False), op.grid)
    if op.potential is not None:
        rhs = rhs - to_modal(op.potential * to_physical(cu, op.grid, real=False), op.grid)
    return WaveState.from_modal(op.grid, cv, rhs)


def sobolev_norm(state: WaveState, sigma: float, op: DiscreteWaveOperator) -> float:
    """Norm in X^sigma = H^{1+sigma} x H^sigma, mode k weighted by (lambda_k + alpha)^sigma."""
    if not 0 <= sigma <= 1:
        raise ValueError("sigma must lie in [0, 1]")
    _check_same_grid(op.grid, state.grid)
    w = op.laplacian_multipliers + op.alpha
    total = np.sum(w ** (1 + sigma) * np.abs(state.u.modal) ** 2 + w**sigma * np.abs(state.v.modal) ** 2)
    return float(np.sqrt(op.grid.volume * total))


def project_tail(state: WaveState, n: int, side: str = "high") -> WaveState:
    """Keep modes of rank >= n (``high``) or < n (``low``) in the eigenvalue order."""
    grid = state.grid
    if not 0 <= n <= grid.size:
        raise ValueError(f"cutoff {n} outside [0, {grid.size}]")
    keep = grid.mode_ranks >= n
    if side == "low":
        keep = ~keep
    elif side != "high":
        raise ValueError(f"side must be 'high' or 'low', got {side!r}")
    return WaveState.from_modal(grid, np.where(keep, state.u.modal, 0), np.where(keep, state.v.modal, 0))


def tail_indices(grid: Grid, n: int) -> np.ndarray:
    """Indices (in flattened X coordinates) of the modes kept by the high projector Q_n."""
    if not 0 <= n <= grid.size:
        raise ValueError(f"cutoff {n} outside [0, {grid.size}]")
    idx = np.flatnonzero(grid.mode_ranks.ravel() >= n)
    return np.concatenate([idx, idx + grid.size])
