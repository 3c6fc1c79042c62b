"""Linear semigroup e^{At}: exact and stepped propagation, decay curves, rate fits."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from ._linalg import DefectiveOperatorWarning, Exponential, spectral_norm
from .spectral import DiscreteWaveOperator, WaveState, apply_A, tail_indices

EIG_CAP = 4096
NORM_KINDS = ("state_x", "operator", "x_sigma")
MODELS = ("polynomial", "stretched_exp", "exponential")


@dataclass(frozen=True)
class DecayCurve:
    """Norm samples h(t_i). ``argmax_block`` holds the dominating transverse index
    per sample when the curve was computed block by block."""

    times: np.ndarray
    values: np.ndarray
    norm_kind: str = "operator"
    sigma_source: float = 0.0
    sigma_target: float = 0.0
    n_cutoff: int = 0
    argmax_block: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("times and values must be 1D arrays of equal length")
        if np.any(t < 0) or np.any(np.diff(t) <= 0):
            raise ValueError("times must be nonnegative and strictly increasing")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("values must be finite and nonnegative")
        if self.norm_kind not in NORM_KINDS:
            raise ValueError(f"norm_kind must be one of {NORM_KINDS}")


@dataclass(frozen=True)
class FitResult:
    """Fitted model. ``rate`` is the exponent a of C t^-a, the rate a of
    C exp(-a t^q) with ``root_order`` q, or the rate of C exp(-r t)."""

    model: str
    rate: float
    prefactor: float
    fit_window: tuple[float, float]
    residual: float
    root_order: float | None = None
    n_points: int = 0

    def predict(self, t):
        t = np.asarray(t, dtype=float)
        if self.model == "polynomial":
            return self.prefactor * t ** (-self.rate)
        if self.model == "exponential":
            return self.prefactor * np.exp(-self.rate * t)
        return self.prefactor * np.exp(-self.rate * t ** self.root_order)


# ---------------------------------------------------------------- propagation

def exponential_kernel(op: DiscreteWaveOperator, cap: int = EIG_CAP) -> Exponential:
    """Cached eigendecomposition of the modal X-orthonormal matrix of ``op``."""
    if op.dim > cap:
        raise ValueError(f"operator dimension {op.dim} exceeds the eigendecomposition cap "
                         f"{cap}; use propagate_stepped")
    if "exp" not in op._cache:
        op._cache["exp"] = Exponential(op.matrix())
    return op._cache["exp"]


def propagate_exact(op: DiscreteWaveOperator, state: WaveState, t: float,
                    cap: int = EIG_CAP) -> WaveState:
    """e^{At} U through the eigendecomposition (scaling and squaring if defective)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return state
    kernel = exponential_kernel(op, cap)
    return op.from_coords(kernel.apply(op.to_coords(state), t))


def cfl_limit(op: DiscreteWaveOperator) -> float:
    h = min(op.grid.spacing)
    return 0.5 * h / np.sqrt(1 + op.alpha * h * h)


def check_dt(op: DiscreteWaveOperator, dt: float):
    limit = cfl_limit(op)
    if not 0 < dt <= limit * (1 + 1e-12):
        raise ValueError(f"time step {dt:.6g} violates the CFL bound; admissible dt <= {limit:.6g}")
    # explicit damping term: keep dt * max(gamma) inside the RK4 stability interval
    gmax = float(np.max(op.gamma)) if op.gamma.size else 0.0
    if dt * gmax > 2.5:
        raise ValueError(f"time step {dt:.6g} too large for damping max {gmax:.4g}; "
                         f"admissible dt <= {2.5 / gmax:.6g}")


def rk4_step(rhs, y, dt):
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * dt * k1)
    k3 = rhs(y + 0.5 * dt * k2)
    k4 = rhs(y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def step_schedule(t_final: float, sample_times=None):
    """Sorted sample times including 0 and t_final."""
    if t_final < 0:
        raise ValueError("t_final must be nonnegative")
    if sample_times is None:
        sample_times = [0.0, t_final]
    ts = np.unique(np.concatenate([[0.0], np.asarray(sample_times, float), [t_final]]))
    if ts[0] < 0 or ts[-1] > t_final:
        raise ValueError("sample times must lie in [0, t_final]")
    return ts


def propagate_stepped(op: DiscreteWaveOperator, state: WaveState, dt: float, t_final: float,
                      sample_times=None) -> tuple[np.ndarray, list[WaveState]]:
    """Classical RK4 on (u, v) in modal space; returns (times, states) at the samples."""
    check_dt(op, dt)
    ts = step_schedule(t_final, sample_times)
    shape = op.grid.shape

    def rhs(y):
        s = apply_A(op, WaveState.from_modal(op.grid, y[0], y[1]))
        return np.stack([s.u.modal, s.v.modal])

    y = np.stack([state.u.modal, state.v.modal]).astype(complex)
    out = [WaveState.from_modal(op.grid, y[0].copy(), y[1].copy())]
    t = 0.0
    for target in ts[1:]:
        n = int(np.ceil((target - t) / dt - 1e-9))
        h = (target - t) / n
        for _ in range(n):
            y = rk4_step(rhs, y, h)
        t = target
        out.append(WaveState.from_modal(op.grid, y[0].reshape(shape).copy(), y[1].reshape(shape).copy()))
    return ts, out


def xnorm(op: DiscreteWaveOperator, state: WaveState) -> float:
    return float(np.linalg.norm(op.to_coords(state)))


# -------------------------------------------------------------- decay curves

def _shifted_inverse(M, c):
    n = len(M)
    ev = np.linalg.eigvals(M)
    if np.min(np.abs(ev - c)) < 1e-10:
        raise ValueError(f"shift c={c} lies within 1e-10 of an eigenvalue of A")
    return np.linalg.inv(M - c * np.eye(n))


def _operator_curve_dense(M, times, c, cap=EIG_CAP):
    if len(M) > cap:
        raise ValueError(f"operator dimension {len(M)} exceeds the eigendecomposition cap {cap}")
    R = _shifted_inverse(M, c)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DefectiveOperatorWarning)
        kernel = Exponential(M)
    if kernel.fallback:
        return np.array([spectral_norm(sla.expm(M * t) @ R) for t in times]), True
    W = kernel.Vinv @ R
    vals = [spectral_norm((kernel.V * np.exp(kernel.w * t)) @ W) for t in times]
    return np.array(vals), False


def operator_decay_curve(op: DiscreteWaveOperator, times, c: float = 1.0,
                         blocks: bool = False, k2_max: int | None = None) -> DecayCurve:
    """||e^{At}(A-c)^{-1}|| in the X operator norm at each time.

    With ``blocks`` (damping depending on x1 only) the norm is the maximum over
    transverse blocks |k2| <= k2_max and the maximizing k2 is recorded.
    """
    times = np.asarray(times, dtype=float)
    if not blocks:
        vals, fb = _operator_curve_dense(op.real_matrix(), times, c)
        return DecayCurve(times, vals, "operator", meta={"shift": c, "fallback": fb})
    dec = op.block_decomposition()
    ks = dec.distinct_k2(k2_max)
    table = np.empty((len(ks), len(times)))
    fallbacks = []
    for i, k2 in enumerate(ks):
        table[i], fb = _operator_curve_dense(dec.block(k2).real_matrix(), times, c)
        if fb:
            fallbacks.append(int(k2))
    arg = np.argmax(table, axis=0)
    meta = {"shift": c, "k2_max": int(ks[-1]), "fallback_blocks": fallbacks, "per_block": table}
    return DecayCurve(times, table[arg, np.arange(len(times))], "operator",
                      argmax_block=ks[arg], meta=meta)


def _projected_curve_dense(M_modal, w, keep, times, s_src, s_tgt):
    if not np.any(keep):
        return np.zeros(len(times))
    Mq = M_modal[np.ix_(keep, keep)]
    wq = np.concatenate([w, w])[keep]
    left, right = wq ** (s_tgt / 2), wq ** (-s_src / 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DefectiveOperatorWarning)
        kernel = Exponential(Mq)
    vals = []
    for t in times:
        E = sla.expm(Mq * t) if kernel.fallback else kernel.matrix(t)
        vals.append(spectral_norm(left[:, None] * E * right[None, :]))
    return np.array(vals)


def projected_decay_curve(op: DiscreteWaveOperator, n: int, times, sigma_source: float,
                          sigma_target: float, blocks: bool = False) -> DecayCurve:
    """Norm of e^{Q_n A Q_n t} from X^sigma_source into X^sigma_target on the tail Q_n X."""
    if sigma_target > sigma_source:
        raise ValueError("sigma_target must not exceed sigma_source")
    grid = op.grid
    if not 0 <= n <= grid.size:
        raise ValueError(f"cutoff {n} outside [0, {grid.size}]")
    times = np.asarray(times, dtype=float)
    w = (op.laplacian_multipliers + op.alpha).ravel()
    common = dict(norm_kind="x_sigma", sigma_source=sigma_source, sigma_target=sigma_target, n_cutoff=n)
    if not blocks:
        keep = np.zeros(op.dim, bool)
        keep[tail_indices(grid, n)] = True
        vals = _projected_curve_dense(op.matrix(), w, keep, times, sigma_source, sigma_target)
        return DecayCurve(times, vals, **common)
    dec = op.block_decomposition()
    ranks = grid.mode_ranks
    best = np.zeros(len(times))
    arg = np.zeros(len(times), int)
    for k2 in dec.distinct_k2():
        # the blocks for k2 and -k2 coincide but their tails may differ
        cols = np.flatnonzero(np.abs(dec.k2_values) == k2)
        blk = dec.block(k2)
        wb = (blk.laplacian_multipliers + blk.alpha).ravel()
        for col in cols:
            kept = ranks[:, col] >= n
            keep = np.concatenate([kept, kept])
            vals = _projected_curve_dense(blk.matrix(), wb, keep, times, sigma_source, sigma_target)
            better = vals > best
            best = np.where(better, vals, best)
            arg = np.where(better, k2, arg)
    return DecayCurve(times, best, argmax_block=arg, **common)


# -------------------------------------------------------------------- fitting

def _window_mask(curve: DecayCurve, window):
    t = curve.times
    if window is None:
        window = (t[0], t[-1])
    lo, hi = window
    if lo > hi:
        raise ValueError("empty fit window")
    mask = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    if mask.sum() < 8:
        raise ValueError(f"fit window {window} holds {mask.sum()} samples; at least 8 needed")
    if np.any(curve.values[mask] <= 0):
        raise ValueError("zero or negative values in fit window")
    return mask


def _linfit(x, y):
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return coef, float(np.sqrt(np.mean(res**2)))


def fit_decay(curve: DecayCurve, model_kind: str = "polynomial", window=None) -> FitResult:
    """Least squares on log h against log t, t, or t^q."""
    if model_kind not in MODELS:
        raise ValueError(f"model_kind must be one of {MODELS}")
    mask = _window_mask(curve, window)
    t, y = curve.times[mask], np.log(curve.values[mask])
    win = (float(t[0]), float(t[-1]))
    if model_kind == "polynomial":
        if t[0] <= 0:
            raise ValueError("polynomial fits need t > 0 in the window")
        (b, a), res = _linfit(np.log(t), y)
        return FitResult("polynomial", -a, float(np.exp(b)), win, res, n_points=len(t))
    if model_kind == "exponential":
        (b, a), res = _linfit(t, y)
        return FitResult("exponential", -a, float(np.exp(b)), win, res, n_points=len(t))

    def misfit(beta):
        return _linfit(t ** (1 / beta), y)[1]

    grid = [1.0, 1.5, 2.0, 2.5, 3.0]
    scores = [misfit(b) for b in grid]
    i = int(np.argmin(scores))
    beta = grid[i]
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    if scores[i] > 1e-12 and hi > lo:
        opt = minimize_scalar(misfit, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
        if opt.fun < scores[i]:
            beta = float(opt.x)
    (b, a), res = _linfit(t ** (1 / beta), y)
    return FitResult("stretched_exp", -a, float(np.exp(b)), win, res, root_order=1 / beta,
                     n_points=len(t))


def select_model(curve: DecayCurve, window=None) -> tuple[str, dict[str, FitResult]]:
    """Fit every model on the window; return the one with the smallest residual.

    The stretched exponential contains the exponential (root order 1), so it is
    only preferred when its residual is smaller by more than a relative 1e-9.
    """
    fits = {m: fit_decay(curve, m, window) for m in MODELS}
    best = min(("polynomial", "exponential"), key=lambda m: fits[m].residual)
    if fits["stretched_exp"].residual < fits[best].residual * (1 - 1e-9):
        best = "stretched_exp"
    return best, fits


def preasymptotic_window(curve: DecayCurve, t_lo: float | None = None, factor: float = 2.0,
                         floor: float = 0.01, min_points: int = 8,
                         edge_fraction: float = 1.0) -> tuple[float, float]:
    """Window [t_lo, t_hi] on which the curve follows a power law.

    For block curves ``t_lo`` defaults to the first time the maximizing block is
    no longer k2 = 0, and samples where the maximizer has reached
    ``edge_fraction * k2_max`` (the truncation edge) are excluded. Starting from
    ``min_points`` samples, the window grows while each new sample stays within
    ``factor * max(residual, floor)`` of the power law fitted so far.
    """
    t, v = curve.times, curve.values
    start = 0
    stop = len(t)
    if curve.argmax_block is not None:
        arg = curve.argmax_block
        kmax = curve.meta.get("k2_max", int(arg.max()))
        inside = np.flatnonzero(arg > 0)
        if t_lo is None and len(inside):
            start = int(inside[0])
        edge = np.flatnonzero((arg >= edge_fraction * kmax) & (np.arange(len(t)) >= start))
        if len(edge):
            stop = int(edge[0])
    if t_lo is not None:
        start = int(np.searchsorted(t, t_lo * (1 - 1e-12)))
    if t[start] <= 0:
        start += 1
    if stop - start < min_points:
        raise ValueError("fewer than the minimum number of samples before the truncation edge")
    end = start + min_points
    while end < stop:
        (b, a), res = _linfit(np.log(t[start:end]), np.log(v[start:end]))
        miss = abs(np.log(v[end]) - (b + a * np.log(t[end])))
        if miss > factor * max(res, floor):
            break
        end += 1
    return float(t[start]), float(t[end - 1])


# ----------------------------------------------------------------------- I/O

def write_curve_csv(path, curves):
    """Write one or more curves with columns t, value, norm_kind, sigma_source, sigma_target, n_cutoff."""
    if isinstance(curves, DecayCurve):
        curves = [curves]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "value", "norm_kind", "sigma_source", "sigma_target", "n_cutoff"])
        for c in curves:
            for t, v in zip(c.times, c.values):
                w.writerow([repr(float(t)), repr(float(v)), c.norm_kind, c.sigma_source,
                            c.sigma_target, c.n_cutoff])
