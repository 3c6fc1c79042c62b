"""Semilinear damped waves  u_tt + gamma u_t = Delta u - alpha u - f(u).

Odd-power nonlinearities are evaluated on a zero-padded grid so the products
are alias free. The integrator tracks the energy and the cumulative
dissipation on the time-step nodes, which makes the energy identity checkable
to quadrature accuracy.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .semigroup import (DecayCurve, FitResult, check_dt, cfl_limit, exponential_kernel,
                        fit_decay, preasymptotic_window, select_model, step_schedule)
from .spectral import (DampingProfile, DiscreteWaveOperator, Grid, SpectralField, WaveState,
                       make_operator, sobolev_norm, to_modal, to_physical)


@dataclass(frozen=True)
class Nonlinearity:
    """f(u) = c u^p with p odd >= 3 and c > 0, or f = 0."""

    kind: str = "zero"
    p: int = 3
    coefficient: float = 1.0

    def __post_init__(self):
        if self.kind not in ("odd_power", "zero"):
            raise ValueError("kind must be 'odd_power' or 'zero'")
        if self.kind == "odd_power":
            if int(self.p) != self.p or self.p < 3 or self.p % 2 == 0:
                raise ValueError("p must be an odd integer >= 3")
            if not self.coefficient > 0:
                raise ValueError("coefficient must be positive")

    @classmethod
    def odd_power(cls, p: int = 3, coefficient: float = 1.0) -> "Nonlinearity":
        return cls("odd_power", int(p), float(coefficient))

    @classmethod
    def zero(cls) -> "Nonlinearity":
        return cls("zero")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def f(self, u):
        return np.zeros_like(u) if self.is_zero else self.coefficient * u**self.p

    def derivative(self, u):
        return np.zeros_like(u) if self.is_zero else self.coefficient * self.p * u ** (self.p - 1)

    def potential(self, u):
        """V(u) with V' = f and V(0) = 0."""
        return np.zeros_like(u) if self.is_zero else self.coefficient * u ** (self.p + 1) / (self.p + 1)

    @property
    def growth_constant(self) -> float:
        """C in |f(u)| <= C (1 + |u|)^p."""
        return 0.0 if self.is_zero else self.coefficient * 2.0**self.p


# ------------------------------------------------------------ padded products

def _axis_pad(c, axis, m):
    n = c.shape[axis]
    h = n // 2
    shape = list(c.shape)
    shape[axis] = m
    out = np.zeros(shape, complex)
    src = np.moveaxis(c, axis, 0)
    dst = np.moveaxis(out, axis, 0)
    dst[:h] = src[:h]
    dst[m - h + 1:] = src[h + 1:]
    # split the Nyquist coefficient between +n/2 and -n/2 to keep real fields real
    dst[h] = 0.5 * src[h]
    dst[m - h] = 0.5 * src[h]
    return out


def _axis_truncate(C, axis, n):
    m = C.shape[axis]
    h = n // 2
    src = np.moveaxis(C, axis, 0)
    shape = list(C.shape)
    shape[axis] = n
    out = np.zeros(shape, complex)
    dst = np.moveaxis(out, axis, 0)
    dst[:h] = src[:h]
    dst[h + 1:] = src[m - h + 1:]
    dst[h] = src[h] + src[m - h]
    return out


def pad_modal(c, shape):
    for axis, m in enumerate(shape):
        c = _axis_pad(c, axis, m)
    return c


def truncate_modal(C, shape):
    for axis, n in enumerate(shape):
        C = _axis_truncate(C, axis, n)
    return C


def padded_size(n: int, degree: int) -> int:
    """Smallest even M >= n (degree + 1) / 2 + 1: products of ``degree`` band-limited
    factors are alias free on the resolved band."""
    m = math.ceil(n * (degree + 1) / 2) + 1
    return m + (m % 2)


def padded_physical(c, grid: Grid, degree: int):
    """Samples of the band-limited field on a grid fine enough for degree-``degree`` products."""
    shape = tuple(padded_size(n, degree) for n in grid.shape)
    return np.fft.ifftn(pad_modal(c, shape), norm="forward"), shape


def apply_nonlinearity(nl: Nonlinearity, u: SpectralField) -> SpectralField:
    """Dealiased f(u): evaluated on a zero-padded grid, then truncated to the original modes."""
    grid = u.grid
    if nl.is_zero:
        return SpectralField.zeros(grid)
    fine, shape = padded_physical(u.modal, grid, nl.p)
    if _is_hermitian(u.modal):
        fine = fine.real
    coeffs = truncate_modal(np.fft.fftn(nl.f(fine), norm="forward"), grid.shape)
    return SpectralField(grid, modal=coeffs)


def _is_hermitian(c):
    flipped = np.conj(np.roll(np.flip(c), 1, axis=tuple(range(c.ndim))))
    return np.allclose(c, flipped, atol=1e-14 * max(1.0, np.abs(c).max()))


def _grid_integral(values, shape, grid: Grid):
    return float(np.real(np.sum(values))) * grid.volume / int(np.prod(shape))


# ------------------------------------------------------------------- energies

def energy(op: DiscreteWaveOperator, nl: Nonlinearity, state: WaveState) -> float:
    """E = int 1/2 (|grad u|^2 + alpha u^2 + v^2) + V(u) (+ 1/2 q u^2 for a potential q)."""
    w = op.laplacian_multipliers + op.alpha
    cu, cv = state.u.modal, state.v.modal
    e = 0.5 * op.grid.volume * float(np.sum(w * np.abs(cu) ** 2 + np.abs(cv) ** 2))
    if op.potential is not None:
        fine, shape = padded_physical(cu, op.grid, 2)
        q, _ = padded_physical(to_modal(op.potential, op.grid), op.grid, 2)
        e += 0.5 * _grid_integral(q.real * np.abs(fine) ** 2, shape, op.grid)
    if not nl.is_zero:
        fine, shape = padded_physical(cu, op.grid, nl.p + 1)
        e += _grid_integral(nl.potential(fine.real), shape, op.grid)
    return e


def dissipation_rate(op: DiscreteWaveOperator, v_modal) -> float:
    """int gamma v^2 by the grid rule, consistent with the discrete damping term."""
    if op.is_undamped:
        return 0.0
    v = to_physical(v_modal, op.grid, real=True)
    return float(np.sum(op.gamma * v * v)) * op.grid.volume / op.grid.size


@dataclass(frozen=True)
class HigherEnergy:
    value: float
    norm_sq: float  # int |Delta u|^2 + alpha |grad u|^2 + |grad v|^2
    c2: float  # int |f(u)|^2
    lower_ok: bool
    upper_ok: bool
    resolved: bool
    tail_fraction: float


def higher_energy(op: DiscreteWaveOperator, nl: Nonlinearity, state: WaveState) -> HigherEnergy:
    """F(U) = 1/2 int (|Delta u|^2 + alpha |grad u|^2 + |grad v|^2) - int f(u) Delta u.

    Also records the comparison 1/4 Q - C2 <= F <= 3/4 Q + C2 with Q the quadratic
    part and C2 = int |f(u)|^2, and flags states whose upper half-band carries
    more than 1% of Q.
    """
    lam = op.laplacian_multipliers
    vol = op.grid.volume
    cu, cv = state.u.modal, state.v.modal
    dens = (lam**2 + op.alpha * lam) * np.abs(cu) ** 2 + lam * np.abs(cv) ** 2
    Q = vol * float(np.sum(dens))
    value = 0.5 * Q
    c2 = 0.0
    if not nl.is_zero:
        fu = apply_nonlinearity(nl, state.u).modal
        value -= vol * float(np.sum(np.real(np.conj(fu) * (-lam * cu))))
        fine, shape = padded_physical(cu, op.grid, 2 * nl.p)
        c2 = _grid_integral(np.abs(nl.f(fine.real)) ** 2, shape, op.grid)
    ks = op.grid.integer_wavenumbers()
    tail = np.zeros(op.grid.shape, bool)
    for k, n in zip(ks, op.grid.shape):
        tail |= np.abs(k) > n // 4
    frac = float(dens[tail].sum() / dens.sum()) if dens.sum() > 0 else 0.0
    resolved = frac < 0.01
    if not resolved:
        warnings.warn(f"upper half-band holds {frac:.1%} of the H^2 x H^1 mass; "
                      "higher energy is not resolved", RuntimeWarning, stacklevel=2)
    tol = 1e-12 * max(Q, 1.0)
    return HigherEnergy(value, Q, c2, value >= 0.25 * Q - c2 - tol, value <= 0.75 * Q + c2 + tol,
                        resolved, frac)


# ----------------------------------------------------------------- integrator

@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    op: DiscreteWaveOperator
    nl: Nonlinearity
    dt: float = 0.0

    def xnorms(self) -> np.ndarray:
        return np.array([np.linalg.norm(self.op.to_coords(s)) for s in self.states])

    def sigma_norms(self, sigma: float) -> np.ndarray:
        return np.array([sobolev_norm(s, sigma, self.op) for s in self.states])


@dataclass
class EnergyReport:
    times: np.ndarray
    E_values: np.ndarray
    dissipation_integral: np.ndarray

    @property
    def residual(self) -> np.ndarray:
        return self.E_values - self.E_values[0] + self.dissipation_integral


def _rhs_factory(op: DiscreteWaveOperator, nl: Nonlinearity):
    grid = op.grid
    w = op.laplacian_multipliers + op.alpha

    def rhs(y):
        cu, cv = y[0], y[1]
        acc = -w * cu
        if not op.is_undamped:
            acc = acc - to_modal(op.gamma * to_physical(cv, grid, real=False), grid)
        if op.potential is not None:
            acc = acc - to_modal(op.potential * to_physical(cu, grid, real=False), grid)
        if not nl.is_zero:
            fine, shape = padded_physical(cu, grid, nl.p)
            acc = acc - truncate_modal(np.fft.fftn(nl.f(fine.real), norm="forward"), grid.shape)
        return np.stack([cv, acc])

    return rhs


def integrate(op: DiscreteWaveOperator, nl: Nonlinearity, state0: WaveState, dt: float,
              t_final: float, sample_times=None, blowup: float = 1e6):
    """RK4 integration; returns (Trajectory, EnergyReport) at the sample times.

    The dissipation integral is carried as an extra ODE component and advanced
    with the same RK4 stages, so the energy identity holds to O(dt^4).
    """
    check_dt(op, dt)
    ts = step_schedule(t_final, sample_times)
    rhs = _rhs_factory(op, nl)
    y = np.stack([state0.u.modal, state0.v.modal]).astype(complex)
    norm0 = max(np.linalg.norm(op.to_coords(state0)), 1e-300)
    states = [state0]
    E = [energy(op, nl, state0)]
    diss = [0.0]
    acc = 0.0
    t = 0.0
    for target in ts[1:]:
        n = int(np.ceil((target - t) / dt - 1e-9))
        h = (target - t) / n
        for _ in range(n):
            k1 = rhs(y)
            y2 = y + 0.5 * h * k1
            k2 = rhs(y2)
            y3 = y + 0.5 * h * k2
            k3 = rhs(y3)
            y4 = y + h * k3
            k4 = rhs(y4)
            acc += h / 6 * (dissipation_rate(op, y[1]) + 2 * dissipation_rate(op, y2[1])
                            + 2 * dissipation_rate(op, y3[1]) + dissipation_rate(op, y4[1]))
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = target
        s = WaveState.from_modal(op.grid, y[0].copy(), y[1].copy())
        nrm = np.linalg.norm(op.to_coords(s))
        if not np.isfinite(nrm) or nrm > blowup * norm0:
            raise RuntimeError(f"blow-up detected at t={t:.4g}: X-norm {nrm:.3g} "
                               f"exceeds {blowup:.0e} x initial")
        states.append(s)
        E.append(energy(op, nl, s))
        diss.append(acc)
    return (Trajectory(ts, states, op, nl, dt),
            EnergyReport(ts, np.array(E), np.array(diss)))


def _simpson_uniform(y, h):
    """Composite Simpson along axis 0 for uniform spacing h; an odd number of
    intervals ends with the 3/8 rule on the last three, keeping fourth order."""
    m = len(y) - 1
    if m == 1:
        return 0.5 * h * (y[0] + y[1])
    tail = 0.0
    if m % 2:
        tail = 3 * h / 8 * (y[-4] + 3 * y[-3] + 3 * y[-2] + y[-1])
        y = y[:-3]
    if len(y) == 1:
        return tail
    return h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum(axis=0) + 2 * y[2:-1:2].sum(axis=0)) + tail


def _first_interval(y, h):
    """Integral over [s_0, s_1] from the cubic through s_0..s_3 (fourth order)."""
    return h / 24 * (9 * y[0] + 19 * y[1] - 5 * y[2] + y[3])


def duhamel_residual(op: DiscreteWaveOperator, nl: Nonlinearity, trajectory: Trajectory,
                     min_nodes: int = 64) -> np.ndarray:
    """||U(t_j) - e^{A t_j} U_0 - int_0^t_j e^{A(t_j - s)} F(U(s)) ds||_X at each sample.

    The integral uses composite Simpson on the trajectory samples (uniform
    spacing, 3/8 rule for an odd last panel); the first sample uses the cubic
    through the first four nodes, so every residual is fourth order.
    """
    ts = trajectory.times
    if len(ts) - 1 < max(min_nodes, 3):
        raise ValueError(f"trajectory has {len(ts) - 1} intervals; at least {min_nodes} needed")
    if not np.allclose(np.diff(ts), ts[1] - ts[0], rtol=1e-9):
        raise ValueError("Duhamel quadrature needs uniformly spaced samples")
    h = ts[1] - ts[0]
    kernel = exponential_kernel(op)
    Z = np.array([op.to_coords(s) for s in trajectory.states])
    F = np.zeros_like(Z)
    if not nl.is_zero:
        for i, s in enumerate(trajectory.states):
            fu = apply_nonlinearity(nl, s.u).modal
            F[i] = op.to_coords(WaveState.from_modal(op.grid, np.zeros_like(fu), -fu))
    res = np.zeros(len(ts))
    if kernel.fallback:
        apply = kernel.apply
        for j in range(1, len(ts)):
            terms = np.array([apply(F[i], ts[j] - ts[i]) for i in range(max(j, 3) + 1)])
            integral = _first_interval(terms, h) if j == 1 else _simpson_uniform(terms[:j + 1], h)
            res[j] = np.linalg.norm(Z[j] - apply(Z[0], ts[j]) - integral)
        return res
    a = F @ kernel.Vinv.T  # eigen-coordinates of F(U(s_i))
    b0 = kernel.Vinv @ Z[0]
    for j in range(1, len(ts)):
        k = max(j, 3) + 1
        terms = np.exp(np.outer(ts[j] - ts[:k], kernel.w)) * a[:k]
        integral = _first_interval(terms, h) if j == 1 else _simpson_uniform(terms[:j + 1], h)
        pred = kernel.V @ (np.exp(kernel.w * ts[j]) * b0 + integral)
        res[j] = np.linalg.norm(Z[j] - pred)
    return res


def write_trajectory_csv(path, trajectory: Trajectory, report: EnergyReport | None = None,
                         sigma: float = 1.0, with_higher: bool = True):
    xs = trajectory.xnorms()
    ss = trajectory.sigma_norms(sigma)
    with open(path, "w", newline="") as fh, warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        w = csv.writer(fh)
        w.writerow(["t", "xnorm", "xsigma_norm", "energy", "dissipation_cum", "higher_energy"])
        for i, t in enumerate(trajectory.times):
            s = trajectory.states[i]
            E = report.E_values[i] if report is not None else energy(trajectory.op, trajectory.nl, s)
            D = report.dissipation_integral[i] if report is not None else ""
            F = higher_energy(trajectory.op, trajectory.nl, s).value if with_higher else ""
            w.writerow([repr(float(t)), repr(float(xs[i])), repr(float(ss[i])), repr(float(E)),
                        D if D == "" else repr(float(D)), F if F == "" else repr(float(F))])


# ------------------------------------------------------- nonlinear decay runs

@dataclass
class NonlinearDecayConfig:
    geometry: str = "open_book"  # open_book | circle_half
    beta: float = 2.0
    sigma: float = 1.0
    p: int = 3
    coefficient: float = 1.0
    zero_nonlinearity: bool = False
    n1: int = 64
    n2: int = 64
    alpha: float = 1.0
    amplitude: float = 1.0
    t_final: float = 60.0
    dt_fraction: float = 0.5
    n_samples: int = 241
    seed: int = 0
    low_block: int = 1
    edge_fraction: float = 0.5


def build_operator(cfg: NonlinearDecayConfig) -> DiscreteWaveOperator:
    if cfg.geometry == "open_book":
        grid = Grid.torus(2 * np.pi, 2 * np.pi, cfg.n1, cfg.n2)
        return make_operator(grid, cfg.alpha, DampingProfile.power_abs(cfg.beta))
    if cfg.geometry == "circle_half":
        grid = Grid.circle(2 * np.pi, cfg.n1)
        return make_operator(grid, cfg.alpha, DampingProfile.indicator_strip(0.0, np.pi))
    raise ValueError(f"unknown geometry {cfg.geometry!r}")


def trapped_mode_datum(op: DiscreteWaveOperator, sigma: float, amplitude: float):
    """Real superposition of the least-damped mode of every transverse block k2 >= 1.

    Block k2 enters with X^sigma weight k2^(-1/2), so the X^sigma mass spreads
    over all transverse frequencies like a function barely in X^sigma. Returns the
    state and, per k2, the decay rate -Re(lambda) and X-norm of its component.
    """
    dec = op.block_decomposition()
    grid = op.grid
    n1, n2 = grid.shape
    cu = np.zeros(grid.shape, complex)
    cv = np.zeros(grid.shape, complex)
    ks, rates, xn = [], [], []
    for k2 in dec.distinct_k2():
        if k2 == 0 or k2 >= n2 // 2:
            continue
        blk = dec.block(k2)
        w, V = np.linalg.eig(blk.matrix())
        i = int(np.argmax(np.where(w.imag > 0, w.real, -np.inf)))
        mode = blk.from_coords(V[:, i])
        comp = np.zeros(grid.shape, complex), np.zeros(grid.shape, complex)
        for arr, c in zip(comp, (mode.u.modal, mode.v.modal)):
            arr[:, k2] = c
            arr[:, -k2] += np.conj(np.roll(c[::-1], 1))
        st = WaveState.from_modal(grid, *comp)
        scale = k2**-0.5 / sobolev_norm(st, sigma, op)
        cu += scale * comp[0]
        cv += scale * comp[1]
        ks.append(int(k2))
        rates.append(-w[i].real)
        xn.append(scale * float(np.linalg.norm(op.to_coords(st))))
    state = WaveState.from_modal(grid, cu, cv)
    factor = amplitude / sobolev_norm(state, sigma, op)
    state = WaveState.from_modal(grid, cu * factor, cv * factor)
    return state, np.array(ks), np.array(rates), np.array(xn) * factor


def smooth_datum(op: DiscreteWaveOperator, sigma: float, amplitude: float, seed: int = 0):
    """Random combination of the lowest Fourier modes, scaled to the given X^sigma norm."""
    rng = np.random.default_rng(seed)
    grid = op.grid
    mask = np.all([np.abs(k) <= 3 for k in grid.integer_wavenumbers()], axis=0)
    u = to_physical(np.where(mask, rng.standard_normal(grid.shape), 0) + 0j, grid, real=True)
    v = to_physical(np.where(mask, rng.standard_normal(grid.shape), 0) + 0j, grid, real=True)
    state = WaveState.from_physical(grid, u, v)
    return state * (amplitude / sobolev_norm(state, sigma, op))


def nonlinear_decay_experiment(cfg: NonlinearDecayConfig):
    """Integrate from a datum with prescribed X^sigma norm and fit the X-norm decay.

    Open book: the datum is :func:`trapped_mode_datum`; the fit window starts once
    the linear prediction is dominated by a block k2 > ``low_block`` and ends by
    the power-law departure rule, never past the time the dominating block
    reaches ``edge_fraction`` of the largest resolved k2. Circle: a smooth datum,
    all three models are fitted on the second half of the run and the one with
    the smallest residual is reported.

    Returns (fit, manifest, curve).
    """
    op = build_operator(cfg)
    nl = Nonlinearity.zero() if cfg.zero_nonlinearity else Nonlinearity.odd_power(cfg.p, cfg.coefficient)
    dt = cfg.dt_fraction * cfl_limit(op)
    times = np.linspace(0, cfg.t_final, cfg.n_samples)
    manifest = {"geometry": cfg.geometry, "grid": list(op.grid.shape), "alpha": cfg.alpha,
                "beta": cfg.beta, "sigma": cfg.sigma, "p": cfg.p, "coefficient": cfg.coefficient,
                "nonlinearity": nl.kind, "dt": dt, "t_final": cfg.t_final, "seed": cfg.seed}
    if cfg.geometry == "open_book":
        state0, ks, rates, xn = trapped_mode_datum(op, cfg.sigma, cfg.amplitude)
        manifest["target_exponent"] = cfg.sigma * (1 + 2 / cfg.beta)
    else:
        state0 = smooth_datum(op, cfg.sigma, cfg.amplitude, cfg.seed)
    manifest["initial_xsigma_norm"] = sobolev_norm(state0, cfg.sigma, op)
    traj, report = integrate(op, nl, state0, dt, cfg.t_final, times)
    values = traj.xnorms()
    manifest["energy_residual_max"] = float(np.max(np.abs(report.residual)))
    if cfg.geometry == "open_book":
        pos = times > 0
        pred = xn[:, None] * np.exp(-np.outer(rates, times[pos]))
        lead = ks[np.argmax(pred, axis=0)]
        curve = DecayCurve(times[pos], values[pos], "state_x", sigma_source=cfg.sigma,
                           argmax_block=lead - cfg.low_block,
                           meta={"k2_max": int(ks[-1]) - cfg.low_block})
        window = preasymptotic_window(curve, edge_fraction=cfg.edge_fraction)
        fit = fit_decay(curve, "polynomial", window)
        manifest.update(fit_window=list(window), window_rule="dominant block in "
                        f"({cfg.low_block}, {cfg.edge_fraction} * {int(ks[-1])}) + departure rule",
                        fitted_exponent=fit.rate, transient_length=float(window[0]),
                        sigma_h_bound=_sigma_h_bound(fit))
        return fit, manifest, curve
    curve = DecayCurve(times, values, "state_x")
    window = (cfg.t_final / 2, cfg.t_final)
    best, fits = select_model(curve, window)
    manifest.update(fit_window=list(window), selected_model=best,
                    residuals={m: f.residual for m, f in fits.items()}, sigma_h_bound=_sigma_h_bound(fits[best]))
    return fits[best], manifest, curve


def _sigma_h_bound(fit: FitResult) -> float | None:
    """Supremum of s with int_0^inf h(t)^(1-s) dt finite for the fitted h (recorded, never used)."""
    if fit.model == "polynomial":
        return 1 - 1 / fit.rate if fit.rate > 1 else None
    return 1.0


# -------------------------------------------------------- convolution bounds

@dataclass(frozen=True)
class PolynomialCase:
    alpha: float
    sigma: float = 1.0


@dataclass(frozen=True)
class StretchedCase:
    c: float
    gamma: float
    sigma: float = 1.0


@dataclass
class ConvolutionResult:
    t_grid: np.ndarray
    values: np.ndarray
    sup: float
    verdict: str
    diagnostic: str = ""
    running_sup: np.ndarray = field(default=None)


def convolution_integrand(case, t):
    if isinstance(case, PolynomialCase):
        a, s_ = case.alpha, case.sigma
        return lambda s: ((1 + t) / (1 + s)) ** (s_ * a) / (1 + (t - s)) ** a
    c, g, s_ = case.c, case.gamma, case.sigma
    return lambda s: math.exp(s_ * c * (t**g - s**g) - c * (t - s) ** g)


def convolution_integral(case, t: float, epsrel: float = 1e-6) -> float:
    if t <= 0:
        return 0.0
    f = convolution_integrand(case, t)
    pts = sorted({min(1.0, t / 2), max(t - 1.0, t / 2)})
    val, _ = quad(f, 0.0, t, points=pts, epsrel=epsrel, epsabs=0.0, limit=1000)
    return val


def convolution_bound(case, t_grid=None, stability: float = 1e-3) -> ConvolutionResult:
    """Sup over t of the convolution integral and a boundedness verdict.

    The verdict is "bounded" when the running sup changes by less than
    ``stability`` (relative) over the last decade of the grid.
    """
    if isinstance(case, PolynomialCase):
        if not 0 < case.sigma <= 1:
            raise ValueError("sigma must lie in (0, 1]")
    elif isinstance(case, StretchedCase):
        if not (case.c > 0 and 0 < case.gamma < 1 and 0 < case.sigma <= 1):
            raise ValueError("need c > 0, gamma in (0, 1), sigma in (0, 1]")
    else:
        raise TypeError("case must be PolynomialCase or StretchedCase")
    if t_grid is None:
        t_grid = np.concatenate([[0.0], np.geomspace(1.0, 1e4, 41)])
    t_grid = np.asarray(t_grid, float)
    vals = np.array([convolution_integral(case, t) for t in t_grid])
    run = np.maximum.accumulate(vals)
    sup = float(run[-1])
    if isinstance(case, PolynomialCase) and case.alpha <= 1:
        return ConvolutionResult(t_grid, vals, sup, "divergent",
                                 f"alpha={case.alpha} <= 1: int ds/(1+t-s)^alpha is unbounded in t",
                                 run)
    t_end = t_grid[-1]
    ref = np.searchsorted(t_grid, t_end / 10)
    change = (run[-1] - run[min(ref, len(run) - 1)]) / run[-1] if run[-1] > 0 else 0.0
    verdict = "bounded" if change < stability else "unbounded"
    return ConvolutionResult(t_grid, vals, sup, verdict,
                             f"running sup changed by {change:.2e} over [{t_end / 10:g}, {t_end:g}]", run)
