"""Resolvent norms on the imaginary axis, the second-order reduction P_B, and
the observability-to-resolvent bound chain.

Second-order systems ``u'' + B u' + L u = 0`` are represented by
:class:`SecondOrderSystem` (L positive Hermitian, B nonnegative Hermitian);
the damped wave operator is the case ``L = -Delta + alpha (+ V)``,
``B = gamma(x)``. First-order matrices are written in coordinates where the
energy norm is Euclidean.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ._linalg import ShiftedSolver
from .report import CheckReport
from .semigroup import FitResult, DecayCurve, fit_decay
from .spectral import DiscreteWaveOperator, tail_indices

INF_THRESHOLD = 1e-12


# ------------------------------------------------------------ abstract systems

@dataclass
class SecondOrderSystem:
    """Matrices L (Hermitian, positive) and B (Hermitian, nonnegative) on H = C^n.

    ``ranks`` orders the basis vectors for the high-frequency projectors Q_n
    (rank >= n is kept); by default basis vectors are ranked by diag(L).
    """

    L: np.ndarray
    B: np.ndarray
    ranks: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.L = np.atleast_2d(np.asarray(self.L, dtype=complex))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=complex))
        n = len(self.L)
        if self.L.shape != (n, n) or self.B.shape != (n, n):
            raise ValueError("L and B must be square matrices of equal size")
        for name, m in (("L", self.L), ("B", self.B)):
            if n and np.abs(m - m.conj().T).max() > 1e-10 * max(1.0, np.abs(m).max()):
                raise ValueError(f"{name} must be Hermitian")
        if self.ranks is None:
            order = np.argsort(np.diag(self.L).real, kind="stable")
            self.ranks = np.empty(n, int)
            self.ranks[order] = np.arange(n)
        self.ranks = np.asarray(self.ranks)

    @classmethod
    def diagonal(cls, ell, b) -> "SecondOrderSystem":
        b = np.asarray(b)
        return cls(np.diag(np.asarray(ell, float)), np.diag(b) if b.ndim == 1 else b)

    @classmethod
    def from_operator(cls, op: DiscreteWaveOperator) -> "SecondOrderSystem":
        if "system" not in op._cache:
            w = (op.laplacian_multipliers + op.alpha).ravel()
            L = np.diag(w).astype(complex)
            if op.potential is not None and np.any(op.potential):
                L = L + op.grid.multiplication_matrix(op.potential)
            B = op.grid.multiplication_matrix(op.gamma)
            op._cache["system"] = cls(L, B, ranks=op.grid.mode_ranks.ravel())
        return op._cache["system"]

    @property
    def n(self) -> int:
        return len(self.L)

    def _eigh(self, name):
        if name not in self._cache:
            w, V = np.linalg.eigh(getattr(self, name))
            self._cache[name] = (w, V)
        return self._cache[name]

    def sqrt_matrix(self, name: str) -> np.ndarray:
        w, V = self._eigh(name)
        return (V * np.sqrt(np.clip(w, 0, None))) @ V.conj().T

    @property
    def sqrt_b_norm(self) -> float:
        """||sqrt(B)|| = sqrt(lambda_max(B))."""
        return float(np.sqrt(max(self._eigh("B")[0][-1], 0.0)))

    def first_order_matrix(self) -> np.ndarray:
        """[[0, S], [-S, -B]] with S = L^(1/2): the operator in energy coordinates."""
        S = self.sqrt_matrix("L")
        n = self.n
        return np.block([[np.zeros((n, n)), S], [-S, -self.B]])

    def pb_matrix(self, mu: float) -> np.ndarray:
        return -self.L - 1j * mu * self.B + mu * mu * np.eye(self.n)

    def compress(self, n: int) -> "SecondOrderSystem":
        """Restriction to the span of basis vectors of rank >= n."""
        if not 0 <= n <= self.n:
            raise ValueError(f"cutoff {n} outside [0, {self.n}]")
        keep = np.flatnonzero(self.ranks >= n)
        sub = np.ix_(keep, keep)
        return SecondOrderSystem(self.L[sub], self.B[sub], ranks=self.ranks[keep])


def _as_system(target) -> SecondOrderSystem:
    if isinstance(target, SecondOrderSystem):
        return target
    if isinstance(target, DiscreteWaveOperator):
        return SecondOrderSystem.from_operator(target)
    raise TypeError("expected a DiscreteWaveOperator or SecondOrderSystem")


def _first_order(target) -> np.ndarray:
    if isinstance(target, DiscreteWaveOperator):
        return target.real_matrix()
    if isinstance(target, SecondOrderSystem):
        return target.first_order_matrix()
    return np.asarray(target)


def _inverse_norm(sigma_min: float) -> float:
    return math.inf if sigma_min < INF_THRESHOLD else 1.0 / sigma_min


# ------------------------------------------------------------------ norms

def resolvent_norm(target, mu: float) -> float:
    """||(A - i mu)^-1|| in the energy norm; ``math.inf`` when sigma_min < 1e-12."""
    M = _first_order(target)
    s = sla.svdvals(M - 1j * mu * np.eye(len(M)))[-1]
    return _inverse_norm(s)


def pb_norm(target, mu: float, blocks: bool = False, n: int = 0) -> float:
    """||P_B(mu)^-1|| in L^2 with P_B(mu) = -L - i mu B + mu^2, on the tail Q_n H."""
    if blocks:
        if n:
            raise ValueError("projected norms are not available block by block")
        dec = target.block_decomposition()
        return max(pb_norm(dec.block(k2), mu) for k2 in dec.distinct_k2())
    sys_ = _as_system(target)
    if n:
        sys_ = sys_.compress(n)
    if sys_.n == 0:
        return 0.0
    return _inverse_norm(sla.svdvals(sys_.pb_matrix(mu))[-1])


def estimP_crosscheck(target, mu_grid, blocks: bool = False,
                      bracket=(0.1, 10.0)) -> CheckReport:
    """Compare ||(A - i mu)^-1|| with |mu| ||P_B(mu)^-1|| over a grid with mu >= 1."""
    mu_grid = np.asarray(mu_grid, float)
    if np.any(np.abs(mu_grid) < 1):
        raise ValueError("estimP cross-check needs |mu| >= 1")
    if blocks:
        res = sweep(target, mu_grid, use_blocks=True).norms
    else:
        res = np.array([resolvent_norm(target, m) for m in mu_grid])
    pb = np.array([pb_norm(target, m, blocks=blocks) for m in mu_grid])
    finite = np.isfinite(res) & np.isfinite(pb)
    ratio = np.full(len(mu_grid), np.nan)
    ratio[finite] = res[finite] / (np.abs(mu_grid[finite]) * pb[finite])
    lo, hi = bracket
    bad = finite & ((ratio < lo) | (ratio > hi))
    details = {"mu": mu_grid, "ratio": ratio, "min_ratio": float(np.nanmin(ratio)) if finite.any() else None,
               "max_ratio": float(np.nanmax(ratio)) if finite.any() else None, "bracket": list(bracket),
               "offending_mu": mu_grid[bad], "skipped_infinite": int((~finite).sum())}
    return CheckReport("estimP_crosscheck", bool(finite.any() and not bad.any()), details)


# ------------------------------------------------------------------ sweeps

@dataclass
class ResolventSweep:
    mu_grid: np.ndarray
    norms: np.ndarray
    infinite: np.ndarray
    per_block: dict | None = None
    argmax_block: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def _block_upper_bound(blk: DiscreteWaveOperator, mu_grid):
    """Neumann-series bound 1/(d - ||perturbation||) around the undamped skew part."""
    omega = np.sqrt(blk.laplacian_multipliers.ravel() + blk.alpha)
    d = np.min(np.abs(np.abs(mu_grid)[:, None] - omega[None, :]), axis=1)
    pert = float(np.max(blk.gamma))
    if blk.potential is not None:
        pert += float(np.max(np.abs(blk.potential))) / np.sqrt(blk.alpha)
    with np.errstate(divide="ignore"):
        return np.where(d > pert, 1.0 / (d - pert), math.inf)


def _block_sigmas(M, mus, method):
    if method == "svd":
        eye = np.eye(len(M))
        return np.array([sla.svdvals(M - 1j * m * eye)[-1] for m in mus]), 0
    solver = ShiftedSolver(M)
    vals = np.array([solver.sigma_min(m) for m in mus])
    return vals, solver.fallbacks


def sweep(op: DiscreteWaveOperator, mu_grid, use_blocks: bool = False, k2_max: int | None = None,
          method: str = "lanczos", prune: bool = True) -> ResolventSweep:
    """Resolvent norms along i*mu_grid.

    ``method`` is "lanczos" (Schur form plus inverse Lanczos, dense SVD fallback)
    or "svd" (dense SVD per point). With ``use_blocks`` the norm is the maximum
    over transverse blocks |k2| <= k2_max; blocks whose perturbation bound is
    already below the running maximum are skipped when ``prune`` is set
    (their entries in ``per_block`` are NaN). Ties go to the lowest k2.
    """
    if method not in ("lanczos", "svd"):
        raise ValueError("method must be 'lanczos' or 'svd'")
    mu_grid = np.asarray(mu_grid, dtype=float)
    if not use_blocks:
        sig, fb = _block_sigmas(op.real_matrix(), mu_grid, method)
        norms = np.array([_inverse_norm(s) for s in sig])
        return ResolventSweep(mu_grid, norms, ~np.isfinite(norms), meta={"fallbacks": fb, "method": method})
    dec = op.block_decomposition()
    ks = dec.distinct_k2(k2_max)
    best = np.full(len(mu_grid), -1.0)
    arg = np.zeros(len(mu_grid), int)
    per_block = {}
    skipped = fallbacks = 0
    for k2 in ks:
        blk = dec.block(k2)
        todo = np.ones(len(mu_grid), bool)
        if prune:
            todo = _block_upper_bound(blk, mu_grid) >= best
        row = np.full(len(mu_grid), np.nan)
        if todo.any():
            sig, fb = _block_sigmas(blk.real_matrix(), mu_grid[todo], method)
            fallbacks += fb
            row[todo] = [_inverse_norm(s) for s in sig]
        skipped += int((~todo).sum())
        better = row > best
        best = np.where(better, row, best)
        arg = np.where(better, k2, arg)
        per_block[int(k2)] = row
    meta = {"method": method, "skipped_evaluations": skipped, "fallbacks": fallbacks,
            "k2_max": int(ks[-1])}
    return ResolventSweep(mu_grid, best, ~np.isfinite(best), per_block, arg, meta)


def resonance_mu_grid(op: DiscreteWaveOperator, mu_min: float, mu_max: float,
                      k2_max: int | None = None, count: int | None = None) -> np.ndarray:
    """Frequencies Im(lambda) of each block's least-damped eigenvalue, kept when in [mu_min, mu_max].

    These are the local peaks of the block resolvent norms. With ``count`` a
    subset closest to a geometric grid of that size is returned.
    """
    dec = op.block_decomposition()
    peaks = []
    for k2 in dec.distinct_k2(k2_max):
        ev = np.linalg.eigvals(dec.block(k2).real_matrix())
        ev = ev[ev.imag > 0]
        top = ev[np.argmax(ev.real)].imag if len(ev) else -1.0
        if mu_min <= top <= mu_max:
            peaks.append(top)
    peaks = np.unique(np.round(peaks, 12))
    if count is not None and len(peaks) > count:
        targets = np.geomspace(peaks[0], peaks[-1], count)
        peaks = np.unique(peaks[[int(np.argmin(np.abs(np.log(peaks / t)))) for t in targets]])
    return peaks


def fit_resolvent_growth(sw: ResolventSweep, window=None) -> FitResult:
    """Power-law fit ||(A - i mu)^-1|| ~ C mu^a; ``rate`` holds the growth exponent a."""
    ok = np.isfinite(sw.norms) & (sw.mu_grid > 0)
    mu, vals = sw.mu_grid[ok], sw.norms[ok]
    order = np.argsort(mu)
    f = fit_decay(DecayCurve(mu[order], vals[order], "operator"), "polynomial", window)
    return FitResult("polynomial", -f.rate, f.prefactor, f.fit_window, f.residual, n_points=f.n_points)


# ------------------------------------------------------- invertibility witness

@dataclass(frozen=True)
class Witness:
    mu: float
    minimum: float | None
    eigenspace_dim: int
    verdict: str


def invertibility_witness(target, mu: float, tol: float = 1e-9) -> Witness:
    """Minimum of <Bu, u> over unit vectors of the eigenspace {L u = mu^2 u}."""
    sys_ = _as_system(target)
    lam, V = sys_._eigh("L")
    close = np.abs(lam - mu * mu) <= tol * max(1.0, mu * mu)
    if not close.any():
        return Witness(mu, None, 0, "invertible")
    E = V[:, close]
    m = float(np.linalg.eigvalsh(E.conj().T @ sys_.B @ E)[0])
    return Witness(mu, m, int(close.sum()), "invertible" if m > 1e-12 else "not invertible")


def linearized_operator(op: DiscreteWaveOperator, V) -> DiscreteWaveOperator:
    """Operator with L replaced by L + V (V >= 0, scalar or grid samples)."""
    V = np.broadcast_to(np.asarray(V, dtype=float), op.grid.shape).copy()
    if np.any(V < 0) or not np.all(np.isfinite(V)):
        raise ValueError("negative potential sample")
    return op.with_potential(V)


# ------------------------------------------------------ observability chain

@dataclass(frozen=True)
class ObservabilityCertificate:
    """Constants f, g with ||u|| <= (f/|mu|) ||(-L + mu^2) u|| + g ||sqrt(B) u||.

    ``worst_violation`` is the largest value of
    ||u|| - (f/|mu|)||P u|| - g||sqrt(B) u|| found over ``n_samples`` random unit
    vectors refined by ``ascent_steps`` projected gradient steps.
    """

    mu: float
    f_const: float
    g_const: float
    n_samples: int
    ascent_steps: int
    worst_violation: float
    delta: float = 0.0
    window_dim: int = 0

    @property
    def method(self) -> str:
        return f"random sampling ({self.n_samples}) + projected ascent ({self.ascent_steps} steps)"

    @property
    def certified(self) -> bool:
        return self.worst_violation <= 0


def bound_constant(f: float, g: float, sqrt_b_norm: float) -> float:
    """M = 3 max(f, f^2 ||sqrt B||^2, g^2)."""
    return 3.0 * max(f, f * f * sqrt_b_norm**2, g * g)


def _observability_constants(sys_: SecondOrderSystem, mu: float, max_clusters: int = 8):
    """Best (f, g, delta, dim) over spectral windows {|lambda - mu^2| < delta}.

    On the window E, c ||u|| <= ||sqrt(B) u|| with c^2 = lambda_min(B|_E); off the
    window ||u|| <= ||P u|| / delta. Splitting u gives f = |mu| (1 + ||sqrt B||/c)/delta
    and g = 1/c.
    """
    lam, V = sys_._eigh("L")
    dist = np.abs(lam - mu * mu)
    levels = np.unique(np.round(dist / max(1.0, dist.max()), 10)) * max(1.0, dist.max())
    sb = sys_.sqrt_b_norm
    best = None
    for j in range(min(max_clusters, len(levels))):
        delta = levels[j]
        inside = dist < delta * (1 - 1e-9)
        if delta <= 0:
            continue
        if inside.any():
            E = V[:, inside]
            c2 = float(np.linalg.eigvalsh(E.conj().T @ sys_.B @ E)[0])
            if c2 <= 1e-12:
                break
            c = np.sqrt(c2)
            f, g = abs(mu) * (1 + sb / c) / delta, 1 / c
        else:
            f, g = abs(mu) / delta, 0.0
        M = bound_constant(f, g, sb)
        if best is None or M < best[0]:
            best = (M, f, g, delta, int(inside.sum()))
    if best is None:
        raise ValueError(f"no observability window at mu={mu}: B vanishes on the mu^2 eigenspace")
    return best[1:]


def _violation(sys_, mu, f, g, U):
    """||u|| - (f/|mu|)||P u|| - g ||sqrt B u|| for the columns of U."""
    P = -sys_.L + mu * mu * np.eye(sys_.n)
    sB = sys_.sqrt_matrix("B")
    return (np.linalg.norm(U, axis=0) - f / abs(mu) * np.linalg.norm(P @ U, axis=0)
            - g * np.linalg.norm(sB @ U, axis=0))


def certify(target, mu: float, n_samples: int = 10_000, ascent_steps: int = 50,
            seed: int = 0, starts: int = 5) -> ObservabilityCertificate:
    """Construct (f, g) at mu and test the inequality by sampling plus ascent."""
    if n_samples < 10_000 or ascent_steps < 50:
        raise ValueError("certification needs >= 10^4 samples and >= 50 ascent steps")
    sys_ = _as_system(target)
    f, g, delta, dim = _observability_constants(sys_, mu)
    rng = np.random.default_rng(seed)
    n = sys_.n
    worst = -math.inf
    P = -sys_.L + mu * mu * np.eye(n)
    sB = sys_.sqrt_matrix("B")
    B = sys_.B
    best_cols = []
    for lo in range(0, n_samples, 2000):
        m = min(2000, n_samples - lo)
        U = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
        U /= np.linalg.norm(U, axis=0)
        viol = _violation(sys_, mu, f, g, U)
        worst = max(worst, float(viol.max()))
        idx = np.argsort(viol)[-starts:]
        best_cols.extend((viol[i], U[:, i]) for i in idx)
    best_cols.sort(key=lambda p: p[0])
    PhP = P.conj().T @ P
    for _, u in best_cols[-starts:]:
        step = 0.1
        cur = float(_violation(sys_, mu, f, g, u[:, None])[0])
        for _ in range(ascent_steps):
            Pu, Bu = np.linalg.norm(P @ u), np.linalg.norm(sB @ u)
            grad = u.copy()
            if Pu > 0:
                grad -= f / abs(mu) * (PhP @ u) / Pu
            if Bu > 0:
                grad -= g * (B @ u) / Bu
            grad -= np.vdot(u, grad).real * u  # tangent to the unit sphere
            trial = u + step * grad
            trial /= np.linalg.norm(trial)
            val = float(_violation(sys_, mu, f, g, trial[:, None])[0])
            if val > cur:
                u, cur, step = trial, val, step * 1.5
            else:
                step *= 0.5
        worst = max(worst, cur)
    return ObservabilityCertificate(float(mu), float(f), float(g), n_samples, ascent_steps,
                                    float(worst), float(delta), dim)


def random_instance(seed: int, n: int = 12) -> tuple[SecondOrderSystem, float]:
    """Random (L, B, mu): diagonal L with spectrum in [1, 400], B = C C* / n of rank
    n // 2 + 1 in general position, and mu in [2, 20] between two eigenvalues of
    sqrt(L). L is diagonal so that the coordinate projectors Q_n are spectral."""
    rng = np.random.default_rng(seed)
    ell = np.sort(rng.uniform(1.0, 400.0, n))
    C = rng.standard_normal((n, n // 2 + 1)) + 1j * rng.standard_normal((n, n // 2 + 1))
    B = C @ C.conj().T / n
    j = rng.integers(0, n - 1)
    mu = float(np.clip(np.sqrt(ell[j] + rng.uniform(0, 1) * (ell[j + 1] - ell[j])), 2.0, 20.0))
    return SecondOrderSystem(np.diag(ell), 0.5 * (B + B.conj().T)), mu


def appendix_bound_check(target, certificate: ObservabilityCertificate,
                         n_values=None) -> CheckReport:
    """Check ||P_B(mu)^-1|| <= M/|mu| and the same bound on every tail Q_n H."""
    if not certificate.certified:
        raise ValueError("certificate is not certified (worst_violation > 0)")
    sys_ = _as_system(target)
    mu = certificate.mu
    M = bound_constant(certificate.f_const, certificate.g_const, sys_.sqrt_b_norm)
    bound = M / abs(mu)
    if n_values is None:
        n_values = sorted({0, sys_.n // 4, sys_.n // 2, sys_.n})
    rows = []
    for n in n_values:
        val = pb_norm(sys_, mu, n=n)
        rows.append({"n": int(n), "pb_norm": val, "ok": bool(val <= bound * (1 + 1e-12))})
    ok = all(r["ok"] for r in rows)
    return CheckReport("appendix_bound", ok, {"mu": mu, "M": M, "bound": bound,
                                              "f": certificate.f_const, "g": certificate.g_const,
                                              "projected": rows})


def projected_resolvent_norm(target, mu: float, n: int) -> float:
    """||(Q_n A Q_n - i mu)^-1|| on Q_n X (zero for an empty tail)."""
    if isinstance(target, DiscreteWaveOperator):
        idx = tail_indices(target.grid, n)
        M = target.matrix()[np.ix_(idx, idx)]
    else:
        M = _as_system(target).compress(n).first_order_matrix()
    if len(M) == 0:
        return 0.0
    return _inverse_norm(sla.svdvals(M - 1j * mu * np.eye(len(M)))[-1])


def high_frequency_constant_check(target, certificates, n_values, safety: float = 5.0) -> CheckReport:
    """Fit K = max ||(A - i mu)^-1|| / M(mu) at n = 0 and check K * safety on every tail."""
    sys_ = _as_system(target)
    sb = sys_.sqrt_b_norm
    Ms = {c.mu: bound_constant(c.f_const, c.g_const, sb) for c in certificates}
    K = max(projected_resolvent_norm(target, mu, 0) / M for mu, M in Ms.items())
    rows = []
    for n in n_values:
        for mu, M in Ms.items():
            val = projected_resolvent_norm(target, mu, n)
            rows.append({"n": int(n), "mu": mu, "norm": val, "limit": safety * K * M,
                         "ok": bool(val <= safety * K * M)})
    return CheckReport("high_frequency_constant", all(r["ok"] for r in rows),
                       {"K": K, "safety": safety, "rows": rows})


# ------------------------------------------------------------- BT cross-check

def bt_crosscheck(resolvent_fit: FitResult, decay_fit: FitResult, tol: float = 0.25) -> CheckReport:
    """Resolvent growth mu^(1/alpha) against operator decay t^(-alpha')."""
    if resolvent_fit.model != "polynomial" or decay_fit.model != "polynomial":
        raise ValueError("both fits must be polynomial")
    if resolvent_fit.rate <= 0:
        raise ValueError("resolvent growth exponent must be positive")
    alpha = 1.0 / resolvent_fit.rate
    alpha_decay = decay_fit.rate
    rel = abs(alpha - alpha_decay) / alpha
    # logarithmic loss: h(t) ~ (t / log t)^-alpha has local exponent alpha (1 - 1/log t)
    t_mid = math.sqrt(decay_fit.fit_window[0] * decay_fit.fit_window[1])
    lossy = alpha * (1 - 1 / math.log(t_mid)) if t_mid > math.e else None
    return CheckReport("bt_crosscheck", bool(rel <= tol),
                       {"alpha_from_resolvent": alpha, "alpha_from_decay": alpha_decay,
                        "relative_gap": rel, "tolerance": tol,
                        "log_lossy_exponent": lossy, "decay_window": decay_fit.fit_window})


# ----------------------------------------------------------------------- I/O

def write_sweep_csv(path, sw: ResolventSweep):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mu", "norm", "argmax_k2", "infinite_flag"])
        for i, mu in enumerate(sw.mu_grid):
            k2 = "" if sw.argmax_block is None else int(sw.argmax_block[i])
            norm = sw.norms[i]
            w.writerow([repr(float(mu)), "inf" if not np.isfinite(norm) else repr(float(norm)),
                        k2, int(sw.infinite[i])])
