"""Dense linear-algebra kernels shared by the semigroup and resolvent code."""

import warnings

import numpy as np
import scipy.linalg as sla


class DefectiveOperatorWarning(RuntimeWarning):
    """Eigenvector basis too ill-conditioned; a squaring-based exponential was used."""


def is_skew_hermitian(M, tol=1e-13):
    scale = max(np.abs(M).max(), 1.0)
    return np.abs(M + M.conj().T).max() <= tol * scale


class Exponential:
    """exp(M t) for a fixed square matrix M and many t.

    Skew-Hermitian matrices go through ``eigh`` (unitary eigenbasis). Other
    matrices use ``eig`` when the eigenvector condition number stays below
    ``cond_limit``; otherwise every evaluation uses scaling and squaring and
    ``fallback`` is set.
    """

    def __init__(self, M, cond_limit=1e12):
        self.M = M
        self.fallback = False
        self.cond = 1.0
        if is_skew_hermitian(M):
            w, V = np.linalg.eigh(1j * M)
            self.w = -1j * w
            self.V = V
            self.Vinv = V.conj().T
            return
        w, V = sla.eig(M)
        self.cond = float(np.linalg.cond(V))
        if not np.isfinite(self.cond) or self.cond > cond_limit:
            self.fallback = True
            warnings.warn(f"eigenvector condition number {self.cond:.2e} exceeds "
                          f"{cond_limit:.0e}; using scaling-and-squaring exponential",
                          DefectiveOperatorWarning, stacklevel=3)
            return
        self.w, self.V = w, V
        self.Vinv = np.linalg.inv(V)

    def matrix(self, t):
        if self.fallback:
            return sla.expm(self.M * t)
        return (self.V * np.exp(self.w * t)) @ self.Vinv

    def apply(self, z, t):
        if self.fallback:
            return sla.expm_multiply(self.M * t, z) if t else np.array(z, dtype=complex)
        return self.V @ (np.exp(self.w * t) * (self.Vinv @ z))


def spectral_norm(X):
    return float(np.linalg.norm(X, 2)) if X.size else 0.0


class ShiftedSolver:
    """Smallest singular values of M - i mu I for many real mu.

    The complex Schur form ``M = Z T Z^*`` is computed once. For each mu the
    largest eigenvalue of ``(T1^* T1)^{-1}`` with ``T1 = T - i mu`` is found by
    Lanczos with full reorthogonalization, two triangular solves per step.
    Non-converged cases fall back to a dense SVD.
    """

    def __init__(self, M, max_iter=80, rtol=1e-8, seed=0):
        M = np.asarray(M)
        if np.isrealobj(M):
            T, Z = sla.schur(M, output="real")
            T, Z = sla.rsf2csf(T, Z)
        else:
            T, Z = sla.schur(M, output="complex")
        self.M = M
        self.T = np.triu(T)
        self.n = len(M)
        self.max_iter = min(max_iter, self.n)
        self.rtol = rtol
        self.start = np.random.default_rng(seed).standard_normal(self.n) + 0j
        self.start /= np.linalg.norm(self.start)
        self.fallbacks = 0

    @property
    def eigenvalues(self):
        return np.diag(self.T)

    def sigma_min(self, mu):
        z = 1j * mu
        diag = np.diag(self.T) - z
        if np.min(np.abs(diag)) == 0.0:
            return 0.0
        T1 = self.T - z * np.eye(self.n)

        def op(x):
            y = sla.solve_triangular(T1, x, trans="C", check_finite=False)
            return sla.solve_triangular(T1, y, check_finite=False)

        Q = np.zeros((self.n, self.max_iter + 1), complex)
        alpha = np.zeros(self.max_iter)
        beta = np.zeros(self.max_iter)
        Q[:, 0] = self.start
        for k in range(self.max_iter):
            w = op(Q[:, k])
            if not np.all(np.isfinite(w)):
                return 0.0
            alpha[k] = np.vdot(Q[:, k], w).real
            w -= Q[:, :k + 1] @ (Q[:, :k + 1].conj().T @ w)
            w -= Q[:, :k + 1] @ (Q[:, :k + 1].conj().T @ w)
            beta[k] = np.linalg.norm(w)
            if k:
                ritz, vecs = sla.eigh_tridiagonal(alpha[:k + 1], beta[:k])
                lam, resid = ritz[-1], beta[k] * abs(vecs[-1, -1])
            else:
                lam, resid = alpha[0], beta[0]
            # residual bound of the top Ritz pair
            if resid <= self.rtol * lam or beta[k] <= 1e-14 * abs(lam):
                return 1.0 / np.sqrt(lam)
            Q[:, k + 1] = w / beta[k]
        self.fallbacks += 1
        return float(sla.svdvals(self.M - z * np.eye(self.n))[-1])
