"""Smallest eigenpairs of the Hermitian pencil (A, B).

`solve_lowest` is a shift-invert Lanczos iteration in the B-inner
product with full reorthogonalization and a fixed negative shift, so a
single sparse factorization of A - sigma*B serves every iteration.
`dense_reference` is the independent LAPACK oracle used to cross-check
it. Individual solves are sequential; distinct solves share no state
and may run concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .blochfem import BlochPencil
from .errors import EigenConvergenceError, InputError, SingularShiftError

#: fixed spectral shift; A >= 0 makes A - SIGMA*B positive definite
SIGMA = -0.5
#: eigenvalues in [-ZERO_CLAMP, 0) are reported as exactly 0
ZERO_CLAMP = 1e-10
#: dense oracle size cap
DENSE_MAX_N = 5000

_MAX_STEPS_PER_L = 50
_MAX_RESTARTS = 4
_CHECK_EVERY = 5
_V0_SEED = 0x5EED_BA5E


@dataclass
class EigResult:
    """Lowest-L eigenpairs, ascending, with B-orthonormal vectors.

    lambdas are dimensionless: lambda = (omega/c)^2 with a = c = 1.
    residuals[i] = ||A x_i - lambda_i B x_i||_2 / ||B x_i||_2.
    """

    lambdas: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    iterations: int


def _unpack(pencil) -> tuple[sp.spmatrix, sp.spmatrix, int]:
    if isinstance(pencil, BlochPencil):
        return pencil.A, pencil.B, pencil.n_dof
    a, b = pencil
    a = sp.csr_matrix(a)
    b = sp.csr_matrix(b)
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise InputError("pencil matrices must be square and of equal shape")
    return a, b, a.shape[0]


def clamp_lambdas(lams: np.ndarray) -> np.ndarray:
    """Report eigenvalues within +-1e-10 of zero as exactly zero.

    lambda_1(Gamma) = 0 analytically; clamping keeps omega = sqrt(lambda)
    real and pins the zero mode to an exact 0 in reported surfaces.
    """
    out = np.asarray(lams, dtype=float).copy()
    out[np.abs(out) <= ZERO_CLAMP] = 0.0
    return out


class ShiftInvertOperator:
    """Reusable factorization of A - sigma*B with y = (A - sigma*B)^-1 B x.

    One LU factorization serves arbitrarily many right-hand sides; a
    single iterative-refinement step keeps the relative solve residual
    at or below 1e-10.
    """

    def __init__(self, A: sp.spmatrix, B: sp.spmatrix, sigma: float = SIGMA):
        self.A = sp.csr_matrix(A)
        self.B = sp.csr_matrix(B)
        self.sigma = float(sigma)
        # complex factorization regardless of input dtype; Lanczos iterates
        # complex vectors even for real pencils
        self._shifted = (self.A - self.sigma * self.B).astype(np.complex128).tocsc()
        try:
            self._lu = spla.splu(self._shifted)
        except RuntimeError as exc:  # SuperLU signals exact singularity this way
            raise SingularShiftError(
                f"A - {sigma}*B is singular; choose a shift away from the spectrum"
            ) from exc

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        y = self._lu.solve(rhs)
        norm_rhs = np.linalg.norm(rhs)
        if norm_rhs == 0.0:
            return y
        residual = rhs - self._shifted @ y
        if np.linalg.norm(residual) > 1e-12 * norm_rhs:
            y = y + self._lu.solve(residual)
            residual = rhs - self._shifted @ y
        if not np.all(np.isfinite(y)) or np.linalg.norm(residual) > 1e-10 * norm_rhs:
            raise SingularShiftError(
                f"shifted solve stalled at relative residual "
                f"{np.linalg.norm(residual) / norm_rhs:.2e}; adjust sigma"
            )
        return y

    def apply(self, x: np.ndarray) -> np.ndarray:
        """y with (A - sigma*B) y = B x."""
        return self.solve(self.B @ x)


def shift_invert_apply(A, B, sigma: float, x: np.ndarray) -> np.ndarray:
    """One-shot form of ShiftInvertOperator; factorization is not kept."""
    return ShiftInvertOperator(A, B, sigma).apply(x)


def solve_lowest(pencil, L: int, tol: float = 1e-8, warm_start=None) -> EigResult:
    """Shift-invert Lanczos for the L smallest eigenpairs, with multiplicity.

    A single Krylov space provably carries at most one vector per
    eigenspace, so degenerate copies cannot come out of one sweep.
    After the first sweep locks its converged pairs, further sweeps run
    deflated against everything locked so far; the result is certified
    complete once a deflated sweep converges a guard value strictly
    above lambda_L + 10*tol*scale, proving no copy below was skipped.

    Deterministic given (pencil, L, tol, warm_start): the starting
    vector comes from a fixed internal seed unless warm_start supplies
    one. Raises EigenConvergenceError (carrying best residuals) if the
    iteration budget is exhausted.
    """
    A, B, n = _unpack(pencil)
    if not 1 <= L <= n:
        raise InputError(f"L={L} out of range for n_dof={n}")
    if not 0.0 < tol <= 1e-3:
        raise InputError(f"tol must lie in (0, 1e-3], got {tol}")
    diag_b = B.diagonal()
    if np.any(diag_b.real <= 0.0) or np.any(np.abs(diag_b.imag) > 1e-14):
        raise InputError("B must be real positive definite (bad diagonal)")

    op = ShiftInvertOperator(A, B, SIGMA)

    if warm_start is not None:
        v0 = np.asarray(warm_start, dtype=complex)
        v0 = v0.sum(axis=1) if v0.ndim == 2 else v0.copy()
    else:
        rng = np.random.default_rng(_V0_SEED)
        v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)

    max_steps = min(_MAX_STEPS_PER_L * L, n)
    locked_vals: list[float] = []
    locked_V = np.zeros((n, 0), dtype=complex)
    locked_U = np.zeros((n, 0), dtype=complex)  # B @ locked_V
    iterations = 0
    stalls = 0
    certified = False
    for sweep_no in range(L + 4 + _MAX_RESTARTS):
        if len(locked_vals) >= n:
            certified = True  # whole space locked; trivially complete
            break
        verifying = len(locked_vals) >= L
        want = 1 if verifying else L - len(locked_vals)
        vals, vecs, steps = _lanczos_sweep(
            op, v0, want, tol, max_steps, locked_V, locked_U
        )
        iterations += steps
        if verifying and vals.size:
            # a deflated sweep converged the complement's smallest value:
            # if it sits above the degeneracy window of lambda_L, nothing
            # below lambda_L was skipped
            lam_l = np.sort(locked_vals)[L - 1]
            window = lam_l + 10.0 * tol * max(abs(lam_l), 1.0)
            if vals[0] > window:
                certified = True
                break
        if vals.size == 0:
            stalls += 1
            if stalls > _MAX_RESTARTS:
                break
            rng = np.random.default_rng(_V0_SEED + 101 * stalls)
            v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            continue
        for i in range(vals.size):
            vec = vecs[:, i]
            for _ in range(2):  # keep the locked set B-orthonormal
                vec = vec - locked_V @ (locked_U.conj().T @ vec)
            u = B @ vec
            nrm = np.sqrt(max(float(np.real(np.vdot(vec, u))), 0.0))
            if nrm < 1e-13:
                continue
            vec, u = vec / nrm, u / nrm
            locked_V = np.concatenate([locked_V, vec[:, None]], axis=1)
            locked_U = np.concatenate([locked_U, u[:, None]], axis=1)
            locked_vals.append(float(vals[i]))
        rng = np.random.default_rng(_V0_SEED + 7 * len(locked_vals) + 13 * sweep_no)
        v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)

    if not certified or len(locked_vals) < L:
        best = (
            _finalize(A, B, locked_vals, locked_V, min(L, len(locked_vals)))
            if locked_vals
            else None
        )
        raise EigenConvergenceError(
            f"no certified convergence to tol={tol}: "
            f"{len(locked_vals)} pairs locked for L={L}",
            residuals=best.residuals if best is not None else None,
        )

    result = _finalize(A, B, locked_vals, locked_V, L)
    result.iterations = iterations
    if result.residuals.max() > tol:
        raise EigenConvergenceError(
            f"final residual {result.residuals.max():.2e} above tol={tol}",
            residuals=result.residuals,
        )
    return result


def _finalize(A, B, locked_vals, locked_V, L) -> EigResult:
    order = np.argsort(locked_vals)[:L]
    lams = np.array([locked_vals[i] for i in order])
    X = locked_V[:, order]
    BX = B @ X
    R = A @ X - BX * lams[None, :]
    residuals = np.linalg.norm(R, axis=0) / np.linalg.norm(BX, axis=0)
    return EigResult(clamp_lambdas(lams), X, residuals, 0)


def _lanczos_sweep(op, v0, want, tol, max_steps, locked_V, locked_U):
    """One Lanczos sweep in the B-inner product on T = (A - sigma B)^-1 B.

    The Krylov space is kept B-orthogonal to the locked (deflated)
    vectors, so Ritz pairs approximate the complement's spectrum.
    Returns every converged Ritz pair among the smallest (want + 2)
    eigenvalues found (residual <= tol), not only the requested ones.
    """
    A, B, sigma = op.A, op.B, op.sigma
    n = v0.shape[0]
    n_locked = locked_V.shape[1]
    max_steps = min(max_steps, n - n_locked)
    V = np.empty((n, max_steps), dtype=complex)
    U = np.empty_like(V)
    alphas: list[float] = []
    betas: list[float] = []

    def deflate(w):
        if n_locked:
            for _ in range(2):
                w = w - locked_V @ (locked_U.conj().T @ w)
        return w

    v = deflate(v0.astype(complex))
    u = B @ v
    nrm2 = float(np.real(np.vdot(v, u)))
    if nrm2 <= 1e-26:
        return np.empty(0), np.empty((n, 0), dtype=complex), 0
    if nrm2 < 0.0:
        raise InputError("B is not positive definite")
    v, u = v / np.sqrt(nrm2), u / np.sqrt(nrm2)
    V[:, 0], U[:, 0] = v, u

    steps = 0
    for j in range(max_steps):
        w = op.solve(U[:, j])
        alphas.append(float(np.real(np.vdot(U[:, j], w))))
        w -= alphas[j] * V[:, j]
        if j > 0:
            w -= betas[j - 1] * V[:, j - 1]
        for _ in range(2):  # full reorthogonalization, two passes
            coeffs = U[:, : j + 1].conj().T @ w
            w -= V[:, : j + 1] @ coeffs
        w = deflate(w)
        uw = B @ w
        beta2 = float(np.real(np.vdot(w, uw)))
        if beta2 < -1e-20:
            raise InputError("B is not positive definite")
        beta = np.sqrt(max(beta2, 0.0))
        steps = j + 1
        exhausted = beta < 1e-13
        if j + 1 >= min(want, max_steps) and (
            (j + 1) % _CHECK_EVERY == 0 or j == max_steps - 1 or exhausted
        ):
            vals, vecs, res = _ritz_pairs(
                A, B, sigma, V[:, : j + 1], alphas, betas, want + 2
            )
            good = _converged_prefix(res, tol)
            if good >= min(want, vals.size) or (exhausted and good > 0):
                return vals[:good], vecs[:, :good], steps
        if exhausted:
            break
        betas.append(beta)
        if j + 1 < max_steps:
            V[:, j + 1] = w / beta
            U[:, j + 1] = uw / beta

    if steps:
        vals, vecs, res = _ritz_pairs(
            A, B, sigma, V[:, :steps], alphas, betas, want + 2
        )
        good = _converged_prefix(res, tol)
        return vals[:good], vecs[:, :good], steps
    return np.empty(0), np.empty((n, 0), dtype=complex), steps


def _converged_prefix(residuals: np.ndarray, tol: float) -> int:
    """Length of the leading run of converged Ritz pairs.

    Only a contiguous prefix may be reported: a gap would let a caller
    mistake the next converged value for the complement's smallest.
    """
    below = residuals <= tol
    return int(np.argmin(below)) if not below.all() else below.size


def _ritz_pairs(A, B, sigma, V, alphas, betas, n_out):
    """Ritz extraction from the Lanczos tridiagonal plus true residuals."""
    j = V.shape[1]
    theta, Y = sla.eigh_tridiagonal(np.array(alphas[:j]), np.array(betas[: j - 1]))
    order = np.argsort(theta)[::-1][: min(n_out, j)]  # biggest theta, smallest lambda
    theta = theta[order]
    with np.errstate(divide="ignore"):
        lams = sigma + 1.0 / theta
    X = V @ Y[:, order]
    BX = B @ X
    R = A @ X - BX * lams[None, :]
    residuals = np.linalg.norm(R, axis=0) / np.linalg.norm(BX, axis=0)
    idx = np.argsort(lams)
    return lams[idx], X[:, idx], residuals[idx]


def dense_reference(pencil, L: int) -> EigResult:
    """Full-accuracy LAPACK eigendecomposition; the oracle path.

    Independent of solve_lowest: no shift, no Krylov iteration, plain
    generalized Hermitian solve on dense copies.
    """
    A, B, n = _unpack(pencil)
    if n > DENSE_MAX_N:
        raise InputError(f"dense reference capped at n={DENSE_MAX_N}, got {n}")
    if not 1 <= L <= n:
        raise InputError(f"L={L} out of range for n_dof={n}")
    try:
        w, Z = sla.eigh(A.toarray(), B.toarray())
    except np.linalg.LinAlgError as exc:
        raise InputError("B is not positive definite") from exc
    lams = clamp_lambdas(w[:L])
    X = Z[:, :L]
    BX = B @ X
    R = A @ X - BX * w[None, :L]
    residuals = np.linalg.norm(R, axis=0) / np.linalg.norm(BX, axis=0)
    return EigResult(lams, X, residuals, iterations=0)
