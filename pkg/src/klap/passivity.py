"""Passivity analysis: KYP feasibility, Riccati equations, certificates.

A stable system ``(A, B, C, D)`` is passive iff the Lur'e equations

.. math::

    A^T X + X A = -L L^T, \\qquad
    X B - C^T = -L M^T, \\qquad
    D + D^T = M M^T

admit a solution with ``X = X^T \\succeq 0``; equivalently the KYP block
matrix ``W(X)`` is PSD for some ``X``, and equivalently the Popov function
``Phi(i w) = G(i w) + G(i w)^H`` is PSD on the whole imaginary axis.  When
``R = D + D^T`` is invertible, the rank-minimizing solutions are exactly
the solutions of the algebraic Riccati equation

.. math::

    A^T X + X A + (C^T - X B) R^{-1} (C - B^T X) = 0,

whose solution set is an ordered lattice: the extremal solutions
``X_min <= X <= X_max`` are characterized through the closed-loop matrix
``Y(X) = A - B R^{-1} (C - B^T X)`` having spectrum in the closed left
(respectively right) half-plane.  The coincidence ``X_min = X_max`` —
i.e. a closed-loop spectrum entirely on the imaginary axis — certifies
that a candidate passivation cannot be improved upon.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import (
    NoSolutionError,
    SingularFeedthroughError,
)
from .linalg import sqrtm_psd
from .system import StateSpaceSystem, popov_eval, popov_scan

__all__ = [
    "AreSolution",
    "PassivityVerdict",
    "GlobalMinCertificate",
    "kyp_residual",
    "solve_are",
    "check_passive",
    "lure_residuals",
    "l_from_are",
    "global_min_certificate",
]

_log = logging.getLogger(__name__)

#: relative eigenvalue floor below which ``D + D^T`` counts as singular
FEEDTHROUGH_RTOL = 1e-12


def _feedthrough_gram(sys: StateSpaceSystem) -> tuple[np.ndarray, bool]:
    """``R = D + D^T`` and whether it is (numerically) positive definite."""
    R = sys.D + sys.D.T
    lam = np.linalg.eigvalsh(R)
    definite = bool(lam.min() > FEEDTHROUGH_RTOL * max(1.0, float(lam.max())))
    return R, definite


def kyp_residual(sys: StateSpaceSystem, X: np.ndarray) -> np.ndarray:
    """KYP block matrix

    ``W(X) = [[-A^T X - X A, C^T - X B], [C - B^T X, D + D^T]]``,

    symmetric of size ``(n + m, n + m)``.  The system is passive iff
    ``W(X) >= 0`` for some symmetric ``X >= 0``.
    """
    X = np.asarray(X, dtype=float)
    if X.shape != (sys.n, sys.n):
        raise ValueError(f"X must be {sys.n} x {sys.n}, got {X.shape}")
    top_left = -(sys.A.T @ X + X @ sys.A)
    top_right = sys.C.T - X @ sys.B
    W = np.block([[top_left, top_right], [top_right.T, sys.D + sys.D.T]])
    return 0.5 * (W + W.T)


@dataclass(frozen=True)
class AreSolution:
    """An extremal solution of the passivity Riccati equation.

    Attributes
    ----------
    X : (n, n) ndarray
        Symmetric solution.
    closed_loop_max_real : float
        Largest eigenvalue real part of ``Y(X) = A - B R^{-1} (C - B^T X)``;
        approximately ``<= 0`` for the minimal solution and ``>= 0`` for the
        maximal one.
    kind : str
        ``"minimal"`` or ``"maximal"``.
    newton_iterations : int
        Accepted Newton steps performed.
    residual : float
        Frobenius norm of the Riccati residual at ``X``.
    """

    X: np.ndarray
    closed_loop_max_real: float
    kind: str
    newton_iterations: int
    residual: float


def _are_residual(A, B, C, R, X) -> np.ndarray:
    F = np.linalg.solve(R, C - B.T @ X)
    return A.T @ X + X @ A + (C.T - X @ B) @ F


def _closed_loop(A, B, C, R, X) -> np.ndarray:
    return A - B @ np.linalg.solve(R, C - B.T @ X)


def _shift_stabilizing_gain(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Gain ``K`` with ``A - B K`` Hurwitz, via an eigenvalue shift.

    If ``A`` is already Hurwitz the zero gain works.  Otherwise shift by
    ``beta > spectral abscissa`` so that ``A + beta I`` is anti-stable,
    solve ``(A + beta I) P + P (A + beta I)^T = 2 B B^T`` and take
    ``K = B^T P^{-1}``; then ``(A - BK) P + P (A - BK)^T = -2 beta P`` is a
    Lyapunov stability certificate.
    """
    n = A.shape[0]
    if np.linalg.eigvals(A).real.max() < 0:
        return np.zeros((B.shape[1], n))
    beta = 1.0 + np.linalg.norm(A, "fro")
    P = scipy.linalg.solve_continuous_lyapunov(A + beta * np.eye(n), 2.0 * B @ B.T)
    P = 0.5 * (P + P.T)
    lam = np.linalg.eigvalsh(P)
    if lam.min() <= 1e-12 * max(1.0, lam.max()):
        raise NoSolutionError(
            "cannot construct a stabilizing initial gain: shifted Gramian is singular"
        )
    K = np.linalg.solve(P, B).T
    if np.linalg.eigvals(A - B @ K).real.max() >= 0:
        raise NoSolutionError("eigenvalue-shift stabilization failed")
    return K


def _newton_minimal(
    A: np.ndarray,
    B: np.ndarray,
    C: np.ndarray,
    R: np.ndarray,
    tol: float,
    max_iterations: int,
    K0: np.ndarray | None = None,
) -> tuple[np.ndarray, int, float]:
    """Damped Newton iteration for the minimal Riccati solution.

    Each accepted step solves one Lyapunov equation with the current
    closed loop ``Y_k = A - B K_k``; step damping keeps the closed loop
    Hurwitz and the residual non-increasing.  When the iteration stalls
    above tolerance (near-marginal problems), a Hamiltonian-Schur solve
    refines the iterate.  ``K0`` optionally supplies the stabilizing
    initial gain (it must make ``A - B K0`` Hurwitz).  Raises
    :class:`NoSolutionError` if no acceptable solution is found.
    """
    n = A.shape[0]
    K = _shift_stabilizing_gain(A, B) if K0 is None else K0
    X = np.zeros((n, n))
    res_norm = np.linalg.norm(_are_residual(A, B, C, R, X), "fro")
    best: tuple[np.ndarray, int, float] | None = None
    iterations = 0
    stalls = 0
    for _ in range(max_iterations):
        Y = A - B @ K
        if np.linalg.eigvals(Y).real.max() >= 0:
            break
        Q = C.T @ K + K.T @ C - K.T @ R @ K
        try:
            X_full = scipy.linalg.solve_continuous_lyapunov(Y.T, -Q)
        except np.linalg.LinAlgError:
            break
        X_full = 0.5 * (X_full + X_full.T)
        # damping: largest step in {1, 1/2, ...} that keeps the closed loop
        # stable and does not increase the residual
        accepted = False
        t = 1.0
        for _ in range(25):
            X_t = X + t * (X_full - X)
            Y_t = _closed_loop(A, B, C, R, X_t)
            if np.linalg.eigvals(Y_t).real.max() < 0:
                r_t = np.linalg.norm(_are_residual(A, B, C, R, X_t), "fro")
                if r_t <= res_norm or iterations == 0:
                    stalls = stalls + 1 if r_t > 0.5 * res_norm else 0
                    X, res_norm, accepted = X_t, r_t, True
                    break
            t *= 0.5
        if not accepted:
            break
        iterations += 1
        K = np.linalg.solve(R, C - B.T @ X)
        scale = max(1.0, float(np.linalg.norm(X, "fro")))
        if res_norm <= tol * scale:
            return X, iterations, res_norm
        if best is None or res_norm < best[2]:
            best = (X, iterations, res_norm)
        if stalls >= 5:
            break

    # Hamiltonian-Schur refinement for near-marginal problems where the
    # Newton basin collapses against the imaginary axis.
    if best is None:
        best = (X, iterations, res_norm)
    try:
        X_schur = scipy.linalg.solve_continuous_are(
            A, B, np.zeros_like(A), -R, s=-C.T
        )
        X_schur = 0.5 * (X_schur + X_schur.T)
        r_schur = np.linalg.norm(_are_residual(A, B, C, R, X_schur), "fro")
        if r_schur < best[2]:
            best = (X_schur, iterations, r_schur)
    except (np.linalg.LinAlgError, ValueError) as exc:
        _log.debug("Hamiltonian-Schur refinement unavailable: %s", exc)

    X, iterations, res_norm = best
    scale = max(1.0, float(np.linalg.norm(X, "fro")))
    axis_slack = 1e-8 * max(1.0, float(np.linalg.norm(A, "fro")))
    if res_norm <= tol * scale and np.linalg.eigvals(
        _closed_loop(A, B, C, R, X)
    ).real.max() <= axis_slack:
        return X, iterations, res_norm
    raise NoSolutionError(
        f"Riccati iteration did not converge (residual {res_norm:.3e} vs "
        f"tolerance {tol * scale:.3e}); the system is likely not strictly passive"
    )


def _newton_maximal(
    A: np.ndarray,
    B: np.ndarray,
    C: np.ndarray,
    R: np.ndarray,
    tol: float,
    max_iterations: int,
) -> tuple[np.ndarray, int, float]:
    """Maximal Riccati solution via the adjoint problem.

    ``X`` solves the Riccati equation iff ``X^{-1}`` solves the equation of
    the adjoint data ``(A^T, C^T, B^T)`` (multiply the equation by
    ``X^{-1}`` on both sides), and inversion reverses the ordering of the
    positive definite solution set — so the maximal solution is the inverse
    of the adjoint problem's minimal one.  ``A^T`` is Hurwitz, hence the
    adjoint Newton iteration starts from the zero gain and never needs a
    stabilizing-gain construction on anti-stable data.  If inversion
    amplifies the adjoint residual above tolerance, a Newton polish in the
    sign-reversed frame ``-X_min(-A, B, -C)`` — seeded with the inverted
    iterate, whose closed loop is already Hurwitz there — restores it.
    The unseeded sign-reversed route remains as a fallback for adjoint
    problems with a singular minimal solution (non-minimal realizations).
    """
    try:
        Y, iters, _ = _newton_minimal(A.T, C.T, B.T, R, tol, max_iterations)
        lam = np.linalg.eigvalsh(Y)
        if lam.min() > 1e3 * np.finfo(float).eps * max(1.0, float(lam.max())):
            X = np.linalg.inv(Y)
            X = 0.5 * (X + X.T)
            res = float(np.linalg.norm(_are_residual(A, B, C, R, X), "fro"))
            scale = max(1.0, float(np.linalg.norm(X, "fro")))
            if res <= tol * scale:
                return X, iters, res
            K_seed = np.linalg.solve(R, -C + B.T @ X)
            if np.linalg.eigvals(-A - B @ K_seed).real.max() < 0:
                X_rev, polish, _ = _newton_minimal(
                    -A, B, -C, R, tol, max_iterations, K0=K_seed
                )
                X = -0.5 * (X_rev + X_rev.T)
                res = float(np.linalg.norm(_are_residual(A, B, C, R, X), "fro"))
                return X, iters + polish, res
    except NoSolutionError as exc:
        _log.debug("adjoint route for the maximal solution failed: %s", exc)
    X_rev, iters, _ = _newton_minimal(-A, B, -C, R, tol, max_iterations)
    X = -0.5 * (X_rev + X_rev.T)
    res = float(np.linalg.norm(_are_residual(A, B, C, R, X), "fro"))
    return X, iters, res


def solve_are(
    sys: StateSpaceSystem,
    kind: str = "minimal",
    tol: float = 1e-10,
    max_iterations: int = 100,
) -> AreSolution:
    """Extremal solution of the passivity Riccati equation.

    Parameters
    ----------
    sys : StateSpaceSystem
        Must have ``D + D^T`` positive definite.
    kind : {"minimal", "maximal"}
        Which extremal solution to compute.  The maximal one is obtained as
        the inverse of the adjoint data's minimal solution (with a
        sign-reversed fallback, see :func:`_newton_maximal`); it exists
        chiefly for lattice-ordering diagnostics.
    tol : float
        Relative residual target: accept when
        ``||residual||_F <= tol * max(1, ||X||_F)``.  Near-marginal
        problems (systems barely inside the passive set) cannot reach
        ``1e-10``; callers that only need a usable interior point pass a
        relaxed tolerance.
    max_iterations : int
        Newton step budget.

    Raises
    ------
    SingularFeedthroughError
        If ``D + D^T`` is singular at working precision.
    NoSolutionError
        If the iteration fails — in particular when the system is not
        passivatable by its feedthrough, so no stabilizing solution exists.
    """
    if kind not in ("minimal", "maximal"):
        raise ValueError(f"kind must be 'minimal' or 'maximal', got {kind!r}")
    R, definite = _feedthrough_gram(sys)
    if not definite:
        raise SingularFeedthroughError(
            "D + D^T is singular; the Riccati form of the Lur'e equations "
            "requires a positive definite feedthrough Gram matrix"
        )
    A, B, C = sys.A, sys.B, sys.C
    if kind == "minimal":
        X, iters, res = _newton_minimal(A, B, C, R, tol, max_iterations)
    else:
        X, iters, res = _newton_maximal(A, B, C, R, tol, max_iterations)
    closed_loop_max_real = float(np.linalg.eigvals(_closed_loop(A, B, C, R, X)).real.max())
    return AreSolution(0.5 * (X + X.T), closed_loop_max_real, kind, iters, res)


@dataclass(frozen=True)
class PassivityVerdict:
    """Outcome of a passivity test.

    ``margin`` is signed: the smallest Popov eigenvalue found (grid scan or
    deciding sample), negative when the system is not passive.  ``method``
    records which route produced the verdict: ``"hamiltonian"``,
    ``"popov-scan"`` or ``"are"``.
    """

    passive: bool
    margin: float
    method: str


def _hamiltonian_matrix(sys: StateSpaceSystem, R: np.ndarray) -> np.ndarray:
    A, B, C = sys.A, sys.B, sys.C
    RinvC = np.linalg.solve(R, C)
    RinvBt = np.linalg.solve(R, B.T)
    Abar = A - B @ RinvC
    return np.block([[Abar, -B @ RinvBt], [C.T @ RinvC, -Abar.T]])


def check_passive(
    sys: StateSpaceSystem,
    tol: float = 1e-8,
    method: str = "auto",
    grid: np.ndarray | None = None,
) -> PassivityVerdict:
    """Decide whether a stable system is passive.

    Three routes are available:

    ``"hamiltonian"`` (default when ``D + D^T`` is positive definite)
        Singular frequencies of the Popov function are exactly the purely
        imaginary eigenvalues of an associated Hamiltonian matrix.  If no
        eigenvalue lies near the axis, the Popov function never changes
        definiteness and a single interior sample decides the sign.  Near-
        axis eigenvalues (definiteness crossings, or the numerically split
        double roots produced by boundary-touching systems) defer to the
        grid scan, whose signed margin plus tolerance absorbs boundary
        roundoff.

    ``"popov-scan"``
        Sweep ``lambda_min(Phi(i w))`` on a frequency grid; passive iff the
        grid minimum is ``>= -tol * scale``.  Sole route when ``D + D^T``
        is singular.

    ``"are"``
        Feasibility probe: passive iff the minimal Riccati solution exists.

    Parameters
    ----------
    tol : float
        Relative tolerance on the signed margin: boundary systems produced
        by passivation land within ``-tol * scale`` of zero.
    """
    if method not in ("auto", "hamiltonian", "popov-scan", "are"):
        raise ValueError(f"unknown method {method!r}")
    R, definite = _feedthrough_gram(sys)

    if method == "are":
        if not definite:
            raise SingularFeedthroughError(
                "the ARE feasibility probe needs D + D^T positive definite"
            )
        try:
            sol = solve_are(sys, "minimal", tol=1e-8)
            return PassivityVerdict(True, -sol.closed_loop_max_real, "are")
        except NoSolutionError:
            scan = popov_scan(sys, grid=grid)
            return PassivityVerdict(False, scan.global_min, "are")

    if method in ("auto", "hamiltonian") and definite:
        H = _hamiltonian_matrix(sys, R)
        ev = np.linalg.eigvals(H)
        axis_dist = float(np.abs(ev.real).min())
        axis_tol = 1e-9 * max(1.0, float(np.linalg.norm(H, "fro")))
        if axis_dist > axis_tol:
            # no definiteness crossings anywhere: one sample decides
            rho = max(1.0, float(np.abs(np.linalg.eigvals(sys.A)).max()))
            sample = float(np.linalg.eigvalsh(popov_eval(sys, rho)).min())
            return PassivityVerdict(sample > 0.0, sample, "hamiltonian")
        # near-axis eigenvalues: definiteness crossings or a boundary-touching
        # Popov function; defer to the tolerance-aware grid scan below
    elif method == "hamiltonian" and not definite:
        raise SingularFeedthroughError(
            "the Hamiltonian passivity test needs D + D^T positive definite"
        )

    scan = popov_scan(sys, grid=grid)
    scale = max(1.0, float(np.abs(scan.min_eigenvalues).max()))
    return PassivityVerdict(scan.global_min >= -tol * scale, scan.global_min, "popov-scan")


def lure_residuals(
    sys: StateSpaceSystem,
    X: np.ndarray,
    L: np.ndarray,
    M: np.ndarray,
) -> tuple[float, float, float]:
    """Frobenius norms of the three Lur'e equation defects
    ``(A^T X + X A + L L^T, X B - C^T + L M^T, D + D^T - M M^T)``."""
    X = np.asarray(X, dtype=float)
    L = np.asarray(L, dtype=float)
    M = np.asarray(M, dtype=float)
    r_state = np.linalg.norm(sys.A.T @ X + X @ sys.A + L @ L.T, "fro")
    r_output = np.linalg.norm(X @ sys.B - sys.C.T + L @ M.T, "fro")
    r_feed = np.linalg.norm(sys.D + sys.D.T - M @ M.T, "fro")
    return float(r_state), float(r_output), float(r_feed)


def l_from_are(sys: StateSpaceSystem, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Recover the Lur'e factor pair ``(L, M)`` from a Riccati solution.

    ``M`` is the symmetric PSD square root of ``D + D^T`` and
    ``L = (C^T - X B) M^{-1}``; together with ``X`` they satisfy all three
    Lur'e equations exactly (up to the Riccati residual of ``X``).

    Raises
    ------
    SingularFeedthroughError
        If ``D + D^T`` is singular.
    """
    R, definite = _feedthrough_gram(sys)
    if not definite:
        raise SingularFeedthroughError("cannot invert M: D + D^T is singular")
    M = sqrtm_psd(R)
    X = np.asarray(X, dtype=float)
    L = np.linalg.solve(M, (sys.C.T - X @ sys.B).T).T
    return L, M


@dataclass(frozen=True)
class GlobalMinCertificate:
    """Spectral certificate that a candidate passivation is unimprovable.

    For an output map produced by a Lur'e factor ``L`` (with
    ``D + D^T = M M^T`` invertible), the closed-loop matrix
    ``Y = A - B R^{-1} M L^T`` has spectrum on the imaginary axis exactly
    when the extremal Riccati solutions of the passivated system coincide —
    in which case no better passive approximation exists and the candidate
    is a global optimum.  ``is_global_candidate`` reports
    ``max |Re lambda(Y)| <= tolerance``.

    A zero feedthrough Gram matrix (``M = 0``) makes every local optimum
    global; the certificate is then vacuous: ``is_global_candidate`` is
    true and the eigenvalue list is empty.
    """

    eigenvalues: np.ndarray
    max_abs_real: float
    tolerance: float
    is_global_candidate: bool
    vacuous: bool = field(default=False)


def global_min_certificate(
    sys: StateSpaceSystem,
    M: np.ndarray,
    L: np.ndarray,
    tol: float | None = None,
) -> GlobalMinCertificate:
    """Evaluate the spectral global-optimality certificate at ``L``.

    Parameters
    ----------
    sys : StateSpaceSystem
        The *original* (to-be-passivated) system.
    M : (m, m) ndarray
        Square root of ``D + D^T`` (may be zero).
    L : (n, m) ndarray
        Candidate Lur'e factor.
    tol : float, optional
        Axis tolerance; defaults to ``1e-6 * ||A||_F``.

    Raises
    ------
    SingularFeedthroughError
        If ``M`` is nonzero but ``D + D^T`` is singular.
    """
    if tol is None:
        tol = 1e-6 * float(np.linalg.norm(sys.A, "fro"))
    M = np.asarray(M, dtype=float)
    L = np.asarray(L, dtype=float)
    R, definite = _feedthrough_gram(sys)
    if not definite:
        if np.linalg.norm(M, "fro") > 0.0:
            raise SingularFeedthroughError(
                "certificate needs D + D^T positive definite when M != 0"
            )
        return GlobalMinCertificate(
            np.empty(0, dtype=complex), 0.0, float(tol), True, vacuous=True
        )
    Y = sys.A - sys.B @ np.linalg.solve(R, M @ L.T)
    ev = np.linalg.eigvals(Y)
    max_abs_real = float(np.abs(ev.real).max())
    return GlobalMinCertificate(ev, max_abs_real, float(tol), max_abs_real <= tol)
