"""Linear time-invariant state-space types and robust-control numerics.

This module provides the small LTI toolbox the gap-metric machinery is
built on: a `StateSpace` container (continuous or discrete), frequency
response evaluation, a stabilizing continuous algebraic Riccati solver
based on the ordered Schur form of the Hamiltonian, an H-infinity norm
computed by bisection on the imaginary-axis-eigenvalue test, normalized
(right and left) coprime factorizations, and zero-order-hold / forward
Euler discretization.

All functions are pure; `StateSpace` instances are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import NumericsError

__all__ = [
    "StateSpace",
    "CoprimeFactors",
    "FrequencyGrid",
    "freq_response",
    "solve_care",
    "hinf_norm",
    "normalized_coprime",
    "normalized_left_coprime",
    "c2d",
    "default_grid",
]

_EIG_AXIS_TOL = 1e-9


def _as_matrix(M, rows=None, cols=None):
    A = np.atleast_2d(np.asarray(M, dtype=float))
    if rows is not None and A.shape == (1, 0):
        A = A.reshape(rows, cols if cols is not None else 0)
    return A


@dataclass(frozen=True)
class StateSpace:
    """State-space model ``(A, B, C, D)``, continuous or discrete.

    ``dt is None`` marks a continuous-time model; a positive ``dt`` is the
    sample period of a discrete-time model.  Matrices are validated for
    dimensional consistency and frozen (made non-writeable) so instances
    can be shared freely.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    dt: float | None = None

    def __post_init__(self):
        A = _as_matrix(self.A)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        B = _as_matrix(self.B, n, None)
        if B.size == 0:
            B = B.reshape(n, B.shape[1] if B.ndim == 2 else 0)
        if B.shape[0] != n:
            raise ValueError(f"B has {B.shape[0]} rows, expected {n}")
        C = _as_matrix(self.C, None, n)
        if C.size == 0:
            C = C.reshape(C.shape[0] if C.ndim == 2 else 0, n)
        if C.shape[1] != n:
            raise ValueError(f"C has {C.shape[1]} cols, expected {n}")
        D = _as_matrix(self.D)
        if D.shape != (C.shape[0], B.shape[1]):
            raise ValueError(
                f"D must be {C.shape[0]}x{B.shape[1]}, got {D.shape}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("sample period must be positive")
        for name, M in (("A", A), ("B", B), ("C", C), ("D", D)):
            M = np.ascontiguousarray(M)
            M.flags.writeable = False
            object.__setattr__(self, name, M)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    @property
    def is_discrete(self) -> bool:
        return self.dt is not None

    def poles(self) -> np.ndarray:
        if self.n_states == 0:
            return np.zeros(0, dtype=complex)
        return sla.eigvals(self.A)

    def is_stable(self, margin: float = 0.0) -> bool:
        """True if all poles are strictly inside the stability region."""
        p = self.poles()
        if self.is_discrete:
            return bool(np.all(np.abs(p) < 1.0 - margin))
        return bool(np.all(p.real < -margin))

    def __repr__(self):
        kind = f"discrete(dt={self.dt})" if self.is_discrete else "continuous"
        return (f"StateSpace(n={self.n_states}, m={self.n_inputs}, "
                f"p={self.n_outputs}, {kind})")


@dataclass(frozen=True)
class CoprimeFactors:
    """Normalized right coprime factorization ``G = N @ inv(D)``.

    Both factors are stable and share the time domain of the source
    system; on the evaluation contour the stacked response ``[D; N]`` is
    an isometry (all singular values equal one).
    """

    N: StateSpace
    D: StateSpace

    def stacked(self) -> StateSpace:
        """Single realization of ``[D; N]`` (shared states)."""
        N, D = self.N, self.D
        if N.n_states != D.n_states or not np.array_equal(N.A, D.A):
            raise ValueError("factors do not share a realization")
        return StateSpace(N.A, N.B,
                          np.vstack([D.C, N.C]), np.vstack([D.D, N.D]),
                          dt=N.dt)


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing angular-frequency grid in rad/s."""

    points: np.ndarray = field(
        default_factory=lambda: np.logspace(-2, 4, 400))

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("grid must be a nonempty 1-D array")
        if np.any(pts <= 0) or np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be positive and increasing")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)


def default_grid() -> FrequencyGrid:
    """400 log-spaced points over [1e-2, 1e4] rad/s."""
    return FrequencyGrid()


def freq_response(sys: StateSpace, grid: FrequencyGrid) -> list[np.ndarray]:
    """Evaluate ``C (zI - A)^-1 B + D`` on a frequency grid.

    ``z = j*w`` for continuous systems and ``z = exp(j*w*dt)`` for
    discrete ones.  Raises `NumericsError` naming the offending frequency
    if ``zI - A`` is singular at a grid point.
    """
    out = []
    n = sys.n_states
    I = np.eye(n)
    for w in grid.points:
        z = np.exp(1j * w * sys.dt) if sys.is_discrete else 1j * w
        if n == 0:
            out.append(sys.D.astype(complex))
            continue
        try:
            sol = sla.solve(z * I - sys.A, sys.B)
        except sla.LinAlgError as exc:
            raise NumericsError(
                f"frequency response singular at w={w:g} rad/s") from exc
        out.append(sys.C @ sol + sys.D)
    return out


# ---------------------------------------------------------------------------
# Riccati machinery
# ---------------------------------------------------------------------------

def _stable_invariant_solution(H: np.ndarray, n: int) -> np.ndarray:
    """X spanning the stable invariant subspace of a 2n x 2n Hamiltonian.

    Orders the real Schur form so the n open-left-half-plane eigenvalues
    lead, then returns ``X = Z21 @ inv(Z11)`` (symmetrized).
    """
    T, Z, sdim = sla.schur(H, output="real", sort="lhp")
    if sdim != n:
        raise NumericsError(
            "Hamiltonian has eigenvalues on the imaginary axis; "
            "no stabilizing solution")
    Z11 = Z[:n, :n]
    Z21 = Z[n:, :n]
    try:
        X = sla.solve(Z11.T, Z21.T).T
    except sla.LinAlgError as exc:
        raise NumericsError("stable invariant subspace is not a graph "
                            "subspace") from exc
    return 0.5 * (X + X.T)


def solve_care(A, B, Q, R) -> np.ndarray:
    """Stabilizing solution of ``A'X + XA - X B inv(R) B' X + Q = 0``.

    Solved through the ordered real Schur decomposition of the associated
    Hamiltonian.  Requires symmetric ``Q`` (PSD) and ``R`` (PD) and a
    stabilizable/detectable problem; rejects non-symmetric weight inputs
    and refuses to return a solution whose residual exceeds
    ``1e-8 * (1 + ||X||_F)``.
    """
    A = _as_matrix(A)
    B = _as_matrix(B, A.shape[0])
    Q = _as_matrix(Q)
    R = _as_matrix(R)
    n = A.shape[0]
    if not np.allclose(Q, Q.T, atol=1e-10 * (1 + abs(Q).max())):
        raise ValueError("Q must be symmetric")
    if not np.allclose(R, R.T, atol=1e-10 * (1 + abs(R).max())):
        raise ValueError("R must be symmetric")
    Rinv_Bt = sla.solve(R, B.T, assume_a="sym")
    H = np.block([[A, -B @ Rinv_Bt],
                  [-Q, -A.T]])
    X = _stable_invariant_solution(H, n)

    def residual(X):
        return A.T @ X + X @ A - X @ B @ sla.solve(R, B.T @ X) + Q

    res = residual(X)
    tol = 1e-8 * (1.0 + sla.norm(X, "fro"))
    if sla.norm(res, "fro") >= tol:
        # one Newton polish step: Acl' dX + dX Acl + res = 0
        Acl = A - B @ Rinv_Bt @ X
        try:
            dX = sla.solve_sylvester(Acl.T, Acl, -res)
            Xp = 0.5 * ((X + dX) + (X + dX).T)
            if sla.norm(residual(Xp), "fro") < sla.norm(res, "fro"):
                X = Xp
        except sla.LinAlgError:
            pass
        if sla.norm(residual(X), "fro") >= tol:
            raise NumericsError("Riccati residual above tolerance")
    return X


# ---------------------------------------------------------------------------
# H-infinity norm
# ---------------------------------------------------------------------------

def _gamma_hamiltonian(sys: StateSpace, gamma: float) -> np.ndarray:
    """Hamiltonian whose imaginary-axis eigenvalues flag ``||G||_inf >= gamma``."""
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    R = gamma ** 2 * np.eye(sys.n_inputs) - D.T @ D
    Rinv = sla.inv(R)
    Abar = A + B @ Rinv @ D.T @ C
    return np.block([
        [Abar, B @ Rinv @ B.T],
        [-C.T @ (np.eye(sys.n_outputs) + D @ Rinv @ D.T) @ C, -Abar.T],
    ])


def _has_imaginary_eigs(H: np.ndarray, scale: float) -> bool:
    eigs = sla.eigvals(H)
    return bool(np.any(np.abs(eigs.real) <= _EIG_AXIS_TOL * max(1.0, scale)))

def _sigma_max_at(sys: StateSpace, w: float) -> float:
    resp = freq_response(sys, FrequencyGrid(np.array([w])))[0]
    return float(sla.svdvals(resp)[0]) if resp.size else 0.0


def _to_continuous_bilinear(sys: StateSpace) -> StateSpace:
    """Exact H-infinity-norm-preserving bilinear map of a discrete system.

    The Moebius transform z = (1 + s T/2) / (1 - s T/2) maps the unit
    circle onto the imaginary axis, so boundary values (and hence the
    norm) are preserved.  Requires no pole at z = -1.
    """
    T = sys.dt
    n = sys.n_states
    I = np.eye(n)
    try:
        Minv = sla.inv(I + sys.A)
    except sla.LinAlgError as exc:
        raise NumericsError("bilinear map undefined: pole at z = -1") from exc
    k = 2.0 / np.sqrt(T)
    Ac = (2.0 / T) * (sys.A - I) @ Minv
    Bc = k * Minv @ sys.B
    Cc = k * sys.C @ Minv
    Dc = sys.D - sys.C @ Minv @ sys.B
    return StateSpace(Ac, Bc, Cc, Dc, dt=None)


def hinf_norm(sys: StateSpace, tol: float = 1e-6) -> float:
    """H-infinity norm of a stable system, to relative accuracy ``tol``.

    Continuous systems use bisection on the imaginary-axis-eigenvalue
    test of the bounded-real Hamiltonian; discrete systems are first
    mapped through the norm-preserving bilinear transform.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not sys.is_stable():
        raise NumericsError("H-infinity norm undefined for unstable system")
    if sys.is_discrete:
        return hinf_norm(_to_continuous_bilinear(sys), tol)
    if sys.n_states == 0:
        return float(sla.svdvals(sys.D)[0]) if sys.D.size else 0.0

    # initial lower bound: feedthrough plus a probe sweep biased toward the
    # least-damped pole frequency
    probes = [0.0]
    p = sys.poles()
    wp = np.abs(p.imag[np.abs(p.imag) > 0])
    probes.extend(np.abs(p))
    probes.extend(wp)
    lo = float(sla.svdvals(sys.D)[0]) if sys.D.size else 0.0
    for w in probes:
        if w == 0.0:
            if sys.n_states:
                try:
                    g0 = sys.C @ sla.solve(-sys.A, sys.B) + sys.D
                    lo = max(lo, float(sla.svdvals(g0)[0]))
                except sla.LinAlgError:
                    pass
        else:
            lo = max(lo, _sigma_max_at(sys, w))
    scale = max(1.0, abs(sys.A).max())
    if lo == 0.0:
        # zero transfer function shortcut: probe a couple more points
        if all(_sigma_max_at(sys, w) == 0.0 for w in (1e-3, 1.0, 1e3)):
            return 0.0
        lo = 1e-12

    hi = 2.0 * lo
    while _has_imaginary_eigs(_gamma_hamiltonian(sys, hi), scale):
        hi *= 2.0
        if hi > 1e16 * max(lo, 1.0):
            raise NumericsError("H-infinity bisection failed to bracket")
    lo_b = lo
    while hi - lo_b > tol * lo_b and hi - lo_b > 1e-14:
        mid = 0.5 * (hi + lo_b)
        if _has_imaginary_eigs(_gamma_hamiltonian(sys, mid), scale):
            lo_b = mid
        else:
            hi = mid
    return 0.5 * (hi + lo_b)


# ---------------------------------------------------------------------------
# Normalized coprime factorizations
# ---------------------------------------------------------------------------

def normalized_coprime(sys: StateSpace) -> CoprimeFactors:
    """Normalized right coprime factorization ``G = N inv(D)``.

    Built from the stabilizing Riccati solution through the standard
    state-feedback realization; both factors are stable and the stacked
    response ``[D; N]`` is an isometry on the evaluation contour.
    Requires ``(A, B)`` stabilizable and ``(C, A)`` detectable.
    """
    if sys.is_discrete:
        raise NotImplementedError(
            "coprime factorization implemented for continuous systems; "
            "discretize after gap analysis")
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    n, m = sys.n_states, sys.n_inputs
    if n == 0:
        raise ValueError("static systems have trivial factorizations")
    S = np.eye(m) + D.T @ D
    Sinv = sla.inv(S)
    Rt = np.eye(sys.n_outputs) + D @ D.T
    X = solve_care(A - B @ Sinv @ D.T @ C, B,
                   C.T @ sla.solve(Rt, C), S)
    F = -Sinv @ (B.T @ X + D.T @ C)
    Af = A + B @ F
    Shalf = sla.sqrtm(Sinv).real
    Nf = StateSpace(Af, B @ Shalf, C + D @ F, D @ Shalf)
    Df = StateSpace(Af, B @ Shalf, F, Shalf)
    return CoprimeFactors(N=Nf, D=Df)


def normalized_left_coprime(sys: StateSpace) -> tuple[StateSpace, StateSpace]:
    """Normalized left coprime factorization ``G = inv(Dl) Nl``.

    Returns ``(Nl, Dl)`` with ``[Dl, Nl]`` co-inner; the dual of
    `normalized_coprime`.
    """
    if sys.is_discrete:
        raise NotImplementedError("continuous systems only")
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    p = sys.n_outputs
    S = np.eye(sys.n_inputs) + D.T @ D
    Rt = np.eye(p) + D @ D.T
    Rtinv = sla.inv(Rt)
    Y = solve_care((A - B @ D.T @ Rtinv @ C).T, C.T,
                   B @ sla.solve(S, B.T), Rt)
    L = -(Y @ C.T + B @ D.T) @ Rtinv
    Al = A + L @ C
    Rhalf = sla.sqrtm(Rtinv).real
    Nl = StateSpace(Al, B + L @ D, Rhalf @ C, Rhalf @ D)
    Dl = StateSpace(Al, L, Rhalf @ C, Rhalf)
    return Nl, Dl


# ---------------------------------------------------------------------------
# Discretization
# ---------------------------------------------------------------------------

def c2d(sys: StateSpace, T_s: float, method: str = "zoh") -> StateSpace:
    """Discretize a continuous system with sample period ``T_s``.

    ``zoh`` exponentiates the augmented ``[A B; 0 0]`` block; ``euler``
    uses ``A_d = I + T_s A``, ``B_d = T_s B``.
    """
    if sys.is_discrete:
        raise ValueError("system is already discrete")
    if not T_s > 0:
        raise ValueError("sample period must be positive")
    n, m = sys.n_states, sys.n_inputs
    if method == "zoh":
        M = np.zeros((n + m, n + m))
        M[:n, :n] = sys.A
        M[:n, n:] = sys.B
        E = sla.expm(M * T_s)
        Ad, Bd = E[:n, :n], E[:n, n:]
    elif method == "euler":
        Ad = np.eye(n) + T_s * sys.A
        Bd = T_s * sys.B
    else:
        raise ValueError(f"unknown method {method!r}")
    return StateSpace(Ad, Bd, sys.C, sys.D, dt=T_s)


# ---------------------------------------------------------------------------
# State-space algebra used by the gap computation
# ---------------------------------------------------------------------------

def ss_adjoint(sys: StateSpace) -> StateSpace:
    """Adjoint ``G~(s) = G(-s)^T`` (continuous systems)."""
    return StateSpace(-sys.A.T, -sys.C.T, sys.B.T, sys.D.T, dt=sys.dt)


def ss_cascade(first: StateSpace, second: StateSpace) -> StateSpace:
    """Series interconnection ``u -> first -> second`` (= second * first)."""
    if first.dt != second.dt:
        raise ValueError("time-domain mismatch")
    n1, n2 = first.n_states, second.n_states
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = first.A
    A[n1:, n1:] = second.A
    A[n1:, :n1] = second.B @ first.C
    B = np.vstack([first.B, second.B @ first.D])
    C = np.hstack([second.D @ first.C, second.C])
    D = second.D @ first.D
    return StateSpace(A, B, C, D, dt=first.dt)


def ss_add(g1: StateSpace, g2: StateSpace, sign: float = 1.0) -> StateSpace:
    """Parallel sum ``g1 + sign * g2``."""
    if g1.dt != g2.dt:
        raise ValueError("time-domain mismatch")
    A = sla.block_diag(g1.A, g2.A)
    B = np.vstack([g1.B, g2.B])
    C = np.hstack([g1.C, sign * g2.C])
    D = g1.D + sign * g2.D
    return StateSpace(A, B, C, D, dt=g1.dt)


def ss_hstack(g1: StateSpace, g2: StateSpace) -> StateSpace:
    """Row concatenation ``[g1, g2]`` (shared outputs, stacked inputs)."""
    if g1.dt != g2.dt:
        raise ValueError("time-domain mismatch")
    A = sla.block_diag(g1.A, g2.A)
    B = sla.block_diag(g1.B, g2.B)
    C = np.hstack([g1.C, g2.C])
    D = np.hstack([g1.D, g2.D])
    return StateSpace(A, B, C, D, dt=g1.dt)


def stable_antistable_split(sys: StateSpace):
    """Additive decomposition ``G = G_s + G_a + D`` along the imaginary axis.

    Returns ``(stable, antistable)`` strictly-proper parts; the
    feedthrough is carried by the stable term.  Raises `NumericsError` on
    eigenvalues too close to the axis to classify.
    """
    n = sys.n_states
    if n == 0:
        return sys, StateSpace(np.zeros((0, 0)), np.zeros((0, sys.n_inputs)),
                               np.zeros((sys.n_outputs, 0)), np.zeros_like(sys.D))
    T, Z, ns = sla.schur(sys.A, output="real", sort="lhp")
    eigs = sla.eigvals(sys.A)
    scale = max(1.0, abs(sys.A).max())
    if np.any(np.abs(eigs.real) <= _EIG_AXIS_TOL * scale):
        raise NumericsError("eigenvalue on the imaginary axis; additive "
                            "decomposition undefined")
    Bt = Z.T @ sys.B
    Ct = sys.C @ Z
    A11, A12, A22 = T[:ns, :ns], T[:ns, ns:], T[ns:, ns:]
    if ns == n:
        return sys, StateSpace(np.zeros((0, 0)), np.zeros((0, sys.n_inputs)),
                               np.zeros((sys.n_outputs, 0)), np.zeros_like(sys.D))
    if ns == 0:
        zero = StateSpace(np.zeros((0, 0)), np.zeros((0, sys.n_inputs)),
                          np.zeros((sys.n_outputs, 0)), sys.D)
        return zero, StateSpace(T, Bt, Ct, np.zeros_like(sys.D))
    # decouple: A11 Y - Y A22 + A12 = 0
    Y = sla.solve_sylvester(A11, -A22, -A12)
    B1 = Bt[:ns] - Y @ Bt[ns:]
    B2 = Bt[ns:]
    C1 = Ct[:, :ns]
    C2 = Ct[:, :ns] @ Y + Ct[:, ns:]
    stable = StateSpace(A11, B1, C1, sys.D)
    antistable = StateSpace(A22, B2, C2, np.zeros_like(sys.D))
    return stable, antistable


def hankel_norm_antistable(sys: StateSpace) -> float:
    """L-infinity distance from an antistable ``G`` to H-infinity.

    Equals the Hankel norm of the reflected system: with
    ``A P + P A' = B B'`` and ``A' Q + Q A = C' C`` (both PSD when all
    poles are in the open right half-plane), the norm is
    ``sqrt(max eig(P Q))``.
    """
    if sys.n_states == 0:
        return 0.0
    P = sla.solve_sylvester(sys.A, sys.A.T, sys.B @ sys.B.T)
    Q = sla.solve_sylvester(sys.A.T, sys.A, sys.C.T @ sys.C)
    ev = sla.eigvals(P @ Q)
    lam = float(np.max(ev.real))
    return float(np.sqrt(max(lam, 0.0)))


def spectral_factor_inverse(g: StateSpace, gamma: float):
    """Outer spectral factor of ``gamma^2 I - G~ G`` and its inverse.

    For stable ``G`` with ``||G||_inf < gamma`` returns ``(W, Winv)``
    with ``W~ W = gamma^2 I - G~ G`` and both ``W`` and ``Winv`` stable.
    Raises `NumericsError` when gamma is not above the norm of ``G``.
    """
    A, B, C, D = g.A, g.B, g.C, g.D
    n, m = g.n_states, g.n_inputs
    R = gamma ** 2 * np.eye(m) - D.T @ D
    try:
        sla.cholesky(R)
    except sla.LinAlgError as exc:
        raise NumericsError("gamma below feedthrough gain") from exc
    H = _gamma_hamiltonian(g, gamma)
    scale = max(1.0, abs(A).max())
    if _has_imaginary_eigs(H, scale):
        raise NumericsError("gamma not above the H-infinity norm of G")
    X = _stable_invariant_solution(H, n)
    Dw = sla.cholesky(R)            # upper triangular, Dw' Dw = R
    Cw = -sla.solve_triangular(Dw, (B.T @ X + D.T @ C), trans="T")
    W = StateSpace(A, B, Cw, Dw)
    Dwi = sla.inv(Dw)
    Winv = StateSpace(A - B @ Dwi @ Cw, B @ Dwi, -Dwi @ Cw, Dwi)
    return W, Winv
