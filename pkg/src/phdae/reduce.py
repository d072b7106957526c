"""Index-one canonical form and reduction, high-index regularization and the
dedicated gas-network split.

Index one
    :func:`index_one_canonical` brings a pHDAE of differentiation index at
    most one into block form::

        [E11 0] [x1']   ( [L11 L12] [Q11  0 ]   [E11 K11  E11 K12] )
        [ 0  0] [x2'] = ( [L21 L22] [ 0  Q22] - [   0        0   ] ) x + [B1 - P1; B2 - P2] u

    with ``(J12 - R12) Q22 - E11 K12 = 0``, using three successive
    congruences (SVD of ``E``, a lower block shear on the left to cancel the
    coupling, and a lower block shear on the right to make ``Q`` block
    diagonal). :func:`reduce_index_one` then eliminates ``x2``.

Higher index
    :func:`regularize_high_index` appends the hidden constraints found by the
    strangeness analysis, changes variables so that they read ``x3 = 0``,
    rotates the equations so that ``Q`` has zero rows in the ``(x1, x2)``
    columns and keeps the leading square subsystem.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from .exceptions import (HighIndexError, InconsistentInitialValueError, RankAssumptionError,
                         StructureError, TimeVaryingError)
from .index import IndexData, check_index_le_one, strangeness_analysis
from .linalg import DEFAULT_RANK_TOL, complement, fix_signs, left_null_space, norm2, svd_split
from .matfun import MatFun, chebyshev_points, fit, pointwise
from .system import DEFAULT_GRID, PHDAESystem, verify_structure
from .transform import TransformPair, congruence

__all__ = [
    "CanonicalIndexOne",
    "index_one_canonical",
    "ReducedSystem",
    "reduce_index_one",
    "Regularization",
    "regularize_high_index",
    "GasReduction",
    "gas_reduction",
]


def _svd_factors(sys: PHDAESystem, rank_tol: float, grid_points: int, max_degree: int,
                 fit_tol: float):
    """Orthogonal ``U, V`` (as MatFuns) with ``U^T E V = blkdiag(E11, 0)`` and the rank of E."""
    E = sys.E
    if E.is_constant:
        U, _, V, r = svd_split(E.coeff(0), rank_tol)
        return MatFun.constant(U), MatFun.constant(V), r, 0.0
    ranks = {svd_split(E.eval(t), rank_tol)[3] for t in sys.grid(grid_points)}
    if len(ranks) != 1:
        raise RankAssumptionError(f"rank of E changes on the grid: {sorted(ranks)}")
    r = ranks.pop()

    def factors(t):
        U, _, V, _ = svd_split(E.eval(t), rank_tol)
        # the kernel columns of U are not tied to V, fix their signs separately
        Ur = U.copy()
        for j in range(r, Ur.shape[1]):
            col = Ur[:, j]
            nz = np.flatnonzero(np.abs(col) > 1e-12)
            if nz.size and col[nz[0]] < 0:
                Ur[:, j] = -col
        return Ur, V

    Uf, ru = fit(lambda t: factors(t)[0], sys.t0, sys.tf, max_degree, fit_tol)
    Vf, rv = fit(lambda t: factors(t)[1], sys.t0, sys.tf, max_degree, fit_tol)
    return Uf, Vf, r, max(ru, rv)


@dataclass
class CanonicalIndexOne:
    """Canonical block form of an index-at-most-one pHDAE.

    ``system`` is the transformed pHDAE ``congruence(original, (U, V))`` whose
    coefficients have the block pattern described in the module docstring;
    ``x = V x~`` links the coordinates. Block accessors return MatFuns.
    """

    system: PHDAESystem
    U: MatFun
    V: MatFun
    n1: int
    n2: int
    residuals: dict = field(default_factory=dict)
    conditioning: dict = field(default_factory=dict)
    fit_residual: float = 0.0

    def block(self, name: str, i: int, j: int | None = None) -> MatFun:
        s1 = slice(0, self.n1)
        s2 = slice(self.n1, self.n1 + self.n2)
        rows = s1 if i == 1 else s2
        M = getattr(self.system, name)
        if name in ("B", "P"):
            return M[rows, slice(0, self.system.m)]
        cols = s1 if j == 1 else s2
        return M[rows, cols]

    @property
    def E11(self): return self.block("E", 1, 1)
    @property
    def Q11(self): return self.block("Q", 1, 1)
    @property
    def Q22(self): return self.block("Q", 2, 2)
    @property
    def K11(self): return self.block("K", 1, 1)
    @property
    def K12(self): return self.block("K", 1, 2)
    @property
    def B1(self): return self.block("B", 1)
    @property
    def B2(self): return self.block("B", 2)
    @property
    def P1(self): return self.block("P", 1)
    @property
    def P2(self): return self.block("P", 2)

    def L(self, i: int, j: int) -> MatFun:
        return self.block("J", i, j) - self.block("R", i, j)

    def coupling_residual(self, t: float) -> float:
        """``||(J12 - R12) Q22 - E11 K12||`` at ``t``."""
        if self.n1 == 0 or self.n2 == 0:
            return 0.0
        M = self.L(1, 2) @ self.Q22 - self.E11 @ self.K12
        return norm2(M.eval(t))


def index_one_canonical(sys: PHDAESystem, tol: float = 1e-10, rank_tol: float = DEFAULT_RANK_TOL,
                        grid_points: int = DEFAULT_GRID, max_degree: int = 12,
                        fit_tol: float = 1e-10) -> CanonicalIndexOne:
    """Transform an index-at-most-one pHDAE to canonical block form.

    Constant systems take an exact path. For time-varying systems the SVD
    factors of ``E`` and all inverse-bearing coefficients are re-fitted as
    polynomials, and the largest fit residual is reported.

    Raises
    ------
    HighIndexError
        ``L22 Q22`` is singular somewhere on the grid.
    RankAssumptionError
        ``E`` changes rank, or ``L22`` or ``Q22`` is numerically singular.
    StructureError
        The decoupling residual ``(J12 - R12) Q22 - E11 K12`` exceeds ``tol``.
    """
    if not check_index_le_one(sys, tol=tol, grid_points=grid_points, rank_tol=rank_tol):
        raise HighIndexError("L22 Q22 is singular: the system has differentiation index above one")
    n = sys.n
    interval = sys.interval
    Ut, Vt, r, fres0 = _svd_factors(sys, rank_tol, grid_points, max_degree, fit_tol)
    n1, n2 = r, n - r
    s1, s2 = slice(0, n1), slice(n1, n)
    times = np.union1d(sys.grid(grid_points), chebyshev_points(sys.t0, sys.tf, 9))

    sys1, rep1 = congruence(sys, TransformPair(Ut, Vt), grid_points, max_degree, fit_tol,
                            full_output=True)
    fres = max(fres0, rep1.fit_residual)
    # residual of the block pattern before cleaning
    off_e = max(norm2(sys1.E.eval(t)[:, s2]) + norm2(sys1.E.eval(t)[s2, :]) for t in times)
    q12 = max(norm2(sys1.Q.eval(t)[s1, s2]) for t in times) if n1 and n2 else 0.0
    scale_e = 1.0 + max(norm2(sys.E.eval(t)) for t in times)
    scale_q = 1.0 + max(norm2(sys1.Q.eval(t)) for t in times)
    residuals = {"E_offdiag": off_e, "Q12_before": q12}
    if off_e > max(tol, 10 * fit_tol) * scale_e or q12 > max(tol, 10 * fit_tol) * scale_q * scale_e:
        raise StructureError(
            f"block pattern not reached (E off-diagonal {off_e:.3e}, Q12 {q12:.3e}); "
            "the input is probably not a pHDAE"
        )
    E1 = sys1.E.coeffs.copy()
    E1[:, s2, :] = 0.0
    E1[:, :, s2] = 0.0
    Q1 = sys1.Q.coeffs.copy()
    Q1[:, s1, s2] = 0.0
    sys1 = sys1.replace(E=MatFun(E1), Q=MatFun(Q1))

    U_total, V_total = Ut, Vt
    if n1 and n2:
        L = sys1.J - sys1.R
        L12, L22 = L[s1, s2], L[s2, s2]
        E11, K12 = sys1.E[s1, s1], sys1.K[s1, s2]
        Q22 = sys1.Q[s2, s2]
        cond = {}
        for name, mf in (("L22", L22), ("Q22", Q22)):
            smin = min(np.linalg.svd(mf.eval(t), compute_uv=False)[-1] for t in times)
            smax = max(norm2(mf.eval(t)) for t in times)
            cond[name] = smax / smin if smin > 0 else np.inf
            if smin <= tol * smax:
                raise RankAssumptionError(f"{name} is numerically singular", matrix=mf.eval(sys.t0),
                                          singular_values=np.linalg.svd(mf.eval(sys.t0),
                                                                        compute_uv=False))

        def t21(l22, l12, e11, k12, q22):
            inner = l12 - e11 @ np.linalg.solve(q22.T, k12.T).T
            return -np.linalg.solve(l22.T, inner.T)

        T21, res = pointwise(t21, L22, L12, E11, K12, Q22, interval=interval,
                             max_degree=max_degree, tol=fit_tol)
        fres = max(fres, res)
        T = MatFun.block([[MatFun.identity(n1), MatFun.zeros(n1, n2)],
                          [T21, MatFun.identity(n2)]])
        sys2, rep2 = congruence(sys1, TransformPair(T, MatFun.identity(n)), grid_points,
                                max_degree, fit_tol, full_output=True)
        fres = max(fres, rep2.fit_residual)

        Q21, Q22b = sys2.Q[s2, s1], sys2.Q[s2, s2]
        Tq21, res = pointwise(lambda q21, q22: -np.linalg.solve(q22, q21), Q21, Q22b,
                              interval=interval, max_degree=max_degree, tol=fit_tol)
        fres = max(fres, res)
        Tq = MatFun.block([[MatFun.identity(n1), MatFun.zeros(n1, n2)],
                           [Tq21, MatFun.identity(n2)]])
        sys3, rep3 = congruence(sys2, TransformPair(MatFun.identity(n), Tq), grid_points,
                                max_degree, fit_tol, full_output=True)
        fres = max(fres, rep3.fit_residual)
        residuals["Q21_after"] = max(norm2(sys3.Q.eval(t)[s2, s1]) for t in times)
        Q3 = sys3.Q.coeffs.copy()
        Q3[:, s2, s1] = 0.0
        Q3[:, s1, s2] = 0.0
        sys3 = sys3.replace(Q=MatFun(Q3))
        U_total = Ut @ T
        V_total = Vt @ Tq
    else:
        sys3 = sys1
        cond = {}

    c = CanonicalIndexOne(sys3, U_total, V_total, n1, n2, residuals=residuals, conditioning=cond,
                          fit_residual=fres)
    c1 = max(c.coupling_residual(t) for t in times)
    c.residuals["coupling"] = c1
    QE = c.Q11.T @ c.E11
    c.residuals["Q11E11_symmetry"] = max(norm2(QE.eval(t) - QE.eval(t).T) for t in times) if n1 else 0.0
    scale = 1.0 + max(norm2(sys3.E.eval(t)) * norm2(sys3.K.eval(t))
                      + norm2((sys3.J - sys3.R).eval(t)) * norm2(sys3.Q.eval(t)) for t in times)
    if c1 > max(tol, 10 * fres) * scale:
        raise StructureError(f"decoupling residual {c1:.3e} exceeds tolerance")
    return c


@dataclass
class ReducedSystem:
    """Result of :func:`reduce_index_one`.

    ``ode`` acts on ``x1`` and carries the hat coefficients; ``x2`` follows
    from the algebraic constraint ``L22 Q22 x2 = -L21 Q11 x1 - (B2 - P2) u``.
    Original coordinates are ``x = V [x1; x2]``.
    """

    ode: PHDAESystem
    canonical: CanonicalIndexOne
    fit_residual: float = 0.0

    @property
    def n1(self) -> int:
        return self.canonical.n1

    @property
    def n2(self) -> int:
        return self.canonical.n2

    def _b(self, t):
        c = self.canonical
        L21 = c.L(2, 1).eval(t)
        L22 = c.L(2, 2).eval(t)
        Q11 = c.Q11.eval(t)
        Q22 = c.Q22.eval(t)
        BmP2 = (c.B2 - c.P2).eval(t)
        return L21, L22, Q11, Q22, BmP2

    def constraint(self, x1, u=None, t: float | None = None) -> np.ndarray:
        """``x2`` determined by ``x1`` and ``u`` at time ``t``."""
        t = self.ode.t0 if t is None else t
        if self.n2 == 0:
            return np.zeros(0)
        L21, L22, Q11, Q22, BmP2 = self._b(t)
        u = np.zeros(self.ode.m) if u is None else np.asarray(u, dtype=float)
        rhs = -(L21 @ Q11 @ np.asarray(x1, dtype=float)) - BmP2 @ u
        return np.linalg.solve(L22 @ Q22, rhs)

    def to_canonical(self, x, t: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        t = self.ode.t0 if t is None else t
        xt = np.linalg.solve(self.canonical.V.eval(t), np.asarray(x, dtype=float))
        return xt[: self.n1], xt[self.n1:]

    def lift(self, x1, x2=None, u=None, t: float | None = None) -> np.ndarray:
        """Original-coordinate state ``V [x1; x2]`` (``x2`` from the constraint if omitted)."""
        t = self.ode.t0 if t is None else t
        if x2 is None:
            x2 = self.constraint(x1, u, t)
        return self.canonical.V.eval(t) @ np.concatenate([np.asarray(x1, float), np.asarray(x2, float)])

    def consistency_residual(self, x0, u0=None, t: float | None = None) -> float:
        """Norm of ``L22 Q22 x2 + L21 Q11 x1 + (B2 - P2) u`` for an original-coordinate state."""
        t = self.ode.t0 if t is None else t
        if self.n2 == 0:
            return 0.0
        x1, x2 = self.to_canonical(x0, t)
        L21, L22, Q11, Q22, BmP2 = self._b(t)
        u0 = np.zeros(self.ode.m) if u0 is None else np.asarray(u0, dtype=float)
        return float(np.linalg.norm(L22 @ Q22 @ x2 + L21 @ Q11 @ x1 + BmP2 @ u0))

    def X_matrix(self, t: float) -> np.ndarray:
        """Map ``[x1; u] -> [x1; x2; u]`` on the constraint set."""
        n1, n2, m = self.n1, self.n2, self.ode.m
        X = np.zeros((n1 + n2 + m, n1 + m))
        X[:n1, :n1] = np.eye(n1)
        X[n1 + n2:, n1:] = np.eye(m)
        if n2:
            L21, L22, Q11, Q22, BmP2 = self._b(t)
            LQ = L22 @ Q22
            X[n1:n1 + n2, :n1] = -np.linalg.solve(LQ, L21 @ Q11)
            X[n1:n1 + n2, n1:] = -np.linalg.solve(LQ, BmP2)
        return X

    def w_hat(self, t: float) -> np.ndarray:
        return self.ode.w_matrix(t)

    def w_projected(self, t: float) -> np.ndarray:
        """``X^T W X`` with the dissipation matrix of the canonical form."""
        X = self.X_matrix(t)
        return X.T @ self.canonical.system.w_matrix(t) @ X


def reduce_index_one(c: CanonicalIndexOne, max_degree: int = 12,
                     fit_tol: float = 1e-10) -> ReducedSystem:
    """Eliminate ``x2`` from a canonical index-one form.

    With ``X = (B2 + P2)^T L22^{-1} (B2 - P2)`` and ``Y = (J21^T - R12) L22^{-T} (B2 + P2)``::

        B^ = B1 - Y/2,  P^ = P1 - Y/2,  S^ = S - (X + X^T)/2,  N^ = N - (X - X^T)/2

    ``S^`` and ``N^`` are symmetrized exactly after forming them.
    """
    s = c.system
    n1, n2 = c.n1, c.n2
    s1 = slice(0, n1)
    interval = s.interval
    fres = 0.0
    if n2 == 0:
        ode = s
        return ReducedSystem(ode, c, 0.0)
    J21 = c.block("J", 2, 1)
    R12 = c.block("R", 1, 2)
    L22 = c.L(2, 2)
    BpP2 = c.B2 + c.P2
    BmP2 = c.B2 - c.P2

    def y_fun(j21, r12, l22, bp):
        return (j21.T - r12) @ np.linalg.solve(l22.T, bp)

    def x_fun(bp, l22, bm):
        return bp.T @ np.linalg.solve(l22, bm)

    Y, r1 = pointwise(y_fun, J21, R12, L22, BpP2, interval=interval, max_degree=max_degree,
                      tol=fit_tol)
    X, r2 = pointwise(x_fun, BpP2, L22, BmP2, interval=interval, max_degree=max_degree,
                      tol=fit_tol)
    fres = max(r1, r2)
    Bh = c.B1 - 0.5 * Y
    Ph = c.P1 - 0.5 * Y
    Sh = s.S - 0.5 * (X + X.T)
    Nh = s.N - 0.5 * (X - X.T)
    Sh = 0.5 * (Sh + Sh.T)
    Nh = 0.5 * (Nh - Nh.T)
    ode = PHDAESystem(
        E=s.E[s1, s1], Q=s.Q[s1, s1], J=s.J[s1, s1], R=s.R[s1, s1], K=s.K[s1, s1],
        B=Bh, P=Ph, S=Sh, N=Nh, t0=s.t0, tf=s.tf,
    )
    return ReducedSystem(ode, c, fres)


@dataclass
class Regularization:
    """Result of :func:`regularize_high_index`.

    ``overdetermined`` is the transformed system in coordinates
    ``x = V x''`` together with the constraint ``x''[-k:] = 0``;
    ``subsystem`` is its leading square part on the first ``n - k``
    coordinates. ``constraints`` (rows) spans all explicit and hidden
    constraints of the original state equation with ``u = 0``.
    """

    overdetermined: PHDAESystem
    subsystem: PHDAESystem
    V: np.ndarray
    U1: np.ndarray
    U2: np.ndarray
    k: int
    A3: np.ndarray
    constraints: np.ndarray
    index_data: IndexData | None
    input_coupling: bool = False
    report: dict = field(default_factory=dict)

    @property
    def identity(self) -> bool:
        return self.k == 0

    def lift(self, x_sub) -> np.ndarray:
        """Original coordinates of a subsystem state (with the vanishing block appended)."""
        x_sub = np.asarray(x_sub, dtype=float)
        z = np.zeros(x_sub.shape[:-1] + (self.k,))
        return np.concatenate([x_sub, z], axis=-1) @ self.V.T

    def restrict(self, x) -> np.ndarray:
        """Subsystem coordinates of an original state."""
        xt = np.linalg.solve(self.V, np.asarray(x, dtype=float))
        return xt[: self.V.shape[0] - self.k]

    def constraint_residual(self, x) -> float:
        if self.constraints.shape[0] == 0:
            return 0.0
        return float(np.linalg.norm(self.constraints[:, : len(x)] @ np.asarray(x, dtype=float)))

    def consistent_projection(self, x) -> np.ndarray:
        """Orthogonal projection of ``x`` onto the null space of all constraints."""
        C = self.constraints[:, : len(x)]
        if C.shape[0] == 0:
            return np.asarray(x, dtype=float)
        return np.asarray(x, dtype=float) - C.T @ np.linalg.lstsq(C @ C.T, C @ x, rcond=None)[0]


def regularize_high_index(sys: PHDAESystem, idx: IndexData | None = None, tol: float = 1e-10,
                          rank_tol: float = DEFAULT_RANK_TOL, check: bool = True) -> Regularization:
    """Structure-preserving regularization of a constant-coefficient high-index pHDAE.

    Steps: SVD ``U1^T E V1 = blkdiag(E11, 0)``; split ``A3 V1 = [A31, A32]``
    and rotate the kernel part so that ``A32 V2 = [0, A33]``; shear to make
    the hidden constraints read ``x3 = 0``; choose an orthogonal ``U2``
    whose last ``k`` columns span the left null space of the ``(x1, x2)``
    columns of the transformed ``Q``. The subsystem consists of the leading
    ``n - k`` rows and columns.

    ``idx`` defaults to the analysis of the state equation with ``u = 0``.
    If hidden constraints disappear once inputs are included, they depend
    on the input; ``input_coupling`` is set and a warning is issued, since
    the subsystem then describes the dynamics only for ``u = 0``.

    Raises
    ------
    TimeVaryingError
        Coefficients are not constant.
    RankAssumptionError
        The kernel part of the hidden constraints is not of full row rank,
        or the ``Q`` rows cannot be split as required.
    """
    if not sys.is_constant:
        raise TimeVaryingError("regularization is implemented for constant coefficients only")
    if idx is None:
        idx = strangeness_analysis(sys, include_inputs=False, tol=rank_tol)
    n = sys.n
    A3 = np.asarray(idx.A3, dtype=float).reshape(-1, n)
    k = A3.shape[0]
    constraints = idx.constraints[:, :n] if idx.constraints.size else np.zeros((0, n))
    if k == 0:
        I = np.eye(n)
        return Regularization(sys, sys, I, I, I, 0, A3, constraints, idx, False,
                              report={"hidden_constraints": 0})

    input_coupling = False
    if sys.m:
        idx_u = strangeness_analysis(sys, include_inputs=True, tol=rank_tol)
        if idx_u.n_hidden < k:
            input_coupling = True
            warnings.warn(
                "hidden constraints depend on the input; the regularized subsystem is exact "
                "only for u = 0", RuntimeWarning, stacklevel=2,
            )

    E = sys.E.coeff(0)
    U1, _, V1, r = svd_split(E, rank_tol)
    A3V = A3 @ V1
    A31, A32 = A3V[:, :r], A3V[:, r:]
    if A32.shape[1] < k:
        raise RankAssumptionError("more hidden constraints than kernel directions of E", matrix=A32)
    Ua, sa, Va, ra = svd_split(A32, rank_tol, 1.0)  # A3 has orthonormal rows
    if ra < k:
        raise RankAssumptionError("kernel part of the hidden constraints lacks full row rank",
                                  matrix=A32, singular_values=sa)
    V2 = np.hstack([Va[:, k:], Va[:, :k]])
    A33 = A32 @ Va[:, :k]
    q = n - r - k
    shear = np.eye(n)
    shear[r + q:, :r] = -np.linalg.solve(A33, A31)
    V = V1 @ block_diag(np.eye(r), V2) @ shear
    sys38 = congruence(sys, TransformPair(MatFun.constant(U1), MatFun.constant(V)))

    Qp = sys38.Q.coeff(0)
    Z = left_null_space(Qp[:, : n - k], rank_tol)
    if Z.shape[1] != k:
        raise RankAssumptionError(
            f"left null space of the leading Q columns has dimension {Z.shape[1]}, expected {k}",
            matrix=Qp[:, : n - k], singular_values=np.linalg.svd(Qp[:, : n - k], compute_uv=False),
        )
    U2 = np.hstack([complement(Z), Z])
    sys39 = congruence(sys38, TransformPair(MatFun.constant(U2), MatFun.identity(n)))
    Qc = sys39.Q.coeffs.copy()
    zero_res = norm2(Qc[0, n - k:, : n - k])
    Qc[:, n - k:, : n - k] = 0.0
    sys39 = sys39.replace(Q=MatFun(Qc))
    p = slice(0, n - k)
    pm = slice(0, sys.m)
    sub = PHDAESystem(
        E=sys39.E[p, p], Q=sys39.Q[p, p], J=sys39.J[p, p], R=sys39.R[p, p], K=sys39.K[p, p],
        B=sys39.B[p, pm], P=sys39.P[p, pm], S=sys39.S, N=sys39.N, t0=sys.t0, tf=sys.tf,
    )
    report = {
        "hidden_constraints": k,
        "rank_E": r,
        "A33_condition": float(np.linalg.cond(A33)),
        "A33_singular_values": sa[:k].tolist(),
        "Q_zero_block_residual": zero_res,
        "hidden_constraint_residual": float(norm2(A3 @ V[:, : n - k])),
        "input_coupling": input_coupling,
    }
    if check:
        srep = verify_structure(sub, tol=tol * 100)
        report["subsystem_structure"] = srep.as_dict()
        report["subsystem_index_le_one"] = bool(check_index_le_one(sub))
        if not srep.ok:
            raise StructureError(f"regularized subsystem fails verification: {srep.failures()}")
    return Regularization(sys39, sub, V, U1, U2, k, A3, constraints, idx, input_coupling, report)


@dataclass
class GasReduction:
    """Split of a gas-network system after the SVD ``N^T = W [0; Sigma] Z^T``.

    New coordinates: ``x2 = W [x22; x23]`` and ``x3 = Z x3h``. The flux part
    ``x23`` vanishes, ``(x1, x22)`` solve the implicit pH ODE ``ode`` and the
    multiplier follows from :meth:`multiplier`.
    """

    n1: int
    n2: int
    n3: int
    W: np.ndarray
    Z: np.ndarray
    Sigma: np.ndarray
    M1: np.ndarray
    M22: np.ndarray
    M23: np.ndarray
    M33: np.ndarray
    G12: np.ndarray
    G13: np.ndarray
    D22: np.ndarray
    D23: np.ndarray
    D33: np.ndarray
    B22: np.ndarray
    B32: np.ndarray
    ode: PHDAESystem

    @property
    def reduced_dimension(self) -> int:
        return self.n1 + self.n2 - self.n3

    def split(self, x) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(x1, x22, x23, x3h)`` of an original state."""
        x = np.asarray(x, dtype=float)
        n1, n2 = self.n1, self.n2
        w = self.W.T @ x[n1:n1 + n2]
        return x[:n1], w[: n2 - self.n3], w[n2 - self.n3:], self.Z.T @ x[n1 + n2:]

    def ode_state(self, x) -> np.ndarray:
        x1, x22, _, _ = self.split(x)
        return np.concatenate([x1, x22])

    def multiplier(self, x1, x22, dx22, u=None) -> np.ndarray:
        """Transformed multiplier ``x3h = Sigma^{-1}(M23^T x22' - G13^T x1 + D23^T x22 - B32 u)``.

        Arguments may be single vectors or arrays with time along axis 0.
        """
        x1, x22, dx22 = (np.asarray(a, dtype=float) for a in (x1, x22, dx22))
        rhs = dx22 @ self.M23 - x1 @ self.G13 + x22 @ self.D23
        if u is not None and self.B32.shape[1]:
            rhs = rhs - np.asarray(u, dtype=float) @ self.B32.T
        return rhs / np.diag(self.Sigma)

    def ode_rhs_derivative(self, x1, x22, u=None) -> np.ndarray:
        """``x22'`` from the reduced ODE at the given state."""
        z = np.concatenate([np.asarray(x1, float), np.asarray(x22, float)])
        E = self.ode.E.coeff(0)
        A = self.ode.A.coeff(0)
        rhs = A @ z
        if u is not None and self.ode.m:
            rhs = rhs + self.ode.input_matrix.coeff(0) @ np.asarray(u, dtype=float)
        return np.linalg.solve(E, rhs)[self.n1:]

    def consistent_multiplier(self, x1, x22, u=None) -> np.ndarray:
        return self.multiplier(x1, x22, self.ode_rhs_derivative(x1, x22, u), u)

    def consistency_residual(self, x0, u0=None) -> dict:
        """Residuals of ``x23(0) = 0`` and of the multiplier condition at the initial time."""
        x1, x22, x23, x3h = self.split(x0)
        x3c = self.consistent_multiplier(x1, x22, u0)
        return {"x23": float(np.linalg.norm(x23)), "multiplier": float(np.linalg.norm(x3h - x3c))}

    def consistent_state(self, x1, x22, u0=None) -> np.ndarray:
        """Original-coordinate initial state with ``x23 = 0`` and the consistent multiplier."""
        x3h = self.consistent_multiplier(x1, x22, u0)
        return self.to_original(x1, x22, x3h)

    def to_original(self, x1, x22, x3h) -> np.ndarray:
        x1, x22, x3h = (np.asarray(a, dtype=float) for a in (x1, x22, x3h))
        z = np.zeros(x22.shape[:-1] + (self.n3,))
        x2 = np.concatenate([x22, z], axis=-1) @ self.W.T
        return np.concatenate([x1, x2, x3h @ self.Z.T], axis=-1)

    def check_consistency(self, x0, u0=None, tol: float = 1e-8) -> None:
        res = self.consistency_residual(x0, u0)
        scale = 1.0 + float(np.linalg.norm(x0))
        if res["x23"] > tol * scale or res["multiplier"] > tol * scale:
            raise InconsistentInitialValueError(
                f"initial value violates the gas-network consistency conditions "
                f"(x23 residual {res['x23']:.3e}, multiplier residual {res['multiplier']:.3e})",
                residual=res,
            )

    def input_discontinuities(self, times, inputs, rel_tol: float = 1e-3,
                              ratio: float = 50.0) -> np.ndarray:
        """Indices ``k`` where ``B32 u`` jumps between ``times[k]`` and ``times[k+1]``.

        A jump is an increment larger than ``rel_tol (1 + max |B32 u|)`` and
        ``ratio`` times the median increment; a jump makes the multiplier
        discontinuous.
        """
        inputs = np.asarray(inputs, dtype=float).reshape(len(times), -1)
        if self.B32.shape[1] == 0:
            return np.zeros(0, dtype=int)
        f = inputs @ self.B32.T
        inc = np.linalg.norm(np.diff(f, axis=0), axis=1)
        if inc.size == 0:
            return np.zeros(0, dtype=int)
        thresh = max(rel_tol * (1.0 + np.abs(f).max()), ratio * np.median(inc))
        return np.flatnonzero(inc > thresh)


def _gas_blocks(sys: PHDAESystem, tol: float = 1e-12):
    E = sys.E.coeff(0)
    R = sys.R.coeff(0)
    n = sys.n
    n3 = 0
    while n3 < n and not np.any(E[n - n3 - 1]) and not np.any(E[:, n - n3 - 1]):
        n3 += 1
    n1 = 0
    while n1 < n - n3 and not np.any(R[n1]) and not np.any(R[:, n1]):
        n1 += 1
    return n1, n - n1 - n3, n3


def gas_reduction(gas: PHDAESystem, tol: float = 1e-12) -> GasReduction:
    """Split a gas-network system into a reduced pH ODE and multiplier recovery.

    Block sizes are inferred: ``n3`` from the trailing zero rows of ``E``
    and ``n1`` from the leading zero rows of ``R``. The zero pattern of the
    gas model is checked.

    Raises
    ------
    TimeVaryingError
        Coefficients are not constant.
    StructureError
        The input does not have the gas-network block pattern.
    RankAssumptionError
        ``N`` does not have full row rank (``Sigma`` singular).
    """
    if not gas.is_constant:
        raise TimeVaryingError("gas reduction needs constant coefficients")
    n1, n2, n3 = _gas_blocks(gas)
    c = gas.at(gas.t0)
    E, J, R, Q, B, P = c["E"], c["J"], c["R"], c["Q"], c["B"], c["P"]
    n = gas.n
    s1, s2, s3 = slice(0, n1), slice(n1, n1 + n2), slice(n1 + n2, n)
    zero_blocks = [E[s1, s2], E[s1, s3], E[s2, s3], J[s1, s1], J[s2, s2], J[s3, s3], J[s1, s3],
                   R[s1, :], R[s3, :], B[s1], B[s3]]
    scale = 1.0 + max(norm2(E), norm2(J), norm2(R))
    if (n1 == 0 or n2 == 0 or n3 == 0
            or any(b.size and np.abs(b).max() > tol * scale for b in zero_blocks)
            or not np.allclose(Q, np.eye(n), atol=tol) or np.abs(P).max(initial=0.0) > tol
            or norm2(J + J.T) > tol * scale):
        raise StructureError("system does not have the gas-network block pattern")
    M1, M2 = E[s1, s1], E[s2, s2]
    G = -J[s1, s2]
    N = -J[s3, s2]
    if norm2(J[s2, s1] - G.T) > tol * scale or norm2(J[s2, s3] - N.T) > tol * scale:
        raise StructureError("system does not have the gas-network block pattern")
    D = R[s2, s2]
    B2 = B[s2]
    W, s, Zt = np.linalg.svd(N.T)
    if s[-1] <= 1e-12 * max(s[0], 1e-300) * max(N.shape):
        raise RankAssumptionError("N does not have full row rank", matrix=N, singular_values=s)
    W, Z = fix_signs(W, Zt.T)
    Wp = np.hstack([W[:, n3:], W[:, :n3]])
    Sigma = np.diag(s)
    q = n2 - n3
    M2p = Wp.T @ M2 @ Wp
    Gp = G @ Wp
    Dp = Wp.T @ D @ Wp
    Bp = Wp.T @ B2
    M22, M23, M33 = M2p[:q, :q], M2p[:q, q:], M2p[q:, q:]
    D22, D23, D33 = Dp[:q, :q], Dp[:q, q:], Dp[q:, q:]
    G12, G13 = Gp[:, :q], Gp[:, q:]
    B22, B32 = Bp[:q], Bp[q:]
    m = gas.m
    nr = n1 + q
    Jr = np.zeros((nr, nr))
    Jr[:n1, n1:] = -G12
    Jr[n1:, :n1] = G12.T
    ode = PHDAESystem(
        E=MatFun.constant(block_diag(M1, M22)),
        Q=MatFun.identity(nr),
        J=MatFun.constant(Jr),
        R=MatFun.constant(block_diag(np.zeros((n1, n1)), D22)),
        K=MatFun.zeros(nr, nr),
        B=MatFun.constant(np.vstack([np.zeros((n1, m)), B22])),
        P=MatFun.zeros(nr, m),
        S=gas.S, N=gas.N, t0=gas.t0, tf=gas.tf,
    )
    return GasReduction(n1, n2, n3, Wp, Z, Sigma, M1, M22, M23, M33, G12, G13, D22, D23, D33,
                        B22, B32, ode)
