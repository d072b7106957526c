"""Derivative arrays and strangeness-index analysis for constant coefficients.

The analysis works on the behavior form ``Eb v' = Ab v`` with the
descriptor vector ``v = [x; u]``::

    Eb = [E, 0],    Ab = [(J - R) Q - E K, B - P].

The derivative array at level ``mu`` stacks this equation and its first
``mu`` derivatives. Row block ``i`` reads ``Eb v^(i+1) - Ab v^(i) = 0``, so
with ``M`` the coefficient of ``(v', ..., v^(mu+1))`` and ``Nmat`` the
coefficient of ``v`` the array is ``Nmat v + M [v'; ...; v^(mu+1)] = 0``.
In particular at level 0, ``M = Eb`` and ``Nmat = -Ab``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import RankAssumptionError, TimeVaryingError
from .linalg import (DEFAULT_RANK_TOL, complement, left_null_space, norm2, null_space,
                     numerical_rank, row_space, svd_split)
from .system import DEFAULT_GRID, PHDAESystem

__all__ = [
    "BehaviorPencil",
    "IndexData",
    "derivative_array",
    "strangeness_analysis",
    "check_index_le_one",
    "kernel_blocks",
]


@dataclass(frozen=True)
class BehaviorPencil:
    """Constant behavior pencil ``(Eb, Ab)`` acting on ``v = [x; u]``."""

    Eb: np.ndarray
    Ab: np.ndarray
    n: int
    m: int

    def __post_init__(self):
        Eb = np.atleast_2d(np.asarray(self.Eb, dtype=float))
        Ab = np.atleast_2d(np.asarray(self.Ab, dtype=float))
        if Eb.shape != (self.n, self.n + self.m) or Ab.shape != Eb.shape:
            raise ValueError(f"pencil blocks must be {self.n}x{self.n + self.m}")
        object.__setattr__(self, "Eb", Eb)
        object.__setattr__(self, "Ab", Ab)

    @classmethod
    def from_matrices(cls, E, A, B=None) -> "BehaviorPencil":
        E = np.atleast_2d(np.asarray(E, dtype=float))
        A = np.atleast_2d(np.asarray(A, dtype=float))
        n = E.shape[0]
        B = np.zeros((n, 0)) if B is None else np.asarray(B, dtype=float).reshape(n, -1)
        m = B.shape[1]
        return cls(np.hstack([E, np.zeros((n, m))]), np.hstack([A, B]), n, m)

    @classmethod
    def from_system(cls, sys: PHDAESystem, include_inputs: bool = True) -> "BehaviorPencil":
        """Pencil of a constant-coefficient system.

        With ``include_inputs=False`` the input columns are dropped, which is
        the analysis of the state equation with ``u = 0``.
        """
        if not sys.is_constant:
            raise TimeVaryingError(
                "strangeness analysis is implemented for constant coefficients only"
            )
        E = sys.E.coeff(0)
        A = sys.A.coeff(0)
        B = sys.input_matrix.coeff(0) if include_inputs else None
        return cls.from_matrices(E, A, B)

    @property
    def E(self) -> np.ndarray:
        return self.Eb[:, : self.n]

    @property
    def A(self) -> np.ndarray:
        return self.Ab[:, : self.n]

    @property
    def B(self) -> np.ndarray:
        return self.Ab[:, self.n:]


def derivative_array(p: BehaviorPencil, level: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(M, Nmat)`` of the derivative array at ``level``.

    ``M`` has shape ``((level+1) n, (level+1)(n+m))`` and ``Nmat`` has shape
    ``((level+1) n, n+m)``.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    n, w = p.n, p.n + p.m
    k = level + 1
    M = np.zeros((k * n, k * w))
    Nmat = np.zeros((k * n, w))
    Nmat[:n] = -p.Ab
    for i in range(k):
        M[i * n:(i + 1) * n, i * w:(i + 1) * w] = p.Eb
        if i > 0:
            M[i * n:(i + 1) * n, (i - 1) * w:i * w] = -p.Ab
    return M, Nmat


@dataclass
class IndexData:
    """Result of :func:`strangeness_analysis`.

    ``constraints`` holds an orthonormal basis (rows) of all algebraic
    constraints ``constraints @ v = 0`` in the behavior variables,
    ``A3`` the hidden ones acting on ``x`` only, and ``explicit`` the
    explicit algebraic equations of the pencil. When no level up to
    ``mu_max`` satisfies the rank conditions, ``success`` is False and the
    remaining fields describe the last level tried.
    """

    success: bool
    mu: int
    r: int
    a: int
    d: int
    nu: int
    n: int
    m: int
    Z2: np.ndarray
    T2: np.ndarray
    Z1: np.ndarray
    constraints: np.ndarray
    explicit: np.ndarray
    A3: np.ndarray
    tol: float
    levels: list = field(default_factory=list)
    message: str = ""

    @property
    def n_hidden(self) -> int:
        return self.A3.shape[0]

    @property
    def differentiation_index(self) -> int | None:
        """``mu + 1`` unless the equations are purely differential or purely algebraic."""
        if not self.success:
            return None
        if self.mu == 0 and (self.a == 0 or self.d == 0):
            return 0 if self.a == 0 else 1
        return self.mu + 1

    def summary(self) -> dict:
        return {
            "success": self.success,
            "mu": self.mu, "r": self.r, "a": self.a, "d": self.d, "nu": self.nu,
            "n": self.n, "m": self.m,
            "hidden_constraints": self.n_hidden,
            "tol": self.tol,
            "message": self.message,
        }


def _level_data(p: BehaviorPencil, mu: int, tol: float):
    M, Nmat = derivative_array(p, mu)
    full = np.hstack([Nmat, M])
    r = numerical_rank(full, tol)
    rank_m = numerical_rank(M, tol)
    a = r - rank_m
    Y = left_null_space(M, tol)
    # Products are judged against the size of their factors, so round-off
    # in Y^T Nmat or Eb T2 is not mistaken for rank.
    scale_a = norm2(p.Ab)
    scale_e = norm2(p.Eb)
    # Drop directions of the left null space that only give 0 = 0.
    if Y.shape[1]:
        U, _, _, ra = svd_split(Y.T @ Nmat, tol, scale_a)
        Z2 = Y @ U[:, :ra]
    else:
        Z2 = np.zeros((M.shape[0], 0))
    C = Z2.T @ Nmat
    T2 = null_space(C, tol, scale_a) if C.shape[0] else np.eye(p.n + p.m)
    EbT2 = p.Eb @ T2
    d = numerical_rank(EbT2, tol, scale_e) if EbT2.size else 0
    return dict(M=M, Nmat=Nmat, r=r, rank_M=rank_m, a=a, Z2=Z2, C=C, T2=T2, EbT2=EbT2, d=d,
                corank=full.shape[0] - r)


def _split_constraints(p: BehaviorPencil, C: np.ndarray, tol: float):
    """Separate the constraint rows into explicit ones and hidden input-free ones."""
    n = p.n
    scale_a = norm2(p.Ab)
    cons = row_space(C, tol, scale_a) if C.size else np.zeros((0, n + p.m))
    Ze = left_null_space(p.E, tol)
    explicit = row_space(Ze.T @ p.Ab, tol, scale_a) if Ze.shape[1] else np.zeros((0, n + p.m))
    if cons.shape[0] == 0:
        return cons, explicit, np.zeros((0, n))
    # input-free part of the constraint space
    if p.m:
        Lu = left_null_space(cons[:, n:], tol, 1.0)
        ufree = Lu.T @ cons[:, :n]
    else:
        ufree = cons[:, :n]
    if ufree.shape[0] == 0:
        return cons, explicit, np.zeros((0, n))
    # explicit equations that do not involve u
    if explicit.shape[0] and p.m:
        Le = left_null_space(explicit[:, n:], tol, 1.0)
        exp0 = Le.T @ explicit[:, :n]
    else:
        exp0 = explicit[:, :n]
    if exp0.shape[0]:
        basis = row_space(exp0, tol, 1.0)
        P = complement(basis.T)
        ufree = (ufree @ P) @ P.T
    # ufree has orthonormal rows before the projection, so an absolute
    # threshold separates surviving directions from round-off.
    _, s, V, _ = svd_split(ufree, tol)
    k = int(np.sum(s > np.sqrt(tol)))
    A3 = V[:, :k].T
    return cons, explicit, A3


def strangeness_analysis(p: BehaviorPencil | PHDAESystem, mu_max: int = 3,
                         tol: float = DEFAULT_RANK_TOL, include_inputs: bool = True) -> IndexData:
    """Find the smallest level satisfying the rank conditions of the strangeness hypothesis.

    At each level ``mu`` the quantities are

    * ``r = rank [Nmat, M]`` and ``a = r - rank M``,
    * ``nu`` = growth of the corank of ``[Nmat, M]`` from level ``mu - 1``,
    * ``Z2`` spans the left null space of ``M`` minus its trivial part, and
      ``T2`` spans the null space of ``Z2^T Nmat``,
    * ``d = rank(Eb T2)``,

    and the level is accepted when ``d = n - a - nu``. ``Z1`` holds the
    leading ``d`` left singular vectors of ``Eb T2``.

    A system argument is converted with :meth:`BehaviorPencil.from_system`.
    Failure to find a level is reported through ``success=False``.
    """
    if mu_max < 0:
        raise ValueError("mu_max must be nonnegative")
    if isinstance(p, PHDAESystem):
        p = BehaviorPencil.from_system(p, include_inputs=include_inputs)
    n = p.n
    levels = []
    prev_corank = 0
    last = None
    for mu in range(mu_max + 1):
        L = _level_data(p, mu, tol)
        nu = L["corank"] - prev_corank
        prev_corank = L["corank"]
        ok = L["d"] == n - L["a"] - nu
        levels.append({"mu": mu, "r": L["r"], "rank_M": L["rank_M"], "a": L["a"],
                       "d": L["d"], "nu": nu, "accepted": bool(ok)})
        last = (mu, L, nu)
        if ok:
            break
    mu, L, nu = last
    ok = levels[-1]["accepted"]
    d = L["d"]
    if d and L["EbT2"].size:
        U, _, _, _ = svd_split(L["EbT2"], tol)
        Z1 = U[:, :d]
    else:
        Z1 = np.zeros((n, 0))
    cons, explicit, A3 = _split_constraints(p, L["C"], tol)
    if ok:
        msg = f"strangeness index {mu}"
    else:
        msg = f"no level up to mu_max={mu_max} satisfies the rank conditions"
    return IndexData(
        success=bool(ok), mu=mu, r=L["r"], a=L["a"], d=d, nu=nu, n=n, m=p.m,
        Z2=L["Z2"], T2=L["T2"], Z1=Z1, constraints=cons, explicit=explicit, A3=A3, tol=tol,
        levels=levels, message=msg,
    )


def kernel_blocks(sys: PHDAESystem, t: float, tol: float = DEFAULT_RANK_TOL) -> dict:
    """SVD-based splitting of the coefficients at ``t`` along range and kernel of ``E``.

    Returns the rank of ``E``, the orthogonal factors and the blocks
    ``L22 = (U^T (J - R) U)_22`` and ``Q22 = (U^T Q V)_22``.
    """
    c = sys.at(t)
    U, s, V, r = svd_split(c["E"], tol)
    L = U.T @ (c["J"] - c["R"]) @ U
    Qt = U.T @ c["Q"] @ V
    return {"rank": r, "U": U, "V": V, "s": s, "L22": L[r:, r:], "Q22": Qt[r:, r:],
            "Q12": Qt[:r, r:]}


def check_index_le_one(sys: PHDAESystem, tol: float = 1e-10, grid_points: int = DEFAULT_GRID,
                       rank_tol: float = DEFAULT_RANK_TOL) -> bool:
    """True when ``L22 Q22`` is invertible at every grid point (or does not occur).

    Raises
    ------
    RankAssumptionError
        The rank of ``E(t)`` changes over the grid.
    """
    times = [sys.t0] if sys.is_constant else sys.grid(grid_points)
    rank0 = None
    result = True
    for t in times:
        kb = kernel_blocks(sys, t, rank_tol)
        if rank0 is None:
            rank0 = kb["rank"]
        elif kb["rank"] != rank0:
            raise RankAssumptionError(
                f"rank of E changes on the grid ({rank0} -> {kb['rank']} at t={t})",
                matrix=sys.E.eval(t), singular_values=kb["s"],
            )
        M = kb["L22"] @ kb["Q22"]
        if M.size == 0:
            continue
        s = np.linalg.svd(M, compute_uv=False)
        if s[-1] <= tol * max(norm2(M), 1e-300) or s[0] == 0.0:
            result = False
    return result
