"""Builders for the example systems: RLC circuit, gas network, linearized
constrained manipulator and acoustic field model.

Every builder validates its parameters (definiteness and rank conditions)
and returns a constant-coefficient :class:`PHDAESystem`. Named presets with
fixed data are available through :func:`preset`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from .exceptions import RankAssumptionError, ShapeError, StructureError
from .linalg import numerical_rank
from .system import PHDAESystem, assemble

__all__ = [
    "RLCParams", "GasParams", "ManipulatorParams", "AcousticParams",
    "rlc", "gas_network", "manipulator_linearized", "acoustic",
    "preset", "PRESETS", "GasBlocks",
]


def _arr(a, shape=None):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if shape is not None and a.shape != shape:
        raise ShapeError(f"expected shape {shape}, got {a.shape}")
    return a


def _require_spd(name, A, semi=False, tol=1e-12):
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return
    if A.shape[0] != A.shape[1] or not np.allclose(A, A.T, atol=tol * (1 + np.abs(A).max())):
        raise StructureError(f"{name} must be symmetric")
    lam = np.linalg.eigvalsh(0.5 * (A + A.T))[0]
    bound = -tol * (1 + abs(lam)) if semi else tol * np.abs(A).max()
    if (semi and lam < bound) or (not semi and lam <= bound):
        kind = "positive semidefinite" if semi else "positive definite"
        raise StructureError(f"{name} must be {kind} (smallest eigenvalue {lam:.3e})")


def _require_full_row_rank(name, A):
    A = np.atleast_2d(A)
    if A.shape[0] and numerical_rank(A) < A.shape[0]:
        raise RankAssumptionError(f"{name} must have full row rank", matrix=A,
                                  singular_values=np.linalg.svd(A, compute_uv=False))


@dataclass
class RLCParams:
    """Incidence matrices (nodes x branches) and branch parameter matrices.

    ``C``, ``L`` and ``Rr`` are the capacitance, inductance and resistance
    matrices of the capacitor, inductor and resistor branches.
    """

    Gc: np.ndarray
    Gr: np.ndarray
    Gl: np.ndarray
    Gv: np.ndarray
    C: np.ndarray
    L: np.ndarray
    Rr: np.ndarray


def rlc(p: RLCParams) -> PHDAESystem:
    """Circuit with state ``[node voltages; inductor currents; source currents]``.

    ``E = blkdiag(Gc C Gc^T, L, 0)``, ``Q = I`` and the right-hand matrix
    ``[[-Gr Rr^-1 Gr^T, -Gl, -Gv], [Gl^T, 0, 0], [Gv^T, 0, 0]]`` is split
    into its skew part ``J`` and the negative of its symmetric part ``R``.
    The system has no ports.
    """
    Gc, Gr, Gl, Gv = (np.asarray(g, dtype=float) for g in (p.Gc, p.Gr, p.Gl, p.Gv))
    nn = Gc.shape[0]
    for name, g in (("Gr", Gr), ("Gl", Gl), ("Gv", Gv)):
        if g.ndim != 2 or g.shape[0] != nn:
            raise ShapeError(f"incidence matrix {name} must have {nn} rows")
    C, L, Rr = (np.atleast_2d(np.asarray(x, dtype=float)) if np.size(x) else np.zeros((0, 0))
                for x in (p.C, p.L, p.Rr))
    if C.shape != (Gc.shape[1],) * 2 or L.shape != (Gl.shape[1],) * 2 or Rr.shape != (Gr.shape[1],) * 2:
        raise ShapeError("parameter matrices must match the number of branches")
    _require_spd("C", C)
    _require_spd("L", L)
    _require_spd("Rr", Rr)
    if Gv.shape[1] and numerical_rank(Gv) < Gv.shape[1]:
        raise RankAssumptionError("Gv must have full column rank", matrix=Gv)
    nl, nv = Gl.shape[1], Gv.shape[1]
    n = nn + nl + nv
    E = block_diag(Gc @ C @ Gc.T, L, np.zeros((nv, nv)))
    Rnode = Gr @ np.linalg.solve(Rr, Gr.T) if Gr.shape[1] else np.zeros((nn, nn))
    R = block_diag(Rnode, np.zeros((nl + nv, nl + nv)))
    J = np.zeros((n, n))
    J[:nn, nn:nn + nl] = -Gl
    J[:nn, nn + nl:] = -Gv
    J[nn:nn + nl, :nn] = Gl.T
    J[nn + nl:, :nn] = Gv.T
    return assemble({"E": E, "Q": np.eye(n), "J": J, "R": R}, n=n, m=0)


@dataclass
class GasParams:
    """Blocks of the discretized gas network: ``M1, M2, D`` SPD, ``G`` (n1 x n2),
    ``N`` (n3 x n2) and ``B2`` (n2 x m)."""

    M1: np.ndarray
    M2: np.ndarray
    G: np.ndarray
    N: np.ndarray
    D: np.ndarray
    B2: np.ndarray


def gas_network(p: GasParams) -> PHDAESystem:
    """``E = blkdiag(M1, M2, 0)``, ``J = [[0, -G, 0], [G^T, 0, N^T], [0, -N, 0]]``,
    ``R = blkdiag(0, D, 0)``, ``B = [0; B2; 0]``, ``Q = I``."""
    M1, M2, D = _arr(p.M1), _arr(p.M2), _arr(p.D)
    n1, n2 = M1.shape[0], M2.shape[0]
    G = _arr(p.G, (n1, n2))
    N = _arr(p.N)
    if N.shape[1] != n2:
        raise ShapeError(f"N must have {n2} columns")
    n3 = N.shape[0]
    B2 = np.asarray(p.B2, dtype=float).reshape(n2, -1)
    m = B2.shape[1]
    if D.shape != (n2, n2):
        raise ShapeError("D must be n2 x n2")
    _require_spd("M1", M1)
    _require_spd("M2", M2)
    _require_spd("D", D)
    _require_full_row_rank("N", N)
    _require_full_row_rank("[G; N]", np.vstack([G, N]))
    n = n1 + n2 + n3
    E = block_diag(M1, M2, np.zeros((n3, n3)))
    J = np.zeros((n, n))
    J[:n1, n1:n1 + n2] = -G
    J[n1:n1 + n2, :n1] = G.T
    J[n1:n1 + n2, n1 + n2:] = N.T
    J[n1 + n2:, n1:n1 + n2] = -N
    R = block_diag(np.zeros((n1, n1)), D, np.zeros((n3, n3)))
    B = np.vstack([np.zeros((n1, m)), B2, np.zeros((n3, m))])
    return assemble({"E": E, "Q": np.eye(n), "J": J, "R": R, "B": B}, n=n, m=m)


@dataclass
class GasBlocks:
    """Block sizes of a system with the gas-network pattern."""

    n1: int
    n2: int
    n3: int


@dataclass
class ManipulatorParams:
    """Mass ``M``, damping ``D`` and stiffness ``S`` (k x k), constraint Jacobian
    ``G`` (c x k) and input matrix ``B1`` (k x m)."""

    M: np.ndarray
    D: np.ndarray
    S: np.ndarray
    G: np.ndarray
    B1: np.ndarray


def manipulator_linearized(p: ManipulatorParams) -> PHDAESystem:
    """State ``[velocity; position; multiplier]`` with
    ``E = blkdiag(M, I, 0)``, ``Q = blkdiag(I, S, I)``, ``R = blkdiag(D, 0, 0)``,
    ``J = [[0, -I, G^T], [I, 0, 0], [-G, 0, 0]]`` and ``B = [B1; 0; 0]``."""
    M, D, S = _arr(p.M), _arr(p.D), _arr(p.S)
    k = M.shape[0]
    G = _arr(p.G)
    if G.shape[1] != k or D.shape != (k, k) or S.shape != (k, k):
        raise ShapeError("manipulator blocks have inconsistent sizes")
    c = G.shape[0]
    B1 = np.asarray(p.B1, dtype=float).reshape(k, -1)
    m = B1.shape[1]
    _require_spd("M", M)
    _require_spd("S", S)
    _require_spd("D", D, semi=True)
    _require_full_row_rank("G", G)
    n = 2 * k + c
    Ik = np.eye(k)
    E = block_diag(M, Ik, np.zeros((c, c)))
    Q = block_diag(Ik, S, np.eye(c))
    R = block_diag(D, np.zeros((k + c, k + c)))
    J = np.zeros((n, n))
    J[:k, k:2 * k] = -Ik
    J[:k, 2 * k:] = G.T
    J[k:2 * k, :k] = Ik
    J[2 * k:, :k] = -G
    B = np.vstack([B1, np.zeros((k + c, m))])
    return assemble({"E": E, "Q": Q, "J": J, "R": R, "B": B}, n=n, m=m)


@dataclass
class AcousticParams:
    """Mass ``M`` (PSD), damping ``D`` (PSD), stiffness ``K`` (SPD) and load ``B1``."""

    M: np.ndarray
    D: np.ndarray
    K: np.ndarray
    B1: np.ndarray


def acoustic(p: AcousticParams) -> PHDAESystem:
    """First-order form in ``z = [p'; p]``: ``E = blkdiag(M, I)``,
    ``J = [[0, -I], [I, 0]]``, ``R = blkdiag(D, 0)``, ``Q = blkdiag(I, K)``,
    ``B = [B1; 0]``."""
    M, D, K = _arr(p.M), _arr(p.D), _arr(p.K)
    k = M.shape[0]
    if D.shape != (k, k) or K.shape != (k, k):
        raise ShapeError("acoustic blocks have inconsistent sizes")
    B1 = np.asarray(p.B1, dtype=float).reshape(k, -1)
    m = B1.shape[1]
    _require_spd("M", M, semi=True)
    _require_spd("D", D, semi=True)
    _require_spd("K", K)
    Ik = np.eye(k)
    E = block_diag(M, Ik)
    J = np.block([[np.zeros((k, k)), -Ik], [Ik, np.zeros((k, k))]])
    R = block_diag(D, np.zeros((k, k)))
    Q = block_diag(Ik, K)
    B = np.vstack([B1, np.zeros((k, m))])
    return assemble({"E": E, "Q": Q, "J": J, "R": R, "B": B}, n=2 * k, m=m)


# presets ---------------------------------------------------------------------

def _rlc_default() -> PHDAESystem:
    # source and C1 between node 1 and ground, resistor between the nodes,
    # C2 and the inductor between node 2 and ground
    return rlc(RLCParams(
        Gc=np.eye(2), Gr=np.array([[1.0], [-1.0]]), Gl=np.array([[0.0], [1.0]]),
        Gv=np.array([[1.0], [0.0]]),
        C=np.diag([1.0, 0.5]), L=np.array([[2.0]]), Rr=np.array([[0.5]]),
    ))


def _rlc_minimal() -> PHDAESystem:
    # one node with C, L, R and a voltage source in parallel
    one = np.array([[1.0]])
    return rlc(RLCParams(Gc=one, Gr=one, Gl=one, Gv=one, C=one, L=one, Rr=one))


def _rlc_no_source() -> PHDAESystem:
    return rlc(RLCParams(
        Gc=np.eye(2), Gr=np.array([[1.0], [-1.0]]), Gl=np.array([[0.0], [1.0]]),
        Gv=np.zeros((2, 0)),
        C=np.diag([1.0, 0.5]), L=np.array([[2.0]]), Rr=np.array([[0.5]]),
    ))


def _gas_default() -> PHDAESystem:
    return gas_network(GasParams(
        M1=np.array([[2.0, 0.5], [0.5, 1.0]]),
        M2=np.array([[1.0, 0.2, 0.0, 0.0], [0.2, 1.5, 0.1, 0.0],
                     [0.0, 0.1, 1.2, 0.3], [0.0, 0.0, 0.3, 0.8]]),
        G=np.array([[1.0, -1.0, 0.0, 0.0], [0.0, 1.0, -1.0, 0.5]]),
        N=np.array([[0.0, 0.0, 1.0, -1.0]]),
        D=np.diag([0.3, 0.2, 0.4, 0.1]),
        B2=np.array([[1.0], [0.0], [0.0], [0.5]]),
    ))


def _gas_small() -> PHDAESystem:
    return gas_network(GasParams(
        M1=np.array([[1.0]]), M2=np.array([[1.0, 0.3], [0.3, 2.0]]),
        G=np.array([[1.0, 0.5]]), N=np.array([[1.0, -1.0]]),
        D=np.diag([0.2, 0.5]), B2=np.array([[1.0], [0.0]]),
    ))


def _manipulator_default() -> PHDAESystem:
    return manipulator_linearized(ManipulatorParams(
        M=np.eye(3), D=np.eye(3), S=np.eye(3),
        G=np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]]),
        B1=np.eye(3),
    ))


def _acoustic_default() -> PHDAESystem:
    K = np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])
    return acoustic(AcousticParams(
        M=np.diag([1.0, 2.0, 1.5]), D=np.diag([0.1, 0.0, 0.2]), K=K,
        B1=np.array([[1.0], [0.0], [0.0]]),
    ))


def _acoustic_conservative() -> PHDAESystem:
    K = np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])
    return acoustic(AcousticParams(M=np.diag([1.0, 2.0, 1.5]), D=np.zeros((3, 3)), K=K,
                                   B1=np.array([[1.0], [0.0], [0.0]])))


def _acoustic_singular() -> PHDAESystem:
    # the last degree of freedom is massless and undamped
    K = np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])
    return acoustic(AcousticParams(
        M=np.diag([1.0, 2.0, 0.0]), D=np.diag([0.1, 0.2, 0.0]), K=K,
        B1=np.array([[1.0], [0.0], [0.0]]),
    ))


PRESETS = {
    "rlc": _rlc_default,
    "rlc_minimal": _rlc_minimal,
    "rlc_no_source": _rlc_no_source,
    "gas": _gas_default,
    "gas_small": _gas_small,
    "manipulator": _manipulator_default,
    "acoustic": _acoustic_default,
    "acoustic_conservative": _acoustic_conservative,
    "acoustic_singular": _acoustic_singular,
}


def preset(name: str) -> PHDAESystem:
    """Return the named preset system (see ``PRESETS`` for the names)."""
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
