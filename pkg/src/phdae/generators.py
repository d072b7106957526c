"""Random pHDAE generators with known ground truth, used by tests and demos."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import ortho_group

from .matfun import MatFun
from .system import PHDAESystem, assemble

__all__ = [
    "random_orthogonal",
    "random_invertible",
    "random_skew",
    "random_psd",
    "random_constant_phdae",
    "IndexOneInstance",
    "random_index_one",
    "time_varying_phdae",
]


def random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros((0, 0))
    if n == 1:
        return np.array([[1.0 if rng.random() < 0.5 else -1.0]])
    return ortho_group.rvs(n, random_state=rng)


def random_invertible(rng: np.random.Generator, n: int, cond: float = 10.0) -> np.ndarray:
    """``U diag(s) V^T`` with singular values log-spaced in ``[1, cond]``."""
    if n == 0:
        return np.zeros((0, 0))
    s = np.logspace(0.0, np.log10(cond), n)
    rng.shuffle(s)
    return random_orthogonal(rng, n) @ np.diag(s) @ random_orthogonal(rng, n).T


def random_skew(rng: np.random.Generator, n: int) -> np.ndarray:
    A = rng.standard_normal((n, n))
    return A - A.T


def random_psd(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    rank = n if rank is None else rank
    G = rng.standard_normal((n, rank))
    A = G @ G.T
    return 0.5 * (A + A.T)


def random_constant_phdae(rng: np.random.Generator, n: int, m: int, rank_e: int | None = None,
                          with_k: bool = False, dissipative: bool = True) -> PHDAESystem:
    """Random constant pHDAE with invertible ``Q``.

    ``Q^T E = H`` is a random PSD matrix of rank ``rank_e`` and ``E = Q^{-T} H``.
    ``W`` is built directly as a PSD matrix and split into ``R, P, S``. With
    ``with_k`` (only when ``H`` is invertible) ``K = H^{-1} Omega`` for a skew
    ``Omega`` so that ``Q^T E K`` is skew, as the derivative identity requires.
    """
    rank_e = n if rank_e is None else rank_e
    Q = random_invertible(rng, n, cond=5.0)
    H = random_psd(rng, n, rank_e) + (np.eye(n) if rank_e == n else 0.0)
    E = np.linalg.solve(Q.T, H)
    J = random_skew(rng, n)
    if dissipative:
        W = random_psd(rng, n + m, n + m) * 0.5
    else:
        W = np.zeros((n + m, n + m))
    Qi = np.linalg.inv(Q)
    R = Qi.T @ W[:n, :n] @ Qi
    R = 0.5 * (R + R.T)
    P = Qi.T @ W[:n, n:]
    S = W[n:, n:]
    N = random_skew(rng, m)
    K = np.zeros((n, n))
    if with_k and rank_e == n:
        K = np.linalg.solve(H, random_skew(rng, n))
    return assemble({"E": E, "Q": Q, "J": J, "R": R, "K": K, "B": rng.standard_normal((n, m)),
                     "P": P, "S": S, "N": N}, n=n, m=m)


@dataclass
class IndexOneInstance:
    """A random index-one pHDAE together with the block data it was built from.

    ``system`` equals the block system ``canonical`` transformed by the
    orthogonal pair ``(U, V)``.
    """

    system: PHDAESystem
    canonical: PHDAESystem
    U: np.ndarray
    V: np.ndarray
    n1: int
    n2: int


def random_index_one(rng: np.random.Generator, n1: int, n2: int, m: int,
                     with_k: bool = True) -> IndexOneInstance:
    """Constructive index-one pHDAE generator.

    Built in block form with ``E = blkdiag(E11, 0)``, ``E11`` SPD,
    ``Q11 = E11^{-1} H11`` for SPD ``H11`` (so ``Q11^T E11 = H11``),
    ``Q12 = 0``, random ``Q21`` and invertible ``Q22``, skew ``J``, a
    positive definite ``[[R, P], [P^T, S]]`` (which makes ``L22`` invertible)
    and ``K = [[H11^{-1} Omega, 0], [K21, K22]]``. The result is scrambled by
    random orthogonal ``U, V``: ``E -> U^T E V``, ``Q -> U^T Q V`` and so on.
    """
    n = n1 + n2
    E11 = random_psd(rng, n1) + np.eye(n1)
    H11 = random_psd(rng, n1) + np.eye(n1)
    Q11 = np.linalg.solve(E11, H11)
    Q22 = random_invertible(rng, n2, cond=5.0)
    Q = np.zeros((n, n))
    Q[:n1, :n1] = Q11
    Q[n1:, :n1] = rng.standard_normal((n2, n1))
    Q[n1:, n1:] = Q22
    E = np.zeros((n, n))
    E[:n1, :n1] = E11
    J = random_skew(rng, n)
    W = random_psd(rng, n + m) * 0.5 + 0.05 * np.eye(n + m)
    R = W[:n, :n]
    P = W[:n, n:]
    S = W[n:, n:]
    K = np.zeros((n, n))
    if with_k:
        K[:n1, :n1] = np.linalg.solve(H11, random_skew(rng, n1))
        K[n1:, :] = rng.standard_normal((n2, n))
    B = rng.standard_normal((n, m))
    N = random_skew(rng, m)
    canonical = assemble({"E": E, "Q": Q, "J": J, "R": R, "K": K, "B": B, "P": P, "S": S, "N": N},
                         n=n, m=m)
    U = random_orthogonal(rng, n)
    V = random_orthogonal(rng, n)
    scrambled = assemble({
        "E": U.T @ E @ V, "Q": U.T @ Q @ V, "J": U.T @ J @ U, "R": U.T @ R @ U,
        "K": V.T @ K @ V, "B": U.T @ B, "P": U.T @ P, "S": S, "N": N,
    }, n=n, m=m)
    return IndexOneInstance(scrambled, canonical, U, V, n1, n2)


def time_varying_phdae(rng: np.random.Generator, n: int, m: int,
                       interval=(0.0, 1.0)) -> PHDAESystem:
    """Time-varying pHDAE with ``E(t) = E0 + t D`` and ``J = J0 - D/2``.

    ``Q = I`` and ``K = 0``, so the derivative identity reads
    ``E' = -(J + J^T) = D``; ``E0`` is SPD and ``D`` PSD, so ``E(t)`` stays
    positive definite for ``t >= 0``.
    """
    D = random_psd(rng, n) * 0.5
    E0 = random_psd(rng, n) + np.eye(n)
    J0 = random_skew(rng, n)
    W = random_psd(rng, n + m) * 0.5
    J = MatFun(np.stack([J0 - 0.5 * D]))
    E = MatFun(np.stack([E0, D]))
    return assemble({"E": E, "Q": np.eye(n), "J": J, "R": W[:n, :n], "B": rng.standard_normal((n, m)),
                     "P": W[:n, n:], "S": W[n:, n:], "N": random_skew(rng, m)},
                    n=n, m=m, interval=interval)
