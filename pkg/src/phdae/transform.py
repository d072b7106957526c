"""Structure-preserving transformations of pHDAE systems.

* :func:`congruence` -- change of basis ``x = V x~`` together with a left
  scaling by ``U^T``; the Hamiltonian is unchanged.
* :func:`eliminate_k` -- removes the ``E K`` term by solving ``V' = V K``.
* :func:`compress_operator` -- ``(E, A) -> (V^T E V, V^T A V - V^T E V')``
  for skew-adjoint operator pairs, with rectangular ``V`` allowed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ShapeError, SingularTransformError, StructureError
from .linalg import norm2
from .matfun import MatFun, as_matfun, chebyshev_points, pointwise
from .system import DEFAULT_GRID, PHDAESystem, hamiltonian

__all__ = [
    "TransformPair",
    "TransformReport",
    "congruence",
    "KFreeSystem",
    "eliminate_k",
    "compress_operator",
    "skew_adjoint_residual",
]


@dataclass(frozen=True)
class TransformPair:
    """Left factor ``U`` (continuous) and state transform ``V`` (with exact derivative)."""

    U: MatFun
    V: MatFun

    def __post_init__(self):
        object.__setattr__(self, "U", as_matfun(self.U))
        object.__setattr__(self, "V", as_matfun(self.V))
        if self.U.rows != self.U.cols or self.V.rows != self.V.cols:
            raise ShapeError("U and V must be square")

    @classmethod
    def identity(cls, n: int) -> "TransformPair":
        return cls(MatFun.identity(n), MatFun.identity(n))

    def conditioning(self, times) -> dict:
        """Largest condition number and smallest singular value of U(t), V(t) over ``times``."""
        out = {}
        for name in ("U", "V"):
            mf = getattr(self, name)
            smin, cond = np.inf, 1.0
            for t in times:
                s = np.linalg.svd(mf.eval(t), compute_uv=False)
                if s.size == 0:
                    continue
                smin = min(smin, s[-1])
                cond = max(cond, s[0] / s[-1] if s[-1] > 0 else np.inf)
            out[name] = {"min_singular_value": float(smin), "condition": float(cond)}
        return out


@dataclass
class TransformReport:
    fit_residual: float
    conditioning: dict


def congruence(sys: PHDAESystem, tp: TransformPair, grid_points: int = DEFAULT_GRID,
               max_degree: int = 12, fit_tol: float = 1e-10, sing_tol: float = 1e-12,
               full_output: bool = False):
    """Transform a pHDAE with a pointwise invertible pair ``(U, V)``.

    The new coefficients are::

        E~ = U^T E V    Q~ = U^{-1} Q V    J~ = U^T J U    R~ = U^T R U
        B~ = U^T B      P~ = U^T P         K~ = V^{-1} K V + V^{-1} V'

    and ``S, N`` are unchanged. Products without inverses stay exact
    polynomials. ``Q~`` and ``K~`` are exact when ``U`` (resp. ``V``) is
    constant and are otherwise re-fitted on a Chebyshev grid.

    Raises
    ------
    SingularTransformError
        ``U`` or ``V`` has a singular value below ``sing_tol`` (relative to
        its norm) at a verification grid point.
    FitError
        A re-fitted coefficient misses ``fit_tol``.
    """
    n = sys.n
    if tp.U.shape != (n, n) or tp.V.shape != (n, n):
        raise ShapeError(f"transform pair must be {n}x{n}")
    times = np.union1d(sys.grid(grid_points), chebyshev_points(sys.t0, sys.tf, 2 * max_degree + 2))
    cond = tp.conditioning(times)
    for name in ("U", "V"):
        mf = getattr(tp, name)
        scale = max(norm2(mf.eval(t)) for t in times) if n else 1.0
        if n and cond[name]["min_singular_value"] <= sing_tol * max(scale, 1.0):
            raise SingularTransformError(
                f"{name} is numerically singular on the grid "
                f"(min singular value {cond[name]['min_singular_value']:.3e})"
            )

    U, V = tp.U, tp.V
    Ut = U.T
    interval = sys.interval
    Vd = V.derivative()

    if U.is_constant:
        Uinv = MatFun.constant(np.linalg.inv(U.coeff(0)))
        Qn, res_q = Uinv @ sys.Q @ V, 0.0
    else:
        Qn, res_q = pointwise(lambda u, q, v: np.linalg.solve(u, q @ v), U, sys.Q, V,
                              interval=interval, max_degree=max_degree, tol=fit_tol)
    if V.is_constant:
        Vinv = MatFun.constant(np.linalg.inv(V.coeff(0)))
        Kn, res_k = Vinv @ sys.K @ V, 0.0
    else:
        Kn, res_k = pointwise(lambda v, k, vd: np.linalg.solve(v, k @ v + vd), V, sys.K, Vd,
                              interval=interval, max_degree=max_degree, tol=fit_tol)

    out = sys.replace(
        E=Ut @ sys.E @ V,
        Q=Qn,
        J=Ut @ sys.J @ U,
        R=Ut @ sys.R @ U,
        K=Kn,
        B=Ut @ sys.B,
        P=Ut @ sys.P,
    )
    if full_output:
        return out, TransformReport(fit_residual=max(res_q, res_k), conditioning=cond)
    return out


@dataclass
class KFreeSystem:
    """Sampled coefficient path of a system with ``K = 0``.

    ``E[k], Q[k], ...`` are the coefficients at ``times[k]``; ``V[k]`` is the
    solution of ``V' = V K`` used to build them, so that ``x = V x~``.
    """

    times: np.ndarray
    V: np.ndarray
    E: np.ndarray
    Q: np.ndarray
    J: np.ndarray
    R: np.ndarray
    B: np.ndarray
    P: np.ndarray
    S: np.ndarray
    N: np.ndarray
    hamiltonian_error: float
    min_singular_value: float

    def derivative_identity_residual(self) -> float:
        """Max over interior samples of ``||d/dt(Q^T E) + Q^T J Q + Q^T J^T Q||``.

        The derivative is a second-order finite difference of the samples,
        so the residual is O(h^2) rather than zero.
        """
        QtE = np.einsum("kji,kjl->kil", self.Q, self.E)
        dQtE = np.gradient(QtE, self.times, axis=0, edge_order=2)
        QtJQ = np.einsum("kji,kjl,klp->kip", self.Q, self.J, self.Q)
        res = dQtE + QtJQ + np.transpose(QtJQ, (0, 2, 1))
        return float(max(norm2(r) for r in res[1:-1])) if len(res) > 2 else 0.0


def eliminate_k(sys: PHDAESystem, steps: int = 200, tol: float = 1e-10,
                n_checks: int = 5, seed: int = 0) -> tuple[KFreeSystem, np.ndarray]:
    """Remove the ``E K`` term by the transformation ``x~ = V_K^{-1} x``.

    ``V' = V K(t)``, ``V(t0) = I`` is integrated with the classical
    fourth-order Runge-Kutta method on ``steps`` uniform steps. The new
    coefficients ``E V^{-1}``, ``Q V^{-1}`` are returned as samples; ``J, R,
    B, P, S, N`` are unchanged. The Hamiltonian agreement
    ``H(x) = H~(x~)`` is checked at every sample for a few random states.

    Returns
    -------
    (KFreeSystem, ndarray)
        The sampled system and the path ``V_K`` of shape ``(steps+1, n, n)``.
    """
    if steps < 2:
        raise ValueError("steps must be at least 2")
    n = sys.n
    times = np.linspace(sys.t0, sys.tf, steps + 1)
    h = times[1] - times[0]
    K = sys.K
    Vs = np.empty((steps + 1, n, n))
    Vs[0] = np.eye(n)
    Vc = np.eye(n)
    const = K.is_constant
    Kc = K.coeff(0)
    for k in range(steps):
        t = times[k]
        if const:
            K1 = K2 = K4 = Kc
        else:
            K1, K2, K4 = K.eval(t), K.eval(t + 0.5 * h), K.eval(t + h)
        k1 = Vc @ K1
        k2 = (Vc + 0.5 * h * k1) @ K2
        k3 = (Vc + 0.5 * h * k2) @ K2
        k4 = (Vc + h * k3) @ K4
        Vc = Vc + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        Vs[k + 1] = Vc

    smin = min(np.linalg.svd(v, compute_uv=False)[-1] for v in Vs) if n else 1.0
    if smin < tol:
        raise SingularTransformError(f"V_K lost invertibility (min singular value {smin:.3e})")

    Es = np.empty_like(Vs)
    Qs = np.empty_like(Vs)
    rng = np.random.default_rng(seed)
    herr = 0.0
    cols = {name: [] for name in ("J", "R", "B", "P", "S", "N")}
    for k, t in enumerate(times):
        Vinv = np.linalg.inv(Vs[k])
        Et, Qt = sys.E.eval(t), sys.Q.eval(t)
        Es[k] = Et @ Vinv
        Qs[k] = Qt @ Vinv
        for name in cols:
            cols[name].append(getattr(sys, name).eval(t))
        for _ in range(n_checks):
            xt = rng.standard_normal(n)
            x = Vs[k] @ xt
            H_new = 0.5 * x @ (Qs[k].T @ Es[k]) @ x
            H_old = hamiltonian(sys, xt, t)
            herr = max(herr, abs(H_new - H_old) / (1.0 + abs(H_old)))
    ks = KFreeSystem(times=times, V=Vs, E=Es, Q=Qs,
                     **{k: np.stack(v) for k, v in cols.items()},
                     hamiltonian_error=herr, min_singular_value=float(smin))
    return ks, Vs


def skew_adjoint_residual(E: MatFun, A: MatFun, times) -> float:
    """Max over ``times`` of ``||E - E^T|| + ||E' + A + A^T||``."""
    E, A = as_matfun(E), as_matfun(A)
    Ed = E.derivative()
    res = 0.0
    for t in times:
        e = E.eval(t)
        a = A.eval(t)
        res = max(res, norm2(e - e.T) + norm2(Ed.eval(t) + a + a.T))
    return res


def compress_operator(E, A, V, interval=(0.0, 1.0), grid_points: int = DEFAULT_GRID,
                      tol: float = 1e-10) -> tuple[MatFun, MatFun]:
    """Compress the operator ``E d/dt - A`` by a (possibly rectangular) ``V``.

    Returns ``(V^T E V, V^T A V - V^T E V')``. Both input and output are
    required to be skew-adjoint on the grid (``E = E^T`` and
    ``E' = -(A + A^T)``); the output check guards against round-off only,
    since compression preserves the property exactly.
    """
    E, A, V = as_matfun(E), as_matfun(A), as_matfun(V)
    if E.shape != A.shape or E.rows != E.cols or V.rows != E.rows:
        raise ShapeError(f"incompatible shapes E{E.shape}, A{A.shape}, V{V.shape}")
    times = np.linspace(interval[0], interval[1], grid_points)
    scale = 1.0 + max(norm2(E.eval(t)) + norm2(A.eval(t)) for t in times)
    res_in = skew_adjoint_residual(E, A, times)
    if res_in > tol * scale:
        raise StructureError(f"input pair is not skew-adjoint (residual {res_in:.3e})")
    Vt = V.T
    Ec = Vt @ E @ V
    Ac = Vt @ A @ V - Vt @ E @ V.derivative()
    scale_out = 1.0 + max(norm2(Ec.eval(t)) + norm2(Ac.eval(t)) for t in times)
    res_out = skew_adjoint_residual(Ec, Ac, times)
    if res_out > tol * scale_out:
        raise StructureError(f"compressed pair lost skew-adjointness (residual {res_out:.3e})")
    return Ec, Ac
