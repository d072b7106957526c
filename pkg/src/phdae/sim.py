"""Fixed-step integration of index-at-most-one pHDAEs and an energy auditor.

The default method is an implicit midpoint rule adapted to DAEs. On a step
from ``t_k`` to ``t_{k+1} = t_k + h`` it solves for ``x_{k+1}`` and an
auxiliary ``xi`` in the kernel of ``E(t_m)``::

    E_m (x_{k+1} - x_k) / h = A_m ((x_k + x_{k+1}) / 2 + T_m xi) + B_m u(t_m)
    0 = Z^T (A_{k+1} x_{k+1} + B_{k+1} u(t_{k+1}))

where ``T_m`` spans ``ker E(t_m)`` and ``Z`` spans the left null space of
``E(t_{k+1})``. The algebraic equations therefore hold exactly at every
node while the differential part is the plain midpoint rule. Because
``E T_m = 0``, the discrete energy balance of a constant-coefficient pHDAE
is exact, so ``H`` is conserved to round-off when ``W = 0`` and ``u = 0``.
For ODEs the method is the ordinary implicit midpoint rule.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import HighIndexError, InconsistentInitialValueError, ShapeError
from .linalg import DEFAULT_RANK_TOL, left_null_space, null_space
from .matfun import MatFun
from .system import PHDAESystem, hamiltonian, output, w_matrix

__all__ = [
    "Trajectory",
    "EnergyReport",
    "make_input",
    "uniform_grid",
    "integrate",
    "energy_audit",
    "reconstruct_derivative",
    "equation_residual",
    "constraint_residual",
]

METHODS = ("implicit-midpoint", "implicit-euler")


@dataclass
class Trajectory:
    """Sampled solution; row ``k`` of each array belongs to ``times[k]``."""

    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    inputs: np.ndarray
    hamiltonian: np.ndarray
    method: str = "implicit-midpoint"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        k = len(self.times)
        for name in ("states", "outputs", "inputs", "hamiltonian"):
            if len(getattr(self, name)) != k:
                raise ShapeError(f"trajectory field {name} has length {len(getattr(self, name))}, "
                                 f"expected {k}")

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def m(self) -> int:
        return self.inputs.shape[1]

    def header(self) -> list[str]:
        m = self.outputs.shape[1]
        return (["t"] + [f"x{i + 1}" for i in range(self.n)] + [f"y{i + 1}" for i in range(m)]
                + [f"u{i + 1}" for i in range(self.m)] + ["H"])

    def table(self) -> np.ndarray:
        return np.column_stack([self.times, self.states, self.outputs, self.inputs, self.hamiltonian])

    def to_csv(self, path) -> None:
        """Write ``t, x1..xn, y1..ym, u1..um, H`` with a header row."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            for row in self.table():
                w.writerow([repr(float(v)) for v in row])


def make_input(u, m: int) -> Callable[[float], np.ndarray]:
    """Normalize an input specification to a function ``t -> R^m``.

    Accepted: ``None`` (zero input), a constant vector, a callable, a
    :class:`MatFun` of shape ``(m, 1)`` (polynomial input) or a pair
    ``(times, values)`` of samples that are linearly interpolated.
    """
    if u is None:
        z = np.zeros(m)
        return lambda t: z
    if isinstance(u, MatFun):
        if u.shape != (m, 1):
            raise ShapeError(f"polynomial input must have shape ({m}, 1), got {u.shape}")
        return lambda t: u.eval(t)[:, 0]
    if callable(u):
        def f(t):
            v = np.atleast_1d(np.asarray(u(t), dtype=float))
            if v.shape != (m,):
                raise ShapeError(f"input function returned shape {v.shape}, expected ({m},)")
            return v
        return f
    if isinstance(u, tuple) and len(u) == 2:
        ts = np.asarray(u[0], dtype=float)
        vals = np.asarray(u[1], dtype=float).reshape(len(ts), -1)
        if vals.shape[1] != m:
            raise ShapeError(f"sampled input has {vals.shape[1]} channels, expected {m}")
        if np.any(np.diff(ts) <= 0):
            raise ShapeError("input sample times must be increasing")
        return lambda t: np.array([np.interp(t, ts, vals[:, j]) for j in range(m)])
    v = np.atleast_1d(np.asarray(u, dtype=float))
    if v.shape != (m,):
        raise ShapeError(f"constant input has shape {v.shape}, expected ({m},)")
    return lambda t: v


def uniform_grid(t0: float, tf: float, h: float) -> np.ndarray:
    """Uniform grid from ``t0`` to ``tf`` with step close to ``h`` (endpoint included)."""
    if h <= 0:
        raise ValueError("step size must be positive")
    steps = max(1, int(round((tf - t0) / h)))
    return np.linspace(t0, tf, steps + 1)


class _Coeffs:
    """Cached evaluation of ``E, A, B - P`` and kernel bases."""

    def __init__(self, sys: PHDAESystem, rank_tol: float):
        self.sys = sys
        self.A = sys.A
        self.Bm = sys.input_matrix
        self.const = sys.is_constant
        self.rank_tol = rank_tol
        self._cache = None

    def at(self, t):
        if self.const and self._cache is not None:
            return self._cache
        E = self.sys.E.eval(t)
        A = self.A.eval(t)
        B = self.Bm.eval(t)
        T = null_space(E, self.rank_tol) if E.size else np.zeros((0, 0))
        Z = left_null_space(E, self.rank_tol) if E.size else np.zeros((0, 0))
        out = (E, A, B, T, Z)
        if self.const:
            self._cache = out
        return out


def _algebraic_residual(c: _Coeffs, x, u, t) -> float:
    _, A, B, _, Z = c.at(t)
    if Z.shape[1] == 0:
        return 0.0
    return float(np.linalg.norm(Z.T @ (A @ x + B @ u)))


def constraint_residual(sys: PHDAESystem, x, u=None, t: float | None = None,
                        rank_tol: float = DEFAULT_RANK_TOL) -> float:
    """Norm of the algebraic part ``Z^T (A x + (B - P) u)`` with ``Z^T E = 0``."""
    t = sys.t0 if t is None else t
    u = np.zeros(sys.m) if u is None else np.asarray(u, dtype=float)
    return _algebraic_residual(_Coeffs(sys, rank_tol), np.asarray(x, dtype=float), u, t)


def integrate(sys: PHDAESystem, x0, grid=None, u=None, method: str = "implicit-midpoint",
              h: float | None = None, project: bool = False, tol: float = 1e-8,
              rank_tol: float = DEFAULT_RANK_TOL) -> Trajectory:
    """Integrate ``E x' = A x + (B - P) u`` on a fixed grid.

    Parameters
    ----------
    grid : array_like, optional
        Monotone time grid. Defaults to a uniform grid with step ``h`` over
        the system interval.
    u : see :func:`make_input`
    method : ``"implicit-midpoint"`` (default) or ``"implicit-euler"``
    project : bool
        Move an inconsistent ``x0`` along ``ker E(t0)`` onto the algebraic
        constraints (least squares) instead of raising.
    tol : float
        Relative tolerance of the consistency test at ``t0``.

    Raises
    ------
    InconsistentInitialValueError
        ``x0`` violates the algebraic equations and ``project`` is False.
    HighIndexError
        The algebraic part is singular (differentiation index above one).
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    n, m = sys.n, sys.m
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (n,):
        raise ShapeError(f"initial state has shape {x0.shape}, expected ({n},)")
    if grid is None:
        grid = uniform_grid(sys.t0, sys.tf, h if h is not None else (sys.tf - sys.t0) / 100)
    times = np.asarray(grid, dtype=float)
    if times.ndim != 1 or len(times) < 2 or np.any(np.diff(times) <= 0):
        raise ShapeError("grid must be increasing with at least two points")
    uf = make_input(u, m)
    c = _Coeffs(sys, rank_tol)

    t0 = times[0]
    E0, A0, B0, T0, Z0 = c.at(t0)
    u0 = uf(t0)
    if Z0.shape[1]:
        G = Z0.T @ A0 @ T0
        s = np.linalg.svd(G, compute_uv=False) if G.size else np.zeros(0)
        if G.shape[0] != G.shape[1] or s.size == 0 or s[-1] <= 1e-10 * max(s[0], 1.0):
            raise HighIndexError(
                "algebraic part is singular at t0; reduce the index before integrating"
            )
    res0 = _algebraic_residual(c, x0, u0, t0)
    scale = 1.0 + np.linalg.norm(A0) * np.linalg.norm(x0) + np.linalg.norm(B0) * np.linalg.norm(u0)
    info = {"initial_consistency_residual": res0, "projected": False}
    if res0 > tol * scale:
        if not project:
            raise InconsistentInitialValueError(
                f"initial state violates the algebraic constraints at t0 "
                f"(consistency residual {res0:.3e})", residual=res0,
            )
        G = Z0.T @ A0 @ T0
        eta = np.linalg.lstsq(G, -(Z0.T @ (A0 @ x0 + B0 @ u0)), rcond=None)[0]
        x0 = x0 + T0 @ eta
        info["projected"] = True
        info["projected_residual"] = _algebraic_residual(c, x0, u0, t0)

    N = len(times)
    X = np.empty((N, n))
    Uv = np.empty((N, m))
    X[0] = x0
    Uv[0] = u0
    max_alg = 0.0
    for k in range(N - 1):
        ta, tb = times[k], times[k + 1]
        hk = tb - ta
        ub = uf(tb)
        Uv[k + 1] = ub
        if method == "implicit-euler":
            Eb, Ab, Bb, _, _ = c.at(tb)
            lhs = Eb / hk - Ab
            rhs = Eb @ X[k] / hk + Bb @ ub
            X[k + 1] = _solve(lhs, rhs, tb)
        else:
            tm = ta + 0.5 * hk
            Em, Am, Bm, Tm, _ = c.at(tm)
            Eb, Ab, Bb, _, Zb = c.at(tb)
            um = uf(tm)
            q = Tm.shape[1]
            p = Zb.shape[1]
            lhs = np.zeros((n + p, n + q))
            lhs[:n, :n] = Em / hk - 0.5 * Am
            lhs[:n, n:] = -Am @ Tm
            lhs[n:, :n] = Zb.T @ Ab
            rhs = np.concatenate([(Em / hk + 0.5 * Am) @ X[k] + Bm @ um, -(Zb.T @ (Bb @ ub))])
            X[k + 1] = _solve(lhs, rhs, tb)[:n]
        max_alg = max(max_alg, _algebraic_residual(c, X[k + 1], ub, tb))
    info["max_algebraic_residual"] = max_alg

    Y = np.array([output(sys, X[k], Uv[k], times[k]) for k in range(N)]).reshape(N, m)
    H = np.array([hamiltonian(sys, X[k], times[k]) for k in range(N)])
    return Trajectory(times, X, Y, Uv, H, method, info)


def _solve(lhs, rhs, t):
    if lhs.shape[0] != lhs.shape[1]:
        raise HighIndexError(f"step equations are not square at t={t:.6g} (rank of E changed?)")
    try:
        sol = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError:
        raise HighIndexError(f"singular step matrix at t={t:.6g}") from None
    if not np.all(np.isfinite(sol)):
        raise HighIndexError(f"singular step matrix at t={t:.6g}")
    return sol


@dataclass
class EnergyReport:
    """Energy bookkeeping of a trajectory.

    ``balance_residuals[k] = (H_{k+1} - H_k)/h_k - (p_k + p_{k+1})/2`` with the
    power ``p = u^T y - z^T W z``, ``z = [x; u]``; it is O(h^2) for a
    consistent second-order method. ``dissipation_margin`` is
    ``cumulative_supply - (H(t_end) - H(t_0))``.
    """

    balance_residuals: np.ndarray
    cumulative_supply: float
    dissipation_margin: float
    hamiltonian_change: float
    max_hamiltonian_drift: float
    tol: float
    violated: bool

    @property
    def max_balance_residual(self) -> float:
        return float(np.max(np.abs(self.balance_residuals))) if self.balance_residuals.size else 0.0

    def as_dict(self) -> dict:
        return {
            "max_balance_residual": self.max_balance_residual,
            "cumulative_supply": self.cumulative_supply,
            "dissipation_margin": self.dissipation_margin,
            "hamiltonian_change": self.hamiltonian_change,
            "max_hamiltonian_drift": self.max_hamiltonian_drift,
            "tol": self.tol,
            "violated": self.violated,
        }


def energy_audit(traj: Trajectory, sys: PHDAESystem, tol: float | None = None) -> EnergyReport:
    """Check the energy balance and the dissipation inequality along ``traj``.

    The default tolerance is ``1e-8 (1 + |H(t_0)|)``.
    """
    t = traj.times
    H = traj.hamiltonian
    supply = np.einsum("ij,ij->i", traj.inputs, traj.outputs)
    diss = np.empty(len(t))
    for k in range(len(t)):
        z = np.concatenate([traj.states[k], traj.inputs[k]])
        diss[k] = z @ w_matrix(sys, t[k]) @ z
    p = supply - diss
    h = np.diff(t)
    res = np.diff(H) / h - 0.5 * (p[1:] + p[:-1])
    cum = float(np.trapezoid(supply, t)) if hasattr(np, "trapezoid") else float(np.trapz(supply, t))
    dH = float(H[-1] - H[0])
    tol = 1e-8 * (1.0 + abs(H[0])) if tol is None else tol
    margin = cum - dH
    return EnergyReport(res, cum, margin, dH, float(np.max(np.abs(H - H[0]))), tol,
                        bool(margin < -tol))


def reconstruct_derivative(traj, component=None, times=None) -> np.ndarray:
    """Second-order finite-difference derivative of sampled states.

    ``traj`` is a :class:`Trajectory` (``component`` selects state columns:
    an index, slice or index list) or a plain sample array together with
    ``times``. Central differences inside, one-sided second-order
    differences at the ends.
    """
    if isinstance(traj, Trajectory):
        data = traj.states if component is None else traj.states[:, component]
        times = traj.times
    else:
        data = np.asarray(traj, dtype=float)
        if component is not None:
            data = data[:, component]
        if times is None:
            raise ValueError("times are required for sampled data")
    times = np.asarray(times, dtype=float)
    if len(times) < 3:
        raise ValueError("derivative reconstruction needs at least three grid points")
    return np.gradient(data, times, axis=0, edge_order=2)


def equation_residual(sys: PHDAESystem, times, states, inputs=None,
                      derivatives=None) -> np.ndarray:
    """``||E x' - A x - (B - P) u||`` at each sample.

    ``x'`` is reconstructed by second-order differences unless
    ``derivatives`` are supplied.
    """
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    inputs = np.zeros((len(times), sys.m)) if inputs is None else np.asarray(inputs, float)
    if derivatives is None:
        dx = reconstruct_derivative(states, times=times)
    else:
        dx = np.asarray(derivatives, dtype=float)
    A = sys.A
    Bm = sys.input_matrix
    out = np.empty(len(times))
    for k, t in enumerate(times):
        r = sys.E.eval(t) @ dx[k] - A.eval(t) @ states[k] - Bm.eval(t) @ inputs[k]
        out[k] = np.linalg.norm(r)
    return out
