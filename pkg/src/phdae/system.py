"""The linear pHDAE system type and its defining structure checks.

A port-Hamiltonian descriptor system has the form::

    E x' = [(J - R) Q - E K] x + (B - P) u
    y    = (B + P)^T Q x + (S + N) u

and is a pHDAE when, on the whole time interval,

* ``Q^T E = E^T Q`` and ``d/dt(Q^T E) = Q^T (E K - J Q) + (E K - J Q)^T Q``,
* ``Q^T E`` is positive semidefinite (this is the operational form of the
  Hamiltonian being bounded from below),
* ``W = [[Q^T R Q, Q^T P], [P^T Q, S]]`` is positive semidefinite.

The Hamiltonian is ``H(x) = 1/2 x^T Q^T E x``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .exceptions import ShapeError
from .linalg import min_eig_sym, norm2, sym
from .matfun import MatFun, as_matfun

__all__ = [
    "COEFFICIENT_NAMES",
    "PHDAESystem",
    "StructureReport",
    "assemble",
    "hamiltonian",
    "w_matrix",
    "output",
    "verify_structure",
]

COEFFICIENT_NAMES = ("E", "Q", "J", "R", "K", "B", "P", "S", "N")

DEFAULT_TOL = 1e-10
DEFAULT_GRID = 33


@dataclass(frozen=True)
class PHDAESystem:
    """Coefficient functions of a linear (possibly time-varying) pHDAE.

    Use :func:`assemble` to build one; the constructor performs the same
    shape validation but expects :class:`MatFun` arguments. Nothing here
    checks the pHDAE conditions; call :func:`verify_structure` for that.
    """

    E: MatFun
    Q: MatFun
    J: MatFun
    R: MatFun
    K: MatFun
    B: MatFun
    P: MatFun
    S: MatFun
    N: MatFun
    t0: float = 0.0
    tf: float = 1.0

    def __post_init__(self):
        n = self.E.rows
        m = self.B.cols
        expected = {
            "E": (n, n), "Q": (n, n), "J": (n, n), "R": (n, n), "K": (n, n),
            "B": (n, m), "P": (n, m), "S": (m, m), "N": (m, m),
        }
        for name, shp in expected.items():
            got = getattr(self, name).shape
            if got != shp:
                raise ShapeError(f"coefficient {name} has shape {got}, expected {shp} (n={n}, m={m})")
        if not (np.isfinite(self.t0) and np.isfinite(self.tf)) or self.t0 >= self.tf:
            raise ShapeError(f"time interval must satisfy t0 < tf, got [{self.t0}, {self.tf}]")

    @property
    def n(self) -> int:
        return self.E.rows

    @property
    def m(self) -> int:
        return self.B.cols

    @property
    def interval(self) -> tuple[float, float]:
        return (self.t0, self.tf)

    @property
    def is_constant(self) -> bool:
        return all(getattr(self, k).is_constant for k in COEFFICIENT_NAMES)

    @property
    def A(self) -> MatFun:
        """State matrix ``(J - R) Q - E K``."""
        return (self.J - self.R) @ self.Q - self.E @ self.K

    @property
    def input_matrix(self) -> MatFun:
        """``B - P``."""
        return self.B - self.P

    def coefficients(self) -> dict[str, MatFun]:
        return {k: getattr(self, k) for k in COEFFICIENT_NAMES}

    def at(self, t: float) -> dict[str, np.ndarray]:
        """All nine coefficients evaluated at ``t``."""
        return {k: getattr(self, k).eval(t) for k in COEFFICIENT_NAMES}

    def replace(self, **changes) -> "PHDAESystem":
        changes = {k: (as_matfun(v) if k in COEFFICIENT_NAMES else v) for k, v in changes.items()}
        return dataclasses.replace(self, **changes)

    def grid(self, npts: int = DEFAULT_GRID) -> np.ndarray:
        return np.linspace(self.t0, self.tf, npts)

    # convenience wrappers
    def hamiltonian(self, x, t=None) -> float:
        return hamiltonian(self, x, self.t0 if t is None else t)

    def w_matrix(self, t=None) -> np.ndarray:
        return w_matrix(self, self.t0 if t is None else t)

    def output(self, x, u, t=None) -> np.ndarray:
        return output(self, x, u, self.t0 if t is None else t)

    def __repr__(self) -> str:
        kind = "constant" if self.is_constant else "time-varying"
        return f"PHDAESystem(n={self.n}, m={self.m}, {kind}, interval=[{self.t0}, {self.tf}])"


def assemble(coefficients: Mapping, n: int | None = None, m: int | None = None,
             interval=(0.0, 1.0)) -> PHDAESystem:
    """Build a :class:`PHDAESystem` from matrices, coefficient stacks or MatFuns.

    ``E`` and ``J`` are required. Missing entries default to ``Q = I`` and
    zero for ``R, K, B, P, S, N``; ``m`` is taken from ``B`` (or is 0).
    No structure checks are performed.
    """
    coeffs = {k: as_matfun(v) for k, v in coefficients.items() if v is not None}
    unknown = set(coeffs) - set(COEFFICIENT_NAMES)
    if unknown:
        raise ShapeError(f"unknown coefficient names: {sorted(unknown)}")
    for req in ("E", "J"):
        if req not in coeffs:
            raise ShapeError(f"coefficient {req} is required")
    if n is None:
        n = coeffs["E"].rows
    if m is None:
        if "B" in coeffs:
            m = coeffs["B"].cols
        elif "P" in coeffs:
            m = coeffs["P"].cols
        elif "S" in coeffs:
            m = coeffs["S"].cols
        else:
            m = 0
    defaults = {
        "Q": MatFun.identity(n), "R": MatFun.zeros(n, n), "K": MatFun.zeros(n, n),
        "B": MatFun.zeros(n, m), "P": MatFun.zeros(n, m),
        "S": MatFun.zeros(m, m), "N": MatFun.zeros(m, m),
    }
    for k, v in defaults.items():
        coeffs.setdefault(k, v)
    if coeffs["E"].shape != (n, n):
        raise ShapeError(f"coefficient E has shape {coeffs['E'].shape}, expected {(n, n)}")
    if coeffs["B"].shape != (n, m):
        raise ShapeError(f"coefficient B has shape {coeffs['B'].shape}, expected {(n, m)}")
    t0, tf = (float(v) for v in interval)
    return PHDAESystem(t0=t0, tf=tf, **coeffs)


def hamiltonian(sys: PHDAESystem, x, t: float) -> float:
    """``H(x) = 1/2 x^T Q^T E x`` using the symmetric part of ``Q^T E``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.n,):
        raise ShapeError(f"state has shape {x.shape}, expected ({sys.n},)")
    H = sym(sys.Q.eval(t).T @ sys.E.eval(t))
    return 0.5 * float(x @ H @ x)


def w_matrix(sys: PHDAESystem, t: float) -> np.ndarray:
    """Dissipation matrix ``[[Q^T R Q, Q^T P], [P^T Q, S]]`` at time ``t``."""
    c = sys.at(t)
    Q = c["Q"]
    QtP = Q.T @ c["P"]
    return np.block([[Q.T @ c["R"] @ Q, QtP], [QtP.T, c["S"]]])


def output(sys: PHDAESystem, x, u, t: float) -> np.ndarray:
    """Port output ``y = (B + P)^T Q x + (S + N) u``."""
    c = sys.at(t)
    x = np.asarray(x, dtype=float)
    u = np.zeros(sys.m) if u is None else np.asarray(u, dtype=float)
    return (c["B"] + c["P"]).T @ c["Q"] @ x + (c["S"] + c["N"]) @ u


@dataclass
class StructureReport:
    """Residuals and eigenvalue margins of the pHDAE conditions on a time grid.

    Residuals are maxima over the grid of spectral norms. A residual passes
    when it is at most ``tol * (1 + scale)``; a minimum eigenvalue passes when
    it is at least ``-tol * (1 + ||matrix||_2)``. Scales of product
    residuals use the norms of the factors, which bound their round-off.
    """

    skew_symmetry_residual: float
    derivative_identity_residual: float
    min_eig_QTE: float
    min_eig_W: float
    feedthrough_residual: float
    tol: float
    grid_points: int
    scales: dict = field(default_factory=dict)
    passed: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return bool(self.passed.get("overall", False))

    def failures(self) -> list[str]:
        return [k for k, v in self.passed.items() if k != "overall" and not v]

    def as_dict(self) -> dict:
        def fin(v):
            v = float(v)
            return v if np.isfinite(v) else None
        return {
            "skew_symmetry_residual": fin(self.skew_symmetry_residual),
            "derivative_identity_residual": fin(self.derivative_identity_residual),
            "min_eig_QTE": fin(self.min_eig_QTE),
            "min_eig_W": fin(self.min_eig_W),
            "feedthrough_residual": fin(self.feedthrough_residual),
            "tol": self.tol,
            "grid_points": self.grid_points,
            "passed": {k: bool(v) for k, v in self.passed.items()},
        }


def verify_structure(sys: PHDAESystem, grid_points: int = DEFAULT_GRID,
                     tol: float = DEFAULT_TOL) -> StructureReport:
    """Check the pHDAE conditions on a uniform grid over the system interval.

    Uses the exact polynomial derivative of ``Q^T E``. Failures are reported
    in the returned :class:`StructureReport`, never raised.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")
    QtE = sys.Q.T @ sys.E
    dQtE = QtE.derivative()
    M = sys.E @ sys.K - sys.J @ sys.Q
    half = sys.Q.T @ M
    rhs = half + half.T

    skew = deriv = feed = 0.0
    min_h = min_w = np.inf
    scale_skew = scale_deriv = norm_h = norm_w = scale_feed = 0.0
    ok_h = ok_w = True
    for t in sys.grid(grid_points):
        H = QtE.eval(t)
        c = sys.at(t)
        nq = norm2(c["Q"])
        skew = max(skew, norm2(H - H.T))
        scale_skew = max(scale_skew, nq * norm2(c["E"]))
        D = dQtE.eval(t)
        Rt = rhs.eval(t)
        deriv = max(deriv, norm2(D - Rt))
        # round-off in the products is bounded by the norms of the factors
        factors = nq * (norm2(c["E"]) * norm2(c["K"]) + norm2(c["J"]) * nq)
        scale_deriv = max(scale_deriv, norm2(D) + 2.0 * max(norm2(half.eval(t)), factors))
        eh = min_eig_sym(H)
        min_h = min(min_h, eh)
        ok_h &= eh >= -tol * (1.0 + norm2(H))
        W = w_matrix(sys, t)
        ew = min_eig_sym(W)
        min_w = min(min_w, ew)
        ok_w &= ew >= -tol * (1.0 + norm2(W))
        S = sys.S.eval(t)
        Nn = sys.N.eval(t)
        feed = max(feed, norm2(S - S.T) + norm2(Nn + Nn.T) + norm2(W - W.T))
        w_factors = nq * nq * norm2(c["R"]) + 2.0 * nq * norm2(c["P"]) + norm2(S)
        scale_feed = max(scale_feed, norm2(S) + norm2(Nn) + max(norm2(W), w_factors))
        norm_h = max(norm_h, norm2(H))
        norm_w = max(norm_w, norm2(W))

    passed = {
        "symmetry": skew <= tol * (1.0 + scale_skew),
        "derivative_identity": deriv <= tol * (1.0 + scale_deriv),
        "hamiltonian_psd": bool(ok_h),
        "dissipation_psd": bool(ok_w),
        "feedthrough": feed <= tol * (1.0 + scale_feed),
    }
    passed["overall"] = all(passed.values())
    return StructureReport(
        skew_symmetry_residual=skew,
        derivative_identity_residual=deriv,
        min_eig_QTE=min_h,
        min_eig_W=min_w,
        feedthrough_residual=feed,
        tol=tol,
        grid_points=grid_points,
        scales={"symmetry": scale_skew, "derivative_identity": scale_deriv,
                "hamiltonian": norm_h, "dissipation": norm_w, "feedthrough": scale_feed},
        passed=passed,
    )
