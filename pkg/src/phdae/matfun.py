"""Matrix-valued polynomials in time.

A :class:`MatFun` stores ``M(t) = C0 + C1 t + ... + Ck t^k`` as a stack of
coefficient matrices. Derivatives are exact, which matters because the
skew-adjointness condition of a pHDAE compares ``d/dt (Q^T E)`` with an
algebraic expression; a finite-difference derivative would leave an
O(h^2) residual in a check that should be zero.

Non-polynomial coefficient functions (for instance ``U^{-1} Q V`` for a
time-varying ``U``) are sampled on a Chebyshev grid and re-fitted with
:func:`fit`, which reports the fit residual.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial
from numpy.polynomial import chebyshev as cheb

from .exceptions import FitError, ShapeError

__all__ = ["MatFun", "as_matfun", "fit", "pointwise", "chebyshev_points"]


class MatFun:
    """Matrix polynomial ``M(t) = sum_j coeffs[j] * t**j``.

    Parameters
    ----------
    coeffs : array_like
        Either a single 2-D matrix (constant function) or a sequence of
        equally shaped 2-D matrices ``C0, C1, ...``. An empty sequence is
        rejected; use an explicit zero matrix.

    Notes
    -----
    Instances are immutable. The coefficient array is copied and marked
    read-only.
    """

    __slots__ = ("_c",)
    __array_priority__ = 100

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=float)
        if c.ndim == 2:
            c = c[np.newaxis]
        if c.ndim != 3:
            raise ShapeError(
                f"MatFun coefficients must be a matrix or a stack of matrices, got ndim={c.ndim}"
            )
        if c.shape[0] == 0:
            raise ShapeError("MatFun needs at least one coefficient matrix")
        c.setflags(write=False)
        self._c = c

    # construction helpers -------------------------------------------------
    @classmethod
    def constant(cls, A) -> "MatFun":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return cls(A[np.newaxis])

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "MatFun":
        return cls(np.zeros((1, rows, cols)))

    @classmethod
    def identity(cls, n: int) -> "MatFun":
        return cls(np.eye(n)[np.newaxis])

    @classmethod
    def block(cls, blocks: Sequence[Sequence["MatFun"]]) -> "MatFun":
        """Assemble a block matrix function from a nested list of MatFuns."""
        blocks = [[as_matfun(b) for b in row] for row in blocks]
        deg = max(b.degree for row in blocks for b in row)
        coeffs = [
            np.block([[b.coeff(j) for b in row] for row in blocks]) for j in range(deg + 1)
        ]
        return cls(np.stack(coeffs))

    # basic properties ------------------------------------------------------
    @property
    def coeffs(self) -> np.ndarray:
        """Read-only coefficient stack of shape ``(degree + 1, rows, cols)``."""
        return self._c

    @property
    def shape(self) -> tuple[int, int]:
        return self._c.shape[1], self._c.shape[2]

    @property
    def rows(self) -> int:
        return self._c.shape[1]

    @property
    def cols(self) -> int:
        return self._c.shape[2]

    @property
    def degree(self) -> int:
        return self._c.shape[0] - 1

    @property
    def is_constant(self) -> bool:
        return self.degree == 0 or not np.any(self._c[1:])

    def coeff(self, j: int) -> np.ndarray:
        """Coefficient of ``t**j`` (zero matrix beyond the degree)."""
        if j <= self.degree:
            return self._c[j]
        return np.zeros(self.shape)

    def trim(self, tol: float = 0.0) -> "MatFun":
        """Drop trailing coefficients whose entries are all ``<= tol`` in magnitude."""
        k = self.degree
        while k > 0 and np.all(np.abs(self._c[k]) <= tol):
            k -= 1
        return MatFun(self._c[: k + 1])

    # evaluation ------------------------------------------------------------
    def __call__(self, t: float) -> np.ndarray:
        return self.eval(t)

    def eval(self, t: float) -> np.ndarray:
        """Evaluate at a scalar ``t`` by Horner's rule."""
        out = self._c[-1].copy()
        for c in self._c[-2::-1]:
            out *= t
            out += c
        return out

    def sample(self, times) -> np.ndarray:
        """Evaluate on an array of times; result has shape ``(len(times), rows, cols)``."""
        times = np.asarray(times, dtype=float)
        return np.stack([self.eval(t) for t in times]) if times.size else np.zeros((0,) + self.shape)

    def derivative(self) -> "MatFun":
        if self.degree == 0:
            return MatFun.zeros(*self.shape)
        j = np.arange(1, self.degree + 1, dtype=float)[:, None, None]
        return MatFun(j * self._c[1:])

    # algebra ---------------------------------------------------------------
    @property
    def T(self) -> "MatFun":
        return self.transpose()

    def transpose(self) -> "MatFun":
        return MatFun(np.transpose(self._c, (0, 2, 1)))

    def scale(self, alpha: float) -> "MatFun":
        return MatFun(alpha * self._c)

    def add(self, other) -> "MatFun":
        other = as_matfun(other)
        if other.shape != self.shape:
            raise ShapeError(f"cannot add MatFun of shape {self.shape} and {other.shape}")
        k = max(self.degree, other.degree) + 1
        c = np.zeros((k,) + self.shape)
        c[: self.degree + 1] += self._c
        c[: other.degree + 1] += other._c
        return MatFun(c)

    def mul(self, other) -> "MatFun":
        """Matrix product; coefficients combine by discrete convolution."""
        other = as_matfun(other)
        if self.cols != other.rows:
            raise ShapeError(f"cannot multiply MatFun of shape {self.shape} by {other.shape}")
        c = np.zeros((self.degree + other.degree + 1, self.rows, other.cols))
        for i in range(self.degree + 1):
            for j in range(other.degree + 1):
                c[i + j] += self._c[i] @ other._c[j]
        return MatFun(c)

    def __add__(self, other):
        return self.add(other)

    def __radd__(self, other):
        return as_matfun(other).add(self)

    def __sub__(self, other):
        return self.add(as_matfun(other).scale(-1.0))

    def __rsub__(self, other):
        return as_matfun(other).add(self.scale(-1.0))

    def __neg__(self):
        return self.scale(-1.0)

    def __mul__(self, alpha):
        if isinstance(alpha, MatFun) or np.ndim(alpha) != 0:
            return NotImplemented
        return self.scale(float(alpha))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return self.mul(other)

    def __rmatmul__(self, other):
        return as_matfun(other).mul(self)

    def __getitem__(self, key) -> "MatFun":
        if not isinstance(key, tuple) or len(key) != 2:
            raise TypeError("MatFun indexing needs a (rows, cols) pair of slices or index arrays")
        r, c = key
        sub = self._c[:, r, :][:, :, c]
        if sub.ndim != 3:
            raise TypeError("MatFun indexing must keep both dimensions")
        return MatFun(sub)

    def allclose(self, other, atol: float = 1e-12) -> bool:
        other = as_matfun(other)
        if other.shape != self.shape:
            return False
        d = self - other
        return bool(np.all(np.abs(d._c) <= atol))

    def __repr__(self) -> str:
        return f"MatFun(shape={self.shape}, degree={self.degree})"


def as_matfun(x) -> MatFun:
    """Coerce a MatFun, a constant matrix, or a coefficient stack to :class:`MatFun`."""
    if isinstance(x, MatFun):
        return x
    return MatFun(x)


def chebyshev_points(t0: float, tf: float, npts: int) -> np.ndarray:
    """Chebyshev points of the second kind mapped to ``[t0, tf]`` (endpoints included)."""
    if npts == 1:
        return np.array([0.5 * (t0 + tf)])
    s = np.cos(np.pi * np.arange(npts - 1, -1, -1) / (npts - 1))
    return 0.5 * (t0 + tf) + 0.5 * (tf - t0) * s


def fit(
    func: Callable[[float], np.ndarray],
    t0: float,
    tf: float,
    max_degree: int = 12,
    tol: float = 1e-10,
    raise_on_fail: bool = True,
) -> tuple[MatFun, float]:
    """Fit a matrix function on ``[t0, tf]`` by a polynomial of low degree.

    The degree is increased from 0 until the relative residual, measured on
    a check grid that is denser than the fitting grid, drops below ``tol``.

    Returns
    -------
    (MatFun, float)
        The fitted function and its relative max residual
        ``max_t ||fit(t) - func(t)||_2 / (1 + max_t ||func(t)||_2)``.
    """
    nfit = 2 * max_degree + 2
    tfit = chebyshev_points(t0, tf, nfit)
    tchk = np.union1d(np.linspace(t0, tf, 4 * max_degree + 9), chebyshev_points(t0, tf, 4 * max_degree + 5))
    yfit = np.stack([np.asarray(func(t), dtype=float) for t in tfit])
    ychk = np.stack([np.asarray(func(t), dtype=float) for t in tchk])
    shape = yfit.shape[1:]
    scale = 1.0 + max(np.linalg.norm(y, 2) if y.size else 0.0 for y in ychk)
    s = (2.0 * tfit - (t0 + tf)) / (tf - t0)
    flat = yfit.reshape(nfit, -1)

    best = None
    for deg in range(max_degree + 1):
        if flat.shape[1] == 0:
            mf = MatFun(np.zeros((1,) + shape))
            return mf, 0.0
        c = cheb.chebfit(s, flat, deg)
        coeffs = np.zeros((deg + 1, flat.shape[1]))
        for k in range(flat.shape[1]):
            p = Chebyshev(c[:, k], domain=[t0, tf]).convert(kind=Polynomial)
            coeffs[: len(p.coef), k] = p.coef
        mf = MatFun(coeffs.reshape((deg + 1,) + shape))
        res = max(np.linalg.norm(mf.eval(t) - y, 2) for t, y in zip(tchk, ychk)) / scale
        if best is None or res < best[1]:
            best = (mf, res)
        if res <= tol:
            return mf.trim(), res
    if raise_on_fail:
        raise FitError(
            f"polynomial re-fit residual {best[1]:.3e} exceeds tolerance {tol:.1e} "
            f"at maximum degree {max_degree}"
        )
    return best[0].trim(), best[1]


def pointwise(
    func: Callable[..., np.ndarray],
    *mfs: MatFun,
    interval: tuple[float, float],
    max_degree: int = 12,
    tol: float = 1e-10,
) -> tuple[MatFun, float]:
    """Apply a pointwise matrix map to MatFun arguments.

    If every argument is constant the result is computed exactly as a
    constant MatFun and the reported residual is 0. Otherwise ``func`` is
    evaluated on a Chebyshev grid and re-fitted with :func:`fit`.
    """
    if all(m.is_constant for m in mfs):
        return MatFun.constant(func(*(m.coeff(0) for m in mfs))), 0.0
    t0, tf = interval
    return fit(lambda t: func(*(m.eval(t) for m in mfs)), t0, tf, max_degree, tol)
