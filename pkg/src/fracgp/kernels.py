"""Stationary unit-variance kernels (SE, Matern, RQ) on the unit cube.

Point-set conventions used throughout the package: a 2-D array of shape
``(n, d)`` is ``n`` points in ``d`` dimensions, a 1-D array of length ``n`` is
``n`` points on the line, and a scalar is a single point on the line.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import gammaln, kve

from .errors import HyperparameterError, InputError
from .fitting import fit_log_slope
from .qmc import scrambled_sobol
from .rng import NYSTROM, stream

FAMILIES = ("SE", "Matern", "RQ")

# below this distance the Matern formula is 0 * inf; the limit is 1
_MATERN_ORIGIN = 1e-12


class SpectrumResolutionWarning(UserWarning):
    """Eigenvalues in the requested decay window sit at the round-off floor."""


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus hyperparameters.

    SE uses the inverse length-scale ``a``; Matern uses smoothness ``nu`` and
    ``a``; RQ uses ``nu`` and the length-scale ``ell``.
    """

    family: str
    a: float | None = None
    nu: float | None = None
    ell: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise HyperparameterError(f"unknown kernel family {self.family!r}")
        needed = {"SE": ("a",), "Matern": ("nu", "a"), "RQ": ("nu", "ell")}[self.family]
        for name in ("a", "nu", "ell"):
            value = getattr(self, name)
            if name in needed:
                if value is None or not math.isfinite(value) or value <= 0:
                    raise HyperparameterError(
                        f"{self.family} kernel needs {name} > 0, got {value!r}"
                    )
                object.__setattr__(self, name, float(value))
            elif value is not None:
                raise HyperparameterError(f"{self.family} kernel takes no {name!r}")

    @classmethod
    def se(cls, a=1.0):
        return cls("SE", a=a)

    @classmethod
    def matern(cls, nu, a=1.0):
        return cls("Matern", a=a, nu=nu)

    @classmethod
    def rq(cls, nu, ell=1.0):
        return cls("RQ", nu=nu, ell=ell)

    def check_dimension(self, d):
        """Matern needs ``nu > d/2`` for its RKHS to sit inside C[0,1]^d."""
        if self.family == "Matern" and not self.nu > d / 2:
            raise HyperparameterError(
                f"Matern kernel requires nu > d/2; got nu={self.nu}, d={d}"
            )

    def to_dict(self):
        out = {"family": self.family}
        for name in ("a", "nu", "ell"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        unknown = set(data) - {"family", "a", "nu", "ell"}
        if unknown:
            raise HyperparameterError(f"unknown kernel keys {sorted(unknown)}")
        return cls(**data)

    def __call__(self, X, Y=None):
        return kernel_matrix(self, X, Y)


def as_points(X, d=None):
    """Coerce ``X`` to a float array of shape ``(n, d)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X[:, None]
    elif X.ndim != 2:
        raise InputError(f"points must be at most 2-D, got shape {X.shape}")
    if d is not None and X.shape[1] != d:
        raise InputError(f"expected points of dimension {d}, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise InputError("non-finite point coordinates")
    return X


def _as_point(x):
    x = np.asarray(x, dtype=float).reshape(1, -1)
    if not np.all(np.isfinite(x)):
        raise InputError("non-finite point coordinates")
    return x


def _matern_from_distance(r, nu, a):
    z = math.sqrt(2.0 * nu) * a * r
    if nu == 0.5:
        return np.exp(-z)
    if nu == 1.5:
        return (1.0 + z) * np.exp(-z)
    if nu == 2.5:
        return (1.0 + z + z * z / 3.0) * np.exp(-z)
    out = np.ones_like(r)
    mask = r >= _MATERN_ORIGIN
    zm = z[mask]
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        scaled = kve(nu, zm)  # K_nu(z) * e^z
        logk = (1.0 - nu) * math.log(2.0) - gammaln(nu) + nu * np.log(zm) + np.log(scaled) - zm
        vals = np.exp(logk)
    if not np.all(np.isfinite(vals)):
        raise HyperparameterError(
            f"Matern Bessel evaluation overflowed for nu={nu}; choose a smaller nu"
        )
    out[mask] = np.minimum(vals, 1.0)
    return out


def kernel_from_sqdist(spec, sq):
    """Kernel values from squared Euclidean distances."""
    if spec.family == "SE":
        return np.exp(-(spec.a**2) * sq)
    if spec.family == "RQ":
        return (1.0 + sq / (2.0 * spec.nu * spec.ell**2)) ** (-spec.nu)
    return _matern_from_distance(np.sqrt(sq), spec.nu, spec.a)


def kernel_matrix(spec, X, Y=None):
    """Cross-covariance ``k(X, Y)``; ``Y=None`` gives the symmetric Gram of ``X``."""
    if callable(spec) and not isinstance(spec, KernelSpec):
        # test stubs and ad-hoc kernels: any callable on two point sets
        Xp = as_points(X)
        return np.asarray(spec(Xp, Xp if Y is None else as_points(Y, Xp.shape[1])), dtype=float)
    Xp = as_points(X)
    if Y is None:
        sq = cdist(Xp, Xp, "sqeuclidean")
        K = kernel_from_sqdist(spec, sq)
        return 0.5 * (K + K.T)
    Yp = as_points(Y, Xp.shape[1])
    return kernel_from_sqdist(spec, cdist(Xp, Yp, "sqeuclidean"))


def kernel_diag(spec, X):
    """``k(x, x)`` for every row; all three families have unit variance."""
    return np.ones(as_points(X).shape[0])


def eval_kernel(spec, x, x_prime):
    """Kernel value for a single pair of points."""
    x, x_prime = _as_point(x), _as_point(x_prime)
    if x.shape != x_prime.shape:
        raise InputError("points differ in dimension")
    return float(kernel_matrix(spec, x, x_prime)[0, 0])


def gram_matrix(spec, X):
    """Symmetric Gram matrix ``k(X, X)``."""
    X = as_points(X)
    if X.shape[0] == 0:
        raise InputError("gram_matrix needs at least one point")
    return kernel_matrix(spec, X)


def nystrom_spectrum(spec, d, m, seed=0):
    """Eigenvalues of ``K / m`` over ``m`` scrambled-Sobol points, descending.

    These approximate the leading Mercer eigenvalues of the kernel's integral
    operator under the uniform measure on ``[0, 1]^d``.
    """
    if m < 2:
        raise InputError(f"nystrom_spectrum needs m >= 2, got {m}")
    X = scrambled_sobol(d, m, stream(seed, NYSTROM))
    return operator_eigenvalues(spec, X)


def operator_eigenvalues(spec, X):
    """Descending eigenvalues of ``k(X, X) / len(X)`` for a given sample."""
    X = as_points(X)
    eig = np.linalg.eigvalsh(kernel_matrix(spec, X) / X.shape[0])
    return eig[::-1].copy()


def resolution_floor(eigs, m):
    """Magnitude below which Nyström eigenvalues are round-off, not signal."""
    return 100.0 * m * np.finfo(float).eps * float(np.max(np.abs(eigs)))


def decay_window(m, lo=0.2, hi=0.6):
    """1-based index window ``[m**lo, m**hi]`` used for decay fits."""
    return int(math.ceil(m**lo)), int(math.floor(m**hi))


def decay_slope(eigs, window=None):
    """Least-squares slope of ``log lambda_j`` against ``log j``.

    Only eigenvalues above the round-off floor enter the fit; a
    :class:`SpectrumResolutionWarning` is issued when the window reaches into
    that floor. Returns ``(slope, intercept, r2, n_used)``.
    """
    eigs = np.asarray(eigs, dtype=float)
    m = eigs.size
    j_lo, j_hi = decay_window(m) if window is None else window
    j = np.arange(1, m + 1)
    in_window = (j >= j_lo) & (j <= j_hi)
    floor = resolution_floor(eigs, m)
    usable = in_window & (eigs > floor)
    if usable.sum() < in_window.sum():
        warnings.warn(
            f"{in_window.sum() - usable.sum()} of {in_window.sum()} eigenvalues in "
            f"window j in [{j_lo}, {j_hi}] are below the round-off floor {floor:.2e}; "
            "increase m or narrow the window",
            SpectrumResolutionWarning,
            stacklevel=2,
        )
    if usable.sum() < 3:
        raise InputError("fewer than 3 resolvable eigenvalues in the decay window")
    slope, intercept, r2 = fit_log_slope(j[usable], eigs[usable])
    return slope, intercept, r2, int(usable.sum())
