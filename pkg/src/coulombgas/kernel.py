"""Interaction kernels, the Coulomb constant and the truncation function."""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError, SingularityError

LOG1 = "Log1"
LOG2 = "Log2"
COUL = "Coul"
RIESZ = "Riesz"
CASES = (LOG1, LOG2, COUL, RIESZ)

# integer codes handed to the compiled loops
KCODE_LOG = 0
KCODE_POWER = 1


@dataclass(frozen=True)
class KernelSpec:
    """Which pair interaction g is used.

    Parameters
    ----------
    case : {"Log1", "Log2", "Coul", "Riesz"}
    d : int
        Ambient dimension of the points.
    s : float
        Power exponent; 0 for the logarithmic cases and d - 2 for Coulomb.
    """

    case: str
    d: int
    s: float = 0.0

    def __post_init__(self):
        if self.case not in CASES:
            raise DomainError(f"unknown kernel case {self.case!r}; expected one of {CASES}")
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.d}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "s", float(self.s))
        if self.case == LOG1 and (self.d != 1 or self.s != 0.0):
            raise DomainError("Log1 requires d = 1 and s = 0")
        if self.case == LOG2 and (self.d != 2 or self.s != 0.0):
            raise DomainError("Log2 requires d = 2 and s = 0")
        if self.case == COUL and (self.d < 3 or self.s != self.d - 2):
            raise DomainError("Coul requires d >= 3 and s = d - 2")
        if self.case == RIESZ and not (max(0.0, self.d - 2.0) <= self.s < self.d and self.s > 0.0):
            raise DomainError(f"Riesz requires max(0, d-2) <= s < d and s > 0, got s={self.s}")

    @classmethod
    def log1(cls):
        return cls(LOG1, 1, 0.0)

    @classmethod
    def log2(cls):
        return cls(LOG2, 2, 0.0)

    @classmethod
    def coulomb(cls, d):
        return cls(COUL, d, d - 2.0)

    @classmethod
    def riesz(cls, d, s):
        return cls(RIESZ, d, s)

    @property
    def is_log(self):
        return self.case in (LOG1, LOG2)

    @property
    def has_local_electric_rep(self):
        return self.case != RIESZ

    @property
    def electric_dim(self):
        """Dimension of the space carrying the electric field (2 for Log1)."""
        return 2 if self.case == LOG1 else self.d

    @property
    def code(self):
        return KCODE_LOG if self.is_log else KCODE_POWER

    def to_dict(self):
        return {"case": self.case, "d": self.d, "s": self.s}


def _g_scalar(kernel, r):
    if kernel.is_log:
        return -math.log(r)
    return r ** (-kernel.s)


def g_eval(kernel, r):
    """Kernel value g as a function of the distance ``r``.

    Accepts scalars or arrays. Raises SingularityError at r = 0 and
    DomainError for negative r.
    """
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("distance must be nonnegative")
    if np.any(arr == 0):
        raise SingularityError("kernel evaluated at r = 0")
    if arr.ndim == 0:
        return _g_scalar(kernel, float(arr))
    if kernel.is_log:
        return -np.log(arr)
    return arr ** (-kernel.s)


def g_grad(kernel, x):
    """Gradient of g at the point(s) ``x`` (last axis = coordinates).

    For Log1 a two-component ``x`` is accepted and treated as a point of the
    extended plane, where the kernel is still -log|x|.
    """
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    if np.any(r2 == 0):
        raise SingularityError("gradient of the kernel evaluated at 0")
    if kernel.is_log:
        return -x / r2
    return -kernel.s * x * r2 ** (-(kernel.s + 2.0) / 2.0)


def sphere_area(d):
    """Surface area of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def cd_const(d):
    """Constant with -Laplacian g = c_d delta_0 for the Coulomb kernels."""
    if int(d) != d or d < 2:
        raise DomainError(f"c_d is defined for integer d >= 2, got {d}")
    d = int(d)
    if d == 2:
        return 2.0 * math.pi
    return (d - 2) * sphere_area(d)


def f_eta(kernel, x, eta, sentinel=False):
    """Truncation (g(x) - g(eta))_+ evaluated at the point(s) ``x``.

    Parameters
    ----------
    kernel : KernelSpec
    x : array_like
        Point or array of points (last axis = coordinates). A bare scalar is
        read as a distance.
    eta : float
        Truncation radius, must be positive.
    sentinel : bool
        If True, x = 0 yields +inf instead of raising SingularityError.
    """
    if not eta > 0:
        raise DomainError("eta must be positive")
    x = np.asarray(x, dtype=float)
    r = np.abs(x) if x.ndim == 0 else np.sqrt(np.sum(x * x, axis=-1))
    r = np.asarray(r)
    if np.any(r == 0) and not sentinel:
        raise SingularityError("truncation evaluated at x = 0")
    out = np.zeros_like(r)
    inside = (r < eta) & (r > 0)
    if np.any(inside):
        ri = r[inside]
        if kernel.is_log:
            out[inside] = np.log(eta / ri)
        else:
            out[inside] = ri ** (-kernel.s) - eta ** (-kernel.s)
    out[r == 0] = np.inf
    return float(out) if out.ndim == 0 else out
