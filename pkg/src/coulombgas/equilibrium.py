"""Closed-form equilibrium measures for quadratic confinement V(x) = a|x|^2.

Three descriptors are available:

* ``disk``: Log2 kernel, uniform measure on the disk of radius 1/sqrt(a).
* ``ball``: Coulomb kernel in d >= 3, uniform measure on a ball.
* ``semicircle``: Log1 kernel, semicircle law on [-R, R] with R = sqrt(2/a)
  (so V = x^2/2 gives the law on [-2, 2]).

For the semicircle the potential is also available in the extended plane
(points given with two coordinates), which is where the 1D electric field
lives.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import special

from .errors import CapabilityError, ConsistencyError, DomainError
from .kernel import COUL, LOG1, LOG2, KernelSpec, cd_const, sphere_area


@dataclass(frozen=True)
class PotentialSpec:
    """Quadratic confinement V(x) = a|x|^2, optionally perturbed by t*xi.

    Parameters
    ----------
    a : float
        Quadratic coefficient, must be positive.
    perturbation : TestFunction, optional
        Smooth function xi added with amplitude ``t``.
    t : float
        Perturbation amplitude, bounded by ``t_max`` in absolute value.
    """

    a: float
    perturbation: object = None
    t: float = 0.0
    t_max: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise DomainError(f"quadratic coefficient must be positive, got {self.a}")
        if abs(self.t) > self.t_max:
            raise DomainError(f"|t| = {abs(self.t)} exceeds the maximum {self.t_max}")
        if self.t != 0.0 and self.perturbation is None:
            raise DomainError("nonzero amplitude requires a perturbation function")

    @property
    def is_quadratic(self):
        return self.perturbation is None or self.t == 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        v = self.a * np.sum(x * x, axis=-1)
        if not self.is_quadratic:
            v = v + self.t * self.perturbation.value(x)
        return v

    def to_dict(self):
        return {"a": self.a, "t": self.t, "perturbed": not self.is_quadratic}


@dataclass(frozen=True)
class EquilibriumMeasure:
    """Analytic descriptor of the equilibrium measure.

    Attributes
    ----------
    descriptor : {"disk", "ball", "semicircle"}
    kernel : KernelSpec
    a : float
        Coefficient of the quadratic potential that produced the measure.
    radius : float
        Radius of the support (half-width for the semicircle).
    density : float
        Constant density for disk and ball; peak density for the semicircle.
    I_V, c : float
        Minimal energy and Euler-Lagrange constant.
    int_V : float
        Integral of V against the measure.
    """

    descriptor: str
    kernel: KernelSpec
    a: float
    radius: float
    density: float
    I_V: float
    c: float
    int_V: float
    d: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "d", self.kernel.d)

    # -- geometry ---------------------------------------------------------
    @property
    def support(self):
        return {"shape": "interval" if self.d == 1 else "ball", "center": [0.0] * self.d,
                "radius": self.radius}

    @property
    def sup_density(self):
        return self.density

    def V(self, x):
        x = np.asarray(x, dtype=float)
        return self.a * np.sum(x * x, axis=-1)

    def contains(self, x):
        x = _points(x, self.d)
        return np.sqrt(np.sum(x * x, axis=-1)) <= self.radius

    def density_at(self, x):
        x = _points(x, self.d)
        r = np.sqrt(np.sum(x * x, axis=-1))
        if self.descriptor == "semicircle":
            R = self.radius
            return np.where(r < R, 2.0 / (math.pi * R * R) * np.sqrt(np.clip(R * R - r * r, 0, None)), 0.0)
        return np.where(r <= self.radius, self.density, 0.0)

    def to_dict(self):
        return {"descriptor": self.descriptor, "kernel": self.kernel.to_dict(), "a": self.a,
                "I_V": self.I_V, "c": self.c, "support": self.support}

    # -- sampling ---------------------------------------------------------
    def sample(self, n, rng):
        """Draw ``n`` i.i.d. points from the measure, shape (n, d)."""
        R = self.radius
        if self.descriptor == "semicircle":
            return (R * (2.0 * rng.beta(1.5, 1.5, size=n) - 1.0)).reshape(n, 1)
        g = rng.standard_normal((n, self.d))
        g /= np.sqrt(np.sum(g * g, axis=1, keepdims=True))
        r = R * rng.random(n) ** (1.0 / self.d)
        return g * r[:, None]

    # -- masses -----------------------------------------------------------
    def cdf(self, x):
        """Cumulative distribution for the semicircle (d = 1 only)."""
        if self.d != 1:
            raise CapabilityError("cdf is defined only for the one-dimensional measure")
        R = self.radius
        x = np.clip(np.asarray(x, dtype=float), -R, R)
        return 0.5 + (x * np.sqrt(R * R - x * x) + R * R * np.arcsin(x / R)) / (math.pi * R * R)

    def mass_in_ball(self, center, r):
        """Measure of the ball B(center, r) by closed-form geometric overlap."""
        if r <= 0:
            raise DomainError("radius must be positive")
        center = np.asarray(center, dtype=float).reshape(self.d)
        if self.d == 1:
            x0 = float(center[0])
            return float(self.cdf(x0 + r) - self.cdf(x0 - r))
        D = float(np.sqrt(np.sum(center * center)))
        vol = _ball_intersection(self.radius, r, D, self.d)
        return self.density * vol


def _points(x, d):
    x = np.asarray(x, dtype=float)
    if d == 1 and x.ndim <= 1:
        return x.reshape(-1, 1)
    return x.reshape(-1, x.shape[-1])


def _ball_volume(rad, d):
    return sphere_area(d) / d * rad ** d


def _cap_volume(rad, h, d):
    """Volume of a cap of height h (0 <= h <= 2 rad) of a d-ball of radius rad."""
    if h <= 0:
        return 0.0
    if h >= 2 * rad:
        return _ball_volume(rad, d)
    if h > rad:
        return _ball_volume(rad, d) - _cap_volume(rad, 2 * rad - h, d)
    z = (2 * rad * h - h * h) / (rad * rad)
    return 0.5 * _ball_volume(rad, d) * special.betainc((d + 1) / 2.0, 0.5, z)


def _ball_intersection(R, r, D, d):
    """Volume of B(0, R) intersected with a ball of radius r at distance D."""
    if D >= R + r:
        return 0.0
    if D <= abs(R - r):
        return _ball_volume(min(R, r), d)
    x = (D * D + R * R - r * r) / (2 * D)
    return _cap_volume(R, R - x, d) + _cap_volume(r, r - (D - x), d)


# ---------------------------------------------------------------------------
def equilibrium_measure(potential, kernel):
    """Equilibrium measure of V(x) = a|x|^2 for a log or Coulomb kernel.

    Raises
    ------
    CapabilityError
        For Riesz kernels or perturbed potentials, which have no closed form here.
    """
    if not isinstance(kernel, KernelSpec):
        raise DomainError("kernel must be a KernelSpec")
    if not potential.is_quadratic:
        raise CapabilityError("closed-form equilibria exist only for unperturbed quadratic V")
    a = float(potential.a)
    if kernel.case == LOG2:
        R = 1.0 / math.sqrt(a)
        c = 0.5 + 0.5 * math.log(a)
        return EquilibriumMeasure("disk", kernel, a, R, a / math.pi, 0.75 + 0.5 * math.log(a), c, 0.5)
    if kernel.case == LOG1:
        R = math.sqrt(2.0 / a)
        c = 0.5 + 0.5 * math.log(2.0 * a)
        return EquilibriumMeasure("semicircle", kernel, a, R, 2.0 / (math.pi * R), 0.75 + 0.5 * math.log(2.0 * a), c, 0.5)
    if kernel.case == COUL:
        d = kernel.d
        R = ((d - 2.0) / a) ** (1.0 / d)
        rho = d * a / cd_const(d)
        c = R ** (2.0 - d) + 0.5 * a * R * R
        int_v = a * d * R * R / (d + 2.0)
        return EquilibriumMeasure("ball", kernel, a, R, rho, c + 0.5 * int_v, c, int_v)
    raise CapabilityError("equilibrium measures are available for Log1, Log2 and Coul only, "
                          "not for Riesz kernels")


def check_consistent(potential, eqm, kernel=None):
    """Raise ConsistencyError unless ``eqm`` is the equilibrium of ``potential``."""
    if kernel is not None and kernel != eqm.kernel:
        raise ConsistencyError(f"kernel {kernel} does not match the equilibrium kernel {eqm.kernel}")
    if not potential.is_quadratic or potential.a != eqm.a:
        raise ConsistencyError(f"potential (a={potential.a}) does not match the equilibrium (a={eqm.a})")


# ---------------------------------------------------------------------------
def _semicircle_F(z):
    """Complex log potential of the unit-variance semicircle on [-2, 2].

    Returns F with Re F(z) = integral of log|z - t| against the law.
    """
    sq = np.sqrt(z - 2.0) * np.sqrt(z + 2.0)
    w = z + sq
    return z / w + np.log(w / 2.0) - 0.5


def _semicircle_G(z):
    sq = np.sqrt(z - 2.0) * np.sqrt(z + 2.0)
    return (z - sq) / 2.0


def _parse(eqm, x):
    """Normalize ``x`` to (points, output shape, plane flag).

    In d >= 2 the last axis holds coordinates. In d = 1 scalars and 1D arrays
    are real points, a trailing axis of length 1 is allowed, and a trailing
    axis of length 2 (with at least two axes) denotes extended-plane points.
    """
    x = np.asarray(x, dtype=float)
    if eqm.d == 1:
        if x.ndim == 0:
            return x.reshape(1, 1), (), False
        if x.ndim == 1:
            return x.reshape(-1, 1), x.shape, False
        if x.shape[-1] == 1:
            return x.reshape(-1, 1), x.shape[:-1], False
        if x.shape[-1] == 2:
            return x.reshape(-1, 2), x.shape[:-1], True
        raise DomainError("one-dimensional points need a trailing axis of length 1 or 2")
    if x.ndim == 0 or x.shape[-1] != eqm.d:
        raise DomainError(f"points must have a trailing axis of length {eqm.d}")
    return x.reshape(-1, eqm.d), x.shape[:-1], False


def _shape_out(vals, shape):
    if shape == ():
        return float(vals[0])
    return vals.reshape(shape)


def h_mu(eqm, x):
    """Potential h(x) = integral of g(x - y) against the equilibrium measure.

    ``x`` is a point or an array of points (last axis = coordinates). For the
    semicircle, arrays of shape (..., 2) are points of the extended plane.
    """
    pts, shape, plane = _parse(eqm, x)
    R = eqm.radius
    if plane:
        z = (pts[:, 0] + 1j * pts[:, 1]) * (2.0 / R)
        return _shape_out(-math.log(R / 2.0) - _semicircle_F(z).real, shape)
    r = np.sqrt(np.sum(pts * pts, axis=-1))
    if eqm.descriptor == "disk":
        out = np.where(r <= R, -math.log(R) + (R * R - r * r) / (2 * R * R), -np.log(np.maximum(r, R)))
    elif eqm.descriptor == "ball":
        d = eqm.d
        out = np.where(r <= R, R ** (2.0 - d) + 0.5 * eqm.a * (R * R - r * r),
                       np.maximum(r, R) ** (2.0 - d))
    else:
        out = np.empty_like(r)
        inside = r <= R
        out[inside] = eqm.c - 0.5 * eqm.V(pts[inside])
        if np.any(~inside):
            z = pts[~inside, 0] * (2.0 / R) + 0j
            out[~inside] = -math.log(R / 2.0) - _semicircle_F(z).real
    return _shape_out(out, shape)


def h_mu_grad(eqm, x):
    """Gradient of h; returns an array of shape (..., k) for k input coordinates."""
    pts, shape, plane = _parse(eqm, x)
    R = eqm.radius
    if plane:
        z = (pts[:, 0] + 1j * pts[:, 1]) * (2.0 / R)
        G = _semicircle_G(z) * (2.0 / R)
        grad = -np.stack([G.real, -G.imag], axis=-1)
    elif eqm.descriptor == "semicircle":
        xr = pts[:, 0]
        g = np.empty_like(xr)
        inside = np.abs(xr) <= R
        g[inside] = -eqm.a * xr[inside]
        z = xr[~inside] * (2.0 / R) + 0j
        g[~inside] = -(_semicircle_G(z) * (2.0 / R)).real
        grad = g[:, None]
    else:
        r2 = np.sum(pts * pts, axis=-1, keepdims=True)
        if eqm.descriptor == "disk":
            outside = -pts / np.maximum(r2, R * R)
            grad = np.where(r2 <= R * R, -pts / (R * R), outside)
        else:
            d = eqm.d
            outside = (2.0 - d) * pts * np.maximum(r2, R * R) ** (-d / 2.0)
            grad = np.where(r2 <= R * R, -eqm.a * pts, outside)
    return grad.reshape(tuple(shape) + (grad.shape[-1],))


def zeta(eqm, x):
    """Effective confinement h + V/2 - c, exactly 0 on the support."""
    pts, shape, plane = _parse(eqm, x)
    if plane:
        raise DomainError("zeta is defined on the real line only")
    r = np.sqrt(np.sum(pts * pts, axis=-1))
    h = np.atleast_1d(h_mu(eqm, pts if eqm.d > 1 else pts[:, 0]))
    out = h + 0.5 * eqm.V(pts) - eqm.c
    out[r <= eqm.radius] = 0.0
    return _shape_out(out, shape)


def iv_and_c(eqm):
    """Return (I_V, c), checking the identity c = I_V - (1/2) integral of V."""
    if abs(eqm.c - (eqm.I_V - 0.5 * eqm.int_V)) > 1e-12 * max(1.0, abs(eqm.I_V)):
        raise ConsistencyError("descriptor violates c = I_V - (1/2) int V dmu")
    return eqm.I_V, eqm.c
