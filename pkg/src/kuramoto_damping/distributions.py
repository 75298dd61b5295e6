"""Frequency densities of the oscillator ensemble.

Parametric families g(omega) with exact derivatives, the Fourier transform
ghat(t) = int g(omega) exp(-i t omega) domega, moment integrals of |ghat|,
weighted Sobolev norms, and quadrature grids adapted to the density.  Every
other module consumes frequency distributions through this interface.

Supported families: Cauchy (Lorentzian), Gaussian, and finite mixtures of
those two.  All have exponentially decaying |ghat|, so Laplace-type integrals
over t can be truncated with an explicit tail bound.

Conventions
-----------
* Fourier transform: ghat(t) = int g(omega) exp(-i t omega) domega.
* Sobolev norm: ||g||_{H^n}^2 = sum_{k<=n} int (1+omega^2) |g^(k)(omega)|^2.
* Grid weights w_j include the density factor g(omega_j); the bare panel
  weights are kept alongside for plain d-omega integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np
from scipy import integrate, optimize, special

from .exceptions import Divergent, MassNotCovered, UnsupportedOrder

__all__ = [
    "FrequencyDistribution",
    "Cauchy",
    "Gaussian",
    "Mixture",
    "QuadratureGrid",
    "bi_cauchy",
    "fourier_moment",
    "sobolev_norm",
    "build_grid",
    "distribution_from_config",
    "distribution_to_config",
    "MAX_DERIVATIVE_ORDER",
]

#: Largest derivative order implemented in closed form for every family.
MAX_DERIVATIVE_ORDER = 8

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


class FrequencyDistribution:
    """Interface shared by all frequency-density families.

    Instances are immutable after construction and safe for concurrent reads.
    """

    def density(self, omega):
        """Pointwise density g(omega); accepts scalars or arrays."""
        raise NotImplementedError

    def density_derivative(self, omega, order):
        """Exact ``order``-th derivative of g at ``omega``.

        Raises UnsupportedOrder beyond MAX_DERIVATIVE_ORDER; higher orders are
        rejected rather than silently finite-differenced.
        """
        raise NotImplementedError

    def fourier_transform(self, t):
        """ghat(t) for t >= 0; exact closed form, |ghat(t)| <= 1."""
        raise NotImplementedError

    def cdf(self, omega):
        raise NotImplementedError

    def inverse_cdf(self, p):
        raise NotImplementedError

    def fourier_envelope(self, t):
        """Pointwise upper bound for |ghat(t)| that decays exponentially."""
        raise NotImplementedError

    def fourier_tail_integral(self, t0):
        """Exact value or upper bound for int_{t0}^inf envelope(t) dt."""
        raise NotImplementedError

    def location_hints(self):
        """(location, scale, halfspan) used to size scan windows and grids.

        ``location`` is a representative center, ``scale`` the largest
        component width, ``halfspan`` the largest center offset from
        ``location``.
        """
        raise NotImplementedError

    @property
    def heavy_tailed(self):
        """True when any component has power-law density tails."""
        raise NotImplementedError

    def _components(self):
        """Flat list of (weight, elementary distribution)."""
        return [(1.0, self)]

    def _validate_order(self, order):
        if order < 0 or int(order) != order:
            raise UnsupportedOrder(f"derivative order must be a nonnegative integer, got {order}")
        if order > MAX_DERIVATIVE_ORDER:
            raise UnsupportedOrder(
                f"derivative order {order} exceeds implemented closed forms "
                f"(max {MAX_DERIVATIVE_ORDER})"
            )


def _check_time_nonnegative(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("fourier_transform is defined for t >= 0")
    return t


@dataclass(frozen=True)
class Cauchy(FrequencyDistribution):
    """Cauchy (Lorentzian) density with half width ``half_width`` at ``center``."""

    half_width: float
    center: float = 0.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")

    def density(self, omega):
        x = np.asarray(omega, dtype=float) - self.center
        return self.half_width / (np.pi * (x * x + self.half_width**2))

    def density_derivative(self, omega, order):
        self._validate_order(order)
        # Partial fractions: g = Im[(x - i*Delta)^{-1}] / pi, so every
        # derivative is an exact complex power.
        x = np.asarray(omega, dtype=float) - self.center
        z = (x - 1j * self.half_width) ** (-(order + 1))
        return ((-1.0) ** order) * math.factorial(order) / np.pi * z.imag

    def fourier_transform(self, t):
        t = _check_time_nonnegative(t)
        return np.exp(-(self.half_width + 1j * self.center) * t)

    def cdf(self, omega):
        x = np.asarray(omega, dtype=float) - self.center
        return 0.5 + np.arctan(x / self.half_width) / np.pi

    def inverse_cdf(self, p):
        p = np.asarray(p, dtype=float)
        return self.center + self.half_width * np.tan(np.pi * (p - 0.5))

    def fourier_envelope(self, t):
        return np.exp(-self.half_width * np.asarray(t, dtype=float))

    def fourier_tail_integral(self, t0):
        return math.exp(-self.half_width * t0) / self.half_width

    def location_hints(self):
        return (self.center, self.half_width, 0.0)

    @property
    def heavy_tailed(self):
        return True


def _hermite_probabilist(order, x):
    """He_order(x) via the three-term recurrence."""
    h0 = np.ones_like(x)
    if order == 0:
        return h0
    h1 = x.copy()
    for k in range(1, order):
        h0, h1 = h1, x * h1 - k * h0
    return h1


@dataclass(frozen=True)
class Gaussian(FrequencyDistribution):
    """Gaussian density with standard deviation ``std_dev`` at ``center``."""

    std_dev: float
    center: float = 0.0

    def __post_init__(self):
        if not self.std_dev > 0:
            raise ValueError(f"std_dev must be positive, got {self.std_dev}")

    def density(self, omega):
        x = (np.asarray(omega, dtype=float) - self.center) / self.std_dev
        return np.exp(-0.5 * x * x) / (self.std_dev * math.sqrt(2.0 * np.pi))

    def density_derivative(self, omega, order):
        self._validate_order(order)
        x = (np.asarray(omega, dtype=float) - self.center) / self.std_dev
        he = _hermite_probabilist(order, x)
        return ((-1.0) ** order) * he * self.density(omega) / self.std_dev**order

    def fourier_transform(self, t):
        t = _check_time_nonnegative(t)
        return np.exp(-0.5 * (self.std_dev * t) ** 2 - 1j * self.center * t)

    def cdf(self, omega):
        x = (np.asarray(omega, dtype=float) - self.center) / self.std_dev
        return special.ndtr(x)

    def inverse_cdf(self, p):
        p = np.asarray(p, dtype=float)
        return self.center + self.std_dev * special.ndtri(p)

    def fourier_envelope(self, t):
        return np.exp(-0.5 * (self.std_dev * np.asarray(t, dtype=float)) ** 2)

    def fourier_tail_integral(self, t0):
        a = self.std_dev / math.sqrt(2.0)
        return math.sqrt(np.pi) / (2.0 * a) * special.erfc(a * t0)

    def location_hints(self):
        return (self.center, self.std_dev, 0.0)

    @property
    def heavy_tailed(self):
        return False


@dataclass(frozen=True)
class Mixture(FrequencyDistribution):
    """Finite convex combination of elementary (non-mixture) components."""

    weights: tuple = field()
    components: tuple = field()

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.weights) != len(self.components) or not self.components:
            raise ValueError("weights and components must be non-empty and same length")
        if any(w <= 0 for w in self.weights):
            raise ValueError("mixture weights must be strictly positive")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError(f"mixture weights must sum to 1, got {sum(self.weights)}")
        for comp in self.components:
            if isinstance(comp, Mixture):
                raise ValueError("nested mixtures are not supported")

    def density(self, omega):
        return sum(w * c.density(omega) for w, c in zip(self.weights, self.components))

    def density_derivative(self, omega, order):
        self._validate_order(order)
        return sum(
            w * c.density_derivative(omega, order)
            for w, c in zip(self.weights, self.components)
        )

    def fourier_transform(self, t):
        return sum(w * c.fourier_transform(t) for w, c in zip(self.weights, self.components))

    def cdf(self, omega):
        return sum(w * c.cdf(omega) for w, c in zip(self.weights, self.components))

    def inverse_cdf(self, p):
        if np.ndim(p) > 0:
            return np.array([self.inverse_cdf(float(q)) for q in np.asarray(p)])
        # Component quantiles bracket the mixture quantile.
        lows = [c.inverse_cdf(p) for c in self.components]
        lo, hi = min(lows), max(lows)
        if hi - lo < 1e-300:
            return lo
        return optimize.brentq(lambda w: self.cdf(w) - p, lo, hi, xtol=1e-13, rtol=1e-15)

    def fourier_envelope(self, t):
        return sum(w * c.fourier_envelope(t) for w, c in zip(self.weights, self.components))

    def fourier_tail_integral(self, t0):
        return sum(w * c.fourier_tail_integral(t0) for w, c in zip(self.weights, self.components))

    def location_hints(self):
        centers = [c.location_hints()[0] for c in self.components]
        scales = [c.location_hints()[1] for c in self.components]
        loc = sum(w * c for w, c in zip(self.weights, centers))
        halfspan = max(abs(c - loc) for c in centers)
        return (loc, max(scales), halfspan)

    @property
    def heavy_tailed(self):
        return any(c.heavy_tailed for c in self.components)

    def _components(self):
        return list(zip(self.weights, self.components))


def bi_cauchy(half_width, offset):
    """Symmetric two-bump Cauchy mixture (1/2)(g(.+offset) + g(.-offset))."""
    return Mixture(
        weights=(0.5, 0.5),
        components=(Cauchy(half_width, -offset), Cauchy(half_width, offset)),
    )


# ---------------------------------------------------------------------------
# Moment and norm integrals


def _moment_closed_form(dist, n):
    """Closed form of int_0^inf t^n |ghat(t)| dt when the modulus is a pure envelope."""
    comps = dist._components()
    centers = {c.location_hints()[0] for _, c in comps}
    if len(centers) > 1:
        return None  # cross terms oscillate, no elementary closed form
    total = 0.0
    for w, comp in comps:
        if isinstance(comp, Cauchy):
            total += w * math.factorial(n) / comp.half_width ** (n + 1)
        elif isinstance(comp, Gaussian):
            s = comp.std_dev
            total += w * 2.0 ** ((n - 1) / 2.0) * math.gamma((n + 1) / 2.0) / s ** (n + 1)
        else:
            return None
    return total


def fourier_moment(dist, n):
    """int_0^inf t^n |ghat(t)| dt, by closed form or adaptive quadrature."""
    if n < 0 or int(n) != n:
        raise ValueError(f"moment order must be a nonnegative integer, got {n}")
    closed = _moment_closed_form(dist, n)
    if closed is not None:
        return closed

    # Horizon where the envelope tail cannot matter at the 1e-13 level.
    horizon = 1.0
    while True:
        tail = dist.fourier_tail_integral(horizon) * (2.0 * horizon) ** n
        if tail < 1e-13 or horizon > 1e9:
            break
        horizon *= 2.0

    def integrand(t):
        return t**n * abs(dist.fourier_transform(t))

    value, abserr = integrate.quad(integrand, 0.0, horizon, limit=800, epsabs=1e-12, epsrel=1e-11)
    if abserr > 1e-6 * max(abs(value), 1.0):
        raise Divergent(
            f"moment integral of order {n} did not converge (value={value}, abserr={abserr})"
        )
    return value


def _real_line_integral(func, dist):
    """Adaptive integral of ``func`` over the real line, split at the bulk."""
    loc, scale, halfspan = dist.location_hints()
    a = abs(loc) + halfspan + 12.0 * scale
    interior_pts = sorted(c.location_hints()[0] for _, c in dist._components())
    mid, _ = integrate.quad(func, -a, a, limit=600, points=interior_pts, epsabs=1e-13, epsrel=1e-11)
    left, _ = integrate.quad(func, -np.inf, -a, limit=300, epsabs=1e-13, epsrel=1e-11)
    right, _ = integrate.quad(func, a, np.inf, limit=300, epsabs=1e-13, epsrel=1e-11)
    return mid + left + right


def sobolev_norm(dist, n):
    """Weighted Sobolev norm ||g||_{H^n} with weight sqrt(1 + omega^2).

    Uses adaptive quadrature over the whole real line: the Cauchy integrands
    decay only like omega^-2, far too slowly for a mass-threshold grid cut.
    """
    if n < 0 or int(n) != n:
        raise ValueError(f"Sobolev order must be a nonnegative integer, got {n}")
    if n > MAX_DERIVATIVE_ORDER:
        raise UnsupportedOrder(
            f"Sobolev order {n} needs derivatives beyond the implemented closed forms"
        )
    total = 0.0
    for k in range(n + 1):

        def term(w, _k=k):
            d = dist.density_derivative(w, _k)
            return (1.0 + w * w) * d * d

        total += _real_line_integral(term, dist)
    return math.sqrt(total)


# ---------------------------------------------------------------------------
# Quadrature grids


@dataclass
class QuadratureGrid:
    """Composite 16-point Gauss-Legendre grid adapted to a density.

    ``weights`` include the density factor g(omega_j); ``bare_weights`` are the
    plain panel weights for d-omega integrals.  Treated as immutable after
    construction.
    """

    nodes: np.ndarray
    weights: np.ndarray
    bare_weights: np.ndarray
    mass_covered: float
    mass_threshold: float
    spacing_min: float
    spacing_max: float
    truncation_mass: float

    @property
    def node_count(self):
        return self.nodes.size

    def __len__(self):
        return self.nodes.size


def build_grid(dist, node_count, mass_threshold=1.0 - 1e-8):
    """Build a quadrature grid covering at least ``mass_threshold`` of g.

    The interval is cut by the inverse CDF (a quarter of the allowed tail per
    side, so the analytic mass inside strictly exceeds the threshold).  Panels
    are equal width for light-tailed densities and equally spaced in
    asinh((omega - loc)/scale) when any component is heavy tailed, which keeps
    the bulk finely resolved while still reaching far Cauchy tails.  Node
    count is rounded up to a multiple of 16 (one panel = 16 nodes).
    """
    if node_count < 8:
        raise ValueError(f"node_count must be at least 8, got {node_count}")
    if not 0.0 < mass_threshold < 1.0:
        raise ValueError(f"mass_threshold must lie in (0, 1), got {mass_threshold}")

    tail = 1.0 - mass_threshold
    lo = float(dist.inverse_cdf(0.25 * tail))
    hi = float(dist.inverse_cdf(1.0 - 0.25 * tail))
    panels = max(1, math.ceil(node_count / 16))

    if dist.heavy_tailed:
        loc, scale, _ = dist.location_hints()
        z_lo = math.asinh((lo - loc) / scale)
        z_hi = math.asinh((hi - loc) / scale)
        edges = loc + scale * np.sinh(np.linspace(z_lo, z_hi, panels + 1))
    else:
        edges = np.linspace(lo, hi, panels + 1)

    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    bare = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    weights = bare * dist.density(nodes)

    mass = float(weights.sum())
    mass_true = float(dist.cdf(hi) - dist.cdf(lo))
    headroom = mass_true - mass_threshold
    # The quadrature must reproduce the analytic interval mass well inside the
    # headroom left by the tail cut, otherwise the panels are under-resolved.
    if abs(mass - mass_true) > 0.5 * headroom or mass < mass_threshold or mass > 1.0 + 1e-12:
        raise MassNotCovered(
            f"grid mass {mass} vs analytic {mass_true} misses threshold "
            f"{mass_threshold}; increase node_count"
        )
    gaps = np.diff(nodes)
    return QuadratureGrid(
        nodes=nodes,
        weights=weights,
        bare_weights=bare,
        mass_covered=mass,
        mass_threshold=mass_threshold,
        spacing_min=float(gaps.min()),
        spacing_max=float(gaps.max()),
        truncation_mass=float(1.0 - (dist.cdf(hi) - dist.cdf(lo))),
    )


# ---------------------------------------------------------------------------
# Config (de)serialization; exact JSON schema documented in the README


def distribution_from_config(obj):
    """Build a distribution from its JSON description (strict keys)."""
    if not isinstance(obj, dict):
        raise ValueError(f"distribution spec must be an object, got {type(obj).__name__}")
    family = obj.get("family")
    if family == "cauchy":
        _require_keys(obj, {"family", "delta"}, {"center"})
        return Cauchy(half_width=float(obj["delta"]), center=float(obj.get("center", 0.0)))
    if family == "gaussian":
        _require_keys(obj, {"family", "sigma"}, {"center"})
        return Gaussian(std_dev=float(obj["sigma"]), center=float(obj.get("center", 0.0)))
    if family == "mixture":
        _require_keys(obj, {"family", "weights", "components"}, set())
        comps = tuple(distribution_from_config(c) for c in obj["components"])
        return Mixture(weights=tuple(float(w) for w in obj["weights"]), components=comps)
    raise ValueError(f"unknown distribution family: {family!r}")


def distribution_to_config(dist):
    if isinstance(dist, Cauchy):
        return {"family": "cauchy", "delta": dist.half_width, "center": dist.center}
    if isinstance(dist, Gaussian):
        return {"family": "gaussian", "sigma": dist.std_dev, "center": dist.center}
    if isinstance(dist, Mixture):
        return {
            "family": "mixture",
            "weights": list(dist.weights),
            "components": [distribution_to_config(c) for c in dist.components],
        }
    raise ValueError(f"cannot serialize distribution of type {type(dist).__name__}")


def _require_keys(obj, required, optional):
    keys = set(obj.keys())
    missing = required - keys
    unknown = keys - required - optional
    if missing:
        raise ValueError(f"distribution spec missing keys: {sorted(missing)}")
    if unknown:
        raise ValueError(f"distribution spec has unknown keys: {sorted(unknown)}")
