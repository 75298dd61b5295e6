"""Linear stability of the incoherent state via the dispersion function.

The memory kernel of the linearized order-parameter equation is
G(t) = (K/2) ghat(t); its dispersion function on the closed lower half plane

    D(w) = 1 - (K/2) * L(w),   L(w) = int_0^inf ghat(t) exp(-i w t) dt,

has no zeros with Im(w) <= 0 exactly when the incoherent state is linearly
stable.  Three equivalent views are implemented and cross-checked:

* direct Laplace evaluation (closed form per family, plus an independent
  oscillation-aware quadrature),
* the real-axis boundary form L(w) = pi g(-w) - i * pv-integral, which yields
  the boundary criterion: where the principal-value part vanishes at w*,
  stability requires K < 2 / (pi g(-w*)),
* the winding number of the image of the real line under D around the origin,
  which counts the zeros in the open lower half plane.

Note on the boundary form: the reflection g(-w) (rather than g(w)) is forced
by the sign convention ghat(t) = int g exp(-i t w); for symmetric densities
the two agree.  The quadrature cross-check in ``boundary_values`` guards the
orientation.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .distributions import Cauchy, Gaussian, fourier_moment
from .exceptions import (
    CrossCheckFailure,
    DomainError,
    MarginalError,
    NoZeroFound,
    RootNotConverged,
)

__all__ = [
    "DispersionRelation",
    "StabilityReport",
    "BoundaryValues",
    "laplace_transform",
    "laplace_transform_quadrature",
    "hilbert_boundary_transform",
    "boundary_values",
    "winding_number",
    "critical_coupling",
    "find_unstable_root",
    "l1_sufficient_check",
    "analyze_stability",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_GL24_NODES, _GL24_WEIGHTS = np.polynomial.legendre.leggauss(24)

#: |D| below this value on the real axis is treated as a marginal case.
MARGINAL_ABS_TOL = 1e-6


def _check_lower_half(omega):
    if np.any(np.imag(np.atleast_1d(omega)) > 0):
        raise DomainError(f"dispersion function is defined for Im(omega) <= 0, got {omega}")


def laplace_transform(dist, omega):
    """L(w) = int_0^inf ghat(t) exp(-i w t) dt in closed form, Im(w) <= 0.

    Cauchy components give 1 / (width + i (w + center)); Gaussian components
    reduce to the Faddeeva function, evaluated in its reliable half plane
    because Im(w) <= 0.
    """
    _check_lower_half(omega)
    omega = np.asarray(omega, dtype=complex)
    total = np.zeros_like(omega)
    for weight, comp in dist._components():
        if isinstance(comp, Cauchy):
            total += weight / (comp.half_width + 1j * (omega + comp.center))
        elif isinstance(comp, Gaussian):
            z = omega + comp.center
            s = comp.std_dev
            total += weight * math.sqrt(np.pi / 2.0) / s * special.wofz(-z / (s * math.sqrt(2.0)))
        else:  # pragma: no cover - families are closed under _components
            raise TypeError(f"no closed-form transform for {type(comp).__name__}")
    return total if total.ndim else complex(total)


def laplace_transform_quadrature(dist, omega, horizon=None, tail_tol=1e-13):
    """Independent evaluation of L(w) by composite panels in t.

    Panels are sized so the total phase per panel stays within the resolving
    power of 16-point Gauss-Legendre; the truncation horizon comes from the
    family's exponential envelope with an explicit tail bound.
    """
    _check_lower_half(omega)
    omega = complex(omega)
    if horizon is None:
        horizon = _envelope_horizon(dist, tail_tol)
    loc, _, halfspan = dist.location_hints()
    phase_rate = abs(omega.real) + abs(loc) + halfspan + 1.0
    panels = int(min(8192, max(16, math.ceil(horizon * phase_rate / 6.0))))
    edges = np.linspace(0.0, horizon, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    values = dist.fourier_transform(t) * np.exp(-1j * omega * t)
    return complex(np.sum(w * values))


def _envelope_horizon(dist, tail_tol):
    t = 1.0
    while dist.fourier_tail_integral(t) > tail_tol and t < 4096.0:
        t *= 2.0
    return t


def hilbert_boundary_transform(dist, omega, sigma_core=1e-4):
    """Boundary value of L at real ``omega`` via the principal-value form.

    L(w) = pi g(-w) - i * pv int g(v)/(v + w) dv, with the principal value
    written as int_0^inf (g(s - w) - g(-s - w))/s ds.  The s -> 0 limit is
    replaced below ``sigma_core`` by its Taylor expansion 2 g'(-w) s, removing
    the 0/0 numerically.
    """
    omega = float(omega)
    g = dist.density
    # Core: integrand -> 2 g'(-w) + s^2 g'''(-w)/3 + ...
    core = 2.0 * dist.density_derivative(-omega, 1) * sigma_core
    core += dist.density_derivative(-omega, 3) * sigma_core**3 / 9.0

    # Feature locations of g(±s - w) in the s variable.
    features = set()
    for _, comp in dist._components():
        center = comp.location_hints()[0]
        width = comp.location_hints()[1]
        base = abs(center + omega)
        for k in (-3.0, -1.0, 0.0, 1.0, 3.0):
            features.add(base + k * width)

    s_max = _pv_upper_limit(dist, omega)
    breaks = sorted({sigma_core, s_max} | {f for f in features if sigma_core < f < s_max})
    # Geometric ladder keeps long featureless stretches well-conditioned.
    ladder = sigma_core
    while ladder < s_max:
        ladder *= 4.0
        if sigma_core < ladder < s_max:
            breaks.append(ladder)
    breaks = np.array(sorted(set(breaks)))

    half = 0.5 * (breaks[1:] - breaks[:-1])
    mid = 0.5 * (breaks[1:] + breaks[:-1])
    s = (mid[:, None] + half[:, None] * _GL24_NODES[None, :]).ravel()
    w = (half[:, None] * _GL24_WEIGHTS[None, :]).ravel()
    pv = core + float(np.sum(w * (g(s - omega) - g(-s - omega)) / s))
    return np.pi * dist.density(-omega) - 1j * pv


def _pv_upper_limit(dist, omega):
    loc, scale, halfspan = dist.location_hints()
    s = max(64.0 * (abs(omega) + abs(loc) + halfspan + scale), 1e3)
    if dist.heavy_tailed:
        # Tail of the pv integrand is ~ 4*scale*|w|/(pi s^4); push s until the
        # analytic remainder is far below the cross-check tolerance.
        while 2.0 * scale * (abs(omega) + halfspan + 1.0) / s**3 > 1e-12 and s < 1e8:
            s *= 2.0
    return s


# ---------------------------------------------------------------------------
# Dispersion relation


@dataclass(frozen=True)
class DispersionRelation:
    """Dispersion function D(w) = 1 - (K/2) L(w) for one density and coupling."""

    dist: object
    coupling: float
    laplace_horizon: float = field(default=None)

    def __post_init__(self):
        if self.coupling < 0:
            raise ValueError(f"coupling must be nonnegative, got {self.coupling}")
        if self.laplace_horizon is None:
            # (K/2) * envelope tail below 1e-12 at the horizon.
            bound = 1e-12 / max(self.coupling / 2.0, 1e-6)
            object.__setattr__(self, "laplace_horizon", _envelope_horizon(self.dist, bound))

    def evaluate(self, omega):
        """D(w) for Im(w) <= 0, closed form."""
        return 1.0 - 0.5 * self.coupling * laplace_transform(self.dist, omega)

    def evaluate_quadrature(self, omega):
        """D(w) via the truncated Laplace integral (independent route)."""
        val = laplace_transform_quadrature(self.dist, omega, horizon=self.laplace_horizon)
        return 1.0 - 0.5 * self.coupling * val

    def evaluate_boundary(self, omega):
        """D(w) at real w via the principal-value boundary form."""
        return 1.0 - 0.5 * self.coupling * hilbert_boundary_transform(self.dist, omega)


@dataclass
class BoundaryValues:
    """Boundary evaluations of D along a real grid, by two independent routes."""

    omegas: np.ndarray
    laplace: np.ndarray
    hilbert: np.ndarray

    @property
    def values(self):
        return self.laplace


def boundary_values(relation, omega_grid, cross_check_tol=1e-6):
    """Evaluate D on a sorted real grid by quadrature and by the boundary form.

    Raises CrossCheckFailure when the two routes disagree beyond
    ``cross_check_tol`` - that signals a quadrature misconfiguration, not a
    property of the distribution.
    """
    omegas = np.asarray(omega_grid, dtype=float)
    if omegas.ndim != 1 or np.any(np.diff(omegas) <= 0):
        raise ValueError("omega grid must be one-dimensional and strictly increasing")
    laplace = np.array([relation.evaluate_quadrature(w) for w in omegas])
    hilbert = np.array([relation.evaluate_boundary(w) for w in omegas])
    worst = float(np.max(np.abs(laplace - hilbert))) if omegas.size else 0.0
    if worst > cross_check_tol:
        raise CrossCheckFailure(
            f"Laplace and boundary evaluations disagree by {worst:.3e} "
            f"(tolerance {cross_check_tol:.1e})"
        )
    return BoundaryValues(omegas=omegas, laplace=laplace, hilbert=hilbert)


# ---------------------------------------------------------------------------
# Winding number


def _default_omega_span(relation):
    loc, scale, halfspan = relation.dist.location_hints()
    # |D - 1| <= (K/2)/|w - span| for Cauchy tails: keep closure arcs small.
    return abs(loc) + halfspan + 20.0 * scale + 100.0 * max(relation.coupling, 1.0)


def winding_number(
    relation,
    omega_max=None,
    initial_points=1025,
    max_points=400_000,
    chord_factor=0.05,
):
    """Index of the origin with respect to the closed curve {D(w) : w real}.

    The real line is sampled adaptively until consecutive argument jumps stay
    below pi/2 and image chords stay small against the local |D|; the curve is
    closed through D(+-inf) = 1.  Raises MarginalError when the curve passes
    too close to the origin to count robustly (criterion boundary).
    """
    return _winding_details(relation, omega_max, initial_points, max_points, chord_factor)[0]


def _winding_details(
    relation,
    omega_max=None,
    initial_points=1025,
    max_points=400_000,
    chord_factor=0.05,
):
    if omega_max is None:
        omega_max = _default_omega_span(relation)

    xs = list(np.linspace(-omega_max, omega_max, initial_points))
    ds = list(relation.evaluate(np.array(xs)))
    total_points = len(xs)

    def ok(d0, d1):
        jump = abs(cmath.phase(d1 / d0)) if d0 != 0 and d1 != 0 else np.inf
        chord = abs(d1 - d0)
        return jump < 0.5 * np.pi and chord <= chord_factor * min(abs(d0), abs(d1))

    # Midpoint refinement with an explicit work queue; floors on interval
    # width catch curves that genuinely pass through the origin.
    out_d = [ds[0]]
    stack = [(xs[i], ds[i], xs[i + 1], ds[i + 1]) for i in range(len(xs) - 1)][::-1]
    hit_floor = False
    while stack:
        x0, d0, x1, d1 = stack.pop()
        if ok(d0, d1) or (x1 - x0) < 1e-13 * (1.0 + abs(x0)):
            if not ok(d0, d1):
                hit_floor = True
            out_d.append(d1)
            continue
        if total_points >= max_points:
            raise MarginalError(
                "winding-number refinement budget exhausted; curve is marginal",
                min_abs=float(np.min(np.abs(ds))),
            )
        xm = 0.5 * (x0 + x1)
        dm = relation.evaluate(xm)
        total_points += 1
        stack.append((xm, dm, x1, d1))
        stack.append((x0, d0, xm, dm))

    dvals = np.array(out_d)
    mods = np.abs(dvals)
    i_min = int(np.argmin(mods))
    min_abs = float(mods[i_min])
    lo, hi = max(0, i_min - 1), min(len(dvals) - 1, i_min + 1)
    local_res = float(np.max(np.abs(np.diff(dvals[lo : hi + 1])))) if hi > lo else 0.0
    if hit_floor or min_abs <= max(10.0 * local_res, 1e-9):
        raise MarginalError(
            f"dispersion curve passes within {min_abs:.3e} of the origin",
            min_abs=min_abs,
        )

    increments = np.angle(dvals[1:] / dvals[:-1])
    total = float(np.sum(increments))
    total += cmath.phase(dvals[0])  # closure from D(-inf) = 1
    total -= cmath.phase(dvals[-1])  # closure to D(+inf) = 1
    # Ascending-omega traversal keeps the lower half plane on its right, so
    # zeros below the axis accumulate argument clockwise; negate so the index
    # counts those zeros positively.
    winding = -total / (2.0 * np.pi)
    nearest = int(round(winding))
    if abs(winding - nearest) > 0.05:
        raise MarginalError(
            f"accumulated argument {winding:.4f} turns is not close to an integer",
            min_abs=min_abs,
        )
    return nearest, len(dvals), min_abs


# ---------------------------------------------------------------------------
# Boundary criterion and critical coupling


def _boundary_imag_zeros(dist, scan_points=4001):
    """Real zeros of Im L (equivalently of Im D for any K > 0)."""
    loc, scale, halfspan = dist.location_hints()
    span = halfspan + 12.0 * scale
    xs = np.linspace(loc - span, loc + span, scan_points)
    im = np.imag(laplace_transform(dist, xs))
    zeros = []
    for i in range(xs.size - 1):
        a, b = im[i], im[i + 1]
        if a == 0.0:
            zeros.append(xs[i])
        elif a * b < 0.0:
            root = optimize.brentq(
                lambda w: float(np.imag(laplace_transform(dist, w))),
                xs[i],
                xs[i + 1],
                xtol=1e-14,
                rtol=4.0 * np.finfo(float).eps,
            )
            zeros.append(root)
    if im[-1] == 0.0:
        zeros.append(xs[-1])
    # Deduplicate near-identical roots from adjacent brackets.
    zeros = sorted(zeros)
    unique = []
    for z in zeros:
        if not unique or abs(z - unique[-1]) > 1e-8 * (1.0 + abs(z)):
            unique.append(z)
    if not unique:
        raise NoZeroFound("no real zero of the boundary criterion was found")
    return unique


def critical_coupling(dist):
    """Smallest coupling at which the boundary criterion fails.

    Finds all real zeros w* of the principal-value part, where D is real, and
    returns (K_c, critical frequencies) with K_c = min 2 / Re L(w*).  By the
    affine structure D = 1 - (K/2) L this is exactly where D first touches 0.
    """
    zeros = _boundary_imag_zeros(dist)
    re_vals = np.array([float(np.real(laplace_transform(dist, z))) for z in zeros])
    candidates = 2.0 / re_vals
    kc = float(np.min(candidates))
    crit = [z for z, c in zip(zeros, candidates) if c <= kc * (1.0 + 1e-9)]
    return kc, sorted(crit)


def l1_sufficient_check(relation):
    """True when (K/2) int_0^inf |ghat| < 1, a sufficient stability condition."""
    return 0.5 * relation.coupling * fourier_moment(relation.dist, 0) < 1.0


# ---------------------------------------------------------------------------
# Unstable roots


def _complex_derivative(func, z, step=1e-6):
    return (func(z + step) - func(z - step)) / (2.0 * step)


def find_unstable_root(relation, tol=1e-10, max_iter=100):
    """A zero of D in the open lower half plane, or None when winding is 0.

    Damped Newton iteration on D with a numeric derivative (central
    differences, step 1e-6), seeded just below the boundary zeros nearest to
    criterion failure.
    """
    try:
        w = winding_number(relation)
    except MarginalError:
        w = 1  # marginal curves sit at the edge; still attempt a root search
    if w == 0:
        return None

    dist = relation.dist
    _, scale, _ = dist.location_hints()
    kc, crit = critical_coupling(dist)
    margin = max(relation.coupling / kc - 1.0, 1e-3)
    seeds = []
    for w_star in crit:
        for depth in (0.5 * margin, 0.1, 0.5, 1.0, 2.0):
            seeds.append(complex(w_star, -depth * scale * max(margin, 0.05)))
            seeds.append(complex(w_star, -depth * scale))

    def eval_lower(z):
        # Newton may probe slightly above the axis where D is not defined;
        # reflect the probe back to the boundary.
        if z.imag > 0:
            z = complex(z.real, 0.0)
        return relation.evaluate(z), z

    for seed in seeds:
        z = seed
        val, z = eval_lower(z)
        converged = False
        for _ in range(max_iter):
            if abs(val) <= tol:
                converged = True
                break
            deriv = _complex_derivative(relation.evaluate, complex(z.real, min(z.imag, -1e-9)))
            if deriv == 0:
                break
            step = val / deriv
            lam = 1.0
            while lam > 1e-6:
                trial = z - lam * step
                trial_val, trial = eval_lower(trial)
                if abs(trial_val) < abs(val):
                    z, val = trial, trial_val
                    break
                lam *= 0.5
            else:
                break
        if converged and z.imag < 0 and abs(relation.evaluate(z)) <= tol:
            return z
    raise RootNotConverged(
        f"no unstable root converged from {len(seeds)} seeds at coupling {relation.coupling}"
    )


# ---------------------------------------------------------------------------
# Stability report


@dataclass
class StabilityReport:
    """Full classification of one (distribution, coupling) pair."""

    verdict: str  # "Stable" | "MarginallyUnstable" | "Unstable"
    winding_number: int
    boundary_zeros: list  # (omega, Re D, Im D) triples
    unstable_roots: list  # complex roots with Im < 0
    critical_coupling: float
    critical_frequencies: list
    diagnostics: dict

    def to_json_dict(self):
        return {
            "verdict": self.verdict,
            "windingNumber": self.winding_number,
            "boundaryZeros": [
                {"omega": w, "reD": re, "imD": im} for (w, re, im) in self.boundary_zeros
            ],
            "unstableRoots": [{"re": z.real, "im": z.imag} for z in self.unstable_roots],
            "criticalCoupling": self.critical_coupling,
            "criticalFrequencies": list(self.critical_frequencies),
            "diagnostics": self.diagnostics,
        }


def analyze_stability(dist, coupling, boundary_points=2001):
    """Classify linear stability of the incoherent state at one coupling."""
    relation = DispersionRelation(dist, coupling)
    kc, crit = critical_coupling(dist)

    zeros = _boundary_imag_zeros(dist)
    boundary = []
    for z in zeros:
        d = relation.evaluate(z)
        boundary.append((float(z), float(d.real), float(d.imag)))

    loc, scale, halfspan = dist.location_hints()
    span = halfspan + 12.0 * scale
    grid = np.linspace(loc - span, loc + span, boundary_points)
    dvals = relation.evaluate(grid)
    min_abs = float(np.min(np.abs(dvals)))
    min_abs = min(min_abs, min(abs(complex(re, im)) for (_, re, im) in boundary) if boundary else min_abs)

    marginal = False
    contour_points = 0
    try:
        wind, contour_points, _ = _winding_details(relation)
    except MarginalError as exc:
        marginal = True
        wind = 0 if coupling < kc else 1
        min_abs = min(min_abs, exc.min_abs if exc.min_abs is not None else min_abs)

    roots = []
    if not marginal and wind > 0:
        try:
            roots.append(find_unstable_root(relation))
        except RootNotConverged:
            pass

    if marginal or min_abs <= MARGINAL_ABS_TOL:
        verdict = "MarginallyUnstable"
    elif wind == 0:
        verdict = "Stable"
    else:
        verdict = "Unstable"

    return StabilityReport(
        verdict=verdict,
        winding_number=int(wind),
        boundary_zeros=boundary,
        unstable_roots=roots,
        critical_coupling=kc,
        critical_frequencies=[float(c) for c in crit],
        diagnostics={
            "minBoundaryAbsD": min_abs,
            "boundaryPoints": int(boundary_points),
            "contourPoints": int(contour_points),
            "laplaceHorizon": float(relation.laplace_horizon),
            "l1SufficientCheck": bool(l1_sufficient_check(relation)),
        },
    )
