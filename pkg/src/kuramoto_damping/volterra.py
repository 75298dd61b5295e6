"""Second-kind memory-kernel equation for the linearized order parameter.

Solves R(t) = F(t) + int_0^t G(t-s) R(s) ds on a uniform grid by product-
trapezoidal marching: the diagonal term is implicit, one complex division per
step, global accuracy O(dt^2), unconditionally stable for decaying kernels.

For the oscillator ensemble the kernel is G(t) = (K/2) ghat(t) and the source
F(t) is the free-transport image of the initial first mode (the nonlinear
feedback term is handled by the mode simulation, not here).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispersion import DispersionRelation, find_unstable_root
from .exceptions import RootNotConverged, StepSolveFailure, UnstableKernel, WindowTooNoisy

__all__ = [
    "VolterraProblem",
    "VolterraSolution",
    "DecayFit",
    "solve",
    "kuramoto_kernel",
    "linear_input_from_initial_data",
    "mode_input_from_grid",
    "fit_decay",
    "empirical_stability_constant",
    "StabilityConstantEstimate",
    "instability_witness",
]

_GL8_NODES, _GL8_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass
class VolterraProblem:
    """One marching problem: kernel G, source F, uniform grid parameters."""

    kernel: object  # callable t -> complex, vectorized over arrays
    source: object  # callable t -> complex, vectorized over arrays
    time_step: float
    horizon: float

    def __post_init__(self):
        if not 0 < self.time_step <= self.horizon:
            raise ValueError(
                f"need 0 < time_step <= horizon, got dt={self.time_step}, T={self.horizon}"
            )


@dataclass
class VolterraSolution:
    """Solution samples on the uniform grid; R(0) equals F(0) exactly."""

    times: np.ndarray
    values: np.ndarray
    scheme_order: int = 2

    def weighted_sup(self, n, up_to=None):
        """max over the grid (restricted to t <= up_to) of (1+t)^n |R(t)|."""
        mask = slice(None) if up_to is None else self.times <= up_to + 1e-12
        return float(np.max((1.0 + self.times[mask]) ** n * np.abs(self.values[mask])))


def _sample(func, times):
    out = np.asarray(func(times), dtype=complex)
    if out.shape != times.shape:
        out = np.array([func(t) for t in times], dtype=complex)
    return out


def solve(problem):
    """March the product-trapezoidal scheme over the grid.

    R_j = [F_j + dt (G_j R_0 / 2 + sum_{0<i<j} G_{j-i} R_i)] / (1 - dt G_0 / 2)
    """
    dt = problem.time_step
    steps = int(round(problem.horizon / dt))
    times = dt * np.arange(steps + 1)
    G = _sample(problem.kernel, times)
    F = _sample(problem.source, times)
    if not (np.all(np.isfinite(G.view(float))) and np.all(np.isfinite(F.view(float)))):
        raise ValueError("kernel or source not finite on the grid")

    denom = 1.0 - 0.5 * dt * G[0]
    if abs(denom) < 1e-12:
        raise StepSolveFailure(f"implicit diagonal factor 1 - dt G(0)/2 = {denom} is singular")

    R = np.zeros_like(F)
    R[0] = F[0]
    for j in range(1, steps + 1):
        acc = 0.5 * G[j] * R[0]
        if j > 1:
            acc += np.dot(R[1:j], G[j - 1 : 0 : -1])
        R[j] = (F[j] + dt * acc) / denom
    return VolterraSolution(times=times, values=R)


def kuramoto_kernel(dist, coupling):
    """Memory kernel t -> (K/2) ghat(t) of the linearized dynamics."""
    if coupling < 0:
        raise ValueError(f"coupling must be nonnegative, got {coupling}")

    def kernel(t):
        return 0.5 * coupling * dist.fourier_transform(t)

    return kernel


def linear_input_from_initial_data(p1hat0):
    """Source term of the linearized equation: F(t) is the transform of the
    initial first mode; the quadratic feedback term is dropped here by
    construction (it lives in the nonlinear mode simulation)."""
    return p1hat0


def mode_input_from_grid(grid, profile):
    """Discrete transform of an initial first-mode profile h(omega).

    Returns F with F(t) = sum_j w_j h(omega_j) exp(-i t omega_j), the exact
    source seen by the mode simulation on the same grid.
    """
    amps = grid.weights * np.asarray(profile(grid.nodes), dtype=complex)

    def source(t):
        t = np.asarray(t, dtype=float)
        phases = np.exp(-1j * np.multiply.outer(t, grid.nodes))
        return phases @ amps

    return source


@dataclass
class DecayFit:
    """Least-squares power-law fit of |R| on a log-log window."""

    exponent: float
    amplitude: float
    window: tuple
    residual: float  # RMS of log-log residuals; never hidden


def fit_decay(solution, window=None, noise_floor=1e-14, residual_tol=0.5):
    """Fit |R(t)| ~ A (1+t)^(-p) on ``window`` by log-log least squares.

    The regressor log(1+t) matches the weighted-sup convention, so a synthetic
    (1+t)^(-p) recovers p exactly.  Raises WindowTooNoisy (carrying the fit)
    when the RMS log-log residual exceeds ``residual_tol``, the contract for
    non-power-law decay.
    """
    if window is None:
        window = (0.25 * solution.times[-1], 0.9 * solution.times[-1])
    t_a, t_b = window
    mask = (solution.times >= t_a) & (solution.times <= t_b) & (solution.times > 0)
    mask &= np.abs(solution.values) > noise_floor
    if mask.sum() < 4:
        raise WindowTooNoisy(f"fewer than 4 usable samples in window {window}", fit=None)
    logt = np.log1p(solution.times[mask])
    logr = np.log(np.abs(solution.values[mask]))
    slope, intercept = np.polyfit(logt, logr, 1)
    resid = logr - (slope * logt + intercept)
    fit = DecayFit(
        exponent=float(-slope),
        amplitude=float(np.exp(intercept)),
        window=(float(t_a), float(t_b)),
        residual=float(np.sqrt(np.mean(resid**2))),
    )
    if fit.residual > residual_tol:
        raise WindowTooNoisy(
            f"log-log residual {fit.residual:.3f} exceeds {residual_tol}", fit=fit
        )
    return fit


@dataclass
class StabilityConstantEstimate:
    """Empirical weighted-sup ratio over a family of sources."""

    constant: float
    ratios_by_horizon: dict  # horizon -> worst ratio over sources
    per_source: list


def empirical_stability_constant(dist, coupling, weight_order, sources, time_step, horizon):
    """Measure sup (1+t)^n |R| / sup (1+t)^n |F| over sources and horizons.

    The ratio is evaluated at T/4, T/2 and T; monotone growth beyond a factor
    of 10 from T/4 to T raises UnstableKernel.  This is an empirical ratio
    only; no claim is made about matching any analytic constant.
    """
    kernel = kuramoto_kernel(dist, coupling)
    horizons = [horizon / 4.0, horizon / 2.0, horizon]
    per_source = []
    ratios = {h: 0.0 for h in horizons}
    for source in sources:
        sol = solve(VolterraProblem(kernel, source, time_step, horizon))
        f_vals = _sample(source, sol.times)
        f_sol = VolterraSolution(times=sol.times, values=f_vals)
        entry = {}
        for h in horizons:
            num = sol.weighted_sup(weight_order, up_to=h)
            den = f_sol.weighted_sup(weight_order, up_to=h)
            entry[h] = num / den
            ratios[h] = max(ratios[h], entry[h])
        per_source.append(entry)

    r0, r1, r2 = (ratios[h] for h in horizons)
    if r0 < r1 < r2 and r2 > 10.0 * r0:
        raise UnstableKernel(
            f"weighted-sup ratio grows {r0:.3g} -> {r1:.3g} -> {r2:.3g}; kernel is unstable"
        )
    return StabilityConstantEstimate(
        constant=float(max(ratios.values())),
        ratios_by_horizon={float(h): float(r) for h, r in ratios.items()},
        per_source=per_source,
    )


def _cumulative_transform(kernel, omega0, times):
    """I(t_j) = int_0^{t_j} G(u) exp(-i omega0 u) du by per-interval Gauss rule."""
    out = np.zeros(times.size, dtype=complex)
    if times.size < 2:
        return out
    a = times[:-1]
    b = times[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    u = mid[:, None] + half[:, None] * _GL8_NODES[None, :]
    w = half[:, None] * _GL8_WEIGHTS[None, :]
    vals = np.asarray(kernel(u.ravel()), dtype=complex).reshape(u.shape)
    vals *= np.exp(-1j * omega0 * u)
    out[1:] = np.cumsum(np.sum(w * vals, axis=1))
    return out


def instability_witness(dist, coupling, amplitude):
    """Source that turns a lower-half-plane root into pure exponential growth.

    At a root omega0 of the dispersion function, F(t) = A int_0^inf
    G(t+s) exp(-i omega0 s) ds makes R(t) = A exp(i omega0 t) the exact
    solution, growing at rate -Im(omega0) > 0.  Using D(omega0) = 0 the source
    reduces to A exp(i omega0 t) (1 - int_0^t G(u) exp(-i omega0 u) du), which
    needs only a finite integral.

    Returns (source callable, predicted growth rate).
    """
    if amplitude == 0:
        raise ValueError("witness amplitude must be nonzero")
    relation = DispersionRelation(dist, coupling)
    omega0 = find_unstable_root(relation)
    if omega0 is None:
        raise RootNotConverged(
            f"no unstable root at coupling {coupling}; witness needs an unstable kernel"
        )
    kernel = kuramoto_kernel(dist, coupling)

    def source(t):
        arr = np.atleast_1d(np.asarray(t, dtype=float))
        order = np.argsort(arr)
        sorted_t = arr[order]
        grid = np.concatenate(([0.0], sorted_t)) if sorted_t[0] > 0 else sorted_t
        cum = _cumulative_transform(kernel, omega0, grid)
        if sorted_t[0] > 0:
            cum = cum[1:]
        vals = amplitude * np.exp(1j * omega0 * sorted_t) * (1.0 - cum)
        out = np.empty_like(vals)
        out[order] = vals
        return out if np.ndim(t) else complex(out[0])

    return source, float(-omega0.imag)
