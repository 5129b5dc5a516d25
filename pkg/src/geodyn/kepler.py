"""Two-body Kepler model: potential splitting, conserved quantities, analytic orbits.

Units are dimensionless with unit gravitational parameter, so the potential is
phi(x) = -1/|x| and bound orbits have period T = 2*pi*a**1.5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from geodyn.errors import (
    CircularOrbitError,
    NonConvergenceError,
    NonNegativeEnergyError,
    SingularOriginError,
    TrajectoryTooShortError,
)

ORIGIN_TOL = 1e-12
CIRCULAR_TOL = 1e-12
KEPLER_EQ_TOL = 1e-13
KEPLER_EQ_MAXITER = 50


# --- Domain types ---

@dataclass(frozen=True)
class PhaseState:
    """Position/velocity pair in R^N (N >= 2)."""
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        if self.x.shape != self.v.shape or self.x.ndim != 1 or self.x.size < 2:
            raise ValueError("position and velocity must be equal-length vectors, N >= 2")

    @property
    def n(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class PotentialPart:
    """One scalar summand of a split potential, with its gradient.

    ``hess`` is optional; it is only needed by the modified-Lagrangian
    evaluations, which fall back to finite differences without it.
    """
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True)
class SplitPotential:
    """Ordered potential parts phi^(i) summing to the full potential."""
    parts: tuple[PotentialPart, ...]

    def __post_init__(self):
        if len(self.parts) < 1:
            raise ValueError("a split needs at least one part")

    def __len__(self) -> int:
        return len(self.parts)

    def total(self, x: np.ndarray) -> float:
        return sum(p.value(x) for p in self.parts)

    def total_grad(self, x: np.ndarray) -> np.ndarray:
        g = self.parts[0].grad(x).copy()
        for p in self.parts[1:]:
            g += p.grad(x)
        return g


@dataclass(frozen=True)
class ConservedSet:
    """Energy, scalar angular momentum, LRL vector and its polar form (N = 2)."""
    H: float
    m: float
    A: np.ndarray
    ecc: float
    omega: float
    circular: bool = False


@dataclass(frozen=True)
class OrbitElements:
    """Elliptic orbit geometry; requires H < 0."""
    a: float
    b: float
    e: float
    T: float


# --- Potential ---

def potential(x: np.ndarray) -> float:
    """Kepler potential phi(x) = -1/|x|."""
    r = float(np.linalg.norm(x))
    if r < ORIGIN_TOL:
        raise SingularOriginError(f"|x| = {r:.3e} too close to the origin")
    return -1.0 / r


def grad_potential(x: np.ndarray) -> np.ndarray:
    """Gradient of the Kepler potential: x/|x|^3."""
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r < ORIGIN_TOL:
        raise SingularOriginError(f"|x| = {r:.3e} too close to the origin")
    return x / r**3


def hess_potential(x: np.ndarray) -> np.ndarray:
    """Hessian of the Kepler potential: I/r^3 - 3 x x^T / r^5."""
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r < ORIGIN_TOL:
        raise SingularOriginError(f"|x| = {r:.3e} too close to the origin")
    return np.eye(x.size) / r**3 - 3.0 * np.outer(x, x) / r**5


def kepler_split(weights: Sequence[float] = (0.5, 0.5)) -> SplitPotential:
    """Split the Kepler potential as phi^(i) = w_i * phi.

    Degenerate weights (a single nonzero entry) collapse to a one-part split.
    """
    w = tuple(float(wi) for wi in weights)
    if abs(sum(w) - 1.0) > 1e-12:
        raise ValueError("split weights must sum to 1")
    nonzero = [wi for wi in w if wi != 0.0]
    if len(nonzero) == 1:
        return SplitPotential((PotentialPart(potential, grad_potential, hess_potential),))

    def make(wi: float) -> PotentialPart:
        return PotentialPart(
            value=lambda x, wi=wi: wi * potential(x),
            grad=lambda x, wi=wi: wi * grad_potential(x),
            hess=lambda x, wi=wi: wi * hess_potential(x),
        )

    return SplitPotential(tuple(make(wi) for wi in w))


# --- Conserved quantities ---

def energy(s: PhaseState) -> float:
    return 0.5 * float(s.v @ s.v) + potential(s.x)


def lrl_vector(s: PhaseState) -> np.ndarray:
    """Componentwise LRL vector A_i = x_i |v|^2 - v_i (x.v) - x_i/|x|."""
    r = float(np.linalg.norm(s.x))
    if r < ORIGIN_TOL:
        raise SingularOriginError("LRL vector undefined at the origin")
    v2 = float(s.v @ s.v)
    xv = float(s.x @ s.v)
    return s.x * v2 - s.v * xv - s.x / r


def conserved(s: PhaseState) -> ConservedSet:
    """Full conserved set for N = 2 states.

    The angle omega uses the two-argument arctangent and is reported as 0
    (flagged circular) when the eccentricity is below 1e-12.
    """
    if s.n != 2:
        raise ValueError("full conserved set implemented for N = 2 only")
    H = energy(s)
    m = float(s.x[0] * s.v[1] - s.x[1] * s.v[0])
    A = lrl_vector(s)
    ecc = float(np.hypot(A[0], A[1]))
    circ = ecc < CIRCULAR_TOL
    omega = 0.0 if circ else float(math.atan2(A[1], A[0]))
    return ConservedSet(H=H, m=m, A=A, ecc=ecc, omega=omega, circular=circ)


def orbit_elements(s: PhaseState) -> OrbitElements:
    """Elliptic elements from a state; raises for H >= 0."""
    cs = conserved(s)
    if cs.H >= 0.0:
        raise NonNegativeEnergyError(f"H = {cs.H:.6g} is not a bound orbit")
    a = -1.0 / (2.0 * cs.H)
    e = cs.ecc
    b = a * math.sqrt(max(0.0, 1.0 - e * e))
    T = 2.0 * math.pi * a**1.5
    return OrbitElements(a=a, b=b, e=e, T=T)


def periapsis_state(el: OrbitElements) -> PhaseState:
    """Counter-clockwise periapsis state with the LRL vector along +x1."""
    r = el.a * (1.0 - el.e)
    vp = math.sqrt((1.0 + el.e) / r)
    return PhaseState(np.array([r, 0.0]), np.array([0.0, vp]))


# --- Analytic reference solution ---

def solve_kepler_equation(mean_anomaly: float, e: float) -> float:
    """Solve E - e*sin(E) = M by Newton iteration with bisection fallback."""
    m = math.remainder(mean_anomaly, 2.0 * math.pi)
    ecc_anom = m if e < 0.8 else math.pi if m >= 0 else -math.pi
    for _ in range(KEPLER_EQ_MAXITER):
        f = ecc_anom - e * math.sin(ecc_anom) - m
        if abs(f) < KEPLER_EQ_TOL:
            return ecc_anom + (mean_anomaly - m)
        ecc_anom -= f / (1.0 - e * math.cos(ecc_anom))
    # Newton stalled (possible only for corrupted elements); bisect on [-pi, pi].
    lo, hi = -math.pi, math.pi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid - e * math.sin(mid) - m > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < KEPLER_EQ_TOL:
            return 0.5 * (lo + hi) + (mean_anomaly - m)
    raise NonConvergenceError("Kepler-equation solve failed; corrupted elements?")


def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def analytic_reference(s0: PhaseState, t: float) -> PhaseState:
    """Exact elliptic-orbit state at time t from the state s0 at time 0.

    Propagates via the eccentric anomaly; clockwise orbits are handled by
    mirroring across the x1-axis.
    """
    cs = conserved(s0)
    if cs.H >= 0.0:
        raise NonNegativeEnergyError("analytic reference requires H < 0")
    el = orbit_elements(s0)
    mirror = cs.m < 0.0
    sign = np.array([1.0, -1.0]) if mirror else np.array([1.0, 1.0])
    x0 = s0.x * sign
    v0 = s0.v * sign

    a, b, e = el.a, el.b, el.e
    mean_motion = a**-1.5

    if cs.circular:
        rot = _rot(mean_motion * t)
        x, v = rot @ x0, rot @ v0
        return PhaseState(x * sign, v * sign)

    ax_mirror = lrl_vector(PhaseState(x0, v0))
    omega = math.atan2(ax_mirror[1], ax_mirror[0])
    back = _rot(-omega)
    xp, vp = back @ x0, back @ v0

    r0 = float(np.linalg.norm(xp))
    cos_e0 = (1.0 - r0 / a) / e
    sin_e0 = float(xp @ vp) / (e * math.sqrt(a))
    e0 = math.atan2(sin_e0, cos_e0)
    m0 = e0 - e * math.sin(e0)

    ecc_anom = solve_kepler_equation(m0 + mean_motion * t, e)
    ce, se = math.cos(ecc_anom), math.sin(ecc_anom)
    edot = mean_motion / (1.0 - e * ce)
    xp_t = np.array([a * (ce - e), b * se])
    vp_t = np.array([-a * se * edot, b * ce * edot])

    fwd = _rot(omega)
    return PhaseState((fwd @ xp_t) * sign, (fwd @ vp_t) * sign)


# --- Noether characteristics and residual ---

def characteristics(s: PhaseState) -> dict[str, np.ndarray]:
    """Characteristics of the four conservation laws (N = 2)."""
    x1, x2 = s.x
    v1, v2 = s.v
    return {
        "H": np.array([v1, v2]),
        "m": np.array([-x2, x1]),
        "A1": np.array([-x2 * v2, 2.0 * x1 * v2 - v1 * x2]),
        "A2": np.array([2.0 * x2 * v1 - x1 * v2, -x1 * v1]),
    }


def _quantity_value(s: PhaseState, which: str) -> float:
    if which == "H":
        return energy(s)
    if which == "m":
        return float(s.x[0] * s.v[1] - s.x[1] * s.v[0])
    if which in ("A1", "A2"):
        return float(lrl_vector(s)[int(which[1]) - 1])
    raise ValueError(f"unknown quantity id {which!r}")


def noether_residual(times: np.ndarray, states: Sequence[PhaseState], which: str) -> float:
    """Max interior defect of dP/dt = Q . N[x] estimated by central differences.

    ``times`` must be uniformly spaced. For a trajectory sampled from an exact
    solution the residual is O(dt^2).
    """
    if len(states) < 3:
        raise TrajectoryTooShortError("need at least 3 samples for central differences")
    times = np.asarray(times, dtype=float)
    dt = times[1] - times[0]
    worst = 0.0
    for i in range(1, len(states) - 1):
        s = states[i]
        p_dot = (_quantity_value(states[i + 1], which) - _quantity_value(states[i - 1], which)) / (2.0 * dt)
        accel = (states[i + 1].v - states[i - 1].v) / (2.0 * dt)
        defect = accel + grad_potential(s.x)
        q = characteristics(s)[which]
        worst = max(worst, abs(p_dot - float(q @ defect)))
    return worst


# --- Perturbation averages along the analytic orbit ---

# 4th-order central-difference stencil for space, 6th-order for the on-orbit
# time derivative; the time stencil rides on exact states so the wider stencil
# costs only extra Kepler-equation solves.
_D1_5 = (np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0, (-2, -1, 0, 1, 2))
_D1_7 = (np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0, (-3, -2, -1, 0, 1, 2, 3))

_SPACE_DELTA = 1e-4
_TIME_DELTA = 2e-2


class LagrangianField:
    """Scalar field L(x, v) with optional closed-form gradients."""

    def __init__(self, value, grad_x=None, grad_v=None):
        self.value = value
        self._grad_x = grad_x
        self._grad_v = grad_v

    def grad_x(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self._grad_x is not None:
            return np.asarray(self._grad_x(x, v), dtype=float)
        return self._fd_grad(x, v, wrt="x")

    def grad_v(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self._grad_v is not None:
            return np.asarray(self._grad_v(x, v), dtype=float)
        return self._fd_grad(x, v, wrt="v")

    def _fd_grad(self, x, v, wrt):
        base = x if wrt == "x" else v
        coeffs, offsets = _D1_5
        out = np.zeros_like(base)
        for i in range(base.size):
            acc = 0.0
            for c, k in zip(coeffs, offsets):
                if k == 0:
                    continue
                pert = base.copy()
                pert[i] += k * _SPACE_DELTA
                args = (pert, v) if wrt == "x" else (x, pert)
                acc += c * self.value(*args)
            out[i] = acc / _SPACE_DELTA
        return out


def euler_lagrange_on_orbit(lbar: LagrangianField, s0: PhaseState, t: float) -> np.ndarray:
    """EL(lbar) = d/dt(dL/dv) - dL/dx evaluated on the analytic orbit at time t."""
    s = analytic_reference(s0, t)
    coeffs, offsets = _D1_7
    ddt = np.zeros_like(s.x)
    for c, k in zip(coeffs, offsets):
        if k == 0:
            continue
        sk = analytic_reference(s0, t + k * _TIME_DELTA)
        ddt += c * lbar.grad_v(sk.x, sk.v)
    ddt /= _TIME_DELTA
    return ddt - lbar.grad_x(s.x, s.v)


def perturbation_average(
    lbar: LagrangianField,
    char,
    orbit: PhaseState | OrbitElements,
    nodes: int = 2048,
    refine_tol: float = 1e-8,
) -> float:
    """Period average [<EL(lbar), char>] by composite Simpson quadrature.

    ``char`` is a quantity id ("H", "m", "A1", "A2") or a callable mapping a
    PhaseState to a vector. Successive Simpson refinements must agree to
    ``refine_tol``, otherwise NonConvergenceError is raised.
    """
    s0 = periapsis_state(orbit) if isinstance(orbit, OrbitElements) else orbit
    period = orbit_elements(s0).T

    if callable(char):
        char_fn = char
    else:
        char_fn = lambda s, key=char: characteristics(s)[key]

    def integrand(t: float) -> float:
        el_vec = euler_lagrange_on_orbit(lbar, s0, t)
        return float(el_vec @ char_fn(analytic_reference(s0, t)))

    def simpson(n: int) -> float:
        ts = np.linspace(0.0, period, n + 1)
        ys = np.array([integrand(t) for t in ts])
        w = np.ones(n + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return float((ys * w).sum() * (period / n) / 3.0) / period

    coarse = simpson(nodes)
    fine = simpson(2 * nodes)
    if abs(fine - coarse) > refine_tol:
        raise NonConvergenceError(
            f"period-average quadrature did not settle: {coarse:.3e} vs {fine:.3e}"
        )
    return fine
