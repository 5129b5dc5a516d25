"""Numerical self-adjointness checks for second-order systems d/dt(M xdot) = f.

Each checker evaluates the condition families appropriate to the structure of
the system (general, velocity-dependent mass with f = A(t,x) xdot + phi(t,x),
or constant mass) over a deterministic low-discrepancy sample cloud, using
central finite differences for partials and on-shell jet shifts for total
time derivatives. A passing report certifies that a Lagrangian exists; the
Vainberg construction then reconstructs one by quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from geodyn.errors import GeodynError, NonConvergenceError
from geodyn.expressions import parse_expression
from geodyn.errors import ExpressionError

PASS_TOLERANCE = 1e-4
DEFAULT_DELTA = 1e-5
_TIME_DELTA = 1e-4

STRUCTURES = ("general", "velocity-mass", "constant-mass")


@dataclass(frozen=True)
class SecondOrderSystem:
    """System d/dt(M(t,x,v) v) = f(t,x,v) with optional structure decomposition.

    For the velocity-mass structure, ``amat`` and ``phi`` decompose the force
    as f = A(t,x) v + phi(t,x).
    """
    name: str
    n: int
    structure: str
    force: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    mass: Callable[[float, np.ndarray, np.ndarray], np.ndarray] | None = None
    amat: Callable[[float, np.ndarray], np.ndarray] | None = None
    phi: Callable[[float, np.ndarray], np.ndarray] | None = None
    x_box: tuple[float, float] = (-2.0, 2.0)
    v_box: tuple[float, float] = (-1.0, 1.0)
    exclusion_radius: float = 0.0

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown structure tag {self.structure!r}")

    def mass_at(self, t, x, v) -> np.ndarray:
        if self.mass is None:
            return np.eye(self.n)
        m = np.asarray(self.mass(t, x, v), dtype=float)
        if np.max(np.abs(m - m.T)) >= 1e-12:
            raise GeodynError(f"{self.name}: mass matrix not symmetric at sample")
        return m


@dataclass(frozen=True)
class ConditionResult:
    condition: str
    description: str
    residual: float
    passed: bool


@dataclass(frozen=True)
class CheckReport:
    system: str
    structure: str
    tolerance: float
    conditions: tuple[ConditionResult, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def residual(self, condition: str) -> float:
        for c in self.conditions:
            if c.condition == condition:
                return c.residual
        raise KeyError(condition)


# --- Sample cloud ---

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29)


def _radical_inverse(index: int, base: int) -> float:
    result, frac = 0.0, 1.0 / base
    while index > 0:
        result += (index % base) * frac
        index //= base
        frac /= base
    return result


def sample_cloud(system: SecondOrderSystem, count: int = 64) -> list[tuple[float, np.ndarray, np.ndarray]]:
    """Deterministic Halton cloud of (t, x, v) samples avoiding the singularity."""
    dims = 1 + 2 * system.n
    if dims > len(_PRIMES):
        raise ValueError("sample cloud supports n <= 4")
    xl, xh = system.x_box
    vl, vh = system.v_box
    samples = []
    index = 20   # skip the correlated low-index prefix
    guard = 0
    while len(samples) < count:
        index += 1
        guard += 1
        if guard > 100 * count:
            raise GeodynError("sampling-domain error: exclusion region rejects the whole box")
        u = [_radical_inverse(index, _PRIMES[d]) for d in range(dims)]
        t = u[0]
        x = np.array([xl + (xh - xl) * u[1 + i] for i in range(system.n)])
        v = np.array([vl + (vh - vl) * u[1 + system.n + i] for i in range(system.n)])
        if system.exclusion_radius > 0 and np.linalg.norm(x) < system.exclusion_radius:
            continue
        samples.append((t, x, v))
    return samples


# --- Finite-difference machinery ---

def _partial(fn, t, x, v, wrt: str, j: int, delta: float):
    """Central difference of fn(t, x, v) with respect to x_j or v_j."""
    if wrt == "x":
        xp, xm = x.copy(), x.copy()
        xp[j] += delta
        xm[j] -= delta
        return (np.asarray(fn(t, xp, v)) - np.asarray(fn(t, xm, v))) / (2 * delta)
    vp, vm = v.copy(), v.copy()
    vp[j] += delta
    vm[j] -= delta
    return (np.asarray(fn(t, x, vp)) - np.asarray(fn(t, x, vm))) / (2 * delta)


def _partial_t(fn, t, x, v, delta: float):
    return (np.asarray(fn(t + delta, x, v)) - np.asarray(fn(t - delta, x, v))) / (2 * delta)


def acceleration(system: SecondOrderSystem, t, x, v, delta: float = DEFAULT_DELTA,
                 max_iter: int = 40) -> np.ndarray:
    """On-shell acceleration solving M a = f - (dM/dt) v by fixed-point iteration."""
    m = system.mass_at(t, x, v)
    f = np.asarray(system.force(t, x, v), dtype=float)
    a = np.linalg.solve(m, f)
    if system.mass is None:
        return a
    for _ in range(max_iter):
        mdot = _partial_t(lambda tt, xx, vv: system.mass_at(tt, xx, vv), t, x, v, delta)
        for l in range(system.n):
            mdot = mdot + _partial(system.mass_at, t, x, v, "x", l, delta) * v[l]
            mdot = mdot + _partial(system.mass_at, t, x, v, "v", l, delta) * a[l]
        a_new = np.linalg.solve(m, f - mdot @ v)
        if np.max(np.abs(a_new - a)) < 1e-13:
            return a_new
        a = a_new
    return a


def _total_derivative(system: SecondOrderSystem, g, t, x, v, sigma: float = _TIME_DELTA):
    """On-shell d/dt of g(t, x, v): central difference along the frozen-jet shift."""
    a = acceleration(system, t, x, v)
    gp = np.asarray(g(t + sigma, x + sigma * v + 0.5 * sigma**2 * a, v + sigma * a))
    gm = np.asarray(g(t - sigma, x - sigma * v + 0.5 * sigma**2 * a, v - sigma * a))
    return (gp - gm) / (2 * sigma)


# --- Condition checkers ---

def _report(system, names_residuals, tolerance) -> CheckReport:
    conditions = tuple(
        ConditionResult(cond, desc, res, res < tolerance)
        for cond, desc, res in names_residuals
    )
    return CheckReport(system.name, system.structure, tolerance, conditions)


def check_constant_mass(system: SecondOrderSystem, samples=None,
                        delta: float = DEFAULT_DELTA,
                        tolerance: float = PASS_TOLERANCE) -> CheckReport:
    """Conditions for constant symmetric mass: force partial symmetries only."""
    if system.structure != "constant-mass":
        raise ValueError("check_constant_mass needs a constant-mass system")
    samples = samples if samples is not None else sample_cloud(system)
    n = system.n
    res_a = res_b = 0.0
    for t, x, v in samples:
        dfv = np.array([_partial(system.force, t, x, v, "v", j, delta) for j in range(n)]).T
        dfx = np.array([_partial(system.force, t, x, v, "x", j, delta) for j in range(n)]).T
        for i in range(n):
            for j in range(n):
                res_a = max(res_a, abs(dfv[i, j] + dfv[j, i]))
                ddt = _total_derivative(
                    system, lambda tt, xx, vv: _partial(system.force, tt, xx, vv, "v", j, delta)[i],
                    t, x, v)
                res_b = max(res_b, abs(dfx[i, j] - dfx[j, i] + float(ddt)))
    return _report(system, [
        ("a", "df_i/dv_j + df_j/dv_i = 0", res_a),
        ("b", "df_i/dx_j - df_j/dx_i + d/dt df_i/dv_j = 0", res_b),
    ], tolerance)


def check_velocity_mass(system: SecondOrderSystem, samples=None,
                        delta: float = DEFAULT_DELTA,
                        tolerance: float = PASS_TOLERANCE) -> CheckReport:
    """Conditions for M = M(v), f = A(t,x) v + phi(t,x)."""
    if system.structure != "velocity-mass":
        raise ValueError("check_velocity_mass needs a velocity-mass system")
    if system.amat is None or system.phi is None:
        raise ValueError("velocity-mass systems must provide amat and phi")
    samples = samples if samples is not None else sample_cloud(system)
    n = system.n
    res = {"a": 0.0, "b": 0.0, "c": 0.0, "d": 0.0}
    for t, x, v in samples:
        dmv = [_partial(system.mass_at, t, x, v, "v", j, delta) for j in range(n)]
        amat = np.asarray(system.amat(t, x), dtype=float)
        for i in range(n):
            for j in range(n):
                sym_ij = sum(dmv[j][i, k] * v[k] for k in range(n))
                sym_ji = sum(dmv[i][j, k] * v[k] for k in range(n))
                res["a"] = max(res["a"], abs(sym_ij - sym_ji))
                res["b"] = max(res["b"], abs(amat[i, j] + amat[j, i]))
        da = [_partial(lambda tt, xx, vv: system.amat(tt, xx), t, x, v, "x", i, delta)
              for i in range(n)]
        da_t = _partial_t(lambda tt, xx, vv: system.amat(tt, xx), t, x, v, delta)
        dphi = np.array([_partial(lambda tt, xx, vv: system.phi(tt, xx), t, x, v, "x", j, delta)
                         for j in range(n)]).T
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    cyc = da[i][j, k] + da[j][k, i] + da[k][i, j]
                    res["c"] = max(res["c"], abs(cyc))
                res["d"] = max(res["d"], abs(dphi[i, j] - dphi[j, i] - da_t[i, j]))
    return _report(system, [
        ("a", "velocity-mass contraction symmetric", res["a"]),
        ("b", "A skew-symmetric", res["b"]),
        ("c", "cyclic closedness of A", res["c"]),
        ("d", "curl(phi) = dA/dt", res["d"]),
    ], tolerance)


def check_general(system: SecondOrderSystem, samples=None,
                  delta: float = DEFAULT_DELTA,
                  tolerance: float = PASS_TOLERANCE) -> CheckReport:
    """Full condition families for M = M(t, x, v) without structural shortcuts."""
    samples = samples if samples is not None else sample_cloud(system)
    n = system.n
    res = {"a": 0.0, "b": 0.0, "c": 0.0}
    for t, x, v in samples:
        dmv = [_partial(system.mass_at, t, x, v, "v", j, delta) for j in range(n)]
        dmx = [_partial(system.mass_at, t, x, v, "x", j, delta) for j in range(n)]
        dfv = np.array([_partial(system.force, t, x, v, "v", j, delta) for j in range(n)]).T
        dfx = np.array([_partial(system.force, t, x, v, "x", j, delta) for j in range(n)]).T
        for i in range(n):
            for j in range(n):
                term_a = sum((dmv[j][i, k] - dmv[i][j, k]) * v[k] for k in range(n))
                res["a"] = max(res["a"], abs(term_a))
                term_b = sum((dmx[j][i, k] + dmx[i][j, k]) * v[k] for k in range(n)) \
                    - dfv[i, j] - dfv[j, i]
                res["b"] = max(res["b"], abs(term_b))
                ddt_m = _total_derivative(
                    system,
                    lambda tt, xx, vv: sum(
                        _partial(system.mass_at, tt, xx, vv, "x", j, delta)[i, k] * vv[k]
                        for k in range(n)),
                    t, x, v)
                ddt_f = _total_derivative(
                    system,
                    lambda tt, xx, vv: _partial(system.force, tt, xx, vv, "v", i, delta)[j],
                    t, x, v)
                term_c = float(ddt_m) - dfx[i, j] + dfx[j, i] + float(ddt_f)
                res["c"] = max(res["c"], abs(term_c))
    return _report(system, [
        ("a", "velocity-mass contraction antisymmetry", res["a"]),
        ("b", "mass/force cross symmetry", res["b"]),
        ("c", "curl consistency with total derivatives", res["c"]),
    ], tolerance)


def check(system: SecondOrderSystem, samples=None, delta: float = DEFAULT_DELTA,
          tolerance: float = PASS_TOLERANCE) -> CheckReport:
    """Dispatch to the checker matching the system's structure tag."""
    if system.structure == "constant-mass":
        return check_constant_mass(system, samples, delta, tolerance)
    if system.structure == "velocity-mass":
        return check_velocity_mass(system, samples, delta, tolerance)
    return check_general(system, samples, delta, tolerance)


# --- Vainberg reconstruction ---

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(16)
_GAUSS_NODES = 0.5 * (_GAUSS_NODES + 1.0)      # map to [0, 1]
_GAUSS_WEIGHTS = 0.5 * _GAUSS_WEIGHTS


def vainberg_lagrangian(nfield, t: float, x: np.ndarray, v: np.ndarray,
                        a: np.ndarray) -> float:
    """L = integral_0^1 x . N(t, s x, s v, s a) ds by 16-node Gauss-Legendre.

    ``nfield(t, x, v, a)`` is the residual operator of the system N[x] = 0.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    total = 0.0
    for s, w in zip(_GAUSS_NODES, _GAUSS_WEIGHTS):
        val = float(x @ np.asarray(nfield(t, s * x, s * v, s * a), dtype=float))
        if not math.isfinite(val):
            raise NonConvergenceError("Vainberg quadrature hit a non-finite integrand")
        total += w * val
    return total


# --- Built-in systems ---

def _kepler_force(t, x, v):
    r = np.linalg.norm(x)
    return -x / r**3


def _lorentz_gamma(v):
    return 1.0 / math.sqrt(1.0 - float(v @ v))


def builtin_systems() -> dict[str, SecondOrderSystem]:
    """kepler, damped, magnetic, relativistic test systems."""
    kepler = SecondOrderSystem(
        name="kepler", n=2, structure="constant-mass",
        force=_kepler_force, exclusion_radius=0.5,
    )
    damped = SecondOrderSystem(
        name="damped", n=1, structure="constant-mass",
        force=lambda t, x, v: -x - v,
    )
    skew = np.array([[0.0, 1.0], [-1.0, 0.0]])
    magnetic = SecondOrderSystem(
        name="magnetic", n=2, structure="velocity-mass",
        force=lambda t, x, v: skew @ v - x,
        amat=lambda t, x: skew,
        phi=lambda t, x: -x,
    )
    relativistic = SecondOrderSystem(
        name="relativistic", n=2, structure="velocity-mass",
        force=_kepler_force,
        mass=lambda t, x, v: _lorentz_gamma(v) * np.eye(2),
        amat=lambda t, x: np.zeros((2, 2)),
        phi=lambda t, x: _kepler_force(t, x, None),
        v_box=(-0.45, 0.45),
        exclusion_radius=0.5,
    )
    return {s.name: s for s in (kepler, damped, magnetic, relativistic)}


# --- Expression-file systems ---

def load_system_file(path: str) -> SecondOrderSystem:
    """Load a user system from a key=value file of arithmetic expressions.

    Recognized keys: ``n``, ``structure``, ``f1..fN``, and optionally
    ``m<ij>``, ``a<ij>``, ``phi1..phiN`` depending on the structure tag.
    """
    raw: dict[str, tuple[str, int]] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ExpressionError("expected key = expression", lineno, 1)
            key, _, rhs = stripped.partition("=")
            raw[key.strip()] = (rhs.strip(), lineno)
    if "n" not in raw:
        raise ExpressionError("missing dimension entry 'n'")
    n = int(float(raw.pop("n")[0]))
    structure = raw.pop("structure", ("constant-mass", 0))[0]
    if structure not in STRUCTURES:
        raise ExpressionError(f"unknown structure tag {structure!r}")

    exprs = {key: parse_expression(text, line) for key, (text, line) in raw.items()}

    def env(t, x, v):
        e = {"t": t}
        for i in range(n):
            e[f"x{i + 1}"] = x[i]
            e[f"v{i + 1}"] = v[i]
        return e

    def vector(prefix):
        keys = [f"{prefix}{i + 1}" for i in range(n)]
        if not all(k in exprs for k in keys):
            return None
        return lambda t, x, v: np.array([exprs[k](env(t, x, v)) for k in keys])

    def matrix(prefix):
        keys = {(i, j): f"{prefix}{i + 1}{j + 1}" for i in range(n) for j in range(n)}
        if not any(k in exprs for k in keys.values()):
            return None

        def at(t, x, v):
            e = env(t, x, v)
            out = np.zeros((n, n))
            for (i, j), key in keys.items():
                if key in exprs:
                    out[i, j] = exprs[key](e)
            return out
        return at

    force = vector("f")
    amat = matrix("a")
    phi = vector("phi")
    if force is None:
        if structure == "velocity-mass" and amat is not None and phi is not None:
            force = lambda t, x, v: amat(t, x, v) @ v + phi(t, x, v)
        else:
            raise ExpressionError(f"missing force entries f1..f{n}")
    mass = matrix("m")
    return SecondOrderSystem(
        name=path, n=n, structure=structure,
        force=force,
        mass=mass,
        amat=(lambda t, x: amat(t, x, np.zeros(n))) if amat is not None else None,
        phi=(lambda t, x: phi(t, x, np.zeros(n))) if phi is not None else None,
    )
