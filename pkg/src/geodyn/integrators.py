"""One-step and two-step integrators for the Kepler problem.

Four methods are provided: the symplectic Euler and Stormer-Verlet baselines
and the two splitting-based integrators vi1 (order 1) and vi2 (order 2).
vi1 composes per-coordinate sub-maps of the split potential; vi2 is the
palindromic composition of a half step with its adjoint. Both also exist in
two-step discrete Euler-Lagrange form, equivalent to the compositions once
the first point is seeded through the discrete Legendre transform.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from geodyn.errors import NonConvergenceError, SingularOriginError, UnknownMethodError
from geodyn.kepler import (
    ORIGIN_TOL,
    PhaseState,
    SplitPotential,
    grad_potential,
    kepler_split,
    potential,
)

METHOD_IDS = ("sym-euler", "sv", "vi1", "vi2")
LAGRANGIAN_IDS = ("L1", "L2", "L1st", "Lstar", "L2nd")


@dataclass(frozen=True)
class TwoStepState:
    """Consecutive positions of a two-step recurrence."""
    x_prev: np.ndarray
    x_curr: np.ndarray
    h: float

    def __post_init__(self):
        object.__setattr__(self, "x_prev", np.asarray(self.x_prev, dtype=float))
        object.__setattr__(self, "x_curr", np.asarray(self.x_curr, dtype=float))
        if self.h <= 0:
            raise ValueError("step size must be positive")


@dataclass(frozen=True)
class TrajectoryRecord:
    """Uniform-step trajectory with optional conserved-quantity columns.

    The time column is n*h by construction, not accumulated addition.
    """
    method_id: str
    h: float
    times: np.ndarray
    xs: np.ndarray          # (steps+1, N)
    vs: np.ndarray          # (steps+1, N)
    H: np.ndarray | None = None
    m: np.ndarray | None = None
    A: np.ndarray | None = None
    ecc: np.ndarray | None = None
    angle: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return self.xs.shape[0] - 1

    def state(self, n: int) -> PhaseState:
        return PhaseState(self.xs[n], self.vs[n])


# --- Elementary steps ---

def step_sym_euler(s: PhaseState, h: float) -> PhaseState:
    """Kick-then-drift symplectic Euler: p+ = p - h grad(x); x+ = x + h p+."""
    p = s.v - h * grad_potential(s.x)
    return PhaseState(s.x + h * p, p)


def step_sym_euler_adjoint(s: PhaseState, h: float) -> PhaseState:
    x = s.x + h * s.v
    return PhaseState(x, s.v - h * grad_potential(x))


def step_stormer_verlet(ts: TwoStepState, grad: Callable = grad_potential) -> np.ndarray:
    """Central-difference recurrence x+ = 2x - x_prev - h^2 grad(x).

    ``grad`` is pluggable so the same recurrence drives the linear
    modified-equation demo.
    """
    return 2.0 * ts.x_curr - ts.x_prev - ts.h**2 * grad(ts.x_curr)


def step_sv_one_step(s: PhaseState, h: float) -> PhaseState:
    """Kick-drift-kick Stormer-Verlet, consistent with the recurrence to round-off."""
    p_half = s.v - 0.5 * h * grad_potential(s.x)
    x = s.x + h * p_half
    return PhaseState(x, p_half - 0.5 * h * grad_potential(x))


def _check_segment(x0: np.ndarray, x1: np.ndarray):
    """Reject a drift segment passing within ORIGIN_TOL of the origin."""
    d = x1 - x0
    dd = float(d @ d)
    t = 0.0 if dd == 0.0 else min(1.0, max(0.0, -float(x0 @ d) / dd))
    nearest = x0 + t * d
    if float(nearest @ nearest) < ORIGIN_TOL**2:
        raise SingularOriginError("drift segment crosses the origin")


def substep_flow(i: int, s: PhaseState, split: SplitPotential, h: float) -> PhaseState:
    """Sub-map of H(i) = p_i^2/2 + phi^(i): drift coordinate i, then kick."""
    if not 1 <= i <= len(split):
        raise ValueError(f"sub-flow index {i} out of range 1..{len(split)}")
    x = s.x.copy()
    x[i - 1] += h * s.v[i - 1]
    _check_segment(s.x, x)
    return PhaseState(x, s.v - h * split.parts[i - 1].grad(x))


def substep_flow_adjoint(i: int, s: PhaseState, split: SplitPotential, h: float) -> PhaseState:
    """Adjoint sub-map: kick with phi^(i) at the old point, then drift coordinate i."""
    if not 1 <= i <= len(split):
        raise ValueError(f"sub-flow index {i} out of range 1..{len(split)}")
    p = s.v - h * split.parts[i - 1].grad(s.x)
    x = s.x.copy()
    x[i - 1] += h * p[i - 1]
    _check_segment(s.x, x)
    return PhaseState(x, p)


def step_vi1(s: PhaseState, split: SplitPotential, h: float) -> PhaseState:
    """Composition of the sub-maps in ascending coordinate order.

    A single-part (degenerate) split collapses to symplectic Euler.
    """
    if len(split) == 1:
        return step_sym_euler(s, h)
    for i in range(1, len(split) + 1):
        s = substep_flow(i, s, split, h)
    return s


def step_vi1_adjoint(s: PhaseState, split: SplitPotential, h: float) -> PhaseState:
    """Reversed composition of adjoint sub-maps; inverse of the h -> -h map."""
    if len(split) == 1:
        return step_sym_euler_adjoint(s, h)
    for i in range(len(split), 0, -1):
        s = substep_flow_adjoint(i, s, split, h)
    return s


def step_vi2(s: PhaseState, split: SplitPotential, h: float, variant: str = "adjoint-last") -> PhaseState:
    """Self-adjoint second-order step.

    The default applies the adjoint half step first (Phi_{h/2} o Phi*_{h/2}),
    which is exactly the map generated by the second-order discrete
    Lagrangian; ``variant="adjoint-first"`` uses the reversed pairing.
    """
    half = 0.5 * h
    if variant == "adjoint-first":
        return step_vi1_adjoint(step_vi1(s, split, half), split, half)
    if variant == "adjoint-last":
        return step_vi1(step_vi1_adjoint(s, split, half), split, half)
    raise UnknownMethodError(f"unknown vi2 variant {variant!r}")


# --- Discrete Lagrangians and Legendre transforms ---

def _hat(base: np.ndarray, top: np.ndarray, count: int) -> np.ndarray:
    """base with its first ``count`` coordinates replaced from ``top``."""
    y = base.copy()
    y[:count] = top[:count]
    return y


def discrete_lagrangian(lag_id: str, x0: np.ndarray, x1: np.ndarray, h: float,
                        split: SplitPotential | None = None) -> float:
    """Scalar value of the named discrete Lagrangian."""
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    d = x1 - x0
    kinetic = 0.5 * float(d @ d) / h**2
    if lag_id == "L1":
        return kinetic - potential(x0)
    if lag_id == "L2":
        return kinetic - 0.5 * (potential(x0) + potential(x1))
    split = _require_split(lag_id, split, x0.size)
    if lag_id == "L1st":
        if len(split) == 1:
            return kinetic - split.parts[0].value(x0)
        return kinetic - sum(
            split.parts[j].value(_hat(x0, x1, j + 1)) for j in range(len(split))
        )
    if lag_id == "Lstar":
        return discrete_lagrangian("L1st", x1, x0, -h, split)
    if lag_id == "L2nd":
        xm = _midpoint_stage(x0, x1, h, split)
        return 0.5 * discrete_lagrangian("Lstar", x0, xm, 0.5 * h, split) \
            + 0.5 * discrete_lagrangian("L1st", xm, x1, 0.5 * h, split)
    raise UnknownMethodError(f"unknown discrete Lagrangian {lag_id!r}")


def _require_split(lag_id, split, n):
    if split is None:
        split = kepler_split()
    if len(split) not in (1, n):
        raise ValueError(f"{lag_id} needs a split with 1 or {n} parts")
    return split


def _l1st_minus(x0: np.ndarray, x1: np.ndarray, h: float, split: SplitPotential) -> np.ndarray:
    """p_n = -h dL1st/dx_n in closed form."""
    if len(split) == 1:
        return (x1 - x0) / h + h * split.parts[0].grad(x0)
    p = (x1 - x0) / h
    for i in range(1, len(split)):      # coordinates 2..N (0-based i)
        acc = 0.0
        for j in range(i):              # parts 1..i-1
            acc += split.parts[j].grad(_hat(x0, x1, j + 1))[i]
        p[i] += h * acc
    return p


def _l1st_plus(x0: np.ndarray, x1: np.ndarray, h: float, split: SplitPotential) -> np.ndarray:
    """p_{n+1} = h dL1st/dx_{n+1} in closed form."""
    if len(split) == 1:
        return (x1 - x0) / h
    p = (x1 - x0) / h
    for i in range(len(split)):
        acc = 0.0
        for j in range(i, len(split)):  # parts i..N
            acc += split.parts[j].grad(_hat(x0, x1, j + 1))[i]
        p[i] -= h * acc
    return p


def legendre_minus(lag_id: str, x0: np.ndarray, x1: np.ndarray, h: float,
                   split: SplitPotential | None = None) -> np.ndarray:
    """p_n = -h d1 L(x_n, x_{n+1}, h) for the named discrete Lagrangian."""
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    d = x1 - x0
    if lag_id == "L1":
        return d / h + h * grad_potential(x0)
    if lag_id == "L2":
        return d / h + 0.5 * h * grad_potential(x0)
    split = _require_split(lag_id, split, x0.size)
    if lag_id == "L1st":
        return _l1st_minus(x0, x1, h, split)
    if lag_id == "Lstar":
        return _l1st_plus(x1, x0, -h, split)
    if lag_id == "L2nd":
        xm = _midpoint_stage(x0, x1, h, split)
        return legendre_minus("Lstar", x0, xm, 0.5 * h, split)
    raise UnknownMethodError(f"unknown discrete Lagrangian {lag_id!r}")


def legendre_plus(lag_id: str, x0: np.ndarray, x1: np.ndarray, h: float,
                  split: SplitPotential | None = None) -> np.ndarray:
    """p_{n+1} = h d2 L(x_n, x_{n+1}, h) for the named discrete Lagrangian."""
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    d = x1 - x0
    if lag_id == "L1":
        return d / h
    if lag_id == "L2":
        return d / h - 0.5 * h * grad_potential(x1)
    split = _require_split(lag_id, split, x0.size)
    if lag_id == "L1st":
        return _l1st_plus(x0, x1, h, split)
    if lag_id == "Lstar":
        return _l1st_minus(x1, x0, -h, split)
    if lag_id == "L2nd":
        xm = _midpoint_stage(x0, x1, h, split)
        return legendre_plus("L1st", xm, x1, 0.5 * h, split)
    raise UnknownMethodError(f"unknown discrete Lagrangian {lag_id!r}")


def legendre_fd(lag_id: str, x0, x1, h, split=None, delta: float = 1e-6):
    """Finite-difference cross-check of both Legendre transforms."""
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    n = x0.size
    p_minus = np.zeros(n)
    p_plus = np.zeros(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = delta
        p_minus[i] = -h * (
            discrete_lagrangian(lag_id, x0 + e, x1, h, split)
            - discrete_lagrangian(lag_id, x0 - e, x1, h, split)
        ) / (2 * delta)
        p_plus[i] = h * (
            discrete_lagrangian(lag_id, x0, x1 + e, h, split)
            - discrete_lagrangian(lag_id, x0, x1 - e, h, split)
        ) / (2 * delta)
    return p_minus, p_plus


def _midpoint_stage(x0: np.ndarray, x1: np.ndarray, h: float, split: SplitPotential,
                    tol: float = 1e-13) -> np.ndarray:
    """Internal stage of L2nd: momentum matching of the two half Lagrangians."""
    g = 0.5 * h

    def residual(xm):
        return legendre_plus("Lstar", x0, xm, g, split) - legendre_minus("L1st", xm, x1, g, split)

    xm = 0.5 * (x0 + x1)
    return _newton(residual, xm, tol=tol, what="L2nd midpoint stage")


def _newton(residual, guess: np.ndarray, tol: float, what: str, max_iter: int = 50,
            fd_delta: float = 1e-7) -> np.ndarray:
    """Damped Newton with a finite-difference Jacobian."""
    x = guess.astype(float).copy()
    n = x.size
    for _ in range(max_iter):
        r = residual(x)
        norm = float(np.max(np.abs(r)))
        if norm < tol:
            return x
        jac = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = fd_delta
            jac[:, i] = (residual(x + e) - residual(x - e)) / (2 * fd_delta)
        try:
            dx = np.linalg.solve(jac, r)
        except np.linalg.LinAlgError as exc:
            raise NonConvergenceError(f"{what}: singular Jacobian") from exc
        lam = 1.0
        for _ in range(20):
            trial = x - lam * dx
            if float(np.max(np.abs(residual(trial)))) < norm or lam < 1e-4:
                x = trial
                break
            lam *= 0.5
    r = residual(x)
    if float(np.max(np.abs(r))) < tol:
        return x
    raise NonConvergenceError(f"{what}: Newton failed after {max_iter} iterations")


def bootstrap_first_point(s0: PhaseState, lag_id: str, h: float,
                          split: SplitPotential | None = None) -> np.ndarray:
    """Solve v0 = -h d1 L(x0, x1) for the first multistep point x1."""

    def residual(x1):
        return legendre_minus(lag_id, s0.x, x1, h, split) - s0.v

    return _newton(residual, s0.x + h * s0.v, tol=1e-12, what=f"bootstrap for {lag_id}")


def del_two_step_vi1(ts: TwoStepState, split: SplitPotential) -> np.ndarray:
    """Two-step discrete Euler-Lagrange update for the split Lagrangian.

    The staggered arguments make the solve explicit in ascending coordinate
    order for any split whose part count equals the dimension; a one-part
    split collapses to the plain central-difference recurrence.
    """
    x_prev, x, h = ts.x_prev, ts.x_curr, ts.h
    n = x.size
    if len(split) == 1:
        return 2.0 * x - x_prev - h**2 * split.parts[0].grad(x)
    if len(split) != n:
        raise ValueError("coordinate split must have one part per dimension")
    x_next = np.empty(n)
    for i in range(n):
        force = 0.0
        for j in range(i):
            force += split.parts[j].grad(_hat(x, x_next, j + 1))[i]
        for j in range(i, n):
            force += split.parts[j].grad(_hat(x_prev, x, j + 1))[i]
        x_next[i] = 2.0 * x[i] - x_prev[i] - h**2 * force
    return x_next


# --- Trajectory running ---

def one_step_map(method_id: str, split: SplitPotential | None = None):
    """One-step phase-space map for a method id; used by run() and the tests."""
    if method_id == "sym-euler":
        return lambda s, h: step_sym_euler(s, h)
    if method_id == "sv":
        return lambda s, h: step_sv_one_step(s, h)
    split = split if split is not None else kepler_split()
    if method_id == "vi1":
        return lambda s, h: step_vi1(s, split, h)
    if method_id == "vi2":
        return lambda s, h: step_vi2(s, split, h)
    raise UnknownMethodError(f"unknown method {method_id!r}")


def run(method_id: str, s0: PhaseState, h: float, steps: int,
        split: SplitPotential | None = None, diagnostics: bool = True) -> TrajectoryRecord:
    """Integrate ``steps`` uniform steps and record the trajectory.

    Conserved-quantity columns are evaluated vectorized after the run; the
    output is deterministic for a given configuration.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if h <= 0:
        raise ValueError("step size must be positive")
    step = one_step_map(method_id, split)
    n = s0.n
    xs = np.empty((steps + 1, n))
    vs = np.empty((steps + 1, n))
    xs[0], vs[0] = s0.x, s0.v
    s = s0
    for k in range(1, steps + 1):
        try:
            s = step(s, h)
        except SingularOriginError as exc:
            raise SingularOriginError(f"step {k}: {exc}") from exc
        xs[k], vs[k] = s.x, s.v
    times = h * np.arange(steps + 1)
    if not diagnostics:
        return TrajectoryRecord(method_id, h, times, xs, vs)

    r = np.linalg.norm(xs, axis=1)
    v2 = np.einsum("ij,ij->i", vs, vs)
    xv = np.einsum("ij,ij->i", xs, vs)
    H = 0.5 * v2 - 1.0 / r
    if n == 2:
        m = xs[:, 0] * vs[:, 1] - xs[:, 1] * vs[:, 0]
        A = xs * v2[:, None] - vs * xv[:, None] - xs / r[:, None]
        ecc = np.hypot(A[:, 0], A[:, 1])
        angle = np.arctan2(A[:, 1], A[:, 0])
    else:
        m = A = ecc = angle = None
    return TrajectoryRecord(method_id, h, times, xs, vs, H=H, m=m, A=A, ecc=ecc, angle=angle)
