"""Proper-time relativistic Kepler system and its K-symplectic integrators.

The extended state (t, x, gamma, u) evolves in proper time tau with
dt/dtau = gamma, dx/dtau = u, dgamma/dtau = -grad(phi).u, du/dtau = -gamma grad(phi).
The extended Hamiltonian splits into exactly solvable one-variable pieces,
composed here in first- and second-order (palindromic) order. Units use c = 1
internally; the CLI rescales on input/output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from geodyn.errors import SingularOriginError
from geodyn.integrators import _check_segment
from geodyn.kepler import grad_potential, potential

REL_METHOD_IDS = ("k1", "k2")


@dataclass(frozen=True)
class ExtPhaseState:
    """Extended relativistic state (t, x, gamma, u) in proper time."""
    t: float
    x: np.ndarray
    gamma: float
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        if self.x.shape != self.u.shape or self.x.ndim != 1:
            raise ValueError("x and u must be equal-length vectors")

    @property
    def n(self) -> int:
        return self.x.size


def mass_shell_gamma(u: np.ndarray) -> float:
    """On-shell Lorentz factor gamma = sqrt(1 + |u|^2) with c = 1."""
    u = np.asarray(u, dtype=float)
    return float(np.sqrt(1.0 + u @ u))


def extended_hamiltonian(s: ExtPhaseState) -> float:
    """H = (|u|^2 - gamma^2)/2, conserved up to a bounded defect by the methods."""
    return 0.5 * (float(s.u @ s.u) - s.gamma**2)


# --- Exact subflows ---

def flow_ht(s: ExtPhaseState, h: float) -> ExtPhaseState:
    """Exact flow of the -gamma^2/2 piece: advance t, kick u; x and gamma fixed."""
    g = grad_potential(s.x)
    return ExtPhaseState(s.t + h * s.gamma, s.x, s.gamma, s.u - h * s.gamma * g)


def flow_hi(i: int, s: ExtPhaseState, h: float) -> ExtPhaseState:
    """Exact flow of the u_i^2/2 piece: drift coordinate i, update gamma.

    The gamma update is the exact potential difference along the drift.
    """
    if not 1 <= i <= s.n:
        raise ValueError(f"sub-flow index {i} out of range 1..{s.n}")
    x = s.x.copy()
    x[i - 1] += h * s.u[i - 1]
    _check_segment(s.x, x)
    gamma = s.gamma - (potential(x) - potential(s.x))
    return ExtPhaseState(s.t, x, gamma, s.u)


# --- Composed one-step maps ---

def step_k1(s: ExtPhaseState, h: float) -> ExtPhaseState:
    """First-order K-symplectic step: coordinate drifts after the time/kick flow."""
    s = flow_ht(s, h)
    for i in range(1, s.n + 1):
        s = flow_hi(i, s, h)
    return s


def step_k1_adjoint(s: ExtPhaseState, h: float) -> ExtPhaseState:
    """Reversed composition; each subflow is exact, hence self-adjoint."""
    for i in range(s.n, 0, -1):
        s = flow_hi(i, s, h)
    return flow_ht(s, h)


def step_k2(s: ExtPhaseState, h: float, variant: str = "adjoint-last") -> ExtPhaseState:
    """Palindromic second-order step; self-adjoint in either variant.

    The default applies the adjoint half step first, mirroring the pairing
    generated by the second-order extended discrete Lagrangian;
    ``adjoint-first`` is the reversed pairing.
    """
    half = 0.5 * h
    if variant == "adjoint-first":
        return step_k1_adjoint(step_k1(s, half), half)
    if variant == "adjoint-last":
        return step_k1(step_k1_adjoint(s, half), half)
    raise ValueError(f"unknown k2 variant {variant!r}")


# --- Two-step variational form ---

def del_relativistic_seed(s0: ExtPhaseState, h: float) -> tuple[float, np.ndarray]:
    """(t1, x1) from the discrete Legendre transform of the extended Lagrangian."""
    t1 = s0.t + h * s0.gamma
    x1 = s0.x + h * s0.u - h * (t1 - s0.t) * grad_potential(s0.x)
    return t1, x1


def del_relativistic(t_prev: float, t_curr: float, x_prev: np.ndarray,
                     x_curr: np.ndarray, h: float) -> tuple[float, np.ndarray]:
    """Two-step update for (t, x) from the extended discrete Euler-Lagrange equations."""
    x_prev = np.asarray(x_prev, dtype=float)
    x_curr = np.asarray(x_curr, dtype=float)
    t_next = 2.0 * t_curr - t_prev - h * (potential(x_curr) - potential(x_prev))
    x_next = 2.0 * x_curr - x_prev - h * (t_next - t_curr) * grad_potential(x_curr)
    return t_next, x_next


@dataclass(frozen=True)
class ExtTrajectoryRecord:
    """Proper-time indexed relativistic trajectory (tau = n*h)."""
    method_id: str
    h: float
    taus: np.ndarray
    ts: np.ndarray
    xs: np.ndarray
    gammas: np.ndarray
    us: np.ndarray
    H: np.ndarray

    @property
    def steps(self) -> int:
        return self.xs.shape[0] - 1

    def state(self, n: int) -> ExtPhaseState:
        return ExtPhaseState(self.ts[n], self.xs[n], self.gammas[n], self.us[n])


def run_relativistic(method_id: str, s0: ExtPhaseState, h: float, steps: int) -> ExtTrajectoryRecord:
    """Integrate the extended system over uniform proper-time steps."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if h <= 0:
        raise ValueError("step size must be positive")
    if method_id == "k1":
        step = step_k1
    elif method_id == "k2":
        step = step_k2
    else:
        raise ValueError(f"unknown relativistic method {method_id!r}")
    n = s0.n
    ts = np.empty(steps + 1)
    xs = np.empty((steps + 1, n))
    gs = np.empty(steps + 1)
    us = np.empty((steps + 1, n))
    ts[0], xs[0], gs[0], us[0] = s0.t, s0.x, s0.gamma, s0.u
    s = s0
    for k in range(1, steps + 1):
        try:
            s = step(s, h)
        except SingularOriginError as exc:
            raise SingularOriginError(f"step {k}: {exc}") from exc
        ts[k], xs[k], gs[k], us[k] = s.t, s.x, s.gamma, s.u
    taus = h * np.arange(steps + 1)
    H = 0.5 * (np.einsum("ij,ij->i", us, us) - gs**2)
    return ExtTrajectoryRecord(method_id, h, taus, ts, xs, gs, us, H)
