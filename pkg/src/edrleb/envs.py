"""Small deterministic continuous-control tasks with fixed-length episodes.

Every episode lasts exactly ``max_time_step`` steps; there is no early
termination, so every stored episode has the same length.  Dynamics use
explicit (semi-implicit) Euler integration with ``DT = 0.05``.

Available tasks:

``point_mass``
    2-D point pushed by a bounded force toward the origin.  Dense reward
    ``-||pos - goal|| - 0.01 ||a||^2``.
``sparse_goal``
    1-D point that earns +1 for every step it spends inside a goal band and
    nothing otherwise.
``pendulum_hold``
    Torque-limited pendulum that should be held upright.  Reward
    ``-(theta^2 + 0.1 omega^2 + 0.001 a^2)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

DT = 0.05


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    max_time_step: int
    action_low: tuple[float, ...]
    action_high: tuple[float, ...]

    def __post_init__(self):
        if self.state_dim < 1 or self.action_dim < 1 or self.max_time_step < 1:
            raise ValueError("state_dim, action_dim and max_time_step must all be >= 1")
        if len(self.action_low) != self.action_dim or len(self.action_high) != self.action_dim:
            raise ValueError("action bounds must have one entry per action dimension")
        if any(lo >= hi for lo, hi in zip(self.action_low, self.action_high)):
            raise ValueError("action_low must be strictly below action_high")

    @property
    def low(self) -> np.ndarray:
        return np.asarray(self.action_low, dtype=np.float64)

    @property
    def high(self) -> np.ndarray:
        return np.asarray(self.action_high, dtype=np.float64)

    def clip(self, action) -> np.ndarray:
        return np.clip(np.asarray(action, dtype=np.float64), self.low, self.high)


@dataclass(frozen=True)
class EnvState:
    spec: EnvSpec
    x: np.ndarray  # internal physical state
    step_index: int
    seed: int

    @property
    def observation(self) -> np.ndarray:
        return _TASKS[self.spec.name].observe(self.x)


class StepResult(NamedTuple):
    next_state: np.ndarray
    reward: float
    done: bool


class _Task(NamedTuple):
    spec: EnvSpec
    reset: Callable[[np.random.Generator], np.ndarray]
    dynamics: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, float]]
    observe: Callable[[np.ndarray], np.ndarray]
    reward_bounds: tuple[float, float]


# point_mass ---------------------------------------------------------------

POINT_MASS_GOAL = np.zeros(2)
POINT_MASS_SPAWN = 1.0  # initial position uniform in [-1, 1]^2
POINT_MASS_WALL = 2.0


def _point_mass_reset(rng):
    pos = rng.uniform(-POINT_MASS_SPAWN, POINT_MASS_SPAWN, size=2)
    return np.concatenate([pos, np.zeros(2)])


def _point_mass_dynamics(x, a):
    pos, vel = x[:2], x[2:]
    vel = vel + DT * a
    pos = pos + DT * vel
    hit = np.abs(pos) > POINT_MASS_WALL
    pos = np.clip(pos, -POINT_MASS_WALL, POINT_MASS_WALL)
    vel = np.where(hit, 0.0, vel)
    reward = -np.linalg.norm(pos - POINT_MASS_GOAL) - 0.01 * float(a @ a)
    return np.concatenate([pos, vel]), float(reward)


# sparse_goal --------------------------------------------------------------

SPARSE_GOAL_BAND = (0.6, 0.9)
SPARSE_GOAL_SPAWN = 0.1
SPARSE_GOAL_WALL = 1.5


def _sparse_goal_reset(rng):
    return np.array([rng.uniform(-SPARSE_GOAL_SPAWN, SPARSE_GOAL_SPAWN), 0.0])


def _sparse_goal_dynamics(x, a):
    pos, vel = x
    vel = vel + DT * a[0]
    pos = pos + DT * vel
    if abs(pos) > SPARSE_GOAL_WALL:
        pos, vel = np.sign(pos) * SPARSE_GOAL_WALL, 0.0
    lo, hi = SPARSE_GOAL_BAND
    return np.array([pos, vel]), 1.0 if lo <= pos <= hi else 0.0


# pendulum_hold ------------------------------------------------------------

PENDULUM_MAX_SPEED = 8.0
PENDULUM_MAX_TORQUE = 2.0
_G, _M, _L = 10.0, 1.0, 1.0


def _angle_normalize(theta):
    return ((theta + np.pi) % (2 * np.pi)) - np.pi


def _pendulum_reset(rng):
    return np.array([rng.uniform(-np.pi, np.pi), rng.uniform(-1.0, 1.0)])


def _pendulum_dynamics(x, a):
    theta, omega = x
    u = a[0]
    cost = _angle_normalize(theta) ** 2 + 0.1 * omega ** 2 + 0.001 * u ** 2
    omega = omega + (3 * _G / (2 * _L) * np.sin(theta) + 3.0 / (_M * _L ** 2) * u) * DT
    omega = np.clip(omega, -PENDULUM_MAX_SPEED, PENDULUM_MAX_SPEED)
    theta = theta + omega * DT
    return np.array([theta, omega]), float(-cost)


def _pendulum_observe(x):
    return np.array([np.cos(x[0]), np.sin(x[0]), x[1]])


_TASKS: dict[str, _Task] = {
    "point_mass": _Task(
        EnvSpec("point_mass", 4, 2, 100, (-1.0, -1.0), (1.0, 1.0)),
        _point_mass_reset, _point_mass_dynamics, lambda x: x.copy(),
        (-(np.sqrt(2) * POINT_MASS_WALL + 0.02), 0.0),
    ),
    "sparse_goal": _Task(
        EnvSpec("sparse_goal", 2, 1, 60, (-1.0,), (1.0,)),
        _sparse_goal_reset, _sparse_goal_dynamics, lambda x: x.copy(),
        (0.0, 1.0),
    ),
    "pendulum_hold": _Task(
        EnvSpec("pendulum_hold", 3, 1, 100, (-PENDULUM_MAX_TORQUE,), (PENDULUM_MAX_TORQUE,)),
        _pendulum_reset, _pendulum_dynamics, _pendulum_observe,
        (-(np.pi ** 2 + 0.1 * PENDULUM_MAX_SPEED ** 2 + 0.001 * PENDULUM_MAX_TORQUE ** 2), 0.0),
    ),
}

ENV_NAMES = tuple(_TASKS)


def make_env(name: str) -> EnvSpec:
    try:
        return _TASKS[name].spec
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {ENV_NAMES}") from None


def reward_bounds(spec: EnvSpec) -> tuple[float, float]:
    """Closed interval that contains every per-step reward of the task."""
    return _TASKS[spec.name].reward_bounds


def env_reset(spec: EnvSpec, seed: int) -> EnvState:
    if spec.name not in _TASKS:
        raise ValueError(f"unknown environment {spec.name!r}")
    x = _TASKS[spec.name].reset(np.random.default_rng(seed))
    return EnvState(spec, x, 0, seed)


def env_step(state: EnvState, action) -> tuple[EnvState, StepResult]:
    """Advance one step.  Actions outside the bounds are clipped."""
    spec = state.spec
    if state.step_index >= spec.max_time_step:
        raise RuntimeError("episode already finished; call env_reset")
    action = np.asarray(action, dtype=np.float64)
    if action.shape != (spec.action_dim,):
        raise ValueError(f"action shape {action.shape} != ({spec.action_dim},)")
    task = _TASKS[spec.name]
    x, reward = task.dynamics(state.x, spec.clip(action))
    new = EnvState(spec, x, state.step_index + 1, state.seed)
    done = new.step_index == spec.max_time_step
    return new, StepResult(task.observe(x), reward, done)
