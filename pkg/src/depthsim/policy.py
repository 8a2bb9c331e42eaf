"""Deterministic policy-side kernels: observation packing, action blending,
gait-clock and velocity residuals, reward terms and the style reward."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from depthsim.errors import ConfigError, InvalidInputError

N_JOINTS = 20
N_FEET = 2
HEIGHTMAP_SIZE = 400
TWO_PI = 2.0 * math.pi

BLIND_LAYOUT: tuple[tuple[str, int], ...] = (
    ("q", N_JOINTS),
    ("dq", N_JOINTS),
    ("omega", 3),
    ("gravity", 3),
    ("command", 3),
    ("clock", 4),
    ("v_hat", 3),
)
BLIND_SIZE = sum(n for _, n in BLIND_LAYOUT)
PERC_LAYOUT: tuple[tuple[str, int], ...] = (
    ("blind", BLIND_SIZE),
    ("heightmap", HEIGHTMAP_SIZE),
    ("a_blind", N_JOINTS),
)
PERC_SIZE = sum(n for _, n in PERC_LAYOUT)


def _offsets(layout):
    out, pos = {}, 0
    for name, n in layout:
        out[name] = slice(pos, pos + n)
        pos += n
    return out


BLIND_SLICES = _offsets(BLIND_LAYOUT)
PERC_SLICES = _offsets(PERC_LAYOUT)


def _vec(x, n: int, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64).reshape(-1)
    if a.size != n:
        raise InvalidInputError(f"{name} must have {n} values, got {a.size}")
    return a


def _pack(layout, parts: Mapping[str, object]) -> np.ndarray:
    return np.concatenate([_vec(parts[name], n, name) for name, n in layout])


def _unpack(layout, slices, vec, total: int) -> dict[str, np.ndarray]:
    vec = _vec(vec, total, "observation")
    return {name: vec[slices[name]].copy() for name, _ in layout}


# ---------------------------------------------------------------------------
# gait clock


@dataclass(frozen=True)
class GaitClock:
    """Gait phase plus per-leg offsets.

    Default offsets put the legs in anti-phase; the nominal increment
    corresponds to a 1.5 Hz stride at a 100 Hz control rate.
    """

    phi: float = 0.0
    gamma_left: float = 0.0
    gamma_right: float = math.pi
    phase_bounds: tuple[float, float] = (-0.05, 0.05)
    dphi_cmd: float = TWO_PI * 1.5 / 100.0

    def __post_init__(self):
        lo, hi = self.phase_bounds
        if lo > hi:
            raise InvalidInputError("phase bounds must satisfy min <= max")
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)


def update_phase(clock: GaitClock, delta_phi: float) -> tuple[float, float]:
    """Apply a bounded phase residual; returns ``(new_phi, applied_increment)``."""
    lo, hi = clock.phase_bounds
    applied = min(max(delta_phi, lo), hi) + clock.dphi_cmd
    new_phi = (clock.phi + applied) % TWO_PI
    # a tiny negative sum can round up to exactly 2*pi
    if new_phi >= TWO_PI:
        new_phi = 0.0
    return new_phi, applied


def step_clock(clock: GaitClock, delta_phi: float) -> GaitClock:
    return replace(clock, phi=update_phase(clock, delta_phi)[0])


def clock_signals(clock: GaitClock) -> np.ndarray:
    left = clock.phi + clock.gamma_left
    right = clock.phi + clock.gamma_right
    return np.array([math.sin(left), math.cos(left), math.sin(right), math.cos(right)])


def modulate_velocity(v_x: float, delta_vx: float, bounds: tuple[float, float]) -> float:
    v_min, v_max = bounds
    if v_min > v_max:
        raise InvalidInputError("velocity bounds must satisfy min <= max")
    return min(max(delta_vx, v_min), v_max) + v_x


def blend_actions(a_mod, a_blind, alpha: float) -> np.ndarray:
    """Convex combination ``(1 - alpha) * a_mod + alpha * a_blind``."""
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError(f"alpha must lie in [0, 1], got {alpha}")
    a_mod = np.asarray(a_mod, dtype=np.float64)
    a_blind = np.asarray(a_blind, dtype=np.float64)
    if a_mod.shape != a_blind.shape:
        raise InvalidInputError("action vectors differ in shape")
    out = (1.0 - alpha) * a_mod + alpha * a_blind
    # rounding can land one ulp outside the segment
    return np.clip(out, np.minimum(a_mod, a_blind), np.maximum(a_mod, a_blind))


# ---------------------------------------------------------------------------
# observations


def assemble_blind_obs(q, dq, omega, gravity, command, clock, v_hat) -> np.ndarray:
    """Pack the proprioceptive observation (56 values).

    ``clock`` may be a :class:`GaitClock` or its four sin/cos signals.
    """
    if isinstance(clock, GaitClock):
        clock = clock_signals(clock)
    return _pack(BLIND_LAYOUT, dict(q=q, dq=dq, omega=omega, gravity=gravity,
                                    command=command, clock=clock, v_hat=v_hat))


def unpack_blind_obs(vec) -> dict[str, np.ndarray]:
    return _unpack(BLIND_LAYOUT, BLIND_SLICES, vec, BLIND_SIZE)


def assemble_perc_obs(blind, heightmap, a_blind) -> np.ndarray:
    """Append the flattened heightmap and the blind action (476 values)."""
    h = getattr(heightmap, "values", heightmap)
    return _pack(PERC_LAYOUT, dict(blind=blind, heightmap=np.ravel(h), a_blind=a_blind))


def unpack_perc_obs(vec) -> dict[str, np.ndarray]:
    return _unpack(PERC_LAYOUT, PERC_SLICES, vec, PERC_SIZE)


# ---------------------------------------------------------------------------
# rewards

REWARD_TERMS = (
    "x_velocity",
    "y_velocity",
    "z_velocity",
    "angular_velocity",
    "orientation",
    "torques",
    "joint_velocity",
    "dof_pos_limits",
    "torque_limits",
    "delta_v_command",
    "delta_cycle",
    "delta_command_smoothness",
    "stumble",
    "stumble_swing",
)

# placeholder defaults: penalties negative, tracking terms positive
DEFAULT_REWARD_WEIGHTS: dict[str, float] = {
    "amp": 0.5,
    "x_velocity": 1.5,
    "y_velocity": 1.0,
    "z_velocity": 0.5,
    "angular_velocity": 0.5,
    "orientation": 1.0,
    "torques": -1e-5,
    "joint_velocity": -1e-4,
    "dof_pos_limits": -5.0,
    "torque_limits": 0.1,
    "delta_v_command": 0.1,
    "delta_cycle": 0.1,
    "delta_command_smoothness": -0.5,
    "stumble": -1.0,
    "stumble_swing": -1.0,
}


@dataclass
class RewardInputs:
    vx_cmd: float
    vy_cmd: float
    vx_mean: float
    vy_mean: float
    vz: float
    omega_xy: Sequence[float]
    gravity_xy: Sequence[float]
    tau: Sequence[float]
    kp: Sequence[float]
    dq: Sequence[float]
    q: Sequence[float]
    q_min: Sequence[float]
    q_max: Sequence[float]
    tau_max: Sequence[float]
    foot_fx: Sequence[float]
    foot_fz: Sequence[float]
    swing: Sequence[bool]
    a21: float
    a22: float
    a21_prev: float = 0.0
    a22_prev: float = 0.0

    def arrays(self) -> dict[str, np.ndarray]:
        names = ("omega_xy", "gravity_xy", "tau", "kp", "dq", "q", "q_min", "q_max",
                 "tau_max", "foot_fx", "foot_fz")
        out = {n: np.asarray(getattr(self, n), dtype=np.float64) for n in names}
        out["swing"] = np.asarray(self.swing, dtype=bool)
        n = out["tau"].shape
        for name in ("kp", "dq", "q", "q_min", "q_max", "tau_max"):
            if out[name].shape != n:
                raise InvalidInputError(f"{name} must match the torque vector length")
        if out["foot_fx"].shape != out["foot_fz"].shape or out["swing"].shape != out["foot_fx"].shape:
            raise InvalidInputError("per-foot arrays differ in length")
        if np.any(out["kp"] <= 0):
            raise InvalidInputError("proportional gains must be strictly positive")
        return out


def reward_terms(inp: RewardInputs, torque_norm: str = "l1") -> dict[str, float]:
    """Evaluate every task reward term.

    ``dof_pos_limits`` sums the excess beyond either joint limit.
    ``torque_limits`` feeds the norm of the per-joint excess beyond
    ``+-tau_max`` into the exponential (``torque_norm`` is ``"l1"`` or
    ``"l2"``). ``delta_command_smoothness`` is the Euclidean change of the two
    residual actions since the previous step.
    """
    a = inp.arrays()
    if torque_norm not in ("l1", "l2"):
        raise ConfigError(f"torque_norm must be 'l1' or 'l2', got {torque_norm!r}")
    excess_q = np.maximum(a["q"] - a["q_max"], 0.0) + np.maximum(a["q_min"] - a["q"], 0.0)
    excess_tau = np.maximum(np.abs(a["tau"]) - a["tau_max"], 0.0)
    tau_norm = excess_tau.sum() if torque_norm == "l1" else math.sqrt(np.square(excess_tau).sum())
    fx = np.abs(a["foot_fx"])
    return {
        "x_velocity": math.exp(-3.0 * abs(inp.vx_cmd - inp.vx_mean)),
        "y_velocity": math.exp(-10.0 * abs(inp.vy_cmd - inp.vy_mean)),
        "z_velocity": math.exp(-2.0 * abs(inp.vz)),
        "angular_velocity": math.exp(-float(np.square(a["omega_xy"]).sum())),
        "orientation": math.exp(-100.0 * float(np.square(a["gravity_xy"]).sum())),
        "torques": float(np.square(a["tau"] / a["kp"]).sum()),
        "joint_velocity": float(np.square(a["dq"]).sum()),
        "dof_pos_limits": float(excess_q.sum()),
        "torque_limits": math.exp(-0.005 * float(tau_norm)),
        "delta_v_command": math.exp(-200.0 * abs(inp.a22)),
        "delta_cycle": math.exp(-200.0 * abs(inp.a21)),
        "delta_command_smoothness": math.hypot(inp.a21 - inp.a21_prev, inp.a22 - inp.a22_prev),
        "stumble": float(np.count_nonzero(fx > 0.5 * a["foot_fz"])),
        "stumble_swing": float(np.count_nonzero(a["swing"] & (fx > 10.0))),
    }


def amp_reward(d: float) -> float:
    """Style reward from a least-squares discriminator output."""
    if not math.isfinite(d):
        raise InvalidInputError("discriminator output must be finite")
    return max(0.0, 1.0 - 0.25 * (d - 1.0) ** 2)


def total_reward(weights: Mapping[str, float], terms: Mapping[str, float], amp_r: float) -> float:
    """Weighted sum of the style reward (weight key ``"amp"``) and every task term."""
    missing = [k for k in ("amp", *terms) if k not in weights]
    if missing:
        raise ConfigError(f"missing reward weights: {missing}")
    total = weights["amp"] * amp_r
    for name, value in terms.items():
        total += weights[name] * value
    return total
