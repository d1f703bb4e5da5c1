"""Deterministic android-head simulator.

The head is a linear blendshape model: each actuator channel owns a sparse
landmark displacement basis reached at full activation (command value 255),
and the observed face is the neutral geometry plus the activation-weighted
sum of bases.  Observations add per-coordinate Gaussian landmark noise and
a uniformly drawn rigid pose within configured jitter bounds, optionally
delayed by an integer sensor lag.

Everything is a pure function of (config, inputs, seed): two simulators
built from the same config and fed the same command sequence produce
bit-identical frames.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidCommandError
from .features import AUDef
from .geometry import (
    MIRROR_INDEX,
    N_LANDMARKS,
    Pose,
    apply_pose,
    check_landmarks,
)

# Controllable channels: eyelids (1, 4), eyebrows (5, 6), mouth (7-10),
# jaw (11).  Eye-gaze (2, 3) and neck (12-14) channels of the physical
# head are not modelled.
CHANNELS = (1, 4, 5, 6, 7, 8, 9, 10, 11)
CHANNEL_INDEX = {ch: i for i, ch in enumerate(CHANNELS)}
N_CHANNELS = len(CHANNELS)

COMMAND_MIN = 0
COMMAND_MAX = 255


@dataclass
class ActuatorCommand:
    """One command frame: integer value in [0, 255] per channel."""

    values: dict[int, int]

    def __post_init__(self) -> None:
        vals = {}
        for ch, v in self.values.items():
            ch = int(ch)
            if ch not in CHANNEL_INDEX:
                raise InvalidCommandError(f"unknown channel id {ch}")
            v = int(v)
            if not COMMAND_MIN <= v <= COMMAND_MAX:
                raise InvalidCommandError(
                    f"channel {ch} value {v} outside [{COMMAND_MIN}, {COMMAND_MAX}]"
                )
            vals[ch] = v
        if set(vals) != set(CHANNELS):
            missing = sorted(set(CHANNELS) - set(vals))
            raise InvalidCommandError(f"command missing channels {missing}")
        self.values = vals

    @classmethod
    def neutral(cls) -> "ActuatorCommand":
        return cls({ch: 0 for ch in CHANNELS})

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ActuatorCommand":
        a = np.asarray(arr)
        if a.shape != (N_CHANNELS,):
            raise InvalidCommandError(f"expected {N_CHANNELS} values, got {a.shape}")
        return cls({ch: int(a[i]) for i, ch in enumerate(CHANNELS)})

    def as_array(self) -> np.ndarray:
        """Values ordered by ``CHANNELS``, as floats."""
        return np.array([self.values[ch] for ch in CHANNELS], dtype=float)

    def activations(self) -> np.ndarray:
        """Per-channel activation fractions in [0, 1]."""
        return self.as_array() / COMMAND_MAX


@dataclass
class ActuatorDef:
    """One channel: sparse landmark displacement basis at full activation."""

    channel: int
    name: str
    basis: list[tuple[int, float, float, float]]
    symmetric: bool = True

    def dense_basis(self) -> np.ndarray:
        """Expand the sparse (index, dx, dy, dz) list to a (68, 3) field."""
        out = np.zeros((N_LANDMARKS, 3))
        for idx, dx, dy, dz in self.basis:
            out[int(idx)] += (dx, dy, dz)
        return out

    def to_dict(self) -> dict:
        return {
            "id": self.channel,
            "name": self.name,
            "basis": [[int(i), float(x), float(y), float(z)] for i, x, y, z in self.basis],
            "symmetric": self.symmetric,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ActuatorDef":
        return cls(
            channel=int(d["id"]),
            name=d["name"],
            basis=[(int(i), float(x), float(y), float(z)) for i, x, y, z in d["basis"]],
            symmetric=bool(d["symmetric"]),
        )


@dataclass
class QuadraticTerm:
    """Optional pairwise cross-term: extra displacement ~ a_i * a_j.

    Off by default; lets robustness studies break the head's linearity.
    """

    channel_a: int
    channel_b: int
    basis: list[tuple[int, float, float, float]]

    def dense_basis(self) -> np.ndarray:
        out = np.zeros((N_LANDMARKS, 3))
        for idx, dx, dy, dz in self.basis:
            out[int(idx)] += (dx, dy, dz)
        return out

    def to_dict(self) -> dict:
        return {
            "channel_a": self.channel_a,
            "channel_b": self.channel_b,
            "basis": [[int(i), float(x), float(y), float(z)] for i, x, y, z in self.basis],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuadraticTerm":
        return cls(
            channel_a=int(d["channel_a"]),
            channel_b=int(d["channel_b"]),
            basis=[(int(i), float(x), float(y), float(z)) for i, x, y, z in d["basis"]],
        )


@dataclass
class HeadConfig:
    """Full parametric description of the simulated head."""

    neutral_landmarks: np.ndarray
    actuators: list[ActuatorDef]
    landmark_noise_sigma: float = 0.0
    pose_jitter_max_rotation: float = 0.0
    pose_jitter_max_translation: float = 0.0
    sensor_lag_frames: int = 0
    au_defs: list[AUDef] = field(default_factory=list)
    rng_seed: int = 0
    quadratic_terms: list[QuadraticTerm] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.neutral_landmarks = check_landmarks(self.neutral_landmarks)
        self.validate()

    def validate(self, symmetry_tol: float = 1e-6) -> None:
        channels = [a.channel for a in self.actuators]
        if sorted(channels) != sorted(CHANNELS):
            raise ConfigError(
                f"actuator channels {sorted(channels)} != expected {sorted(CHANNELS)}"
            )
        if self.landmark_noise_sigma < 0:
            raise ConfigError("landmark_noise_sigma must be >= 0")
        if self.pose_jitter_max_rotation < 0 or self.pose_jitter_max_translation < 0:
            raise ConfigError("pose jitter bounds must be >= 0")
        if self.sensor_lag_frames < 0:
            raise ConfigError("sensor_lag_frames must be >= 0")

        mirrored = self.neutral_landmarks[MIRROR_INDEX] * np.array([-1.0, 1.0, 1.0])
        if not np.allclose(self.neutral_landmarks, mirrored, atol=symmetry_tol):
            raise ConfigError("neutral landmarks are not symmetric about x=0")

        for act in self.actuators:
            if not act.symmetric:
                continue
            dense = act.dense_basis()
            mirrored = dense[MIRROR_INDEX] * np.array([-1.0, 1.0, 1.0])
            if not np.allclose(dense, mirrored, atol=symmetry_tol):
                raise ConfigError(
                    f"actuator {act.channel} ({act.name}) marked symmetric but its "
                    "basis is not mirror-symmetric"
                )

        flat = self.basis_matrix().reshape(N_CHANNELS, -1)
        if np.linalg.matrix_rank(flat) != N_CHANNELS:
            raise ConfigError("actuator displacement bases are linearly dependent")

        au_ids = [d.au for d in self.au_defs]
        if len(set(au_ids)) != len(au_ids):
            raise ConfigError("duplicate AU ids in head config")

    def basis_matrix(self) -> np.ndarray:
        """Dense displacement bases stacked in ``CHANNELS`` order, (9, 68, 3)."""
        ordered = sorted(self.actuators, key=lambda a: CHANNEL_INDEX[a.channel])
        return np.stack([a.dense_basis() for a in ordered])

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema": "head-config/v1",
            "neutral_landmarks": [[float(c) for c in row] for row in self.neutral_landmarks],
            "actuators": [a.to_dict() for a in sorted(self.actuators, key=lambda a: a.channel)],
            "landmark_noise_sigma": float(self.landmark_noise_sigma),
            "pose_jitter_max_rotation": float(self.pose_jitter_max_rotation),
            "pose_jitter_max_translation": float(self.pose_jitter_max_translation),
            "sensor_lag_frames": int(self.sensor_lag_frames),
            "au_defs": [d.to_dict() for d in self.au_defs],
            "rng_seed": int(self.rng_seed),
            "quadratic_terms": [q.to_dict() for q in self.quadratic_terms],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HeadConfig":
        schema = d.get("schema", "head-config/v1")
        if schema != "head-config/v1":
            raise ConfigError(f"unsupported head config schema {schema!r}")
        return cls(
            neutral_landmarks=np.array(d["neutral_landmarks"], dtype=float),
            actuators=[ActuatorDef.from_dict(a) for a in d["actuators"]],
            landmark_noise_sigma=float(d["landmark_noise_sigma"]),
            pose_jitter_max_rotation=float(d["pose_jitter_max_rotation"]),
            pose_jitter_max_translation=float(d["pose_jitter_max_translation"]),
            sensor_lag_frames=int(d["sensor_lag_frames"]),
            au_defs=[AUDef.from_dict(a) for a in d.get("au_defs", [])],
            rng_seed=int(d["rng_seed"]),
            quadratic_terms=[QuadraticTerm.from_dict(q) for q in d.get("quadratic_terms", [])],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "HeadConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def sha256(self) -> str:
        """Hash of the canonical serialized form, for provenance checks."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class ObservedFrame:
    """One simulated camera observation."""

    command: ActuatorCommand
    landmarks_observed: np.ndarray
    landmarks_true: np.ndarray
    pose: Pose
    frame_index: int


def forward(config: HeadConfig, command: ActuatorCommand) -> np.ndarray:
    """Noiseless face-frame landmarks for a command (blendshape sum)."""
    act = command.activations()
    pts = config.neutral_landmarks + np.tensordot(act, config.basis_matrix(), axes=1)
    for q in config.quadratic_terms:
        a = act[CHANNEL_INDEX[q.channel_a]] * act[CHANNEL_INDEX[q.channel_b]]
        if a != 0.0:
            pts = pts + a * q.dense_basis()
    return pts


def random_command(config: HeadConfig, rng: np.random.Generator) -> ActuatorCommand:
    """Each channel drawn independently and uniformly from {0, ..., 255}."""
    vals = rng.integers(COMMAND_MIN, COMMAND_MAX + 1, size=N_CHANNELS)
    return ActuatorCommand.from_array(vals)


def interpolate_commands(
    a: ActuatorCommand, b: ActuatorCommand, steps: int
) -> list[ActuatorCommand]:
    """``steps`` intermediate commands between a and b, endpoints excluded.

    Values sit at fractions i/(steps+1) and are rounded to the nearest
    integer (ties up), keeping the wire protocol integer-valued.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    va, vb = a.as_array(), b.as_array()
    out = []
    for i in range(1, steps + 1):
        frac = i / (steps + 1)
        vals = np.floor(va + (vb - va) * frac + 0.5).astype(int)
        out.append(ActuatorCommand.from_array(vals))
    return out


class HeadSimulator:
    """Stateful observation stream over one head configuration.

    Owns the noise RNG (seeded from ``config.rng_seed`` unless an explicit
    generator is passed) and the sensor-lag buffer, which starts filled
    with neutral commands.  Not thread-safe; use one instance per stream.
    """

    def __init__(self, config: HeadConfig, rng: np.random.Generator | None = None):
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng(config.rng_seed)
        self._lag: deque[ActuatorCommand] = deque(
            [ActuatorCommand.neutral()] * config.sensor_lag_frames
        )
        self._frame_index = 0

    def observe(self, command: ActuatorCommand) -> ObservedFrame:
        """Issue a command and return the (lagged, noisy, posed) observation."""
        cfg = self.config
        if cfg.sensor_lag_frames > 0:
            self._lag.append(command)
            effective = self._lag.popleft()
        else:
            effective = command

        true_pts = forward(cfg, effective)
        noisy = true_pts
        if cfg.landmark_noise_sigma > 0:
            noisy = true_pts + self.rng.normal(
                0.0, cfg.landmark_noise_sigma, size=(N_LANDMARKS, 3)
            )
        rot = self.rng.uniform(
            -cfg.pose_jitter_max_rotation, cfg.pose_jitter_max_rotation, size=3
        )
        trans = self.rng.uniform(
            -cfg.pose_jitter_max_translation, cfg.pose_jitter_max_translation, size=3
        )
        pose = Pose(rotation=rot, translation=trans)

        frame = ObservedFrame(
            command=command,
            landmarks_observed=apply_pose(noisy, pose),
            landmarks_true=true_pts,
            pose=pose,
            frame_index=self._frame_index,
        )
        self._frame_index += 1
        return frame
