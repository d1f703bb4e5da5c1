"""Dataset collection against the simulator, persistence, and CSV ingestion.

Collection protocol per target expression: a block of neutral frames
(sized so neutrals make up ``neutral_fraction`` of the neutral+target mix),
then the expression held for ``au_window`` frames, then ``interp_steps``
interpolation frames easing toward the next expression.  Neutral and
interpolation frames are recorded (and counted) but never become dataset
rows; each held expression collapses to exactly one row whose AU and
landmark features are the window means.

Persistence format: a directory holding ``metadata.json`` plus
``frames.csv`` with columns
``frame_id, role, a1,a4,a5,a6,a7,a8,a9,a10,a11, X_0..X_67, Y_0..Y_67,
Z_0..Z_67, AU01..AU45``.
Distance features are not stored; they are recomputed from the stored
aligned landmarks on load.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DatasetCorruptError,
    OpenFaceFormatError,
    ProtocolError,
    ProvenanceWarning,
    UnsupportedVersionError,
)
from .features import AU_IDS, extract_aus, window_average
from .geometry import (
    N_LANDMARKS,
    Pose,
    center,
    derotate,
    pairwise_distances,
    procrustes_align,
)
from .simulator import (
    CHANNELS,
    ActuatorCommand,
    HeadConfig,
    HeadSimulator,
    interpolate_commands,
    random_command,
)

DATASET_SCHEMA = "dataset/v1"

ROLE_NEUTRAL = "neutral"
ROLE_TARGET = "target"
ROLE_INTERP = "interp"


@dataclass
class CollectionProtocol:
    """Parameters of one simulated recording session."""

    n_target_frames: int = 500
    neutral_fraction: float = 0.75
    interp_steps: int = 4
    au_window: int = 7
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_target_frames < 1:
            raise ProtocolError("n_target_frames must be >= 1")
        if not 0.0 <= self.neutral_fraction < 1.0:
            raise ProtocolError("neutral_fraction must be in [0, 1)")
        if self.interp_steps < 0:
            raise ProtocolError("interp_steps must be >= 0")
        if self.au_window < 1:
            raise ProtocolError("au_window must be >= 1")

    def to_dict(self) -> dict:
        return {
            "n_target_frames": self.n_target_frames,
            "neutral_fraction": self.neutral_fraction,
            "interp_steps": self.interp_steps,
            "au_window": self.au_window,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CollectionProtocol":
        return cls(**{k: d[k] for k in (
            "n_target_frames", "neutral_fraction", "interp_steps", "au_window", "rng_seed"
        )})


@dataclass
class FrameRecord:
    """One learning sample: command plus its averaged observed features."""

    frame_index: int
    role: str
    command: ActuatorCommand
    landmarks_aligned: np.ndarray
    aus: np.ndarray
    pose: Pose


@dataclass
class Dataset:
    """Target rows with all three feature representations, plus provenance."""

    records: list[FrameRecord]
    aus: np.ndarray          # (n, 17)
    landmarks: np.ndarray    # (n, 204) flattened aligned landmarks
    distances: np.ndarray    # (n, 2278) recomputed from `landmarks`
    commands: np.ndarray     # (n, 9) float copies of the integer commands
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def features(self, kind: str) -> np.ndarray:
        if kind == "au":
            return self.aus
        if kind == "landmarks":
            return self.landmarks
        if kind == "distances":
            return self.distances
        raise ValueError(f"unknown feature kind {kind!r}")


def _neutral_block_sizes(n_targets: int, neutral_fraction: float) -> list[int]:
    """Split the neutral-frame budget into one block per target expression.

    Total neutral count is chosen so neutrals are ``neutral_fraction`` of
    the neutral+target mix (targets counting once per expression).
    """
    if neutral_fraction == 0.0:
        return [0] * n_targets
    total = round(n_targets * neutral_fraction / (1.0 - neutral_fraction))
    base, extra = divmod(total, n_targets)
    return [base + 1 if i < extra else base for i in range(n_targets)]


def collect(head: HeadConfig, protocol: CollectionProtocol) -> Dataset:
    """Run the full recording protocol against the simulator.

    Deterministic: the command stream is seeded from ``protocol.rng_seed``,
    observation noise from ``head.rng_seed``, and AU detection noise from
    both.  Stored landmark rows are derotated, aligned to the neutral
    reference, and averaged over each held expression.
    """
    rng_cmd = np.random.default_rng(protocol.rng_seed)
    rng_au = np.random.default_rng([head.rng_seed, protocol.rng_seed, 0xAE])
    sim = HeadSimulator(head)
    neutral_cmd = ActuatorCommand.neutral()

    targets = [random_command(head, rng_cmd) for _ in range(protocol.n_target_frames)]
    blocks = _neutral_block_sizes(protocol.n_target_frames, protocol.neutral_fraction)

    stream = []  # (role, ObservedFrame)
    for i, target in enumerate(targets):
        for _ in range(blocks[i]):
            stream.append((ROLE_NEUTRAL, sim.observe(neutral_cmd)))
        for _ in range(protocol.au_window):
            stream.append((ROLE_TARGET, sim.observe(target)))
        if i + 1 < len(targets):
            for cmd in interpolate_commands(target, targets[i + 1], protocol.interp_steps):
                stream.append((ROLE_INTERP, sim.observe(cmd)))

    counts = {
        ROLE_NEUTRAL: sum(1 for r, _ in stream if r == ROLE_NEUTRAL),
        ROLE_TARGET: sum(1 for r, _ in stream if r == ROLE_TARGET),
        ROLE_INTERP: sum(1 for r, _ in stream if r == ROLE_INTERP),
    }

    reference = center(head.neutral_landmarks)

    def aligned(frame) -> np.ndarray:
        face = derotate(frame.landmarks_observed, frame.pose)
        return procrustes_align(face, reference)[0]

    neutral_aligned = [aligned(f) for role, f in stream if role == ROLE_NEUTRAL]
    if neutral_aligned:
        baseline = np.mean([pairwise_distances(p) for p in neutral_aligned], axis=0)
    else:
        baseline = pairwise_distances(reference)

    target_frames = [f for role, f in stream if role == ROLE_TARGET]
    w = protocol.au_window
    records: list[FrameRecord] = []
    au_rows, lm_rows = [], []
    for row_idx in range(protocol.n_target_frames):
        block = target_frames[row_idx * w: (row_idx + 1) * w]
        block_aligned = [aligned(f) for f in block]
        block_aus = [
            extract_aus(head.au_defs, pts, baseline, rng_au) for pts in block_aligned
        ]
        au_row = window_average(np.asarray(block_aus), w)[0]
        lm_row = np.mean(block_aligned, axis=0)
        au_rows.append(au_row)
        lm_rows.append(lm_row.reshape(-1))
        records.append(FrameRecord(
            frame_index=row_idx,
            role=ROLE_TARGET,
            command=block[0].command,
            landmarks_aligned=lm_row,
            aus=au_row,
            pose=block[-1].pose,
        ))

    landmarks = np.asarray(lm_rows)
    dataset = Dataset(
        records=records,
        aus=np.asarray(au_rows),
        landmarks=landmarks,
        distances=np.array([
            pairwise_distances(r.reshape(N_LANDMARKS, 3)) for r in landmarks
        ]),
        commands=np.array([r.command.as_array() for r in records]),
        meta={
            "schema": DATASET_SCHEMA,
            "head_config_sha256": head.sha256(),
            "protocol": protocol.to_dict(),
            "recorded_frames": counts,
            "n_rows": protocol.n_target_frames,
            "neutral_reference": [[float(c) for c in row] for row in reference],
        },
    )
    return dataset


def split(d: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded uniform shuffle then row-disjoint partition."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    n = len(d)
    n_test = int(round(n * test_fraction))
    if not 1 <= n_test <= n - 1:
        raise ValueError(f"test_fraction {test_fraction} leaves an empty partition")
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])

    def take(idx: np.ndarray, part: str) -> Dataset:
        meta = dict(d.meta)
        meta["split"] = {"part": part, "test_fraction": test_fraction, "seed": seed}
        meta["n_rows"] = int(idx.size)
        return Dataset(
            records=[d.records[i] for i in idx],
            aus=d.aus[idx],
            landmarks=d.landmarks[idx],
            distances=d.distances[idx],
            commands=d.commands[idx],
            meta=meta,
        )

    return take(train_idx, "train"), take(test_idx, "test")


# -- persistence -----------------------------------------------------------

_COMMAND_COLS = [f"a{ch}" for ch in CHANNELS]
_LANDMARK_COLS = (
    [f"X_{i}" for i in range(N_LANDMARKS)]
    + [f"Y_{i}" for i in range(N_LANDMARKS)]
    + [f"Z_{i}" for i in range(N_LANDMARKS)]
)
_AU_COLS = [f"AU{au:02d}" for au in AU_IDS]
_CSV_HEADER = ["frame_id", "role"] + _COMMAND_COLS + _LANDMARK_COLS + _AU_COLS


def save_dataset(d: Dataset, path: str | Path) -> None:
    """Write a dataset directory (metadata.json + frames.csv)."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metadata.json").write_text(json.dumps(d.meta, indent=2, sort_keys=True) + "\n")
    with (out / "frames.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        for rec in d.records:
            pts = rec.landmarks_aligned
            row = [rec.frame_index, rec.role]
            row += [rec.command.values[ch] for ch in CHANNELS]
            row += [repr(float(v)) for v in pts[:, 0]]
            row += [repr(float(v)) for v in pts[:, 1]]
            row += [repr(float(v)) for v in pts[:, 2]]
            row += [repr(float(v)) for v in rec.aus]
            writer.writerow(row)


def load_dataset(path: str | Path, head: HeadConfig | None = None) -> Dataset:
    """Read a dataset directory written by :func:`save_dataset`.

    If ``head`` is given, warns when the stored head-config hash differs
    from the current configuration.
    """
    root = Path(path)
    meta_path = root / "metadata.json"
    csv_path = root / "frames.csv"
    if not meta_path.exists() or not csv_path.exists():
        raise DatasetCorruptError(f"{root} is not a dataset directory")
    meta = json.loads(meta_path.read_text())
    if meta.get("schema") != DATASET_SCHEMA:
        raise UnsupportedVersionError(
            f"dataset schema {meta.get('schema')!r} not supported (want {DATASET_SCHEMA})"
        )

    if head is not None and head.sha256() != meta.get("head_config_sha256"):
        warnings.warn(
            "dataset was collected under a different head configuration",
            ProvenanceWarning,
            stacklevel=2,
        )

    records: list[FrameRecord] = []
    au_rows, lm_rows = [], []
    with csv_path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetCorruptError(f"{csv_path} is empty") from None
        if header != _CSV_HEADER:
            raise DatasetCorruptError(f"{csv_path} has an unexpected column layout")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(_CSV_HEADER):
                raise DatasetCorruptError(f"{csv_path}:{line_no}: truncated row")
            try:
                frame_id = int(row[0])
                role = row[1]
                cmd_vals = [int(v) for v in row[2:2 + len(CHANNELS)]]
                floats = [float(v) for v in row[2 + len(CHANNELS):]]
            except ValueError as e:
                raise DatasetCorruptError(f"{csv_path}:{line_no}: {e}") from None
            if role != ROLE_TARGET:
                raise DatasetCorruptError(
                    f"{csv_path}:{line_no}: dataset rows must have role 'target'"
                )
            lm_flat = np.array(floats[: 3 * N_LANDMARKS])
            aus = np.array(floats[3 * N_LANDMARKS:])
            pts = np.stack(
                [lm_flat[:N_LANDMARKS], lm_flat[N_LANDMARKS:2 * N_LANDMARKS],
                 lm_flat[2 * N_LANDMARKS:]], axis=1,
            )
            records.append(FrameRecord(
                frame_index=frame_id,
                role=role,
                command=ActuatorCommand({ch: v for ch, v in zip(CHANNELS, cmd_vals)}),
                landmarks_aligned=pts,
                aus=aus,
                pose=Pose.identity(),
            ))
            au_rows.append(aus)
            lm_rows.append(pts.reshape(-1))

    if len(records) != meta.get("n_rows"):
        raise DatasetCorruptError(
            f"{csv_path} has {len(records)} rows, metadata says {meta.get('n_rows')}"
        )

    landmarks = np.asarray(lm_rows)
    return Dataset(
        records=records,
        aus=np.asarray(au_rows),
        landmarks=landmarks,
        distances=np.array([
            pairwise_distances(r.reshape(N_LANDMARKS, 3)) for r in landmarks
        ]),
        commands=np.array([r.command.as_array() for r in records]),
        meta=meta,
    )


# -- OpenFace 2.0 CSV ingestion ---------------------------------------------

@dataclass
class HumanFrame:
    """One tracked frame of a human face (OpenFace 2.0 FeatureExtraction)."""

    landmarks: np.ndarray  # (68, 3) mm, camera frame
    aus: np.ndarray        # (17,) intensities in [0, 5]
    pose: Pose
    timestamp: float
    confidence: float


_OPENFACE_AU_COLS = [f"AU{au:02d}_r" for au in AU_IDS]
_OPENFACE_POSE_COLS = ["pose_Tx", "pose_Ty", "pose_Tz", "pose_Rx", "pose_Ry", "pose_Rz"]


def ingest_openface_csv(
    path: str | Path, confidence_threshold: float = 0.8
) -> list[HumanFrame]:
    """Parse an OpenFace 2.0 FeatureExtraction CSV into HumanFrames.

    Requires 3D landmark columns (``X_0..Z_67``), the 17 AU intensity
    columns (``AU01_r..AU45_r``), pose, timestamp and confidence.  Rows
    under the confidence threshold are dropped.  Header names may carry
    OpenFace's leading spaces.
    """
    required = (
        ["timestamp", "confidence"]
        + _OPENFACE_POSE_COLS
        + _LANDMARK_COLS
        + _OPENFACE_AU_COLS
    )
    frames: list[HumanFrame] = []
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            raw_header = next(reader)
        except StopIteration:
            raise OpenFaceFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in raw_header]
        col = {name: i for i, name in enumerate(header)}
        missing = [name for name in required if name not in col]
        if missing:
            raise OpenFaceFormatError(f"{path}: missing required columns {missing}")

        def cell(row: list[str], name: str, line_no: int) -> float:
            try:
                return float(row[col[name]])
            except (ValueError, IndexError):
                raise OpenFaceFormatError(
                    f"{path}:{line_no}: unparsable value for column {name!r}"
                ) from None

        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            confidence = cell(row, "confidence", line_no)
            if confidence < confidence_threshold:
                continue
            xs = [cell(row, f"X_{i}", line_no) for i in range(N_LANDMARKS)]
            ys = [cell(row, f"Y_{i}", line_no) for i in range(N_LANDMARKS)]
            zs = [cell(row, f"Z_{i}", line_no) for i in range(N_LANDMARKS)]
            aus = np.array([cell(row, c, line_no) for c in _OPENFACE_AU_COLS])
            pose = Pose(
                rotation=[cell(row, f"pose_R{ax}", line_no) for ax in "xyz"],
                translation=[cell(row, f"pose_T{ax}", line_no) for ax in "xyz"],
            )
            frames.append(HumanFrame(
                landmarks=np.stack([xs, ys, zs], axis=1),
                aus=np.clip(aus, 0.0, 5.0),
                pose=pose,
                timestamp=cell(row, "timestamp", line_no),
                confidence=confidence,
            ))
    return frames
