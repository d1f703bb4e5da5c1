"""3D facial-landmark geometry.

Works on the standard 68-point face layout (jawline 0-16, eyebrows 17-26,
nose 27-35, eyes 36-47, outer lip 48-59, inner lip 60-67), coordinates in
millimetres.  Landmark sets are plain ``(68, 3)`` float arrays.

Euler convention used everywhere (poses, jitter, OpenFace ``pose_R*``
round-trips): intrinsic X-Y-Z, radians, applied as ``R = Rx @ Ry @ Rz``
to column vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentDegenerateError

N_LANDMARKS = 68
N_PAIRS = N_LANDMARKS * (N_LANDMARKS - 1) // 2  # 2278

# Upper-triangle indices in lexicographic (i, j) order, i < j.  This fixes
# the element order of every pairwise-distance vector.
_TRIU = np.triu_indices(N_LANDMARKS, k=1)
PAIR_INDICES = np.stack(_TRIU, axis=1)

# Left/right landmark correspondence under the x -> -x mirror.
_MIRROR_PAIRS = (
    # jawline
    [(i, 16 - i) for i in range(8)]
    # eyebrows
    + [(17 + i, 26 - i) for i in range(5)]
    # nostrils
    + [(31, 35), (32, 34)]
    # eyes
    + [(36, 45), (37, 44), (38, 43), (39, 42), (40, 47), (41, 46)]
    # outer lip
    + [(48, 54), (49, 53), (50, 52), (59, 55), (58, 56)]
    # inner lip
    + [(60, 64), (61, 63), (67, 65)]
)

MIRROR_INDEX = np.arange(N_LANDMARKS)
for _a, _b in _MIRROR_PAIRS:
    MIRROR_INDEX[_a] = _b
    MIRROR_INDEX[_b] = _a


def check_landmarks(points: np.ndarray) -> np.ndarray:
    """Validate and return a (68, 3) float array of finite coordinates."""
    pts = np.asarray(points, dtype=float)
    if pts.shape != (N_LANDMARKS, 3):
        raise ValueError(f"landmark set must have shape (68, 3), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("landmark set contains non-finite coordinates")
    return pts


def mirror_landmarks(points: np.ndarray) -> np.ndarray:
    """Reflect a landmark set about the x=0 plane, swapping left/right ids."""
    pts = check_landmarks(points)
    out = pts[MIRROR_INDEX].copy()
    out[:, 0] *= -1.0
    return out


def center(points: np.ndarray) -> np.ndarray:
    """Translate a point set so its centroid is at the origin."""
    pts = np.asarray(points, dtype=float)
    return pts - pts.mean(axis=0)


def _wrap_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    w = (a + math.pi) % (2.0 * math.pi) - math.pi
    return math.pi if w == -math.pi else w


@dataclass
class Pose:
    """Rigid head pose: intrinsic X-Y-Z Euler angles (rad) + translation (mm)."""

    rotation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        self.rotation = np.array(
            [_wrap_angle(float(a)) for a in np.asarray(self.rotation, dtype=float)]
        )
        self.translation = np.asarray(self.translation, dtype=float).copy()
        if self.rotation.shape != (3,) or self.translation.shape != (3,):
            raise ValueError("pose needs 3 rotation angles and 3 translation values")

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    def matrix(self) -> np.ndarray:
        """Rotation matrix for the intrinsic X-Y-Z angles."""
        ax, ay, az = self.rotation
        cx, sx = math.cos(ax), math.sin(ax)
        cy, sy = math.cos(ay), math.sin(ay)
        cz, sz = math.cos(az), math.sin(az)
        rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
        ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
        rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
        return rx @ ry @ rz


def apply_pose(points: np.ndarray, pose: Pose) -> np.ndarray:
    """Rotate then translate a landmark set (face frame -> camera frame)."""
    r = pose.matrix()
    return np.asarray(points, dtype=float) @ r.T + pose.translation


def derotate(points: np.ndarray, pose: Pose) -> np.ndarray:
    """Undo a pose and centre the result at the centroid origin.

    Inverse of :func:`apply_pose` up to the centring: the returned set is
    the camera-frame input expressed in the face frame with centroid 0.
    """
    r = pose.matrix()
    face = (np.asarray(points, dtype=float) - pose.translation) @ r
    return center(face)


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    """All 2278 unordered inter-landmark Euclidean distances.

    Element order is lexicographic by (i, j) with i < j, matching
    ``PAIR_INDICES``.  Invariant under any rigid transform of the input.
    """
    pts = np.asarray(points, dtype=float)
    diff = pts[_TRIU[0]] - pts[_TRIU[1]]
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def pair_index(i: int, j: int) -> int:
    """Flat index of pair (i, j) within a pairwise-distance vector."""
    if i == j:
        raise ValueError("pair needs two distinct landmark indices")
    if i > j:
        i, j = j, i
    if not 0 <= i < j < N_LANDMARKS:
        raise ValueError(f"landmark indices out of range: ({i}, {j})")
    # offset of row i in the upper triangle, then column offset
    return i * (2 * N_LANDMARKS - i - 1) // 2 + (j - i - 1)


def procrustes_align(
    source: np.ndarray, reference: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Rotate ``source`` onto ``reference`` minimising the Frobenius misfit.

    Both sets are centred internally; no scaling is applied.  Returns the
    aligned (centred, rotated) source and the proper rotation matrix R
    (det +1, reflections corrected) with ``aligned[i] = R @ centred_source[i]``.

    Raises AlignmentDegenerateError when the source spans fewer than two
    dimensions, which leaves the rotation underdetermined.
    """
    src = center(np.asarray(source, dtype=float))
    ref = center(np.asarray(reference, dtype=float))
    if src.shape != ref.shape:
        raise ValueError("source and reference must have the same shape")

    spread = np.linalg.svd(src, compute_uv=False)
    if spread[0] <= 0.0 or spread[1] <= 1e-9 * spread[0]:
        raise AlignmentDegenerateError(
            "source landmarks are rank-deficient; rotation is underdetermined"
        )

    h = src.T @ ref
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return src @ rot.T, rot
