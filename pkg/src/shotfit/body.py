"""Simplified parametric articulated body.

A 17-joint tree skeleton with per-joint axis-angle rotations on the 12
articulated joints, a 4-dimensional shape space (global scale plus regional
log-scale offsets for torso, arms and legs) and capsule surface samples for
the scene-structure penalty. The canonical template is 1.70 m tall and is
expressed in the camera-frame convention (x right, y down, z forward), so
an identity root pose stands a person upright in an upright camera's view.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

JOINT_NAMES = (
    "pelvis",
    "spine",
    "neck",
    "head",
    "nose",
    "l_shoulder",
    "r_shoulder",
    "l_elbow",
    "r_elbow",
    "l_wrist",
    "r_wrist",
    "l_hip",
    "r_hip",
    "l_knee",
    "r_knee",
    "l_ankle",
    "r_ankle",
)

NUM_JOINTS = 17

_PARENTS = (-1, 0, 1, 2, 3, 2, 2, 5, 6, 7, 8, 0, 0, 11, 12, 13, 14)

# Template joint positions, meters, relative to pelvis. y points down, so
# the head sits at negative y; vertical span (ankle to head) is 1.70.
_TEMPLATE = {
    "pelvis": (0.0, 0.0, 0.0),
    "spine": (0.0, -0.28, 0.0),
    "neck": (0.0, -0.55, 0.0),
    "head": (0.0, -0.75, 0.0),
    "nose": (0.0, -0.70, 0.11),
    "l_shoulder": (0.18, -0.52, 0.0),
    "r_shoulder": (-0.18, -0.52, 0.0),
    "l_elbow": (0.45, -0.52, 0.0),
    "r_elbow": (-0.45, -0.52, 0.0),
    "l_wrist": (0.70, -0.52, 0.0),
    "r_wrist": (-0.70, -0.52, 0.0),
    "l_hip": (0.09, 0.05, 0.0),
    "r_hip": (-0.09, 0.05, 0.0),
    "l_knee": (0.09, 0.50, 0.0),
    "r_knee": (-0.09, 0.50, 0.0),
    "l_ankle": (0.09, 0.95, 0.0),
    "r_ankle": (-0.09, 0.95, 0.0),
}

# Shape regions per bone (bone = segment ending at the joint): torso 0,
# arms 1, legs 2. The root has no bone.
_REGION = (-1, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 0, 0, 2, 2, 2, 2)

# Capsule radii per bone at unit scale, meters.
_RADII = {
    "spine": 0.12,
    "neck": 0.12,
    "head": 0.09,
    "nose": 0.09,
    "l_shoulder": 0.12,
    "r_shoulder": 0.12,
    "l_elbow": 0.07,
    "r_elbow": 0.07,
    "l_wrist": 0.07,
    "r_wrist": 0.07,
    "l_hip": 0.12,
    "r_hip": 0.12,
    "l_knee": 0.07,
    "r_knee": 0.07,
    "l_ankle": 0.07,
    "r_ankle": 0.07,
}

# Joint-limit hinges: (joint name, axis-angle component, flexion sign).
# Positive flexion bends the knee back / the elbow forward.
_HINGES = (
    ("l_knee", 0, -1.0),
    ("r_knee", 0, -1.0),
    ("l_elbow", 1, -1.0),
    ("r_elbow", 1, 1.0),
)

_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True)
class Skeleton:
    """Kinematic tree, canonical bone offsets and capsule radii."""

    joint_names: tuple[str, ...] = JOINT_NAMES
    parents: np.ndarray = None
    offsets: np.ndarray = None
    region: np.ndarray = None
    capsule_radii: np.ndarray = None
    hinges: tuple = _HINGES
    art_slot: np.ndarray = field(default=None, repr=False)
    articulated: tuple[int, ...] = field(default=None, repr=False)

    def __post_init__(self):
        if self.parents is None:
            object.__setattr__(self, "parents", np.array(_PARENTS, dtype=np.int64))
        template = np.array([_TEMPLATE[n] for n in self.joint_names])
        if self.offsets is None:
            offsets = np.zeros((len(self.joint_names), 3))
            for j, par in enumerate(self.parents):
                if par >= 0:
                    offsets[j] = template[j] - template[par]
            object.__setattr__(self, "offsets", offsets)
        if self.region is None:
            object.__setattr__(self, "region", np.array(_REGION, dtype=np.int64))
        if self.capsule_radii is None:
            radii = np.array([_RADII.get(n, 0.07) for n in self.joint_names])
            radii[0] = 0.0
            object.__setattr__(self, "capsule_radii", radii)
        nj = len(self.joint_names)
        if np.any(self.parents[1:] <= -1) or np.any(self.parents >= np.arange(nj)):
            raise ValueError("parents must form a tree with parents[j] < j")
        has_child = np.zeros(nj, dtype=bool)
        for par in self.parents[1:]:
            has_child[par] = True
        art = tuple(int(j) for j in range(nj) if has_child[j] or j == 0)
        slot = -np.ones(nj, dtype=np.int64)
        for i, j in enumerate(art):
            slot[j] = i
        object.__setattr__(self, "articulated", art)
        object.__setattr__(self, "art_slot", slot)

    @property
    def num_joints(self) -> int:
        return len(self.joint_names)

    @property
    def num_articulated(self) -> int:
        return len(self.articulated)

    @property
    def pose_dim(self) -> int:
        return 3 * self.num_articulated

    def index(self, name: str) -> int:
        return self.joint_names.index(name)

    def template_joints(self) -> np.ndarray:
        """Canonical joint positions at rest pose, unit shape, zero root."""
        pos = np.zeros((self.num_joints, 3))
        for j, par in enumerate(self.parents):
            if par >= 0:
                pos[j] = pos[par] + self.offsets[j]
        return pos

    def template_height(self) -> float:
        pos = self.template_joints()
        return float(pos[:, 1].max() - pos[:, 1].min())

    def hinge_table(self) -> list[tuple[int, int, float]]:
        """(pose slot, axis, sign) per hinge joint."""
        out = []
        for name, axis, sign in self.hinges:
            slot = int(self.art_slot[self.index(name)])
            if slot < 0:
                raise ValueError(f"hinge joint {name} is not articulated")
            out.append((slot, axis, sign))
        return out

    @staticmethod
    def from_json(path) -> "Skeleton":
        """Load topology / capsule overrides; unset fields keep defaults."""
        data = json.loads(open(path).read())
        names = tuple(data.get("joint_names", JOINT_NAMES))
        kwargs = {"joint_names": names}
        if "parents" in data:
            kwargs["parents"] = np.array(data["parents"], dtype=np.int64)
        if "offsets" in data:
            kwargs["offsets"] = np.array([data["offsets"][n] for n in names])
        if "region" in data:
            kwargs["region"] = np.array(data["region"], dtype=np.int64)
        if "capsule_radii" in data:
            radii = np.array(
                [data["capsule_radii"].get(n, _RADII.get(n, 0.07)) for n in names]
            )
            radii[0] = 0.0
            kwargs["capsule_radii"] = radii
        if "hinges" in data:
            kwargs["hinges"] = tuple(
                (h["joint"], int(h["axis"]), float(h["sign"])) for h in data["hinges"]
            )
        return Skeleton(**kwargs)


DEFAULT_SKELETON = Skeleton()

SCALE_MIN = 0.5
SCALE_MAX = 1.5


@dataclass(frozen=True)
class BodyParams:
    """Pose, shape and camera-frame root translation of one person.

    pose: (num_articulated, 3) axis-angle; shape: (4,) global scale plus
    log-scale offsets for torso/arms/legs; root_translation_cam: (3,).
    """

    pose: np.ndarray
    shape: np.ndarray
    root_translation_cam: np.ndarray

    def __post_init__(self):
        pose = np.asarray(self.pose, dtype=float)
        shape = np.asarray(self.shape, dtype=float).reshape(4)
        trans = np.asarray(self.root_translation_cam, dtype=float).reshape(3)
        object.__setattr__(self, "pose", pose)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "root_translation_cam", trans)
        if pose.ndim != 2 or pose.shape[1] != 3:
            raise ValueError("pose must be (num_articulated, 3)")
        if not (SCALE_MIN <= shape[0] <= SCALE_MAX):
            raise ValueError(f"global scale {shape[0]} outside [{SCALE_MIN}, {SCALE_MAX}]")
        mags = np.linalg.norm(pose, axis=1)
        if np.any(mags > math.pi + 1e-9):
            raise ValueError("axis-angle magnitude exceeds pi")

    @staticmethod
    def rest(skeleton: Skeleton = DEFAULT_SKELETON, translation=(0.0, 0.0, 0.0)) -> "BodyParams":
        return BodyParams(
            pose=np.zeros((skeleton.num_articulated, 3)),
            shape=np.array([1.0, 0.0, 0.0, 0.0]),
            root_translation_cam=np.asarray(translation, dtype=float),
        )


@dataclass(frozen=True)
class SurfaceSamples:
    """Deterministic capsule-surface points; camera or world frame per use."""

    points: np.ndarray
    bones: np.ndarray  # bone (end-joint) index per sample


def _capsule_local_table(skeleton: Skeleton, samples_per_bone: int):
    """Unit-scale local sample coordinates per bone, in the parent frame.

    Sample k of a bone sits at fraction (k + 0.5) / S along the bone and is
    pushed out by the capsule radius along a direction perpendicular to the
    bone, azimuths stepped by the golden angle. Deterministic by build.
    """
    bones = []
    locals_ = []
    for j in range(1, skeleton.num_joints):
        b = skeleton.offsets[j]
        radius = skeleton.capsule_radii[j]
        bhat = b / np.linalg.norm(b)
        axis = int(np.argmin(np.abs(bhat)))
        e1 = np.cross(bhat, np.eye(3)[axis])
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(bhat, e1)
        for k in range(samples_per_bone):
            f = (k + 0.5) / samples_per_bone
            phi = k * _GOLDEN_ANGLE
            normal = math.cos(phi) * e1 + math.sin(phi) * e2
            locals_.append(f * b + radius * normal)
            bones.append(j)
    return np.array(bones, dtype=np.int64), np.array(locals_)


_LOCAL_TABLE_CACHE: dict = {}


def capsule_local_table(skeleton: Skeleton, samples_per_bone: int):
    key = (
        samples_per_bone,
        skeleton.parents.tobytes(),
        skeleton.offsets.tobytes(),
        skeleton.capsule_radii.tobytes(),
    )
    if key not in _LOCAL_TABLE_CACHE:
        _LOCAL_TABLE_CACHE[key] = _capsule_local_table(skeleton, samples_per_bone)
    return _LOCAL_TABLE_CACHE[key]


def fk_state(
    params: BodyParams,
    skeleton: Skeleton = DEFAULT_SKELETON,
    samples_per_bone: int = 0,
    want_jac: bool = False,
) -> dict:
    """Full kinematic evaluation used by the fitting residuals.

    Returns the kernel output dict: joints, accumulated rotations, optional
    capsule samples ("extras") and Jacobians with parameter order
    [pose, shape, translation].
    """
    if samples_per_bone > 0:
        extra_bones, extra_locals = capsule_local_table(skeleton, samples_per_bone)
    else:
        extra_bones, extra_locals = None, None
    return kernels.fk(
        params.pose,
        params.shape,
        params.root_translation_cam,
        skeleton.parents,
        skeleton.art_slot,
        skeleton.offsets,
        skeleton.region,
        extra_bones=extra_bones,
        extra_locals=extra_locals,
        want_jac=want_jac,
    )


def forward_kinematics(
    params: BodyParams, skeleton: Skeleton = DEFAULT_SKELETON
) -> np.ndarray:
    """Camera-frame joint positions (num_joints, 3)."""
    return fk_state(params, skeleton)["joints"]


def surface_samples(
    params: BodyParams,
    samples_per_bone: int,
    skeleton: Skeleton = DEFAULT_SKELETON,
) -> SurfaceSamples:
    """Capsule surface points swept along each bone; count = bones x S."""
    if samples_per_bone < 1:
        raise ValueError("samples_per_bone must be >= 1")
    state = fk_state(params, skeleton, samples_per_bone=samples_per_bone)
    bones, _ = capsule_local_table(skeleton, samples_per_bone)
    return SurfaceSamples(points=state["extras"], bones=bones.copy())


def prior_residuals(
    pose_flat: np.ndarray,
    shape: np.ndarray,
    skeleton: Skeleton,
    w_pose: float,
    w_hinge: float,
    w_shape: float,
    hinge_min: float = 0.0,
    hinge_max: float = 2.6,
    want_jac: bool = False,
):
    """Anthropometric prior as stacked residuals (and Jacobian blocks).

    Rows: quadratic pose deviation from rest, two hinge rows per hinge
    joint (hyperextension below hinge_min, flexion beyond hinge_max), then
    shape rows on (s - 1) and the regional offsets. The Jacobian is with
    respect to [pose_flat, shape].
    """
    n_pose = pose_flat.size
    hinges = skeleton.hinge_table()
    n_res = n_pose + 2 * len(hinges) + 4
    r = np.zeros(n_res)
    sw_pose = math.sqrt(w_pose)
    sw_hinge = math.sqrt(w_hinge)
    sw_shape = math.sqrt(w_shape)
    r[:n_pose] = sw_pose * pose_flat
    J = np.zeros((n_res, n_pose + 4)) if want_jac else None
    if want_jac:
        J[:n_pose, :n_pose] = sw_pose * np.eye(n_pose)
    row = n_pose
    for slot, axis, sign in hinges:
        col = 3 * slot + axis
        flex = sign * pose_flat[col]
        if flex < hinge_min:
            r[row] = sw_hinge * (hinge_min - flex)
            if want_jac:
                J[row, col] = -sw_hinge * sign
        if flex > hinge_max:
            r[row + 1] = sw_hinge * (flex - hinge_max)
            if want_jac:
                J[row + 1, col] = sw_hinge * sign
        row += 2
    r[row] = sw_shape * (shape[0] - 1.0)
    r[row + 1 : row + 4] = sw_shape * shape[1:4]
    if want_jac:
        J[row, n_pose] = sw_shape
        J[row + 1 : row + 4, n_pose + 1 : n_pose + 4] = sw_shape * np.eye(3)
    return r, J


def prior_energy(
    params: BodyParams,
    skeleton: Skeleton = DEFAULT_SKELETON,
    w_pose: float = 0.1,
    w_hinge: float = 1.0,
    w_shape: float = 1.0,
    hinge_min: float = 0.0,
    hinge_max: float = 2.6,
) -> float:
    """Weighted anthropometric prior energy; zero at rest pose, unit shape."""
    r, _ = prior_residuals(
        params.pose.ravel(),
        params.shape,
        skeleton,
        w_pose,
        w_hinge,
        w_shape,
        hinge_min,
        hinge_max,
    )
    return float(r @ r)
