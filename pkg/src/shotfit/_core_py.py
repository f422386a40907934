"""Pure-numpy kernel backend.

Mirrors the compiled extension in shotfit._core; selected at import time by
shotfit.kernels when the extension is unavailable (or forced via the
SHOTFIT_PURE_PYTHON environment variable). Both backends must agree to
floating-point noise; tests assert this.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

_EYE3 = np.eye(3)


def _skew(v: np.ndarray) -> np.ndarray:
    out = np.zeros(v.shape[:-1] + (3, 3))
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    out[..., 0, 1] = -z
    out[..., 0, 2] = y
    out[..., 1, 0] = z
    out[..., 1, 2] = -x
    out[..., 2, 0] = -y
    out[..., 2, 1] = x
    return out


def _rot_coeffs(theta2: np.ndarray):
    """Series-guarded Rodrigues coefficients A, B and their scaled
    derivatives C1 = A'/theta, C2 = B'/theta."""
    theta = np.sqrt(theta2)
    small = theta < 1e-4
    with np.errstate(invalid="ignore", divide="ignore"):
        A = np.where(small, 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
                     np.sin(theta) / np.where(small, 1.0, theta))
        B = np.where(small, 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
                     (1.0 - np.cos(theta)) / np.where(small, 1.0, theta2))
        C1 = np.where(
            small,
            -1.0 / 3.0 + theta2 / 30.0,
            (theta * np.cos(theta) - np.sin(theta)) / np.where(small, 1.0, theta2 * theta),
        )
        C2 = np.where(
            small,
            -1.0 / 12.0 + theta2 / 180.0,
            (theta * np.sin(theta) - 2.0 * (1.0 - np.cos(theta)))
            / np.where(small, 1.0, theta2 * theta2),
        )
    return A, B, C1, C2


def rotations(omegas: np.ndarray) -> np.ndarray:
    """Axis-angle vectors (m, 3) to rotation matrices (m, 3, 3)."""
    om = np.asarray(omegas, dtype=float).reshape(-1, 3)
    theta2 = (om * om).sum(axis=1)
    A, B, _, _ = _rot_coeffs(theta2)
    W = _skew(om)
    W2 = W @ W
    return _EYE3[None] + A[:, None, None] * W + B[:, None, None] * W2


def rotation_derivs(omegas: np.ndarray):
    """Rotations plus per-component derivatives dR/d omega_i.

    Returns (R (m,3,3), dR (m,3,3,3)) with dR[m, i] the derivative of R
    with respect to component i of omega.
    """
    om = np.asarray(omegas, dtype=float).reshape(-1, 3)
    m = om.shape[0]
    theta2 = (om * om).sum(axis=1)
    A, B, C1, C2 = _rot_coeffs(theta2)
    W = _skew(om)
    W2 = W @ W
    R = _EYE3[None] + A[:, None, None] * W + B[:, None, None] * W2
    E = _skew(np.eye(3))  # (3,3,3): E[i] = skew(e_i)
    dR = np.empty((m, 3, 3, 3))
    for i in range(3):
        Ei = E[i]
        EiW = Ei @ W + W @ Ei
        dR[:, i] = (
            (C1 * om[:, i])[:, None, None] * W
            + A[:, None, None] * Ei[None]
            + (C2 * om[:, i])[:, None, None] * W2
            + B[:, None, None] * EiW
        )
    return R, dR


def bone_scales(shape: np.ndarray, region: np.ndarray):
    """Per-bone scale factors and their derivatives w.r.t. the 4 shape
    parameters (global scale + 3 regional log offsets).

    Returns (scale (J,), dscale (J, 4)). The root entry (region < 0) gets
    scale 1 and zero derivative; it carries no bone offset.
    """
    s = float(shape[0])
    factors = np.exp(np.asarray(shape[1:4], dtype=float))
    J = region.size
    scale = np.ones(J)
    dscale = np.zeros((J, 4))
    for j in range(J):
        r = region[j]
        if r < 0:
            continue
        scale[j] = s * factors[r]
        dscale[j, 0] = factors[r]
        dscale[j, 1 + r] = scale[j]
    return scale, dscale


def fk(
    pose: np.ndarray,
    shape: np.ndarray,
    trans: np.ndarray,
    parents: np.ndarray,
    art_slot: np.ndarray,
    offsets: np.ndarray,
    region: np.ndarray,
    extra_bones: np.ndarray | None = None,
    extra_locals: np.ndarray | None = None,
    want_jac: bool = False,
):
    """Forward kinematics over a tree skeleton, with optional attached points.

    pose: (n_art, 3) axis-angle per articulated joint; shape: (4,) global
    scale + regional log offsets; trans: (3,) root translation. parents,
    art_slot, offsets, region describe the skeleton (parents[j] < j).
    Attached points (capsule surface samples) are given as unit-scale local
    coordinates in the frame of parents[bone], scaled like the bone.

    Returns a dict with joints (J,3), rotations (J,3,3) accumulated global
    rotations, extras (P,3), and, when want_jac, jac_joints (J,3,n_par) and
    jac_extras (P,3,n_par). Parameter order: pose flat, shape, trans.
    """
    pose = np.asarray(pose, dtype=float)
    shape = np.asarray(shape, dtype=float).reshape(4)
    trans = np.asarray(trans, dtype=float).reshape(3)
    J = parents.size
    n_art = pose.shape[0]
    n_pose = 3 * n_art
    n_par = n_pose + 4 + 3

    scale, dscale = bone_scales(shape, region)
    if want_jac:
        R_art, dR_art = rotation_derivs(pose)
    else:
        R_art = rotations(pose)
        dR_art = None

    G = np.empty((J, 3, 3))
    p = np.empty((J, 3))
    dG = np.zeros((J, n_pose, 3, 3)) if want_jac else None
    dp = np.zeros((J, n_par, 3)) if want_jac else None

    for j in range(J):
        slot = art_slot[j]
        Rj = R_art[slot] if slot >= 0 else _EYE3
        par = parents[j]
        if par < 0:
            G[j] = Rj
            p[j] = trans
            if want_jac:
                if slot >= 0:
                    dG[j, 3 * slot : 3 * slot + 3] = dR_art[slot]
                dp[j, n_pose + 4 :] = _EYE3
        else:
            cj = scale[j] * offsets[j]
            G[j] = G[par] @ Rj
            p[j] = p[par] + G[par] @ cj
            if want_jac:
                dG[j] = dG[par] @ Rj
                if slot >= 0:
                    dG[j, 3 * slot : 3 * slot + 3] += np.einsum(
                        "ab,ibc->iac", G[par], dR_art[slot]
                    )
                dp[j] = dp[par]
                dp[j, :n_pose] += dG[par] @ cj
                base = G[par] @ offsets[j]
                dp[j, n_pose : n_pose + 4] += dscale[j][:, None] * base[None, :]

    out = {"joints": p, "rotations": G}
    if want_jac:
        out["jac_joints"] = np.transpose(dp, (0, 2, 1))

    if extra_bones is not None and extra_bones.size:
        frames = parents[extra_bones]
        locs = extra_locals * scale[extra_bones][:, None]
        out["extras"] = p[frames] + np.einsum("pab,pb->pa", G[frames], locs)
        if want_jac:
            dpe = dp[frames].copy()
            dpe[:, :n_pose] += np.einsum("piab,pb->pia", dG[frames], locs)
            dpe[:, n_pose : n_pose + 4] += np.einsum(
                "pi,pab,pb->pia", dscale[extra_bones], G[frames], extra_locals
            )
            out["jac_extras"] = np.transpose(dpe, (0, 2, 1))
    return out


def grid_sample(
    values: np.ndarray,
    dims: tuple[int, int, int],
    origin: np.ndarray,
    voxel_size: float,
    queries: np.ndarray,
    want_grad: bool = False,
):
    """Trilinear interpolation of a node-centered voxel field.

    values is the flat x-fastest array; dims = (nx, ny, nz). Queries outside
    the axis-aligned node bounds return value 0 (and zero gradient).
    Returns (vals (n,), grads (n,3) or None); the gradient is with respect
    to world coordinates.
    """
    nx, ny, nz = dims
    grid = values.reshape(nz, ny, nx)  # flat index i + nx*(j + ny*k)
    q = (np.asarray(queries, dtype=float).reshape(-1, 3) - origin) / voxel_size
    n = q.shape[0]
    inside = (
        (q[:, 0] >= 0.0) & (q[:, 0] <= nx - 1)
        & (q[:, 1] >= 0.0) & (q[:, 1] <= ny - 1)
        & (q[:, 2] >= 0.0) & (q[:, 2] <= nz - 1)
    )
    vals = np.zeros(n)
    grads = np.zeros((n, 3)) if want_grad else None
    if not inside.any():
        return vals, grads
    qi = q[inside]
    i0 = np.minimum(np.floor(qi[:, 0]).astype(np.int64), nx - 2)
    j0 = np.minimum(np.floor(qi[:, 1]).astype(np.int64), ny - 2)
    k0 = np.minimum(np.floor(qi[:, 2]).astype(np.int64), nz - 2)
    fx = qi[:, 0] - i0
    fy = qi[:, 1] - j0
    fz = qi[:, 2] - k0
    c000 = grid[k0, j0, i0]
    c100 = grid[k0, j0, i0 + 1]
    c010 = grid[k0, j0 + 1, i0]
    c110 = grid[k0, j0 + 1, i0 + 1]
    c001 = grid[k0 + 1, j0, i0]
    c101 = grid[k0 + 1, j0, i0 + 1]
    c011 = grid[k0 + 1, j0 + 1, i0]
    c111 = grid[k0 + 1, j0 + 1, i0 + 1]
    # Interpolate x, then y, then z.
    c00 = c000 + fx * (c100 - c000)
    c10 = c010 + fx * (c110 - c010)
    c01 = c001 + fx * (c101 - c001)
    c11 = c011 + fx * (c111 - c011)
    c0 = c00 + fy * (c10 - c00)
    c1 = c01 + fy * (c11 - c01)
    vals[inside] = c0 + fz * (c1 - c0)
    if want_grad:
        dx0 = (c100 - c000) + fy * ((c110 - c010) - (c100 - c000))
        dx1 = (c101 - c001) + fy * ((c111 - c011) - (c101 - c001))
        gx = dx0 + fz * (dx1 - dx0)
        dy0 = (c10 - c00)
        dy1 = (c11 - c01)
        gy = dy0 + fz * (dy1 - dy0)
        gz = c1 - c0
        g = np.stack([gx, gy, gz], axis=1) / voxel_size
        grads[inside] = g
    return vals, grads
