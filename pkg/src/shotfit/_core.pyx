# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend: FK with Jacobians and trilinear grid sampling.

Mirrors shotfit._core_py; the fallback is authoritative for semantics and
both are cross-checked in the test suite.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, exp, floor, sin, sqrt

cnp.import_array()

BACKEND = "native"


cdef inline void _rot_coeffs(double theta2, double* A, double* B,
                             double* C1, double* C2) noexcept nogil:
    cdef double theta
    if theta2 < 1e-8:
        A[0] = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0
        B[0] = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0
        C1[0] = -1.0 / 3.0 + theta2 / 30.0
        C2[0] = -1.0 / 12.0 + theta2 / 180.0
    else:
        theta = sqrt(theta2)
        A[0] = sin(theta) / theta
        B[0] = (1.0 - cos(theta)) / theta2
        C1[0] = (theta * cos(theta) - sin(theta)) / (theta2 * theta)
        C2[0] = (theta * sin(theta) - 2.0 * (1.0 - cos(theta))) / (theta2 * theta2)


cdef inline void _rotation(const double* om, double* R) noexcept nogil:
    """R = I + A [om]x + B [om]x^2."""
    cdef double theta2 = om[0] * om[0] + om[1] * om[1] + om[2] * om[2]
    cdef double A, B, C1, C2
    cdef double x = om[0], y = om[1], z = om[2]
    _rot_coeffs(theta2, &A, &B, &C1, &C2)
    R[0] = 1.0 + B * (-y * y - z * z)
    R[1] = -A * z + B * x * y
    R[2] = A * y + B * x * z
    R[3] = A * z + B * x * y
    R[4] = 1.0 + B * (-x * x - z * z)
    R[5] = -A * x + B * y * z
    R[6] = -A * y + B * x * z
    R[7] = A * x + B * y * z
    R[8] = 1.0 + B * (-x * x - y * y)


cdef void _rotation_deriv(const double* om, double* R, double* dR) noexcept nogil:
    """dR[i] = C1 om_i W + A E_i + C2 om_i W^2 + B (E_i W + W E_i)."""
    cdef double theta2 = om[0] * om[0] + om[1] * om[1] + om[2] * om[2]
    cdef double A, B, C1, C2
    cdef double W[9]
    cdef double W2[9]
    cdef double E[9]
    cdef double EW[9]
    cdef int i, a, b, k
    cdef double x = om[0], y = om[1], z = om[2]
    _rot_coeffs(theta2, &A, &B, &C1, &C2)
    W[0] = 0.0; W[1] = -z;  W[2] = y
    W[3] = z;   W[4] = 0.0; W[5] = -x
    W[6] = -y;  W[7] = x;   W[8] = 0.0
    for a in range(3):
        for b in range(3):
            W2[3 * a + b] = 0.0
            for k in range(3):
                W2[3 * a + b] += W[3 * a + k] * W[3 * k + b]
    for a in range(9):
        R[a] = A * W[a] + B * W2[a]
    R[0] += 1.0; R[4] += 1.0; R[8] += 1.0
    for i in range(3):
        for a in range(9):
            E[a] = 0.0
        if i == 0:
            E[5] = -1.0; E[7] = 1.0
        elif i == 1:
            E[2] = 1.0; E[6] = -1.0
        else:
            E[1] = -1.0; E[3] = 1.0
        for a in range(3):
            for b in range(3):
                EW[3 * a + b] = 0.0
                for k in range(3):
                    EW[3 * a + b] += E[3 * a + k] * W[3 * k + b] + W[3 * a + k] * E[3 * k + b]
        for a in range(9):
            dR[9 * i + a] = C1 * om[i] * W[a] + A * E[a] + C2 * om[i] * W2[a] + B * EW[a]


def rotations(omegas):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] om = np.ascontiguousarray(
        np.asarray(omegas, dtype=np.float64).reshape(-1, 3))
    cdef Py_ssize_t m = om.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=3] R = np.empty((m, 3, 3))
    for i in range(m):
        _rotation(&om[i, 0], &R[i, 0, 0])
    return R


def rotation_derivs(omegas):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] om = np.ascontiguousarray(
        np.asarray(omegas, dtype=np.float64).reshape(-1, 3))
    cdef Py_ssize_t m = om.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=3] R = np.empty((m, 3, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=4] dR = np.empty((m, 3, 3, 3))
    for i in range(m):
        _rotation_deriv(&om[i, 0], &R[i, 0, 0], &dR[i, 0, 0, 0])
    return R, dR


def bone_scales(shape, region):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sh = np.asarray(
        shape, dtype=np.float64).reshape(4)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] reg = np.ascontiguousarray(
        region, dtype=np.int64)
    cdef Py_ssize_t J = reg.shape[0], j
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scale = np.ones(J)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dscale = np.zeros((J, 4))
    cdef double s = sh[0]
    cdef double f
    cdef long r
    for j in range(J):
        r = reg[j]
        if r < 0:
            continue
        f = exp(sh[1 + r])
        scale[j] = s * f
        dscale[j, 0] = f
        dscale[j, 1 + r] = scale[j]
    return scale, dscale


def fk(pose, shape, trans, parents, art_slot, offsets, region,
       extra_bones=None, extra_locals=None, bint want_jac=False):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pose_ = np.ascontiguousarray(
        np.asarray(pose, dtype=np.float64))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] shape_ = np.asarray(
        shape, dtype=np.float64).reshape(4)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] trans_ = np.asarray(
        trans, dtype=np.float64).reshape(3)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] parents_ = np.ascontiguousarray(
        parents, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] slot_ = np.ascontiguousarray(
        art_slot, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] offsets_ = np.ascontiguousarray(
        offsets, dtype=np.float64)

    cdef Py_ssize_t J = parents_.shape[0]
    cdef Py_ssize_t n_art = pose_.shape[0]
    cdef Py_ssize_t n_pose = 3 * n_art
    cdef Py_ssize_t n_par = n_pose + 7

    scale_arr, dscale_arr = bone_scales(shape_, region)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scale = scale_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dscale = dscale_arr

    cdef cnp.ndarray[cnp.float64_t, ndim=3] R_art = np.empty((n_art, 3, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=4] dR_art = np.empty((n_art, 3, 3, 3))
    cdef Py_ssize_t i, j, k, a, b, c, slot, par
    for i in range(n_art):
        if want_jac:
            _rotation_deriv(&pose_[i, 0], &R_art[i, 0, 0], &dR_art[i, 0, 0, 0])
        else:
            _rotation(&pose_[i, 0], &R_art[i, 0, 0])

    cdef cnp.ndarray[cnp.float64_t, ndim=3] G = np.empty((J, 3, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p = np.empty((J, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=4] dG
    cdef cnp.ndarray[cnp.float64_t, ndim=3] dp
    if want_jac:
        dG = np.zeros((J, n_pose, 3, 3))
        dp = np.zeros((J, n_par, 3))
    else:
        dG = np.zeros((1, 1, 3, 3))
        dp = np.zeros((1, 1, 3))

    cdef double cj[3]
    cdef double base[3]
    cdef double tmp
    cdef double* Rj
    cdef double ident[9]
    ident[0] = 1.0; ident[1] = 0.0; ident[2] = 0.0
    ident[3] = 0.0; ident[4] = 1.0; ident[5] = 0.0
    ident[6] = 0.0; ident[7] = 0.0; ident[8] = 1.0

    for j in range(J):
        slot = slot_[j]
        par = parents_[j]
        if slot >= 0:
            Rj = &R_art[slot, 0, 0]
        else:
            Rj = &ident[0]
        if par < 0:
            for a in range(3):
                p[j, a] = trans_[a]
                for b in range(3):
                    G[j, a, b] = Rj[3 * a + b]
            if want_jac:
                if slot >= 0:
                    for i in range(3):
                        for a in range(3):
                            for b in range(3):
                                dG[j, 3 * slot + i, a, b] = dR_art[slot, i, a, b]
                for a in range(3):
                    dp[j, n_pose + 4 + a, a] = 1.0
        else:
            for a in range(3):
                cj[a] = scale[j] * offsets_[j, a]
            for a in range(3):
                tmp = 0.0
                for b in range(3):
                    tmp += G[par, a, b] * cj[b]
                p[j, a] = p[par, a] + tmp
                for b in range(3):
                    tmp = 0.0
                    for c in range(3):
                        tmp += G[par, a, c] * Rj[3 * c + b]
                    G[j, a, b] = tmp
            if want_jac:
                # dG[j] = dG[par] @ Rj (+ G[par] @ dRj on own slots)
                for k in range(n_pose):
                    for a in range(3):
                        for b in range(3):
                            tmp = 0.0
                            for c in range(3):
                                tmp += dG[par, k, a, c] * Rj[3 * c + b]
                            dG[j, k, a, b] = tmp
                if slot >= 0:
                    for i in range(3):
                        for a in range(3):
                            for b in range(3):
                                tmp = 0.0
                                for c in range(3):
                                    tmp += G[par, a, c] * dR_art[slot, i, c, b]
                                dG[j, 3 * slot + i, a, b] += tmp
                # dp[j] = dp[par] + dG[par] @ cj (pose) + G[par] d c (shape)
                for k in range(n_par):
                    for a in range(3):
                        dp[j, k, a] = dp[par, k, a]
                for k in range(n_pose):
                    for a in range(3):
                        tmp = 0.0
                        for b in range(3):
                            tmp += dG[par, k, a, b] * cj[b]
                        dp[j, k, a] += tmp
                for a in range(3):
                    tmp = 0.0
                    for b in range(3):
                        tmp += G[par, a, b] * offsets_[j, b]
                    base[a] = tmp
                for k in range(4):
                    for a in range(3):
                        dp[j, n_pose + k, a] += dscale[j, k] * base[a]

    out = {"joints": p, "rotations": G}
    if want_jac:
        out["jac_joints"] = np.ascontiguousarray(np.transpose(dp, (0, 2, 1)))

    cdef cnp.ndarray[cnp.int64_t, ndim=1] eb
    cdef cnp.ndarray[cnp.float64_t, ndim=2] el
    cdef cnp.ndarray[cnp.float64_t, ndim=2] extras
    cdef cnp.ndarray[cnp.float64_t, ndim=3] dpe
    cdef Py_ssize_t P, q, f, bone
    if extra_bones is not None and len(extra_bones):
        eb = np.ascontiguousarray(extra_bones, dtype=np.int64)
        el = np.ascontiguousarray(extra_locals, dtype=np.float64)
        P = eb.shape[0]
        extras = np.empty((P, 3))
        if want_jac:
            dpe = np.zeros((P, n_par, 3))
        for q in range(P):
            bone = eb[q]
            f = parents_[bone]
            for a in range(3):
                cj[a] = scale[bone] * el[q, a]
            for a in range(3):
                tmp = 0.0
                for b in range(3):
                    tmp += G[f, a, b] * cj[b]
                extras[q, a] = p[f, a] + tmp
            if want_jac:
                for k in range(n_par):
                    for a in range(3):
                        dpe[q, k, a] = dp[f, k, a]
                for k in range(n_pose):
                    for a in range(3):
                        tmp = 0.0
                        for b in range(3):
                            tmp += dG[f, k, a, b] * cj[b]
                        dpe[q, k, a] += tmp
                for a in range(3):
                    tmp = 0.0
                    for b in range(3):
                        tmp += G[f, a, b] * el[q, b]
                    base[a] = tmp
                for k in range(4):
                    for a in range(3):
                        dpe[q, n_pose + k, a] += dscale[bone, k] * base[a]
        out["extras"] = extras
        if want_jac:
            out["jac_extras"] = np.ascontiguousarray(np.transpose(dpe, (0, 2, 1)))
    return out


def grid_sample(values, dims, origin, voxel_size, queries, bint want_grad=False):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vals_in = np.ascontiguousarray(
        values, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] org = np.asarray(
        origin, dtype=np.float64).reshape(3)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] q = np.ascontiguousarray(
        np.asarray(queries, dtype=np.float64).reshape(-1, 3))
    cdef Py_ssize_t nx = dims[0], ny = dims[1], nz = dims[2]
    cdef Py_ssize_t n = q.shape[0], idx
    cdef double vs = voxel_size
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] grads
    if want_grad:
        grads = np.zeros((n, 3))
    else:
        grads = np.zeros((1, 3))
    cdef double gx, gy, gz, fx, fy, fz
    cdef Py_ssize_t i0, j0, k0
    cdef double c000, c100, c010, c110, c001, c101, c011, c111
    cdef double c00, c10, c01, c11, c0, c1, dx0, dx1, dy0, dy1
    for idx in range(n):
        gx = (q[idx, 0] - org[0]) / vs
        gy = (q[idx, 1] - org[1]) / vs
        gz = (q[idx, 2] - org[2]) / vs
        if gx < 0 or gx > nx - 1 or gy < 0 or gy > ny - 1 or gz < 0 or gz > nz - 1:
            continue
        i0 = <Py_ssize_t>floor(gx)
        j0 = <Py_ssize_t>floor(gy)
        k0 = <Py_ssize_t>floor(gz)
        if i0 > nx - 2: i0 = nx - 2
        if j0 > ny - 2: j0 = ny - 2
        if k0 > nz - 2: k0 = nz - 2
        fx = gx - i0
        fy = gy - j0
        fz = gz - k0
        c000 = vals_in[i0 + nx * (j0 + ny * k0)]
        c100 = vals_in[i0 + 1 + nx * (j0 + ny * k0)]
        c010 = vals_in[i0 + nx * (j0 + 1 + ny * k0)]
        c110 = vals_in[i0 + 1 + nx * (j0 + 1 + ny * k0)]
        c001 = vals_in[i0 + nx * (j0 + ny * (k0 + 1))]
        c101 = vals_in[i0 + 1 + nx * (j0 + ny * (k0 + 1))]
        c011 = vals_in[i0 + nx * (j0 + 1 + ny * (k0 + 1))]
        c111 = vals_in[i0 + 1 + nx * (j0 + 1 + ny * (k0 + 1))]
        c00 = c000 + fx * (c100 - c000)
        c10 = c010 + fx * (c110 - c010)
        c01 = c001 + fx * (c101 - c001)
        c11 = c011 + fx * (c111 - c011)
        c0 = c00 + fy * (c10 - c00)
        c1 = c01 + fy * (c11 - c01)
        out[idx] = c0 + fz * (c1 - c0)
        if want_grad:
            dx0 = (c100 - c000) + fy * ((c110 - c010) - (c100 - c000))
            dx1 = (c101 - c001) + fy * ((c111 - c011) - (c101 - c001))
            grads[idx, 0] = (dx0 + fz * (dx1 - dx0)) / vs
            dy0 = c10 - c00
            dy1 = c11 - c01
            grads[idx, 1] = (dy0 + fz * (dy1 - dy0)) / vs
            grads[idx, 2] = (c1 - c0) / vs
    if want_grad:
        return out, grads
    return out, None
