# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stencil kernels.

Each function reproduces the corresponding routine in fallback.py element by
element: identical floating-point expression trees, identical accumulation
order.  Built with -ffp-contract=off so results are bit-identical to numpy.
"""

import numpy as np

cimport cython


# -- regularized continuity operator ------------------------------------------

def continuity_apply_2d(double[:, ::1] r, double[:, ::1] wfx, double[:, ::1] wfy,
                        double eps, double ih0, double ih1,
                        double ih20, double ih21, double[:, ::1] out):
    cdef Py_ssize_t n0 = r.shape[0], n1 = r.shape[1], i, j
    cdef double rc, vm, vp, acc, w, wp, wm, rl, rr, fp, fm
    for i in range(n0):
        for j in range(n1):
            rc = r[i, j]
            acc = eps * rc
            vm = r[i - 1, j] if i > 0 else rc
            vp = r[i + 1, j] if i < n0 - 1 else rc
            acc = acc + (-eps) * ((vm - 2.0 * rc + vp) * ih20)
            vm = r[i, j - 1] if j > 0 else rc
            vp = r[i, j + 1] if j < n1 - 1 else rc
            acc = acc + (-eps) * ((vm - 2.0 * rc + vp) * ih21)

            w = wfx[i + 1, j]
            wp = w if w > 0.0 else 0.0
            wm = w if w < 0.0 else 0.0
            rr = r[i + 1, j] if i < n0 - 1 else 0.0
            fp = wp * rc + wm * rr
            w = wfx[i, j]
            wp = w if w > 0.0 else 0.0
            wm = w if w < 0.0 else 0.0
            rl = r[i - 1, j] if i > 0 else 0.0
            fm = wp * rl + wm * rc
            acc = acc + (fp - fm) * ih0

            w = wfy[i, j + 1]
            wp = w if w > 0.0 else 0.0
            wm = w if w < 0.0 else 0.0
            rr = r[i, j + 1] if j < n1 - 1 else 0.0
            fp = wp * rc + wm * rr
            w = wfy[i, j]
            wp = w if w > 0.0 else 0.0
            wm = w if w < 0.0 else 0.0
            rl = r[i, j - 1] if j > 0 else 0.0
            fm = wp * rl + wm * rc
            acc = acc + (fp - fm) * ih1

            out[i, j] = acc


def continuity_apply_3d(double[:, :, ::1] r, double[:, :, ::1] wfx,
                        double[:, :, ::1] wfy, double[:, :, ::1] wfz,
                        double eps, double ih0, double ih1, double ih2,
                        double ih20, double ih21, double ih22,
                        double[:, :, ::1] out):
    cdef Py_ssize_t n0 = r.shape[0], n1 = r.shape[1], n2 = r.shape[2], i, j, k
    cdef double rc, vm, vp, acc, w, wp, wm, rl, rr, fp, fm
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                rc = r[i, j, k]
                acc = eps * rc
                vm = r[i - 1, j, k] if i > 0 else rc
                vp = r[i + 1, j, k] if i < n0 - 1 else rc
                acc = acc + (-eps) * ((vm - 2.0 * rc + vp) * ih20)
                vm = r[i, j - 1, k] if j > 0 else rc
                vp = r[i, j + 1, k] if j < n1 - 1 else rc
                acc = acc + (-eps) * ((vm - 2.0 * rc + vp) * ih21)
                vm = r[i, j, k - 1] if k > 0 else rc
                vp = r[i, j, k + 1] if k < n2 - 1 else rc
                acc = acc + (-eps) * ((vm - 2.0 * rc + vp) * ih22)

                w = wfx[i + 1, j, k]
                wp = w if w > 0.0 else 0.0
                wm = w if w < 0.0 else 0.0
                rr = r[i + 1, j, k] if i < n0 - 1 else 0.0
                fp = wp * rc + wm * rr
                w = wfx[i, j, k]
                wp = w if w > 0.0 else 0.0
                wm = w if w < 0.0 else 0.0
                rl = r[i - 1, j, k] if i > 0 else 0.0
                fm = wp * rl + wm * rc
                acc = acc + (fp - fm) * ih0

                w = wfy[i, j + 1, k]
                wp = w if w > 0.0 else 0.0
                wm = w if w < 0.0 else 0.0
                rr = r[i, j + 1, k] if j < n1 - 1 else 0.0
                fp = wp * rc + wm * rr
                w = wfy[i, j, k]
                wp = w if w > 0.0 else 0.0
                wm = w if w < 0.0 else 0.0
                rl = r[i, j - 1, k] if j > 0 else 0.0
                fm = wp * rl + wm * rc
                acc = acc + (fp - fm) * ih1

                w = wfz[i, j, k + 1]
                wp = w if w > 0.0 else 0.0
                wm = w if w < 0.0 else 0.0
                rr = r[i, j, k + 1] if k < n2 - 1 else 0.0
                fp = wp * rc + wm * rr
                w = wfz[i, j, k]
                wp = w if w > 0.0 else 0.0
                wm = w if w < 0.0 else 0.0
                rl = r[i, j, k - 1] if k > 0 else 0.0
                fm = wp * rl + wm * rc
                acc = acc + (fp - fm) * ih2

                out[i, j, k] = acc


# -- coupled Lame block operator ----------------------------------------------

def lame_apply_2d(double[:, :, :, ::1] u, double[:, ::1] lpm, double[:, ::1] mu,
                  double ih0, double ih1, double ih20, double ih21,
                  double[:, :, :, ::1] out):
    cdef Py_ssize_t n0 = u.shape[2], n1 = u.shape[3], i, j, fi, k
    cdef double vm, vp, vc, d, l, g0, g1, t, qm, qp
    divs_arr = np.empty((2, n0, n1))
    laps_arr = np.empty((2, 2, n0, n1))
    cdef double[:, :, ::1] divs = divs_arr
    cdef double[:, :, :, ::1] laps = laps_arr

    for fi in range(2):
        for i in range(n0):
            for j in range(n1):
                vm = u[fi, 0, i - 1, j] if i > 0 else -u[fi, 0, i, j]
                vp = u[fi, 0, i + 1, j] if i < n0 - 1 else -u[fi, 0, i, j]
                d = (vp - vm) * (0.5 * ih0)
                vm = u[fi, 1, i, j - 1] if j > 0 else -u[fi, 1, i, j]
                vp = u[fi, 1, i, j + 1] if j < n1 - 1 else -u[fi, 1, i, j]
                d = d + (vp - vm) * (0.5 * ih1)
                divs[fi, i, j] = d
        for k in range(2):
            for i in range(n0):
                for j in range(n1):
                    vc = u[fi, k, i, j]
                    vm = u[fi, k, i - 1, j] if i > 0 else -vc
                    vp = u[fi, k, i + 1, j] if i < n0 - 1 else -vc
                    l = -((vm - 2.0 * vc + vp) * ih20)
                    vm = u[fi, k, i, j - 1] if j > 0 else -vc
                    vp = u[fi, k, i, j + 1] if j < n1 - 1 else -vc
                    l = l + -((vm - 2.0 * vc + vp) * ih21)
                    laps[fi, k, i, j] = l

    for fi in range(2):
        for k in range(2):
            for i in range(n0):
                for j in range(n1):
                    if k == 0:
                        qm = divs[0, i - 1, j] if i > 0 else divs[0, i, j]
                        qp = divs[0, i + 1, j] if i < n0 - 1 else divs[0, i, j]
                        g0 = (qm - qp) * (0.5 * ih0)
                        qm = divs[1, i - 1, j] if i > 0 else divs[1, i, j]
                        qp = divs[1, i + 1, j] if i < n0 - 1 else divs[1, i, j]
                        g1 = (qm - qp) * (0.5 * ih0)
                    else:
                        qm = divs[0, i, j - 1] if j > 0 else divs[0, i, j]
                        qp = divs[0, i, j + 1] if j < n1 - 1 else divs[0, i, j]
                        g0 = (qm - qp) * (0.5 * ih1)
                        qm = divs[1, i, j - 1] if j > 0 else divs[1, i, j]
                        qp = divs[1, i, j + 1] if j < n1 - 1 else divs[1, i, j]
                        g1 = (qm - qp) * (0.5 * ih1)
                    t = lpm[fi, 0] * g0
                    t = t + lpm[fi, 1] * g1
                    t = t + mu[fi, 0] * laps[0, k, i, j]
                    t = t + mu[fi, 1] * laps[1, k, i, j]
                    out[fi, k, i, j] = t


def lame_apply_3d(double[:, :, :, :, ::1] u, double[:, ::1] lpm,
                  double[:, ::1] mu, double ih0, double ih1, double ih2,
                  double ih20, double ih21, double ih22,
                  double[:, :, :, :, ::1] out):
    cdef Py_ssize_t n0 = u.shape[2], n1 = u.shape[3], n2 = u.shape[4]
    cdef Py_ssize_t i, j, kk, fi, k
    cdef double vm, vp, vc, d, l, g0, g1, t, qm, qp, ihk
    divs_arr = np.empty((2, n0, n1, n2))
    laps_arr = np.empty((2, 3, n0, n1, n2))
    cdef double[:, :, :, ::1] divs = divs_arr
    cdef double[:, :, :, :, ::1] laps = laps_arr

    for fi in range(2):
        for i in range(n0):
            for j in range(n1):
                for kk in range(n2):
                    vm = u[fi, 0, i - 1, j, kk] if i > 0 else -u[fi, 0, i, j, kk]
                    vp = u[fi, 0, i + 1, j, kk] if i < n0 - 1 else -u[fi, 0, i, j, kk]
                    d = (vp - vm) * (0.5 * ih0)
                    vm = u[fi, 1, i, j - 1, kk] if j > 0 else -u[fi, 1, i, j, kk]
                    vp = u[fi, 1, i, j + 1, kk] if j < n1 - 1 else -u[fi, 1, i, j, kk]
                    d = d + (vp - vm) * (0.5 * ih1)
                    vm = u[fi, 2, i, j, kk - 1] if kk > 0 else -u[fi, 2, i, j, kk]
                    vp = u[fi, 2, i, j, kk + 1] if kk < n2 - 1 else -u[fi, 2, i, j, kk]
                    d = d + (vp - vm) * (0.5 * ih2)
                    divs[fi, i, j, kk] = d
        for k in range(3):
            for i in range(n0):
                for j in range(n1):
                    for kk in range(n2):
                        vc = u[fi, k, i, j, kk]
                        vm = u[fi, k, i - 1, j, kk] if i > 0 else -vc
                        vp = u[fi, k, i + 1, j, kk] if i < n0 - 1 else -vc
                        l = -((vm - 2.0 * vc + vp) * ih20)
                        vm = u[fi, k, i, j - 1, kk] if j > 0 else -vc
                        vp = u[fi, k, i, j + 1, kk] if j < n1 - 1 else -vc
                        l = l + -((vm - 2.0 * vc + vp) * ih21)
                        vm = u[fi, k, i, j, kk - 1] if kk > 0 else -vc
                        vp = u[fi, k, i, j, kk + 1] if kk < n2 - 1 else -vc
                        l = l + -((vm - 2.0 * vc + vp) * ih22)
                        laps[fi, k, i, j, kk] = l

    for fi in range(2):
        for k in range(3):
            ihk = ih0 if k == 0 else (ih1 if k == 1 else ih2)
            for i in range(n0):
                for j in range(n1):
                    for kk in range(n2):
                        if k == 0:
                            qm = divs[0, i - 1, j, kk] if i > 0 else divs[0, i, j, kk]
                            qp = divs[0, i + 1, j, kk] if i < n0 - 1 else divs[0, i, j, kk]
                            g0 = (qm - qp) * (0.5 * ihk)
                            qm = divs[1, i - 1, j, kk] if i > 0 else divs[1, i, j, kk]
                            qp = divs[1, i + 1, j, kk] if i < n0 - 1 else divs[1, i, j, kk]
                            g1 = (qm - qp) * (0.5 * ihk)
                        elif k == 1:
                            qm = divs[0, i, j - 1, kk] if j > 0 else divs[0, i, j, kk]
                            qp = divs[0, i, j + 1, kk] if j < n1 - 1 else divs[0, i, j, kk]
                            g0 = (qm - qp) * (0.5 * ihk)
                            qm = divs[1, i, j - 1, kk] if j > 0 else divs[1, i, j, kk]
                            qp = divs[1, i, j + 1, kk] if j < n1 - 1 else divs[1, i, j, kk]
                            g1 = (qm - qp) * (0.5 * ihk)
                        else:
                            qm = divs[0, i, j, kk - 1] if kk > 0 else divs[0, i, j, kk]
                            qp = divs[0, i, j, kk + 1] if kk < n2 - 1 else divs[0, i, j, kk]
                            g0 = (qm - qp) * (0.5 * ihk)
                            qm = divs[1, i, j, kk - 1] if kk > 0 else divs[1, i, j, kk]
                            qp = divs[1, i, j, kk + 1] if kk < n2 - 1 else divs[1, i, j, kk]
                            g1 = (qm - qp) * (0.5 * ihk)
                        t = lpm[fi, 0] * g0
                        t = t + lpm[fi, 1] * g1
                        t = t + mu[fi, 0] * laps[0, k, i, j, kk]
                        t = t + mu[fi, 1] * laps[1, k, i, j, kk]
                        out[fi, k, i, j, kk] = t


# -- Robin-coefficient diffusion operator -------------------------------------

def robin_apply_2d(double[:, ::1] z, double[:, ::1] bfx, double[:, ::1] bfy,
                   double[::1] bc_lo0, double[::1] bc_hi0,
                   double[::1] bc_lo1, double[::1] bc_hi1,
                   double ih20, double ih21, double[:, ::1] out):
    cdef Py_ssize_t n0 = z.shape[0], n1 = z.shape[1], i, j
    cdef double zc, fp, fm, acc
    for i in range(n0):
        for j in range(n1):
            zc = z[i, j]
            fp = bfx[i + 1, j] * ((z[i + 1, j] if i < n0 - 1 else 0.0) - zc)
            fm = bfx[i, j] * (zc - (z[i - 1, j] if i > 0 else 0.0))
            acc = 0.0 - (fp - fm) * ih20
            fp = bfy[i, j + 1] * ((z[i, j + 1] if j < n1 - 1 else 0.0) - zc)
            fm = bfy[i, j] * (zc - (z[i, j - 1] if j > 0 else 0.0))
            acc = acc - (fp - fm) * ih21
            if i == 0:
                acc = acc + bc_lo0[j] * zc
            if i == n0 - 1:
                acc = acc + bc_hi0[j] * zc
            if j == 0:
                acc = acc + bc_lo1[i] * zc
            if j == n1 - 1:
                acc = acc + bc_hi1[i] * zc
            out[i, j] = acc


def robin_apply_3d(double[:, :, ::1] z, double[:, :, ::1] bfx,
                   double[:, :, ::1] bfy, double[:, :, ::1] bfz,
                   double[:, ::1] bc_lo0, double[:, ::1] bc_hi0,
                   double[:, ::1] bc_lo1, double[:, ::1] bc_hi1,
                   double[:, ::1] bc_lo2, double[:, ::1] bc_hi2,
                   double ih20, double ih21, double ih22,
                   double[:, :, ::1] out):
    cdef Py_ssize_t n0 = z.shape[0], n1 = z.shape[1], n2 = z.shape[2], i, j, k
    cdef double zc, fp, fm, acc
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                zc = z[i, j, k]
                fp = bfx[i + 1, j, k] * ((z[i + 1, j, k] if i < n0 - 1 else 0.0) - zc)
                fm = bfx[i, j, k] * (zc - (z[i - 1, j, k] if i > 0 else 0.0))
                acc = 0.0 - (fp - fm) * ih20
                fp = bfy[i, j + 1, k] * ((z[i, j + 1, k] if j < n1 - 1 else 0.0) - zc)
                fm = bfy[i, j, k] * (zc - (z[i, j - 1, k] if j > 0 else 0.0))
                acc = acc - (fp - fm) * ih21
                fp = bfz[i, j, k + 1] * ((z[i, j, k + 1] if k < n2 - 1 else 0.0) - zc)
                fm = bfz[i, j, k] * (zc - (z[i, j, k - 1] if k > 0 else 0.0))
                acc = acc - (fp - fm) * ih22
                if i == 0:
                    acc = acc + bc_lo0[j, k] * zc
                if i == n0 - 1:
                    acc = acc + bc_hi0[j, k] * zc
                if j == 0:
                    acc = acc + bc_lo1[i, k] * zc
                if j == n1 - 1:
                    acc = acc + bc_hi1[i, k] * zc
                if k == 0:
                    acc = acc + bc_lo2[i, j] * zc
                if k == n2 - 1:
                    acc = acc + bc_hi2[i, j] * zc
                out[i, j, k] = acc
