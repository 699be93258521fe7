# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled quantum-jump trajectory loop (waiting-time unraveling).

Arithmetic is spelled out on real and imaginary parts in the same order as
``_kernels_py`` so both backends produce identical records.
"""

import numpy as np


def jump_trajectories(
    double[:, ::1] step_re,
    double[:, ::1] step_im,
    double[:, :, ::1] jump_re,
    double[:, :, ::1] jump_im,
    signed char[::1] record,
    double[::1] psi0_re,
    double[::1] psi0_im,
    double[:, ::1] uniforms,
    Py_ssize_t n_steps,
    double dt,
    Py_ssize_t max_records,
):
    """Propagate every trajectory; return (clicks per trajectory, click times)."""
    cdef Py_ssize_t n_traj = uniforms.shape[0]
    cdef Py_ssize_t n_u = uniforms.shape[1]
    cdef Py_ssize_t d = step_re.shape[0]
    cdef Py_ssize_t m = jump_re.shape[0]
    counts_arr = np.zeros(n_traj, dtype=np.int64)
    times_arr = np.full((n_traj, max_records), np.nan, dtype=np.float64)
    status_arr = np.zeros(n_traj, dtype=np.int8)
    cdef long long[::1] counts = counts_arr
    cdef double[:, ::1] times = times_arr
    cdef signed char[::1] status = status_arr
    cdef double[::1] pr = np.empty(d)
    cdef double[::1] pi = np.empty(d)
    cdef double[::1] qr = np.empty(d)
    cdef double[::1] qi = np.empty(d)
    cdef double[::1] w = np.empty(m)
    cdef Py_ssize_t k, step, a, b, c, ui
    cdef double ar, ai, n2, prev, r, t_prev, t_jump, tot, acc, pick, nrm
    for k in range(n_traj):
        for a in range(d):
            pr[a] = psi0_re[a]
            pi[a] = psi0_im[a]
        ui = 0
        r = uniforms[k, ui]
        ui += 1
        prev = 1.0
        for step in range(n_steps):
            n2 = 0.0
            for a in range(d):
                ar = 0.0
                ai = 0.0
                for b in range(d):
                    ar = ar + (step_re[a, b] * pr[b] - step_im[a, b] * pi[b])
                    ai = ai + (step_re[a, b] * pi[b] + step_im[a, b] * pr[b])
                qr[a] = ar
                qi[a] = ai
                n2 = n2 + (ar * ar + ai * ai)
            if n2 > r:
                for a in range(d):
                    pr[a] = qr[a]
                    pi[a] = qi[a]
                prev = n2
                continue
            # a jump happens inside this step
            t_prev = step * dt
            t_jump = t_prev + dt * (prev - r) / (prev - n2)
            tot = 0.0
            for c in range(m):
                acc = 0.0
                for a in range(d):
                    ar = 0.0
                    ai = 0.0
                    for b in range(d):
                        ar = ar + (jump_re[c, a, b] * qr[b] - jump_im[c, a, b] * qi[b])
                        ai = ai + (jump_re[c, a, b] * qi[b] + jump_im[c, a, b] * qr[b])
                    acc = acc + (ar * ar + ai * ai)
                w[c] = acc
                tot = tot + acc
            if ui + 2 > n_u or tot <= 0.0:
                status[k] = 1
                break
            pick = uniforms[k, ui] * tot
            ui += 1
            c = 0
            acc = w[0]
            while acc <= pick and c < m - 1:
                c += 1
                acc = acc + w[c]
            nrm = 0.0
            for a in range(d):
                ar = 0.0
                ai = 0.0
                for b in range(d):
                    ar = ar + (jump_re[c, a, b] * qr[b] - jump_im[c, a, b] * qi[b])
                    ai = ai + (jump_re[c, a, b] * qi[b] + jump_im[c, a, b] * qr[b])
                pr[a] = ar
                pi[a] = ai
                nrm = nrm + (ar * ar + ai * ai)
            nrm = nrm ** 0.5
            for a in range(d):
                pr[a] = pr[a] / nrm
                pi[a] = pi[a] / nrm
            if record[c]:
                if counts[k] < max_records:
                    times[k, counts[k]] = t_jump
                counts[k] += 1
            r = uniforms[k, ui]
            ui += 1
            prev = 1.0
    return counts_arr, times_arr, status_arr
