"""Pure-Python (numpy) twin of the compiled trajectory loop.

Trajectories advance together; the rare jump steps are handled one by one.
Every sum runs in the same order as the compiled loop, so records match it.
"""

from __future__ import annotations

import numpy as np


def _matvec(mr, mi, pr, pi):
    d = mr.shape[0]
    qr = np.empty_like(pr)
    qi = np.empty_like(pi)
    for a in range(d):
        ar = np.zeros(pr.shape[0])
        ai = np.zeros(pr.shape[0])
        for b in range(d):
            ar = ar + (mr[a, b] * pr[:, b] - mi[a, b] * pi[:, b])
            ai = ai + (mr[a, b] * pi[:, b] + mi[a, b] * pr[:, b])
        qr[:, a] = ar
        qi[:, a] = ai
    return qr, qi


def _apply_one(mr, mi, vr, vi):
    d = mr.shape[0]
    outr = [0.0] * d
    outi = [0.0] * d
    norm2 = 0.0
    for a in range(d):
        ar = 0.0
        ai = 0.0
        for b in range(d):
            ar = ar + (float(mr[a, b]) * vr[b] - float(mi[a, b]) * vi[b])
            ai = ai + (float(mr[a, b]) * vi[b] + float(mi[a, b]) * vr[b])
        outr[a] = ar
        outi[a] = ai
        norm2 = norm2 + (ar * ar + ai * ai)
    return outr, outi, norm2


def jump_trajectories(step_re, step_im, jump_re, jump_im, record, psi0_re, psi0_im, uniforms, n_steps, dt, max_records):
    n_traj, n_u = uniforms.shape
    d = step_re.shape[0]
    m = jump_re.shape[0]
    counts = np.zeros(n_traj, dtype=np.int64)
    times = np.full((n_traj, max_records), np.nan)
    status = np.zeros(n_traj, dtype=np.int8)
    pr = np.tile(np.asarray(psi0_re, dtype=float), (n_traj, 1))
    pi = np.tile(np.asarray(psi0_im, dtype=float), (n_traj, 1))
    ui = np.ones(n_traj, dtype=np.int64)
    r = np.array(uniforms[:, 0], dtype=float)
    prev = np.ones(n_traj)
    live = np.ones(n_traj, dtype=bool)
    for step in range(n_steps):
        idx = np.nonzero(live)[0]
        if idx.size == 0:
            break
        qr, qi = _matvec(step_re, step_im, pr[idx], pi[idx])
        n2 = np.zeros(idx.size)
        for a in range(d):
            n2 = n2 + (qr[:, a] * qr[:, a] + qi[:, a] * qi[:, a])
        keep = n2 > r[idx]
        pr[idx[keep]] = qr[keep]
        pi[idx[keep]] = qi[keep]
        prev[idx[keep]] = n2[keep]
        for pos in np.nonzero(~keep)[0]:
            k = int(idx[pos])
            vr = [float(x) for x in qr[pos]]
            vi = [float(x) for x in qi[pos]]
            t_prev = step * dt
            t_jump = t_prev + dt * (float(prev[k]) - float(r[k])) / (float(prev[k]) - float(n2[pos]))
            w = []
            tot = 0.0
            for c in range(m):
                _, _, acc = _apply_one(jump_re[c], jump_im[c], vr, vi)
                w.append(acc)
                tot = tot + acc
            if ui[k] + 2 > n_u or tot <= 0.0:
                status[k] = 1
                live[k] = False
                continue
            pick = float(uniforms[k, ui[k]]) * tot
            ui[k] += 1
            c = 0
            acc = w[0]
            while acc <= pick and c < m - 1:
                c += 1
                acc = acc + w[c]
            outr, outi, nrm = _apply_one(jump_re[c], jump_im[c], vr, vi)
            nrm = nrm ** 0.5
            pr[k] = [x / nrm for x in outr]
            pi[k] = [x / nrm for x in outi]
            if record[c]:
                if counts[k] < max_records:
                    times[k, counts[k]] = t_jump
                counts[k] += 1
            r[k] = uniforms[k, ui[k]]
            ui[k] += 1
            prev[k] = 1.0
    return counts, times, status
