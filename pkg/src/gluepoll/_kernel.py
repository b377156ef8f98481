"""Compiled event loop of the simulator.

All arrivals come from one superposed Poisson stream: an exponential gap at
the total rate, then a uniform that picks the station.  Each arrival's
service time is drawn from the service stream when the arrival is created.
The sequence of arrival epochs and labels therefore depends on the arrival
stream alone.

Per-station integrals of M, M^2 and V are advanced lazily, only when
something happens to that station.  Between its own events a station's
count is constant and its workload falls at unit rate only while it is
served, so the integrals are exact.

The loop is a small state machine (before glue, glue, serving) around a
single arrival-admission loop.  The per-customer path makes no calls
with array arguments: each such call costs reference-count traffic per
array, which dominated the runtime of a helper-function version.
"""

from __future__ import annotations

import numpy as np
from numba import njit

KIND_CODES = {"deterministic": 0, "exponential": 1, "gamma": 2}

# within-visit service orders
ORDER_GLUE_EPOCH = 0
ORDER_ARRIVAL = 1
ORDER_REVERSE_EPOCH = 2

# per-batch accumulator rows (second axis is the station)
ACC_M, ACC_M2, ACC_V, ACC_BUSY, ACC_WSUM, ACC_WSQ, ACC_WCOUNT = range(7)
N_ACC = 7

_PRE_GLUE, _GLUE, _SERVE = 0, 1, 2


@njit(cache=True)
def _draw(gen, kind, p1, p2):
    if kind == 0:
        return p1
    if kind == 1:
        return p1 * gen.standard_exponential()
    return p2 * gen.standard_gamma(p1)


@njit(cache=True)
def _advance(j, t, cnt, t_last, acc, work, rem, serving):
    dt = t - t_last[j]
    if dt > 0.0:
        c = float(cnt[j])
        acc[ACC_M, j] += c * dt
        acc[ACC_M2, j] += c * c * dt
        v = work[j] * dt
        if serving[j]:
            v += rem[j] * dt - 0.5 * dt * dt
            rem[j] -= dt
        acc[ACC_V, j] += v
        t_last[j] = t


@njit(cache=True)
def _grow_rows(a):
    out = np.empty((a.shape[0], 2 * a.shape[1]))
    out[:, : a.shape[1]] = a
    return out


@njit(cache=True)
def _grow_orbits(a):
    out = np.empty((a.shape[0], a.shape[1], 2 * a.shape[2]))
    out[:, :, : a.shape[2]] = a
    return out


@njit(cache=True)
def run_kernel(
    lam, nu, svc_kind, svc_p1, svc_p2, sw_kind, sw_p1, sw_p2, gl_kind, gl_p1, gl_p2,
    warmup, batches, cycles_per_batch, order,
    gen_arr, gen_svc, gen_sw, gen_glue, gen_ret,
    glue_trace, visit_trace, cust_trace,
):
    """Simulate and return per-batch accumulators.

    Returns ``(acc, meta, counts)``: ``acc[b, row, station]`` holds the raw
    integrals and sums of batch ``b``; ``meta[b]`` is (duration, cycles);
    ``counts`` is (glue, visit, customer) trace rows written.
    """
    n = lam.shape[0]
    cum = np.cumsum(lam)
    total_rate = cum[n - 1]
    last = n - 1

    cnt = np.zeros(n, dtype=np.int64)
    t_last = np.zeros(n)
    work = np.zeros(n)  # service requirement of customers not yet in service
    rem = np.zeros(n)  # residual service of the customer in service
    serving = np.zeros(n, dtype=np.bool_)
    acc = np.zeros((N_ACC, n))
    out = np.zeros((batches, N_ACC, n))
    meta = np.zeros((batches, 2))

    # orbits[0] arrival epochs, orbits[1] service times
    orbits = np.empty((2, n, 64))
    orb_n = np.zeros(n, dtype=np.int64)
    # glued customers: glue epoch, arrival epoch, service time
    glued = np.empty((3, 64))
    n_glued = 0
    from_orbit = 0
    n_orbit_start = 0

    # pending arrival
    next_t = np.inf
    next_j = 0
    next_b = 0.0
    if total_rate > 0.0:
        next_t = gen_arr.standard_exponential() / total_rate
        u = gen_arr.random() * total_rate
        while next_j < last and cum[next_j] <= u:
            next_j += 1
        next_b = _draw(gen_svc, svc_kind[next_j], svc_p1[next_j], svc_p2[next_j])

    n_glue_tr = 0
    n_visit_tr = 0
    n_cust_tr = 0
    visit_index = 0

    total_cycles = warmup + batches * cycles_per_batch
    cycle = 0
    batch = -1
    batch_start = 0.0
    t = 0.0
    i = 0
    phase = _PRE_GLUE
    lim = 0.0  # admit arrivals strictly before this epoch
    stick = -1  # station whose arrivals stick (in glue), else -1
    g = 0.0
    glue_start = 0.0
    visit_start = 0.0
    k = 0
    b_cur = 0.0
    ar = np.empty(0)
    sv = np.empty(0)
    ep = np.empty(0)

    while True:
        while next_t < lim:
            a = next_t
            j = next_j
            b = next_b
            dt = a - t_last[j]
            if dt > 0.0:
                c = float(cnt[j])
                acc[ACC_M, j] += c * dt
                acc[ACC_M2, j] += c * c * dt
                v = work[j] * dt
                if serving[j]:
                    v += rem[j] * dt - 0.5 * dt * dt
                    rem[j] -= dt
                acc[ACC_V, j] += v
                t_last[j] = a
            cnt[j] += 1
            work[j] += b
            if j == stick:
                if n_glued == glued.shape[1]:
                    glued = _grow_rows(glued)
                glued[0, n_glued] = a
                glued[1, n_glued] = a
                glued[2, n_glued] = b
                n_glued += 1
            else:
                m = orb_n[j]
                if m == orbits.shape[2]:
                    orbits = _grow_orbits(orbits)
                orbits[0, j, m] = a
                orbits[1, j, m] = b
                orb_n[j] = m + 1
            next_t += gen_arr.standard_exponential() / total_rate
            u = gen_arr.random() * total_rate
            next_j = 0
            while next_j < last and cum[next_j] <= u:
                next_j += 1
            next_b = _draw(gen_svc, svc_kind[next_j], svc_p1[next_j], svc_p2[next_j])

        if phase == _PRE_GLUE:
            if i == 0 and cycle == warmup + (batch + 1) * cycles_per_batch:
                for jj in range(n):
                    _advance(jj, t, cnt, t_last, acc, work, rem, serving)
                if batch >= 0:
                    out[batch] = acc
                    meta[batch, 0] = t - batch_start
                    meta[batch, 1] = cycles_per_batch
                acc[:, :] = 0.0
                batch += 1
                batch_start = t
                if cycle == total_cycles:
                    return out, meta, np.array([n_glue_tr, n_visit_tr, n_cust_tr])
            # orbit customers race an exponential retrial clock against g
            glue_start = t
            g = _draw(gen_glue, gl_kind[i], gl_p1[i], gl_p2[i])
            n_orbit_start = orb_n[i]
            while glued.shape[1] < n_orbit_start:
                glued = _grow_rows(glued)
            n_glued = 0
            keep = 0
            rate = nu[i]
            for m in range(n_orbit_start):
                r = gen_ret.standard_exponential() / rate
                if r < g:
                    glued[0, n_glued] = t + r
                    glued[1, n_glued] = orbits[0, i, m]
                    glued[2, n_glued] = orbits[1, i, m]
                    n_glued += 1
                else:
                    orbits[0, i, keep] = orbits[0, i, m]
                    orbits[1, i, keep] = orbits[1, i, m]
                    keep += 1
            orb_n[i] = keep
            from_orbit = n_glued
            phase = _GLUE
            lim = t + g
            stick = i
            continue

        if phase == _GLUE:
            t = lim
            stick = -1
            if n_glue_tr < glue_trace.shape[0]:
                glue_trace[n_glue_tr, 0] = i
                glue_trace[n_glue_tr, 1] = g
                glue_trace[n_glue_tr, 2] = n_orbit_start
                glue_trace[n_glue_tr, 3] = from_orbit
                glue_trace[n_glue_tr, 4] = n_glued - from_orbit
                n_glue_tr += 1
            # the visit serves exactly the glued customers (gated)
            if order == ORDER_ARRIVAL:
                idx = np.argsort(glued[1, :n_glued], kind="mergesort")
            elif order == ORDER_REVERSE_EPOCH:
                idx = np.argsort(glued[0, :n_glued], kind="mergesort")[::-1]
            else:
                idx = np.argsort(glued[0, :n_glued], kind="mergesort")
            ep = glued[0, :n_glued][idx]
            ar = glued[1, :n_glued][idx]
            sv = glued[2, :n_glued][idx]
            visit_start = t
            _advance(i, t, cnt, t_last, acc, work, rem, serving)
            serving[i] = True
            k = 0
            phase = _SERVE
        else:
            # departure of customer k at lim
            dt = lim - t_last[i]
            c = float(cnt[i])
            acc[ACC_M, i] += c * dt
            acc[ACC_M2, i] += c * c * dt
            acc[ACC_V, i] += work[i] * dt + rem[i] * dt - 0.5 * dt * dt
            t_last[i] = lim
            rem[i] = 0.0
            cnt[i] -= 1
            acc[ACC_BUSY, i] += b_cur
            t = lim
            k += 1

        if k < ar.shape[0]:
            w = t - ar[k]
            b_cur = sv[k]
            acc[ACC_WSUM, i] += w
            acc[ACC_WSQ, i] += w * w
            acc[ACC_WCOUNT, i] += 1.0
            if n_cust_tr < cust_trace.shape[0]:
                cust_trace[n_cust_tr, 0] = i
                cust_trace[n_cust_tr, 1] = ar[k]
                cust_trace[n_cust_tr, 2] = t
                cust_trace[n_cust_tr, 3] = ep[k]
                cust_trace[n_cust_tr, 4] = b_cur
                cust_trace[n_cust_tr, 5] = visit_index
                n_cust_tr += 1
            work[i] -= b_cur
            rem[i] = b_cur
            lim = t + b_cur
            continue

        # visit over: switch over to the next station
        serving[i] = False
        if n_visit_tr < visit_trace.shape[0]:
            visit_trace[n_visit_tr, 0] = i
            visit_trace[n_visit_tr, 1] = glue_start
            visit_trace[n_visit_tr, 2] = visit_start
            visit_trace[n_visit_tr, 3] = t
            visit_trace[n_visit_tr, 4] = visit_index
            n_visit_tr += 1
        visit_index += 1
        t += _draw(gen_sw, sw_kind[i], sw_p1[i], sw_p2[i])
        i += 1
        if i == n:
            i = 0
            cycle += 1
        phase = _PRE_GLUE
        lim = t
