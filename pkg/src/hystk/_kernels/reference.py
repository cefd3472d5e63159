"""Pure NumPy implementations of the hot kernels.

These are the fallback twins of the compiled extension; both backends must
produce the same results (bit-identical for the relay sweep, which uses the
same scalar formulas in the same order).
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def sweep_classic(rho1, rho2, state0, times, values):
    """Evolve a batch of classic two-state relays through a scalar PL signal.

    Relay j sits at state 0 on (-inf, rho1[j]) and at state 1 on
    (rho2[j], +inf); an upward crossing of rho1[j] in state 0 switches to 1,
    a downward crossing of rho2[j] in state 1 switches to 0.  Crossing times
    are the exact linear-segment roots.

    Returns (event_times, event_member, event_to_state, final_states); events
    are sorted by (time, member).
    """
    rho1 = np.asarray(rho1, dtype=float)
    rho2 = np.asarray(rho2, dtype=float)
    state = np.asarray(state0, dtype=np.int64).copy()
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    m = len(rho1)
    n_seg = len(times) - 1

    ev_t, ev_m, ev_s = [], [], []
    for j in range(m):
        s = int(state[j])
        t_cur = times[0]
        for k in range(n_seg):
            t0 = times[k]
            t1 = times[k + 1]
            v0 = values[k]
            v1 = values[k + 1]
            a = t_cur if t_cur > t0 else t0
            if t1 <= a:
                continue
            d = (v1 - v0) / (t1 - t0)
            pa = (v1 - v0) / (t1 - t0) * (a - t0) + v0
            if s == 0:
                slope = d
                m_a = pa - rho1[j]
            else:
                slope = -d
                m_a = rho2[j] - pa
            if slope <= 0.0:
                continue
            s_star = a if m_a >= 0.0 else a - m_a / slope
            if (a < s_star <= t1) or (s_star == a and s_star > t_cur):
                s = 1 - s
                ev_t.append(s_star)
                ev_m.append(j)
                ev_s.append(s)
                t_cur = s_star
        state[j] = s

    if ev_t:
        order = np.lexsort((np.asarray(ev_m), np.asarray(ev_t)))
        return (np.asarray(ev_t)[order], np.asarray(ev_m, dtype=np.int64)[order],
                np.asarray(ev_s, dtype=np.int64)[order], state)
    return (np.empty(0), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), state)


def rk4_matrix_chain(mats, h, y0):
    """Classical RK4 for the linear matrix system Y' = M(t) Y over fixed steps.

    ``mats`` holds M sampled at t0 + l*h/2 for l = 0..2n (shape (2n+1, d, d));
    step i uses samples 2i, 2i+1, 2i+2.  Impulse times must be chain
    boundaries, never stepped over.
    """
    mats = np.asarray(mats, dtype=float)
    y = np.array(y0, dtype=float, copy=True, order="C")
    n_steps = (mats.shape[0] - 1) // 2
    half = 0.5 * h
    for i in range(n_steps):
        m1 = mats[2 * i]
        m2 = mats[2 * i + 1]
        m3 = mats[2 * i + 2]
        k1 = m1 @ y
        k2 = m2 @ (y + half * k1)
        k3 = m2 @ (y + half * k2)
        k4 = m3 @ (y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y
