"""Compiled stencils for the frozen HJB update (Lax-Friedrichs, upwind, ENO2).

Every node reads only the previous field, so the output does not depend on
how nodes are split across threads.
"""

import math
import os

import numba
import numpy as np
from numba import njit, prange

from .dynamics import hamiltonian_min

if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"


@njit(parallel=True, cache=True)
def lf_step(V, out, ax0, ax1, ax2, ax3, ax4, h, periodic2, consts, alpha, local, dt):
    n0, n1, n2, n3, n4 = V.shape
    tmax_e = max(abs(consts[0]), abs(consts[1]))
    tmax_c = max(abs(consts[4]), abs(consts[5]))
    inv_d = consts[8]
    for i0 in prange(n0):
        x = ax0[i0]
        for i1 in range(n1):
            y = ax1[i1]
            for i2 in range(n2):
                psi = ax2[i2]
                cpsi = math.cos(psi)
                spsi = math.sin(psi)
                for i3 in range(n3):
                    ve = ax3[i3]
                    for i4 in range(n4):
                        vc = ax4[i4]
                        v = np.float64(V[i0, i1, i2, i3, i4])

                        # axis 0
                        if i0 > 0:
                            m = np.float64(V[i0 - 1, i1, i2, i3, i4])
                        else:
                            m = 2.0 * v - np.float64(V[i0 + 1, i1, i2, i3, i4])
                        if i0 < n0 - 1:
                            p = np.float64(V[i0 + 1, i1, i2, i3, i4])
                        else:
                            p = 2.0 * v - np.float64(V[i0 - 1, i1, i2, i3, i4])
                        dm0 = (v - m) / h[0]
                        dp0 = (p - v) / h[0]

                        # axis 1
                        if i1 > 0:
                            m = np.float64(V[i0, i1 - 1, i2, i3, i4])
                        else:
                            m = 2.0 * v - np.float64(V[i0, i1 + 1, i2, i3, i4])
                        if i1 < n1 - 1:
                            p = np.float64(V[i0, i1 + 1, i2, i3, i4])
                        else:
                            p = 2.0 * v - np.float64(V[i0, i1 - 1, i2, i3, i4])
                        dm1 = (v - m) / h[1]
                        dp1 = (p - v) / h[1]

                        # axis 2 (heading)
                        if i2 > 0:
                            m = np.float64(V[i0, i1, i2 - 1, i3, i4])
                        elif periodic2:
                            m = np.float64(V[i0, i1, n2 - 1, i3, i4])
                        else:
                            m = 2.0 * v - np.float64(V[i0, i1, i2 + 1, i3, i4])
                        if i2 < n2 - 1:
                            p = np.float64(V[i0, i1, i2 + 1, i3, i4])
                        elif periodic2:
                            p = np.float64(V[i0, i1, 0, i3, i4])
                        else:
                            p = 2.0 * v - np.float64(V[i0, i1, i2 - 1, i3, i4])
                        dm2 = (v - m) / h[2]
                        dp2 = (p - v) / h[2]

                        # axis 3
                        if i3 > 0:
                            m = np.float64(V[i0, i1, i2, i3 - 1, i4])
                        else:
                            m = 2.0 * v - np.float64(V[i0, i1, i2, i3 + 1, i4])
                        if i3 < n3 - 1:
                            p = np.float64(V[i0, i1, i2, i3 + 1, i4])
                        else:
                            p = 2.0 * v - np.float64(V[i0, i1, i2, i3 - 1, i4])
                        dm3 = (v - m) / h[3]
                        dp3 = (p - v) / h[3]

                        # axis 4
                        if i4 > 0:
                            m = np.float64(V[i0, i1, i2, i3, i4 - 1])
                        else:
                            m = 2.0 * v - np.float64(V[i0, i1, i2, i3, i4 + 1])
                        if i4 < n4 - 1:
                            p = np.float64(V[i0, i1, i2, i3, i4 + 1])
                        else:
                            p = 2.0 * v - np.float64(V[i0, i1, i2, i3, i4 - 1])
                        dm4 = (v - m) / h[4]
                        dp4 = (p - v) / h[4]

                        ham = hamiltonian_min(x, y, psi, ve, vc,
                                              0.5 * (dm0 + dp0), 0.5 * (dm1 + dp1),
                                              0.5 * (dm2 + dp2), 0.5 * (dm3 + dp3),
                                              0.5 * (dm4 + dp4), consts)
                        if local:
                            a0 = abs(vc * cpsi - ve) + abs(y) * ve * tmax_e * inv_d
                            a1 = abs(vc * spsi) + abs(x) * ve * tmax_e * inv_d
                            a2 = (vc * tmax_c + ve * tmax_e) * inv_d
                        else:
                            a0 = alpha[0]
                            a1 = alpha[1]
                            a2 = alpha[2]
                        diss = (a0 * (dp0 - dm0) + a1 * (dp1 - dm1) + a2 * (dp2 - dm2)
                                + alpha[3] * (dp3 - dm3) + alpha[4] * (dp4 - dm4))
                        num_ham = ham + 0.5 * diss
                        if num_ham < 0.0:
                            out[i0, i1, i2, i3, i4] = np.float32(v + dt * num_ham)
                        else:
                            out[i0, i1, i2, i3, i4] = V[i0, i1, i2, i3, i4]


@njit(cache=True, inline="always")
def _upwind(f, dm, dp):
    return f * dp if f > 0.0 else f * dm


@njit(cache=True, inline="always")
def _min_over_interval(a0, a1, dm, dp):
    # g(f) = upwind term is piecewise linear with its only kink at f = 0
    g = min(_upwind(a0, dm, dp), _upwind(a1, dm, dp))
    if a0 < 0.0 < a1:
        g = min(g, 0.0)
    return g


@njit(cache=True)
def upwind_hamiltonian(x, y, cpsi, spsi, ve, vc, dm0, dp0, dm1, dp1, dm2, dp2,
                       dm3, dp3, dm4, dp4, c):
    """Exact min over the control box of sum_i f_i * (upwind difference)_i.

    Every term is convex piecewise linear in one affine function of the
    controls, so the minimum over steering sits at an interval end or at a
    point where some rate crosses zero; those candidates are enumerated.
    """
    te_lo, te_hi = c[0], c[1]
    tc_lo, tc_hi = c[4], c[5]
    k = c[8]
    ae_lo, ae_hi = c[2], c[3]
    ac_lo, ac_hi = c[6], c[7]
    if ve <= c[9]:
        ae_lo, ae_hi = max(ae_lo, 0.0), max(ae_hi, 0.0)
    elif ve >= c[10]:
        ae_lo, ae_hi = min(ae_lo, 0.0), min(ae_hi, 0.0)
    if vc <= c[9]:
        ac_lo, ac_hi = max(ac_lo, 0.0), max(ac_hi, 0.0)
    elif vc >= c[10]:
        ac_lo, ac_hi = min(ac_lo, 0.0), min(ac_hi, 0.0)

    ax = vc * cpsi - ve
    bx = y * ve * k
    ay = vc * spsi
    by = -x * ve * k
    bc = vc * k
    be = ve * k

    # steering candidates: interval ends and the points where a rate changes sign
    cands = (te_lo, te_hi,
             -ax / bx if bx != 0.0 else te_lo,
             -ay / by if by != 0.0 else te_lo,
             bc * tc_lo / be if be != 0.0 else te_lo,
             bc * tc_hi / be if be != 0.0 else te_lo)
    best = np.inf
    for te in cands:
        te = min(max(te, te_lo), te_hi)
        total = _upwind(ax + bx * te, dm0, dp0) + _upwind(ay + by * te, dm1, dp1)
        total += _min_over_interval(bc * tc_lo - be * te, bc * tc_hi - be * te, dm2, dp2)
        best = min(best, total)
    best += _min_over_interval(ae_lo, ae_hi, dm3, dp3)
    best += _min_over_interval(ac_lo, ac_hi, dm4, dp4)
    return best


@njit(parallel=True, cache=True)
def upwind_step(V, out, ax0, ax1, ax2, ax3, ax4, h, periodic2, consts, dt):
    n0, n1, n2, n3, n4 = V.shape
    for i0 in prange(n0):
        x = ax0[i0]
        for i1 in range(n1):
            y = ax1[i1]
            for i2 in range(n2):
                cpsi = math.cos(ax2[i2])
                spsi = math.sin(ax2[i2])
                for i3 in range(n3):
                    ve = ax3[i3]
                    for i4 in range(n4):
                        vc = ax4[i4]
                        v = np.float64(V[i0, i1, i2, i3, i4])

                        # axis 0
                        if i0 > 0:
                            m = np.float64(V[i0 - 1, i1, i2, i3, i4])
                        else:
                            m = 2.0 * v - np.float64(V[i0 + 1, i1, i2, i3, i4])
                        if i0 < n0 - 1:
                            p = np.float64(V[i0 + 1, i1, i2, i3, i4])
                        else:
                            p = 2.0 * v - np.float64(V[i0 - 1, i1, i2, i3, i4])
                        dm0 = (v - m) / h[0]
                        dp0 = (p - v) / h[0]

                        # axis 1
                        if i1 > 0:
                            m = np.float64(V[i0, i1 - 1, i2, i3, i4])
                        else:
                            m = 2.0 * v - np.float64(V[i0, i1 + 1, i2, i3, i4])
                        if i1 < n1 - 1:
                            p = np.float64(V[i0, i1 + 1, i2, i3, i4])
                        else:
                            p = 2.0 * v - np.float64(V[i0, i1 - 1, i2, i3, i4])
                        dm1 = (v - m) / h[1]
                        dp1 = (p - v) / h[1]

                        # axis 2 (heading)
                        if i2 > 0:
                            m = np.float64(V[i0, i1, i2 - 1, i3, i4])
                        elif periodic2:
                            m = np.float64(V[i0, i1, n2 - 1, i3, i4])
                        else:
                            m = 2.0 * v - np.float64(V[i0, i1, i2 + 1, i3, i4])
                        if i2 < n2 - 1:
                            p = np.float64(V[i0, i1, i2 + 1, i3, i4])
                        elif periodic2:
                            p = np.float64(V[i0, i1, 0, i3, i4])
                        else:
                            p = 2.0 * v - np.float64(V[i0, i1, i2 - 1, i3, i4])
                        dm2 = (v - m) / h[2]
                        dp2 = (p - v) / h[2]

                        # axis 3
                        if i3 > 0:
                            m = np.float64(V[i0, i1, i2, i3 - 1, i4])
                        else:
                            m = 2.0 * v - np.float64(V[i0, i1, i2, i3 + 1, i4])
                        if i3 < n3 - 1:
                            p = np.float64(V[i0, i1, i2, i3 + 1, i4])
                        else:
                            p = 2.0 * v - np.float64(V[i0, i1, i2, i3 - 1, i4])
                        dm3 = (v - m) / h[3]
                        dp3 = (p - v) / h[3]

                        # axis 4
                        if i4 > 0:
                            m = np.float64(V[i0, i1, i2, i3, i4 - 1])
                        else:
                            m = 2.0 * v - np.float64(V[i0, i1, i2, i3, i4 + 1])
                        if i4 < n4 - 1:
                            p = np.float64(V[i0, i1, i2, i3, i4 + 1])
                        else:
                            p = 2.0 * v - np.float64(V[i0, i1, i2, i3, i4 - 1])
                        dm4 = (v - m) / h[4]
                        dp4 = (p - v) / h[4]

                        ham = upwind_hamiltonian(x, y, cpsi, spsi, ve, vc, dm0, dp0, dm1, dp1,
                                                 dm2, dp2, dm3, dp3, dm4, dp4, consts)
                        if ham < 0.0:
                            out[i0, i1, i2, i3, i4] = np.float32(v + dt * ham)
                        else:
                            out[i0, i1, i2, i3, i4] = V[i0, i1, i2, i3, i4]


@njit(cache=True, inline="always")
def _at(V, i0, i1, i2, i3, i4, a, j):
    if a == 0:
        return np.float64(V[j, i1, i2, i3, i4])
    if a == 1:
        return np.float64(V[i0, j, i2, i3, i4])
    if a == 2:
        return np.float64(V[i0, i1, j, i3, i4])
    if a == 3:
        return np.float64(V[i0, i1, i2, j, i4])
    return np.float64(V[i0, i1, i2, i3, j])


@njit(cache=True, inline="always")
def _sample(V, i0, i1, i2, i3, i4, a, i, k, n, periodic):
    """Value ``k`` nodes from index ``i`` along axis ``a``; linear extrapolation past edges."""
    j = i + k
    if 0 <= j < n:
        return _at(V, i0, i1, i2, i3, i4, a, j)
    if periodic:
        return _at(V, i0, i1, i2, i3, i4, a, j % n)
    if j < 0:
        v0 = _at(V, i0, i1, i2, i3, i4, a, 0)
        return v0 + j * (_at(V, i0, i1, i2, i3, i4, a, 1) - v0)
    vl = _at(V, i0, i1, i2, i3, i4, a, n - 1)
    return vl + (j - n + 1) * (vl - _at(V, i0, i1, i2, i3, i4, a, n - 2))


@njit(cache=True, inline="always")
def _eno2(V, i0, i1, i2, i3, i4, a, i, n, periodic, h):
    """Second-order ENO one-sided differences (D-, D+) along axis ``a``."""
    vm2 = _sample(V, i0, i1, i2, i3, i4, a, i, -2, n, periodic)
    vm1 = _sample(V, i0, i1, i2, i3, i4, a, i, -1, n, periodic)
    v0 = _sample(V, i0, i1, i2, i3, i4, a, i, 0, n, periodic)
    vp1 = _sample(V, i0, i1, i2, i3, i4, a, i, 1, n, periodic)
    vp2 = _sample(V, i0, i1, i2, i3, i4, a, i, 2, n, periodic)
    c_m = vm2 - 2.0 * vm1 + v0
    c_0 = vm1 - 2.0 * v0 + vp1
    c_p = v0 - 2.0 * vp1 + vp2
    left = c_m if abs(c_m) < abs(c_0) else c_0
    right = c_0 if abs(c_0) < abs(c_p) else c_p
    return (v0 - vm1 + 0.5 * left) / h, (vp1 - v0 - 0.5 * right) / h


@njit(parallel=True, cache=True)
def eno2_rate(V, out, ax0, ax1, ax2, ax3, ax4, h, periodic2, consts):
    """Frozen rate min(0, H) with second-order ENO upwind differences."""
    n0, n1, n2, n3, n4 = V.shape
    for i0 in prange(n0):
        x = ax0[i0]
        for i1 in range(n1):
            y = ax1[i1]
            for i2 in range(n2):
                cpsi = math.cos(ax2[i2])
                spsi = math.sin(ax2[i2])
                for i3 in range(n3):
                    ve = ax3[i3]
                    for i4 in range(n4):
                        vc = ax4[i4]
                        dm0, dp0 = _eno2(V, i0, i1, i2, i3, i4, 0, i0, n0, False, h[0])
                        dm1, dp1 = _eno2(V, i0, i1, i2, i3, i4, 1, i1, n1, False, h[1])
                        dm2, dp2 = _eno2(V, i0, i1, i2, i3, i4, 2, i2, n2, periodic2, h[2])
                        dm3, dp3 = _eno2(V, i0, i1, i2, i3, i4, 3, i3, n3, False, h[3])
                        dm4, dp4 = _eno2(V, i0, i1, i2, i3, i4, 4, i4, n4, False, h[4])
                        ham = upwind_hamiltonian(x, y, cpsi, spsi, ve, vc, dm0, dp0, dm1, dp1,
                                                 dm2, dp2, dm3, dp3, dm4, dp4, consts)
                        out[i0, i1, i2, i3, i4] = min(ham, 0.0)


@njit(parallel=True, cache=True)
def euler_update(V, rate, out, dt):
    """out = V + dt * rate, computed in float64 and rounded once."""
    a = V.reshape(-1)
    r = rate.reshape(-1)
    o = out.reshape(-1)
    for k in prange(a.size):
        o[k] = np.float32(np.float64(a[k]) + dt * np.float64(r[k]))


@njit(parallel=True, cache=True)
def heun_combine(V0, V1, rate1, out, dt):
    """Second stage of the TVD Runge-Kutta pair: (V0 + V1 + dt * rate1) / 2."""
    a = V0.reshape(-1)
    b = V1.reshape(-1)
    r = rate1.reshape(-1)
    o = out.reshape(-1)
    for k in prange(a.size):
        val = 0.5 * (np.float64(a[k]) + np.float64(b[k]) + dt * np.float64(r[k]))
        # never rise above the previous step, even through rounding
        o[k] = min(np.float32(val), a[k])
