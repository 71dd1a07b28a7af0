"""Compiled pair-sum kernels for walker evaluation.

One pass per walker computes minimum-image distances, the pair-function
branches, the drift vectors and the local energy.  The kernels release the
GIL and hold no state, so the engine can run them concurrently on walker
chunks; all writes are walker-private and results are bit-identical for
any chunking.  If numba is unavailable the engine falls back to the
vectorized numpy path in model.py, which computes the same quantities.
"""

import math

import numpy as np

try:
    from numba import njit

    AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap

_EULER = 0.5772156649015329
_SERIES_K = 14


def _series_coeffs():
    i0 = np.empty(_SERIES_K)
    s0 = np.empty(_SERIES_K)
    i1 = np.empty(_SERIES_K)
    ps = np.empty(_SERIES_K)
    fact = 1.0
    hk = 0.0
    psi_k1 = -_EULER        # psi(k + 1)
    psi_k2 = 1.0 - _EULER   # psi(k + 2)
    for k in range(_SERIES_K):
        if k > 0:
            fact *= k
            hk += 1.0 / k
            psi_k1 += 1.0 / k
            psi_k2 += 1.0 / (k + 1)
        i0[k] = 1.0 / (fact * fact)
        s0[k] = hk / (fact * fact)
        i1[k] = 1.0 / (fact * (fact * (k + 1)))  # 1/(k! (k+1)!)
        ps[k] = (psi_k1 + psi_k2) * i1[k]
    return i0, s0, i1, ps


_I0_C, _S0_C, _I1_C, _PS_C = _series_coeffs()
_HG_X2, _HG_W = (lambda xw: (xw[0] ** 2, xw[1]))(
    np.polynomial.hermite.hermgauss(48)
)


@njit(cache=True, nogil=True)
def _log_k0_ratio(z):
    """(ln K0(z), K1(z)/K0(z)) for scalar z > 0, stable at large z."""
    if z <= 2.0:
        q = 0.25 * z * z
        i0 = _I0_C[_SERIES_K - 1]
        s0 = _S0_C[_SERIES_K - 1]
        i1 = _I1_C[_SERIES_K - 1]
        ps = _PS_C[_SERIES_K - 1]
        for k in range(_SERIES_K - 2, -1, -1):
            i0 = i0 * q + _I0_C[k]
            s0 = s0 * q + _S0_C[k]
            i1 = i1 * q + _I1_C[k]
            ps = ps * q + _PS_C[k]
        lg = math.log(0.5 * z)
        k0 = -(lg + _EULER) * i0 + s0
        k1 = lg * (0.5 * z) * i1 + 1.0 / z - 0.25 * z * ps
        return math.log(k0), k1 / k0
    s_i0 = 0.0
    s_i1 = 0.0
    for j in range(_HG_X2.shape[0]):
        arg = 1.0 + _HG_X2[j] / (2.0 * z)
        s_i0 += _HG_W[j] / math.sqrt(arg)
        s_i1 += _HG_W[j] * _HG_X2[j] * math.sqrt(arg)
    return -z + math.log(s_i0) - 0.5 * math.log(2.0 * z), 2.0 * s_i1 / s_i0


@njit(cache=True, nogil=True)
def evaluate_walkers(pos, kind, r0, box, rm, rcut, c1, c2, log_c, u_cut,
                     tail_total, iu, ju):
    """log Psi, drift, local energy and overlap flag for a walker batch.

    kind: 0 dipolar, 1 hard disk.  tail_total is the integrated potential
    tail for the whole system.
    """
    nw, n, _ = pos.shape
    npairs = iu.shape[0]
    log_psi = np.zeros(nw)
    eloc = np.zeros(nw)
    drift = np.zeros((nw, n, 2))
    bad = np.zeros(nw, np.bool_)
    for w in range(nw):
        usum = 0.0
        lapsum = 0.0
        vsum = 0.0
        overlap = False
        for p in range(npairs):
            i = iu[p]
            j = ju[p]
            dx = pos[w, i, 0] - pos[w, j, 0]
            dy = pos[w, i, 1] - pos[w, j, 1]
            dx -= box * round(dx / box)
            dy -= box * round(dy / box)
            r = math.sqrt(dx * dx + dy * dy)
            if kind == 1 and r <= r0:
                overlap = True
                break
            if r > rcut:
                usum += u_cut
                continue
            if r <= rm:
                if kind == 0:
                    z = 2.0 * math.sqrt(r0 / r)
                    u, ratio = _log_k0_ratio(z)
                    up = ratio * z / (2.0 * r)
                    lap = r0 / (r * r * r) - up * up
                    v = r0 / (r * r * r)
                else:
                    wlog = math.log(r / r0)
                    u = math.log(wlog)
                    up = 1.0 / (r * wlog)
                    lap = -up * up
                    v = 0.0
            else:
                inv = 1.0 / r
                invl = 1.0 / (box - r)
                u = log_c - c1 * (inv + invl) - c2 * (inv * inv + invl * invl)
                up = c1 * (inv * inv - invl * invl) + 2.0 * c2 * (
                    inv * inv * inv - invl * invl * invl
                )
                u2 = -2.0 * c1 * (inv**3 + invl**3) - 6.0 * c2 * (
                    inv**4 + invl**4
                )
                lap = u2 + up * inv
                v = r0 / (r * r * r) if kind == 0 else 0.0
            usum += u
            lapsum += lap
            vsum += v
            fx = up * dx / r
            fy = up * dy / r
            drift[w, i, 0] += fx
            drift[w, i, 1] += fy
            drift[w, j, 0] -= fx
            drift[w, j, 1] -= fy
        if overlap:
            bad[w] = True
            log_psi[w] = -np.inf
            eloc[w] = np.inf
            for i in range(n):
                drift[w, i, 0] = 0.0
                drift[w, i, 1] = 0.0
        else:
            grad_sq = 0.0
            for i in range(n):
                grad_sq += (
                    drift[w, i, 0] * drift[w, i, 0]
                    + drift[w, i, 1] * drift[w, i, 1]
                )
            log_psi[w] = usum
            eloc[w] = -0.5 * (2.0 * lapsum + grad_sq) + vsum + tail_total
    return log_psi, drift, eloc, bad
