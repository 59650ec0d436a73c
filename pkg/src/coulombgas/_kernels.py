"""Hot loops: pair sums, Metropolis sweeps and truncated-field evaluation.

Every routine exists twice: a loop version compiled with numba (``*_loop``)
and a vectorized numpy version (``*_np``). The public names at the bottom
dispatch to one or the other according to ``_accel.USE_NUMBA``. Kernel codes:
0 = -log r, 1 = r^(-s).
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit

_LOG_CHUNK = 8


# ---------------------------------------------------------------------------
# pair energy: sum over ordered pairs i != j of g(x_i - x_j)
def _pair_energy_loop(x, kcode, s):
    n, d = x.shape
    total = 0.0
    comp = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            r2 = 0.0
            for k in range(d):
                t = x[i, k] - x[j, k]
                r2 += t * t
            if r2 == 0.0:
                return 0.0, i, j
            if kcode == 0:
                v = -0.5 * math.log(r2)
            else:
                v = r2 ** (-0.5 * s)
            # Kahan compensated accumulation, i-major
            y = v - comp
            t2 = total + y
            comp = (t2 - total) - y
            total = t2
    return 2.0 * total, -1, -1


def _pair_energy_np(x, kcode, s):
    n = x.shape[0]
    if n < 2:
        return 0.0, -1, -1
    iu, ju = np.triu_indices(n, 1)
    diff = x[iu] - x[ju]
    r2 = np.einsum("ij,ij->i", diff, diff)
    zero = np.flatnonzero(r2 == 0.0)
    if zero.size:
        return 0.0, int(iu[zero[0]]), int(ju[zero[0]])
    v = -0.5 * np.log(r2) if kcode == 0 else r2 ** (-0.5 * s)
    return 2.0 * math.fsum(v), -1, -1


# ---------------------------------------------------------------------------
# Metropolis sweeps
def _sweeps_loop(x, kcode, s, a, nfac, beta_eff, log_scale, normals, uniforms,
                 adapt, t0, target, accepted, coincident):
    """Run len(uniforms) sweeps of single-particle Metropolis moves in place.

    ``accepted[b]`` receives the number of accepted moves in sweep b. When
    ``adapt`` is true the log proposal scale follows a Robbins-Monro update
    after every sweep, with gain (1 + t)^-0.6 where t counts sweeps from t0.
    """
    nsweep, n = uniforms.shape
    d = x.shape[1]
    y = np.empty(d)
    for b in range(nsweep):
        acc = 0
        sc = math.exp(log_scale[0])
        for i in range(n):
            for k in range(d):
                y[k] = x[i, k] + sc * normals[b, i, k]
            dh = 0.0
            prod = 1.0
            cnt = 0
            bad = False
            for j in range(n):
                if j == i:
                    continue
                rn = 0.0
                ro = 0.0
                for k in range(d):
                    t = y[k] - x[j, k]
                    rn += t * t
                    t = x[i, k] - x[j, k]
                    ro += t * t
                if rn == 0.0:
                    bad = True
                    break
                if kcode == 0:
                    prod *= ro / rn
                    cnt += 1
                    if cnt == _LOG_CHUNK:
                        dh += math.log(prod)
                        prod = 1.0
                        cnt = 0
                elif s == 1.0:
                    dh += 1.0 / math.sqrt(rn) - 1.0 / math.sqrt(ro)
                else:
                    dh += rn ** (-0.5 * s) - ro ** (-0.5 * s)
            if bad:
                coincident[0] += 1
                continue
            if kcode == 0:
                dh += math.log(prod)
                dh *= 0.5
            vy = 0.0
            vx = 0.0
            for k in range(d):
                vy += y[k] * y[k]
                vx += x[i, k] * x[i, k]
            dh = 2.0 * dh + nfac * a * (vy - vx)
            if dh <= 0.0 or uniforms[b, i] < math.exp(-beta_eff * dh):
                for k in range(d):
                    x[i, k] = y[k]
                acc += 1
        accepted[b] = acc
        if adapt:
            gain = (1.0 + t0 + b) ** -0.6
            upd = gain * (acc / n - target)
            for k in range(log_scale.shape[0]):
                log_scale[k] += upd


def _sweeps_np(x, kcode, s, a, nfac, beta_eff, log_scale, normals, uniforms,
               adapt, t0, target, accepted, coincident):
    nsweep, n = uniforms.shape
    for b in range(nsweep):
        acc = 0
        sc = math.exp(log_scale[0])
        for i in range(n):
            y = x[i] + sc * normals[b, i]
            others = np.delete(x, i, axis=0)
            rn = np.sum((y - others) ** 2, axis=1)
            if np.any(rn == 0.0):
                coincident[0] += 1
                continue
            ro = np.sum((x[i] - others) ** 2, axis=1)
            if kcode == 0:
                dh = 0.5 * np.sum(np.log(ro / rn))
            else:
                dh = np.sum(rn ** (-0.5 * s) - ro ** (-0.5 * s))
            dh = 2.0 * dh + nfac * a * (y @ y - x[i] @ x[i])
            if dh <= 0.0 or uniforms[b, i] < math.exp(-beta_eff * dh):
                x[i] = y
                acc += 1
        accepted[b] = acc
        if adapt:
            log_scale += (1.0 + t0 + b) ** -0.6 * (acc / n - target)


# ---------------------------------------------------------------------------
# truncated point field: sum_i min(g(x - x_i), g(eta_i)) and its gradient
def _point_field_loop(nodes, pts, etas, kcode, s, out_val, out_grad):
    m, d = nodes.shape
    n = pts.shape[0]
    for p in range(m):
        v = 0.0
        for k in range(d):
            out_grad[p, k] = 0.0
        for i in range(n):
            r2 = 0.0
            for k in range(d):
                t = nodes[p, k] - pts[i, k]
                r2 += t * t
            e2 = etas[i] * etas[i]
            if r2 <= e2:
                if kcode == 0:
                    v -= math.log(etas[i])
                else:
                    v += etas[i] ** (-s)
                continue
            if kcode == 0:
                v -= 0.5 * math.log(r2)
                f = -1.0 / r2
            else:
                p2 = r2 ** (-0.5 * s)
                v += p2
                f = -s * p2 / r2
            for k in range(d):
                out_grad[p, k] += f * (nodes[p, k] - pts[i, k])
        out_val[p] = v


def _point_field_np(nodes, pts, etas, kcode, s, out_val, out_grad, chunk=4096):
    m = nodes.shape[0]
    for lo in range(0, m, chunk):
        sl = slice(lo, min(m, lo + chunk))
        diff = nodes[sl, None, :] - pts[None, :, :]
        r2 = np.sum(diff * diff, axis=2)
        inside = r2 <= etas[None, :] ** 2
        r2s = np.where(inside, 1.0, r2)
        if kcode == 0:
            val = np.where(inside, -np.log(etas)[None, :], -0.5 * np.log(r2s))
            f = np.where(inside, 0.0, -1.0 / r2s)
        else:
            p2 = r2s ** (-0.5 * s)
            val = np.where(inside, (etas ** (-s))[None, :], p2)
            f = np.where(inside, 0.0, -s * p2 / r2s)
        out_val[sl] = val.sum(axis=1)
        out_grad[sl] = np.einsum("pi,pik->pk", f, diff)


# ---------------------------------------------------------------------------
_pair_energy_nb = njit(_pair_energy_loop)
_sweeps_nb = njit(_sweeps_loop)
_point_field_nb = njit(_point_field_loop)

if USE_NUMBA:
    pair_energy_raw = _pair_energy_nb
    sweeps = _sweeps_nb
    point_field_raw = _point_field_nb
else:
    pair_energy_raw = _pair_energy_np
    sweeps = _sweeps_np
    point_field_raw = _point_field_np


def pair_energy(x, kcode, s):
    """Sum over ordered pairs of g(x_i - x_j); returns (value, i, j).

    (i, j) is (-1, -1) unless a coincident pair was found, in which case the
    value is meaningless and (i, j) identifies the pair.
    """
    x = np.ascontiguousarray(x, dtype=float)
    v, i, j = pair_energy_raw(x, int(kcode), float(s))
    return float(v), int(i), int(j)


def point_field(nodes, pts, etas, kcode, s):
    """Truncated point potential and its gradient at ``nodes``."""
    nodes = np.ascontiguousarray(nodes, dtype=float)
    pts = np.ascontiguousarray(pts, dtype=float)
    etas = np.ascontiguousarray(etas, dtype=float)
    val = np.empty(nodes.shape[0])
    grad = np.empty_like(nodes)
    point_field_raw(nodes, pts, etas, int(kcode), float(s), val, grad)
    return val, grad
