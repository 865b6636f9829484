"""Compiled inner loops for sequential inhibition sampling.

Both samplers work on a background grid whose cells are small enough to hold
at most one accepted point (diagonal <= exclusion radius), so ``occ`` is a
plain (nx, ny) array of point indices with -1 for empty.

Candidate darts are thrown into "active" cells at some refinement level; a
cell is dropped once it is provably inside the rejection zone. Darts that
are uniform over any superset of the still-acceptable area give the same
accepted sequence in law as plain uniform candidates over the region.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _base_cell(x, h, g, n):
    b = int((x + h) / g)
    if b < 0:
        b = 0
    elif b >= n:
        b = n - 1
    return b


# --------------------------------------------------------------------------
# distance exclusion (node colouring)


@njit(cache=True, nogil=True)
def _disk_conflict(x, y, occ, pts, hw, hh, gx, gy, K, d2min):
    nx, ny = occ.shape
    bx = _base_cell(x, hw, gx, nx)
    by = _base_cell(y, hh, gy, ny)
    for i in range(max(bx - K, 0), min(bx + K + 1, nx)):
        for j in range(max(by - K, 0), min(by + K + 1, ny)):
            k = occ[i, j]
            if k >= 0:
                dx = pts[k, 0] - x
                dy = pts[k, 1] - y
                if dx * dx + dy * dy < d2min:
                    return True
    return False


@njit(cache=True, nogil=True)
def throw_disk(xs, ys, occ, pts, n, hw, hh, gx, gy, K, d2min, accepted, streak, max_streak):
    """Process candidates in order.

    With ``max_streak > 0`` stops once ``streak`` consecutive rejections reach
    it. Returns (n, consumed, streak).
    """
    nx, ny = occ.shape
    for c in range(xs.shape[0]):
        x = xs[c]
        y = ys[c]
        bx = _base_cell(x, hw, gx, nx)
        by = _base_cell(y, hh, gy, ny)
        if occ[bx, by] >= 0 or _disk_conflict(x, y, occ, pts, hw, hh, gx, gy, K, d2min):
            accepted[c] = 0
            streak += 1
            if max_streak > 0 and streak >= max_streak:
                return n, c + 1, streak
            continue
        streak = 0
        accepted[c] = 1
        occ[bx, by] = n
        pts[n, 0] = x
        pts[n, 1] = y
        n += 1
    return n, xs.shape[0], streak


@njit(cache=True, nogil=True)
def refine_disk(ax, ay, level, occ, pts, hw, hh, gx, gy, K, d2min):
    """Split active cells in four and keep children not inside a single disk."""
    m = ax.shape[0]
    out_x = np.empty(4 * m, dtype=np.int64)
    out_y = np.empty(4 * m, dtype=np.int64)
    nx, ny = occ.shape
    sx = gx / 2.0 ** (level + 1)
    sy = gy / 2.0 ** (level + 1)
    cnt = 0
    for c in range(m):
        for q in range(4):
            cx = 2 * ax[c] + (q & 1)
            cy = 2 * ay[c] + (q >> 1)
            x0 = -hw + cx * sx
            y0 = -hh + cy * sy
            x1 = x0 + sx
            y1 = y0 + sy
            bx = cx >> (level + 1)
            by = cy >> (level + 1)
            covered = False
            for i in range(max(bx - K, 0), min(bx + K + 1, nx)):
                if covered:
                    break
                for j in range(max(by - K, 0), min(by + K + 1, ny)):
                    k = occ[i, j]
                    if k < 0:
                        continue
                    px = pts[k, 0]
                    py = pts[k, 1]
                    # farthest corner inside the open disk => whole cell is
                    fx = max(abs(px - x0), abs(px - x1))
                    fy = max(abs(py - y0), abs(py - y1))
                    if fx * fx + fy * fy < d2min:
                        covered = True
                        break
            if not covered:
                out_x[cnt] = cx
                out_y[cnt] = cy
                cnt += 1
    return out_x[:cnt], out_y[:cnt]


# --------------------------------------------------------------------------
# summed-interference exclusion (carrier sense)


@njit(cache=True, nogil=True)
def ipow(r2, halfa):
    """``r2 ** -halfa``, with a multiply loop for integral exponents."""
    k = int(halfa)
    if k == halfa and k <= 32:
        v = 1.0 / r2
        out = v
        for _ in range(k - 1):
            out *= v
        return out
    return r2 ** (-halfa)


@njit(cache=True, nogil=True)
def _window(bx, by, B, Kb, nx, ny):
    # base-cell index range of the blocks within Kb of the block holding (bx, by)
    qx = bx // B
    qy = by // B
    return (max((qx - Kb) * B, 0), min((qx + Kb + 1) * B, nx),
            max((qy - Kb) * B, 0), min((qy + Kb + 1) * B, ny))


@njit(cache=True, nogil=True)
def _window_power(x, y, occ, pts, bx, by, B, Kb, halfa):
    nx, ny = occ.shape
    i0, i1, j0, j1 = _window(bx, by, B, Kb, nx, ny)
    s = 0.0
    for i in range(i0, i1):
        for j in range(j0, j1):
            k = occ[i, j]
            if k >= 0:
                dx = pts[k, 0] - x
                dy = pts[k, 1] - y
                s += ipow(dx * dx + dy * dy, halfa)
    return s


@njit(cache=True, nogil=True)
def _total_power(x, y, pts, n, halfa):
    s = 0.0
    for k in range(n):
        dx = pts[k, 0] - x
        dy = pts[k, 1] - y
        s += ipow(dx * dx + dy * dy, halfa)
    return s


@njit(cache=True, nogil=True)
def add_far(px, py, far_lo, far_hi, tiers, hw, hh, gx, gy, B, halfa):
    nt, nbx, nby = far_lo.shape
    qx = int((px + hw) / gx) // B
    qy = int((py + hh) / gy) // B
    bsx = B * gx
    bsy = B * gy
    kmin = tiers[0]
    for i in range(nbx):
        x0 = -hw + i * bsx
        x1 = x0 + bsx
        dxn = max(x0 - px, px - x1, 0.0)
        dxf = max(abs(px - x0), abs(px - x1))
        di = abs(i - qx)
        for j in range(nby):
            dist = max(di, abs(j - qy))
            if dist <= kmin:
                continue
            y0 = -hh + j * bsy
            y1 = y0 + bsy
            dyn = max(y0 - py, py - y1, 0.0)
            dyf = max(abs(py - y0), abs(py - y1))
            hi = ipow(dxn * dxn + dyn * dyn, halfa)
            lo = ipow(dxf * dxf + dyf * dyf, halfa)
            for t in range(nt):
                if dist > tiers[t]:
                    far_hi[t, i, j] += hi
                    far_lo[t, i, j] += lo


@njit(cache=True, nogil=True)
def _sense_accept(x, y, occ, pts, n, hw, hh, gx, gy, B, tiers, halfa, theta, far_lo, far_hi):
    nx, ny = occ.shape
    bx = _base_cell(x, hw, gx, nx)
    by = _base_cell(y, hh, gy, ny)
    qx = bx // B
    qy = by // B
    for t in range(tiers.shape[0]):
        near = _window_power(x, y, occ, pts, bx, by, B, tiers[t], halfa)
        if near + far_lo[t, qx, qy] >= theta:
            return False
        if near + far_hi[t, qx, qy] < theta:
            return True
    return _total_power(x, y, pts, n, halfa) < theta


@njit(cache=True, nogil=True)
def throw_sense(xs, ys, occ, pts, n, hw, hh, gx, gy, B, tiers, halfa, theta,
                far_lo, far_hi, accepted, streak, max_streak):
    """Carrier-sense acceptance of candidates in order; see :func:`throw_disk`."""
    nx, ny = occ.shape
    for c in range(xs.shape[0]):
        x = xs[c]
        y = ys[c]
        bx = _base_cell(x, hw, gx, nx)
        by = _base_cell(y, hh, gy, ny)
        if occ[bx, by] >= 0 or not _sense_accept(
                x, y, occ, pts, n, hw, hh, gx, gy, B, tiers, halfa, theta, far_lo, far_hi):
            accepted[c] = 0
            streak += 1
            if max_streak > 0 and streak >= max_streak:
                return n, c + 1, streak
            continue
        streak = 0
        accepted[c] = 1
        occ[bx, by] = n
        pts[n, 0] = x
        pts[n, 1] = y
        n += 1
        add_far(x, y, far_lo, far_hi, tiers, hw, hh, gx, gy, B, halfa)
    return n, xs.shape[0], streak


@njit(cache=True, nogil=True)
def _cell_power_lower(x0, y0, x1, y1, px, py, halfa):
    fx = max(abs(px - x0), abs(px - x1))
    fy = max(abs(py - y0), abs(py - y1))
    return ipow(fx * fx + fy * fy, halfa)


@njit(cache=True, nogil=True)
def _cell_lower_acc(x0, y0, x1, y1, px, py, halfa, acc):
    """Accumulate one point into the two lower bounds kept in ``acc``:
    [farthest-corner sum, value, grad x, grad y, curvature, taylor usable]."""
    alpha = 2.0 * halfa
    acc[0] += _cell_power_lower(x0, y0, x1, y1, px, py, halfa)
    cx = 0.5 * (x0 + x1)
    cy = 0.5 * (y0 + y1)
    rho = 0.5 * np.sqrt((x1 - x0) ** 2 + (y1 - y0) ** 2)
    dx = cx - px
    dy = cy - py
    r2 = dx * dx + dy * dy
    r = np.sqrt(r2)
    if r <= 2.0 * rho:
        acc[5] = 0.0
        return
    f = ipow(r2, halfa)
    acc[1] += f
    acc[2] -= alpha * f * dx / r2
    acc[3] -= alpha * f * dy / r2
    rm = r - rho
    acc[4] += alpha * (alpha + 1.0) * ipow(rm * rm, halfa + 1.0)


@njit(cache=True, nogil=True)
def _cell_lower_final(x0, y0, x1, y1, acc):
    # second order Taylor bound about the centre is far tighter than the
    # corner bound near local minima, where the gradient nearly cancels
    lb = acc[0]
    if acc[5] > 0:
        rho = 0.5 * np.sqrt((x1 - x0) ** 2 + (y1 - y0) ** 2)
        lb2 = acc[1] - np.sqrt(acc[2] ** 2 + acc[3] ** 2) * rho - 0.5 * acc[4] * rho * rho
        if lb2 > lb:
            return lb2
    return lb


@njit(cache=True, nogil=True)
def _cell_window_lower(x0, y0, x1, y1, occ, pts, bx, by, B, Kb, halfa, acc):
    """Lower bound on the window's summed power anywhere in the cell."""
    nx, ny = occ.shape
    i0, i1, j0, j1 = _window(bx, by, B, Kb, nx, ny)
    acc[:] = 0.0
    acc[5] = 1.0
    for i in range(i0, i1):
        for j in range(j0, j1):
            k = occ[i, j]
            if k >= 0:
                _cell_lower_acc(x0, y0, x1, y1, pts[k, 0], pts[k, 1], halfa, acc)
    return _cell_lower_final(x0, y0, x1, y1, acc)


@njit(cache=True, nogil=True)
def refine_sense(ax, ay, level, occ, pts, n, hw, hh, gx, gy, B, tiers, halfa, theta,
                 far_lo, far_hi):
    """Keep children whose minimum sensed power may still be below ``theta``."""
    m = ax.shape[0]
    out_x = np.empty(4 * m, dtype=np.int64)
    out_y = np.empty(4 * m, dtype=np.int64)
    sx = gx / 2.0 ** (level + 1)
    sy = gy / 2.0 ** (level + 1)
    cnt = 0
    acc = np.empty(6)
    for c in range(m):
        for q in range(4):
            cx = 2 * ax[c] + (q & 1)
            cy = 2 * ay[c] + (q >> 1)
            x0 = -hw + cx * sx
            y0 = -hh + cy * sy
            x1 = x0 + sx
            y1 = y0 + sy
            bx = cx >> (level + 1)
            by = cy >> (level + 1)
            qx = bx // B
            qy = by // B
            decided = False
            covered = False
            for t in range(tiers.shape[0]):
                lb = _cell_window_lower(x0, y0, x1, y1, occ, pts, bx, by, B, tiers[t], halfa, acc)
                if lb + far_lo[t, qx, qy] >= theta:
                    covered = True
                    decided = True
                    break
                if lb + far_hi[t, qx, qy] < theta:
                    decided = True
                    break
            if not decided:
                acc[:] = 0.0
                acc[5] = 1.0
                for k in range(n):
                    _cell_lower_acc(x0, y0, x1, y1, pts[k, 0], pts[k, 1], halfa, acc)
                covered = _cell_lower_final(x0, y0, x1, y1, acc) >= theta
            if not covered:
                out_x[cnt] = cx
                out_y[cnt] = cy
                cnt += 1
    return out_x[:cnt], out_y[:cnt]


@njit(cache=True, nogil=True)
def received_counts(probes, pts, halfa, beta):
    """Per probe, how many transmitters reach SIR >= beta (exact sums)."""
    m = probes.shape[0]
    n = pts.shape[0]
    out = np.zeros(m, dtype=np.int64)
    p = np.empty(n)
    for a in range(m):
        zx = probes[a, 0]
        zy = probes[a, 1]
        dmin = np.inf
        for k in range(n):
            r2 = (zx - pts[k, 0]) ** 2 + (zy - pts[k, 1]) ** 2
            p[k] = r2
            if r2 < dmin:
                dmin = r2
        # powers relative to the strongest keep large exponents finite
        tot = 0.0
        for k in range(n):
            p[k] = ipow(p[k] / dmin, halfa)
            tot += p[k]
        c = 0
        for k in range(n):
            if p[k] >= beta * (tot - p[k]):
                c += 1
        out[a] = c
    return out
