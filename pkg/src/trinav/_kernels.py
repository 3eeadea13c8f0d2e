"""Numba-compiled grid kernels.

Hot loops shared by the planner, the mapper, and the simulator: the
upwind Eikonal solver, DDA raycasting over a wall grid, free-space ray
marking, and swept-disk collision checks. Everything here operates on raw
arrays; the friendly typed wrappers live in the public modules.

Cells are indexed (i, j) with i along world x and j along world z; a cell
covers [origin + i*res, origin + (i+1)*res) on each axis.

All functions are cached to disk, so the compile cost is paid once per
machine, not per run.
"""

import numpy as np
from numba import njit

#: Sentinel for "not reached" inside kernels (numba-friendly stand-in for inf).
BIG = 1.0e30


@njit(cache=True)
def eikonal_march(trav, seed_i, seed_j, seed_t, h):
    """First-order fast marching on a traversability mask.

    Solves |grad T| = 1 at unit speed over cells where ``trav`` is True,
    starting from seed cells with fixed values ``seed_t``. Uses the
    two-neighbor upwind quadratic update and a binary min-heap with lazy
    deletion. Returns a float64 field with BIG where unreachable.
    """
    n0, n1 = trav.shape
    n = n0 * n1
    T = np.full(n, BIG)
    frozen = np.zeros(n, np.uint8)

    cap = 4 * n + seed_i.shape[0] + 8
    heap_t = np.empty(cap)
    heap_x = np.empty(cap, np.int64)
    size = 0

    for s in range(seed_i.shape[0]):
        idx = seed_i[s] * n1 + seed_j[s]
        if not trav[seed_i[s], seed_j[s]]:
            continue
        if seed_t[s] < T[idx]:
            T[idx] = seed_t[s]
            # sift up
            heap_t[size] = seed_t[s]
            heap_x[size] = idx
            c = size
            size += 1
            while c > 0:
                p = (c - 1) // 2
                if heap_t[p] <= heap_t[c]:
                    break
                heap_t[p], heap_t[c] = heap_t[c], heap_t[p]
                heap_x[p], heap_x[c] = heap_x[c], heap_x[p]
                c = p

    while size > 0:
        t = heap_t[0]
        idx = heap_x[0]
        size -= 1
        heap_t[0] = heap_t[size]
        heap_x[0] = heap_x[size]
        # sift down
        p = 0
        while True:
            l = 2 * p + 1
            r = l + 1
            m = p
            if l < size and heap_t[l] < heap_t[m]:
                m = l
            if r < size and heap_t[r] < heap_t[m]:
                m = r
            if m == p:
                break
            heap_t[p], heap_t[m] = heap_t[m], heap_t[p]
            heap_x[p], heap_x[m] = heap_x[m], heap_x[p]
            p = m

        if frozen[idx]:
            continue
        if t > T[idx]:
            continue
        frozen[idx] = 1

        ci = idx // n1
        cj = idx - ci * n1
        for k in range(4):
            if k == 0:
                ni, nj = ci - 1, cj
            elif k == 1:
                ni, nj = ci + 1, cj
            elif k == 2:
                ni, nj = ci, cj - 1
            else:
                ni, nj = ci, cj + 1
            if ni < 0 or ni >= n0 or nj < 0 or nj >= n1:
                continue
            nidx = ni * n1 + nj
            if frozen[nidx] or not trav[ni, nj]:
                continue

            # upwind minima along each axis
            a = BIG
            if ni > 0 and trav[ni - 1, nj] and T[(ni - 1) * n1 + nj] < a:
                a = T[(ni - 1) * n1 + nj]
            if ni < n0 - 1 and trav[ni + 1, nj] and T[(ni + 1) * n1 + nj] < a:
                a = T[(ni + 1) * n1 + nj]
            b = BIG
            if nj > 0 and trav[ni, nj - 1] and T[ni * n1 + nj - 1] < b:
                b = T[ni * n1 + nj - 1]
            if nj < n1 - 1 and trav[ni, nj + 1] and T[ni * n1 + nj + 1] < b:
                b = T[ni * n1 + nj + 1]
            if a >= BIG and b >= BIG:
                continue

            diff = a - b
            if diff < 0.0:
                diff = -diff
            if diff >= h:
                ubar = (a if a < b else b) + h
            else:
                ubar = 0.5 * (a + b + np.sqrt(2.0 * h * h - diff * diff))

            if ubar < T[nidx]:
                T[nidx] = ubar
                if size < cap:
                    heap_t[size] = ubar
                    heap_x[size] = nidx
                    c = size
                    size += 1
                    while c > 0:
                        p = (c - 1) // 2
                        if heap_t[p] <= heap_t[c]:
                            break
                        heap_t[p], heap_t[c] = heap_t[c], heap_t[p]
                        heap_x[p], heap_x[c] = heap_x[c], heap_x[p]
                        c = p

    return T.reshape(n0, n1)


@njit(cache=True)
def raycast(walls, res, ox, oz, x0, z0, angle, max_dist):
    """Distance from (x0, z0) along ``angle`` to the first wall cell.

    DDA traversal over the wall grid. Returns BIG if nothing is hit within
    ``max_dist`` or the ray leaves the grid; 0.0 if the start cell itself
    is a wall.
    """
    n0, n1 = walls.shape
    i = int(np.floor((x0 - ox) / res))
    j = int(np.floor((z0 - oz) / res))
    if i < 0 or i >= n0 or j < 0 or j >= n1:
        return BIG
    if walls[i, j]:
        return 0.0

    dx = np.cos(angle)
    dz = np.sin(angle)

    if dx > 1e-15:
        step_i = 1
        t_max_x = ((ox + (i + 1) * res) - x0) / dx
        t_delta_x = res / dx
    elif dx < -1e-15:
        step_i = -1
        t_max_x = ((ox + i * res) - x0) / dx
        t_delta_x = -res / dx
    else:
        step_i = 0
        t_max_x = BIG
        t_delta_x = BIG

    if dz > 1e-15:
        step_j = 1
        t_max_z = ((oz + (j + 1) * res) - z0) / dz
        t_delta_z = res / dz
    elif dz < -1e-15:
        step_j = -1
        t_max_z = ((oz + j * res) - z0) / dz
        t_delta_z = -res / dz
    else:
        step_j = 0
        t_max_z = BIG
        t_delta_z = BIG

    while True:
        if t_max_x < t_max_z:
            t = t_max_x
            t_max_x += t_delta_x
            i += step_i
        else:
            t = t_max_z
            t_max_z += t_delta_z
            j += step_j
        if t > max_dist:
            return BIG
        if i < 0 or i >= n0 or j < 0 or j >= n1:
            return BIG
        if walls[i, j]:
            return t


@njit(cache=True)
def render_depth(walls, res, ox, oz, cam_x, cam_z, heading,
                 fx, fy, cx, cy, width, height, cam_height, max_range):
    """Synthesize one depth view: per-column wall raycast + analytic floor.

    Rows below the principal row show the floor plane (height 0, camera at
    ``cam_height``) until the wall base occludes it; rows at or above show
    the wall. Depths beyond ``max_range`` come back NaN (sensor dropout).
    """
    depth = np.full((height, width), np.nan, np.float32)
    for u in range(width):
        tan_u = (u - cx) / fx
        c_u = np.sqrt(1.0 + tan_u * tan_u)
        ang = heading - np.arctan(tan_u)
        s = raycast(walls, res, ox, oz, cam_x, cam_z, ang, max_range * c_u + res)
        d_wall = s / c_u  # depth of the wall along this column

        for v in range(height):
            if v > cy:
                d_f = cam_height * fy / (v - cy)
                if d_f * c_u < s:
                    d = d_f
                else:
                    d = d_wall
            else:
                d = d_wall
            if d <= max_range:
                depth[v, u] = d
    return depth


@njit(cache=True)
def mark_line_cells(mask, i0, j0, i1, j1, include_end):
    """Set True along the integer (Bresenham) line from (i0, j0) to (i1, j1).

    The end cell is only marked when ``include_end`` is True; ray-before-hit
    marking passes False so the obstacle cell itself stays untouched.
    """
    n0, n1 = mask.shape
    di = abs(i1 - i0)
    dj = abs(j1 - j0)
    si = 1 if i0 < i1 else -1
    sj = 1 if j0 < j1 else -1
    err = di - dj
    i, j = i0, j0
    while True:
        at_end = i == i1 and j == j1
        if (include_end or not at_end) and 0 <= i < n0 and 0 <= j < n1:
            mask[i, j] = True
        if at_end:
            break
        e2 = 2 * err
        if e2 > -dj:
            err -= dj
            i += si
        if e2 < di:
            err += di
            j += sj
    return mask


@njit(cache=True)
def mark_free_rays(mask, oi, oj, hits_i, hits_j):
    """Mark cells between the origin cell and each hit cell as observed free."""
    for k in range(hits_i.shape[0]):
        mark_line_cells(mask, oi, oj, hits_i[k], hits_j[k], False)
    return mask


@njit(cache=True)
def swept_disk_hits_wall(walls, res, ox, oz, x0, z0, x1, z1, radius):
    """True if a disk of ``radius`` swept from (x0,z0) to (x1,z1) touches a wall.

    Samples the segment at half-cell spacing and tests exact disk/cell
    overlap at each sample, so small wall slivers cannot be stepped over.
    """
    n0, n1 = walls.shape
    seg = np.hypot(x1 - x0, z1 - z0)
    steps = int(seg / (0.5 * res)) + 1
    rc = int(radius / res) + 2
    for sidx in range(steps + 1):
        f = sidx / steps if steps > 0 else 0.0
        px = x0 + f * (x1 - x0)
        pz = z0 + f * (z1 - z0)
        ci = int(np.floor((px - ox) / res))
        cj = int(np.floor((pz - oz) / res))
        for di in range(-rc, rc + 1):
            i = ci + di
            if i < 0 or i >= n0:
                continue
            for dj in range(-rc, rc + 1):
                j = cj + dj
                if j < 0 or j >= n1:
                    continue
                if not walls[i, j]:
                    continue
                # nearest point of cell (i, j) to the sample point
                x_lo = ox + i * res
                z_lo = oz + j * res
                nx = min(max(px, x_lo), x_lo + res)
                nz = min(max(pz, z_lo), z_lo + res)
                if (nx - px) ** 2 + (nz - pz) ** 2 <= radius * radius:
                    return True
    return False
