"""Hot numeric kernels.

Everything here is written in the numba-compatible subset so the same source
runs jitted or as plain Python (see ``_jit``). The two all-pairs closures and
the wall counter also carry a vectorised numpy form that is used when numba is
disabled; it performs the same floating point operations in the same order,
so both paths agree bit for bit.
"""

import math

import numpy as np

from ._jit import NUMBA_ENABLED, njit

# --------------------------------------------------------------------------
# all-pairs closures
# --------------------------------------------------------------------------


@njit
def _minplus_loop(w):
    n = w.shape[0]
    for k in range(n):
        for i in range(n):
            wik = w[i, k]
            if wik == np.inf:
                continue
            for j in range(n):
                c = wik + w[k, j]
                if c < w[i, j]:
                    w[i, j] = c
    return w


def _minplus_numpy(w):
    for k in range(w.shape[0]):
        np.minimum(w, w[:, k, None] + w[None, k, :], out=w)
    return w


@njit
def _maxmin_loop(w):
    n = w.shape[0]
    for k in range(n):
        for i in range(n):
            wik = w[i, k]
            if wik == -np.inf:
                continue
            for j in range(n):
                c = min(wik, w[k, j])
                if c > w[i, j]:
                    w[i, j] = c
    return w


def _maxmin_numpy(w):
    for k in range(w.shape[0]):
        np.maximum(w, np.minimum(w[:, k, None], w[None, k, :]), out=w)
    return w


def all_pairs_min_time(weights):
    """Shortest-path closure of a dense travel-time matrix (``inf`` = no edge)."""
    w = np.array(weights, dtype=np.float64, copy=True)
    np.fill_diagonal(w, 0.0)
    return _minplus_loop(w) if NUMBA_ENABLED else _minplus_numpy(w)


def all_pairs_widest(weights):
    """Max-min (bottleneck) closure of a dense link matrix (``-inf`` = no link).

    The diagonal is forced to ``+inf``: a node reaches itself with no
    bottleneck.
    """
    w = np.array(weights, dtype=np.float64, copy=True)
    np.fill_diagonal(w, np.inf)
    return _maxmin_loop(w) if NUMBA_ENABLED else _maxmin_numpy(w)


# --------------------------------------------------------------------------
# occupancy ray march
# --------------------------------------------------------------------------


def _march_samples(ax, ay, bx, by, cell):
    dx = bx - ax
    dy = by - ay
    d = math.sqrt(dx * dx + dy * dy)
    n = int(math.ceil(d / (cell * 0.125))) + 1
    return max(n, 2)


@njit
def _count_walls_loop(occ, cell, ax, ay, bx, by, n):
    dx = bx - ax
    dy = by - ay
    nx = occ.shape[0]
    ny = occ.shape[1]
    count = 0
    pi = 0
    pj = 0
    for s in range(n):
        t = s / (n - 1)
        i = int(math.floor((ax + t * dx) / cell))
        j = int(math.floor((ay + t * dy) / cell))
        if s == 0 or i != pi or j != pj:
            if 0 <= i < nx and 0 <= j < ny and occ[i, j]:
                count += 1
            pi = i
            pj = j
    return count


def _count_walls_numpy(occ, cell, ax, ay, bx, by, n):
    t = np.arange(n) / (n - 1)
    i = np.floor((ax + t * (bx - ax)) / cell).astype(np.int64)
    j = np.floor((ay + t * (by - ay)) / cell).astype(np.int64)
    fresh = np.ones(n, dtype=bool)
    fresh[1:] = (i[1:] != i[:-1]) | (j[1:] != j[:-1])
    i, j = i[fresh], j[fresh]
    inside = (i >= 0) & (i < occ.shape[0]) & (j >= 0) & (j < occ.shape[1])
    return int(occ[i[inside], j[inside]].sum())


def count_wall_cells(occ, cell, a, b):
    """Number of distinct occupied cells the straight segment a->b passes through.

    ``occ`` is indexed ``[ix, iy]`` with the grid origin at (0, 0). The segment
    is sampled every eighth of a cell.
    """
    ax, ay, bx, by = float(a[0]), float(a[1]), float(b[0]), float(b[1])
    n = _march_samples(ax, ay, bx, by, cell)
    if NUMBA_ENABLED:
        return int(_count_walls_loop(occ, float(cell), ax, ay, bx, by, n))
    return _count_walls_numpy(occ, float(cell), ax, ay, bx, by, n)


# --------------------------------------------------------------------------
# orienteering (FIG-OP) search
# --------------------------------------------------------------------------


@njit
def path_score(path, plen, tmat, prizes, gamma):
    """Discounted prize sum and arrival time of a repeat-free path."""
    t = 0.0
    s = prizes[path[0]]
    for k in range(1, plen):
        t += tmat[path[k - 1], path[k]]
        s += prizes[path[k]] * gamma ** t
    return s, t


@njit
def _penalty_sum(path, plen, pen):
    p = 0.0
    for k in range(1, plen):
        p += pen[path[k - 1], path[k]]
    return p


@njit
def _try(cand, m, best, tmat, prizes, gamma, budget, pen, mu, best_aug):
    s, t = path_score(cand, m, tmat, prizes, gamma)
    if t > budget:
        return best_aug, False
    aug = s - mu * _penalty_sum(cand, m, pen)
    if aug > best_aug + 1e-12:
        for k in range(m):
            best[k] = cand[k]
        return aug, True
    return best_aug, False


@njit
def gls_local_search(path, plen, tmat, prizes, gamma, budget, pen, mu, order):
    """Best-improvement descent on ``score - mu * sum(penalties)``.

    Moves: insert an unvisited prize, remove a stop, reverse a segment
    (2-opt), relocate a stop. ``path`` is modified in place; the new length
    is returned. ``order`` fixes the scan order of insertion candidates.
    """
    n = tmat.shape[0]
    cand = np.empty(n, np.int64)
    best = np.empty(n, np.int64)
    inpath = np.zeros(n, np.bool_)
    s0, _ = path_score(path, plen, tmat, prizes, gamma)
    cur_aug = s0 - mu * _penalty_sum(path, plen, pen)
    while True:
        best_aug = cur_aug
        best_len = -1
        inpath[:] = False
        for k in range(plen):
            inpath[path[k]] = True

        for oi in range(order.shape[0]):
            u = order[oi]
            if inpath[u]:
                continue
            for pos in range(1, plen + 1):
                m = 0
                for k in range(pos):
                    cand[m] = path[k]
                    m += 1
                cand[m] = u
                m += 1
                for k in range(pos, plen):
                    cand[m] = path[k]
                    m += 1
                best_aug, ok = _try(cand, m, best, tmat, prizes, gamma, budget, pen, mu, best_aug)
                if ok:
                    best_len = m

        for pos in range(1, plen):
            m = 0
            for k in range(plen):
                if k != pos:
                    cand[m] = path[k]
                    m += 1
            best_aug, ok = _try(cand, m, best, tmat, prizes, gamma, budget, pen, mu, best_aug)
            if ok:
                best_len = m

        for i in range(1, plen - 1):
            for j in range(i + 1, plen):
                for k in range(plen):
                    cand[k] = path[k]
                for k in range(j - i + 1):
                    cand[i + k] = path[j - k]
                best_aug, ok = _try(cand, plen, best, tmat, prizes, gamma, budget, pen, mu, best_aug)
                if ok:
                    best_len = plen

        for i in range(1, plen):
            for j in range(1, plen):
                if j == i:
                    continue
                m = 0
                for k in range(plen):
                    if k == i:
                        continue
                    if m == j:
                        cand[m] = path[i]
                        m += 1
                    cand[m] = path[k]
                    m += 1
                if m < plen:
                    cand[m] = path[i]
                    m += 1
                best_aug, ok = _try(cand, m, best, tmat, prizes, gamma, budget, pen, mu, best_aug)
                if ok:
                    best_len = m

        if best_len < 0:
            return plen
        for k in range(best_len):
            path[k] = best[k]
        plen = best_len
        cur_aug = best_aug


@njit
def greedy_insertion(start, tmat, prizes, gamma, budget, path):
    """Seed path: repeatedly take the feasible insertion with the largest score gain.

    Ties go to the smaller added travel time, then the lower node index.
    Returns the path length; ``path`` is filled in place.
    """
    n = tmat.shape[0]
    cand = np.empty(n, np.int64)
    inpath = np.zeros(n, np.bool_)
    path[0] = start
    inpath[start] = True
    plen = 1
    cur_s, cur_t = path_score(path, plen, tmat, prizes, gamma)
    while True:
        best_gain = 0.0
        best_dt = np.inf
        best_u = -1
        best_pos = -1
        for u in range(n):
            if inpath[u] or prizes[u] <= 0.0:
                continue
            for pos in range(1, plen + 1):
                m = 0
                for k in range(pos):
                    cand[m] = path[k]
                    m += 1
                cand[m] = u
                m += 1
                for k in range(pos, plen):
                    cand[m] = path[k]
                    m += 1
                s, t = path_score(cand, m, tmat, prizes, gamma)
                if t > budget:
                    continue
                gain = s - cur_s
                dt = t - cur_t
                if gain > best_gain + 1e-12:
                    better = True
                elif best_u >= 0 and gain >= best_gain - 1e-12 and dt < best_dt:
                    better = True
                else:
                    better = False
                if better:
                    best_gain = gain
                    best_dt = dt
                    best_u = u
                    best_pos = pos
        if best_u < 0:
            return plen
        for k in range(plen, best_pos, -1):
            path[k] = path[k - 1]
        path[best_pos] = best_u
        inpath[best_u] = True
        plen += 1
        cur_s, cur_t = path_score(path, plen, tmat, prizes, gamma)


# --------------------------------------------------------------------------
# local rollout planner
# --------------------------------------------------------------------------


@njit
def _h2(p):
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * math.log2(p) + (1.0 - p) * math.log2(1.0 - p))


@njit
def _node_gain(w, tag, cov_ptr, cov_idx, probs, stamp, eps):
    q = 1.0 - eps
    hq = _h2(q)
    g = 0.0
    for k in range(cov_ptr[w], cov_ptr[w + 1]):
        j = cov_idx[k]
        if stamp[j] == tag:
            continue
        p = probs[j]
        if p < q:
            h = _h2(p)
            if h > hq:
                g += h - hq
    return g


@njit
def _mark(w, tag, cov_ptr, cov_idx, stamp):
    for k in range(cov_ptr[w], cov_ptr[w + 1]):
        stamp[cov_idx[k]] = tag


@njit
def _pick(vals, lo, hi, u, maximize):
    # index of the best value in vals[lo:hi]; ties resolved by the uniform u
    best = vals[lo]
    for k in range(lo + 1, hi):
        v = vals[k]
        if (maximize and v > best) or (not maximize and v < best):
            best = v
    nties = 0
    for k in range(lo, hi):
        if vals[k] == best:
            nties += 1
    target = min(int(u * nties), nties - 1)
    c = 0
    for k in range(lo, hi):
        if vals[k] == best:
            if c == target:
                return k
            c += 1
    return lo


@njit
def lcp_rollouts(adj_ptr, adj_idx, adj_time, cov_ptr, cov_idx, probs, eps, start,
                 depth, heur, uni, guide, guide_w, gamma, lam):
    """Run ``len(heur)`` rollouts of ``depth`` steps and keep the best one.

    heur[r, t]: successor rule at step t of rollout r; 0 greedy information
    gain, 1 descend guidance distance, 2 uniform.
    Gains are computed against a per-rollout scratch coverage (``stamp``), so
    revisiting a node inside one rollout earns nothing.

    Returns (value, sequence, length, step gains, step times).
    """
    n_roll = heur.shape[0]
    stamp = np.full(probs.shape[0], -1, np.int64)
    scores = np.empty(adj_idx.shape[0] + 1, np.float64)
    seq = np.empty(depth + 1, np.int64)
    gains = np.empty(depth, np.float64)
    times = np.empty(depth, np.float64)
    best_seq = np.empty(depth + 1, np.int64)
    best_gains = np.zeros(depth, np.float64)
    best_times = np.zeros(depth, np.float64)
    best_val = -np.inf
    best_len = 1
    best_seq[0] = start
    for r in range(n_roll):
        v = start
        seq[0] = start
        length = 1
        val = 0.0
        disc = 1.0
        for t in range(depth):
            h = heur[r, t]
            lo = adj_ptr[v]
            hi = adj_ptr[v + 1]
            if hi == lo:
                break
            if h == 2:
                choice = lo + min(int(uni[r, t] * (hi - lo)), hi - lo - 1)
            elif h == 0:
                for k in range(lo, hi):
                    scores[k] = _node_gain(adj_idx[k], r, cov_ptr, cov_idx, probs, stamp, eps) - lam * adj_time[k]
                choice = _pick(scores, lo, hi, uni[r, t], True)
            else:
                for k in range(lo, hi):
                    scores[k] = guide[adj_idx[k]]
                choice = _pick(scores, lo, hi, uni[r, t], False)
            w = adj_idx[choice]
            g = _node_gain(w, r, cov_ptr, cov_idx, probs, stamp, eps)
            _mark(w, r, cov_ptr, cov_idx, stamp)
            gains[t] = g
            times[t] = adj_time[choice]
            val += disc * (g - lam * adj_time[choice])
            disc *= gamma
            v = w
            seq[length] = w
            length += 1
        val += guide_w * (guide[start] - guide[v])
        if val > best_val:
            best_val = val
            best_len = length
            for k in range(length):
                best_seq[k] = seq[k]
            for k in range(length - 1):
                best_gains[k] = gains[k]
                best_times[k] = times[k]
    return best_val, best_seq, best_len, best_gains, best_times


@njit
def sequence_value(seq, length, step_time, cov_ptr, cov_idx, probs, eps, guide, guide_w, gamma, lam):
    """Value of a fixed node sequence under the rollout objective.

    ``step_time[k]`` is the travel time of hop k -> k+1.
    """
    stamp = np.full(probs.shape[0], -1, np.int64)
    gains = np.zeros(max(length - 1, 0), np.float64)
    val = 0.0
    disc = 1.0
    for k in range(1, length):
        w = seq[k]
        g = _node_gain(w, 0, cov_ptr, cov_idx, probs, stamp, eps)
        _mark(w, 0, cov_ptr, cov_idx, stamp)
        gains[k - 1] = g
        val += disc * (g - lam * step_time[k - 1])
        disc *= gamma
    val += guide_w * (guide[seq[0]] - guide[seq[length - 1]])
    return val, gains
