"""Compiled inner loops for the sequential construction.

Each seating step consumes exactly one uniform ``u`` in [0, 1):

* ``u * (theta + h) < alpha * K + theta``  opens a new block;
* otherwise the join target ``u * (theta + h) - (alpha * K + theta)`` selects
  the smallest size r whose cumulative weight sum_{s<=r} (s - alpha) K_s
  exceeds it.

Cumulative weights are evaluated as ``float(S1) - alpha * float(S0)`` with
exact integer partial sums S1 = sum s K_s and S0 = sum K_s, so the Fenwick
descent and the linear scan (and the pure-Python reference step) pick the
same size for the same uniform.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _fenwick_size(n):
    size = 1
    while size < n + 2:
        size *= 2
    return size


@njit(cache=True)
def _fw_add(tree, size, i, v):
    while i <= size:
        tree[i] += v
        i += i & (-i)


@njit(cache=True)
def _fw_select(t1, t0, size, alpha, target):
    pos = 0
    c1 = 0
    c0 = 0
    step = size
    while step > 0:
        nxt = pos + step
        if nxt <= size:
            w = float(c1 + t1[nxt]) - alpha * float(c0 + t0[nxt])
            if w <= target:
                pos = nxt
                c1 += t1[nxt]
                c0 += t0[nxt]
        step >>= 1
    return pos + 1


@njit(cache=True)
def _scan_select(hist, rmax, alpha, target):
    s1 = 0
    s0 = 0
    for r in range(1, rmax + 1):
        k = hist[r]
        if k == 0:
            continue
        s1 += r * k
        s0 += k
        if float(s1) - alpha * float(s0) > target:
            return r
    return rmax + 1


@njit(cache=True)
def _seat(u, alpha, theta, h, k_total, hist, t1, t0, size, rmax, use_fenwick):
    # Returns (joined_size, new_rmax); joined_size == 0 means a new block.
    x = u * (theta + h)
    w_new = alpha * k_total + theta
    if h == 0 or x < w_new:
        hist[1] += 1
        if use_fenwick:
            _fw_add(t1, size, 1, 1)
            _fw_add(t0, size, 1, 1)
        if rmax < 1:
            rmax = 1
        return 0, rmax
    target = x - w_new
    if use_fenwick:
        r = _fw_select(t1, t0, size, alpha, target)
    else:
        r = _scan_select(hist, rmax, alpha, target)
    if r > rmax:
        # rounding pushed the target past the total weight
        r = rmax
    hist[r] -= 1
    hist[r + 1] += 1
    if use_fenwick:
        _fw_add(t1, size, r, -r)
        _fw_add(t0, size, r, -1)
        _fw_add(t1, size, r + 1, r + 1)
        _fw_add(t0, size, r + 1, 1)
    if r + 1 > rmax:
        rmax = r + 1
    while rmax > 0 and hist[rmax] == 0:
        rmax -= 1
    return r, rmax


@njit(cache=True, nogil=True)
def crp_path(alpha, theta, n, uniforms, record_h, d, use_fenwick):
    """Seat ``n`` customers; return counts (K, K_1..K_d) at each ``record_h``
    (sorted, values in 0..n) together with the final full histogram."""
    hist = np.zeros(n + 2, dtype=np.int64)
    size = _fenwick_size(n)
    if use_fenwick:
        t1 = np.zeros(size + 1, dtype=np.int64)
        t0 = np.zeros(size + 1, dtype=np.int64)
    else:
        t1 = np.zeros(1, dtype=np.int64)
        t0 = np.zeros(1, dtype=np.int64)
    out = np.zeros((record_h.shape[0], d + 1), dtype=np.int64)
    j = 0
    k_total = 0
    rmax = 0
    for h in range(n + 1):
        while j < record_h.shape[0] and record_h[j] == h:
            out[j, 0] = k_total
            for r in range(1, d + 1):
                out[j, r] = hist[r]
            j += 1
        if h == n:
            break
        joined, rmax = _seat(uniforms[h], alpha, theta, h, k_total, hist, t1, t0, size, rmax, use_fenwick)
        if joined == 0:
            k_total += 1
    return out, hist


@njit(cache=True)
def _step_probabilities(alpha, theta, h, k_total, hist, d, p, q):
    # p_r, q_r at a state with h customers seated (r = 0..d).
    denom = theta + h
    if h == 0:
        p_new = 1.0
    else:
        p_new = (alpha * k_total + theta) / denom
    p[0] = p_new
    q[0] = 0.0
    if d >= 1:
        p[1] = p_new
        q[1] = 0.0 if h == 0 else (1.0 - alpha) * hist[1] / denom
    for r in range(2, d + 1):
        if h == 0:
            p[r] = 0.0
            q[r] = 0.0
        else:
            p[r] = (r - 1 - alpha) * hist[r - 1] / denom
            q[r] = (r - alpha) * hist[r] / denom


@njit(cache=True)
def _conditional_cov(a, p, q, d, out):
    # a_i a_j (P_ij - R_ij) with the case table for P.
    m = d + 1
    for i in range(m):
        for j in range(i, m):
            if j == i or (i == 0 and j == 1):
                pij = p[i] + q[i]
            elif j == i + 1:
                pij = -q[i]
            else:
                pij = 0.0
            rij = (p[i] - q[i]) * (p[j] - q[j])
            v = a[i] * a[j] * (pij - rij)
            out[i, j] = v
            out[j, i] = v


@njit(cache=True, nogil=True)
def martingale_path(alpha, theta, n, uniforms, d, grid_h, delta_at, use_fenwick):
    """Run one trajectory together with the compensated martingale.

    Returns ``(incproc, M, a, A, K, max_rel_err, F, IP, delta_rec, state_rec)``:

    * ``incproc``  sum over h = 2..n of E[Delta_h Delta_h^T | F_{h-1}]
    * ``M, a, A, K`` the (d+1)-vectors at h = n
    * ``max_rel_err`` the largest relative gap between the incrementally
      updated M and the direct a*K - A, scaled by max(1, |a*K|, |A|)
    * ``F[j]``  the conditional covariance matrix used at step grid_h[j] + 1
      (with a_{n+1} evaluated past the end for grid_h[j] == n)
    * ``IP[j]`` the increasing process accumulated up to h = grid_h[j]
    * ``delta_rec, state_rec``  Delta_h and K_{h-1} at h == delta_at
    """
    m = d + 1
    hist = np.zeros(n + 3, dtype=np.int64)
    size = _fenwick_size(n + 1)
    if use_fenwick:
        t1 = np.zeros(size + 1, dtype=np.int64)
        t0 = np.zeros(size + 1, dtype=np.int64)
    else:
        t1 = np.zeros(1, dtype=np.int64)
        t0 = np.zeros(1, dtype=np.int64)
    p = np.zeros(m)
    q = np.zeros(m)
    a = np.ones(m)
    a_n = np.ones(m)
    big_a = np.zeros(m)
    mart = np.zeros(m)
    kvec = np.zeros(m)
    cov = np.zeros((m, m))
    incproc = np.zeros((m, m))
    F = np.zeros((grid_h.shape[0], m, m))
    IP = np.zeros((grid_h.shape[0], m, m))
    delta_rec = np.zeros(m)
    state_rec = np.zeros(m)
    max_rel = 0.0
    k_total = 0
    rmax = 0
    g = 0
    while g < grid_h.shape[0] and grid_h[g] == 0:
        # step 1 is deterministic: every entry vanishes
        g += 1

    # h = 1: the first customer always opens a block
    joined, rmax = _seat(uniforms[0], alpha, theta, 0, k_total, hist, t1, t0, size, rmax, use_fenwick)
    k_total = 1
    kvec[0] = 1.0
    if m > 1:
        kvec[1] = 1.0
    for r in range(m):
        mart[r] = kvec[r]

    for h in range(2, n + 2):
        hp = h - 1  # customers already seated
        _step_probabilities(alpha, theta, hp, k_total, hist, d, p, q)
        denom = theta + hp
        if h == n + 1:
            a_n[:] = a
        for r in range(m):
            a[r] = a[r] * denom / (denom - r + alpha)
        _conditional_cov(a, p, q, d, cov)
        while g < grid_h.shape[0] and grid_h[g] == hp:
            for i in range(m):
                for j in range(m):
                    F[g, i, j] = cov[i, j]
                    IP[g, i, j] = incproc[i, j]
            g += 1
        if h == n + 1:
            break
        for i in range(m):
            for j in range(m):
                incproc[i, j] += cov[i, j]
        if h == delta_at:
            for r in range(m):
                state_rec[r] = kvec[r]
        joined, rmax = _seat(uniforms[hp], alpha, theta, hp, k_total, hist, t1, t0, size, rmax, use_fenwick)
        # xi and the update of K
        xi0 = 0.0
        if joined == 0:
            k_total += 1
            xi0 = 1.0
        for r in range(m):
            if r == 0:
                xi = xi0
            elif joined == 0:
                xi = 1.0 if r == 1 else 0.0
            elif r == joined:
                xi = -1.0
            elif r == joined + 1:
                xi = 1.0
            else:
                xi = 0.0
            delta = a[r] * (xi - (p[r] - q[r]))
            mart[r] += delta
            kvec[r] += xi
            beta = theta / denom if r == 0 else p[r]
            big_a[r] += a[r] * beta
            if h == delta_at:
                delta_rec[r] = delta
            direct = a[r] * kvec[r] - big_a[r]
            scale = max(1.0, abs(a[r] * kvec[r]), abs(big_a[r]))
            rel = abs(mart[r] - direct) / scale
            if rel > max_rel:
                max_rel = rel
    return incproc, mart, a_n, big_a, kvec, max_rel, F, IP, delta_rec, state_rec


@njit(cache=True)
def total_count_central_moments(alpha, theta, h):
    """Mean and central moments 2..4 of K_h by forward recursion.

    Writing D = K - E[K], one step gives D' = c D + (B - p) with
    c = 1 + alpha / (theta + k), p = pbar + alpha D / (theta + k) and B a
    Bernoulli(p) draw. The Bernoulli central moments are polynomials in p,
    so the moments of D up to order 4 close on themselves. No large raw
    moments are ever subtracted, unlike the falling-moment route.
    """
    mu = 0.0
    m2 = 0.0
    m3 = 0.0
    m4 = 0.0
    for k in range(h):
        denom = theta + k
        if k == 0:
            pbar = 1.0
            beta = 0.0
        else:
            pbar = (alpha * mu + theta) / denom
            beta = alpha / denom
        c = 1.0 + beta
        # E[D^i p^j] for the needed (i, j), with E[D] = 0
        d0, d1, d2, d3, d4 = 1.0, 0.0, m2, m3, m4
        b1, b2, b3, b4 = beta, beta * beta, beta**3, beta**4
        # E[p], E[p^2], ..., E[p^4]
        ep1 = pbar
        ep2 = pbar * pbar + b2 * d2
        ep3 = pbar**3 + 3 * pbar * b2 * d2 + b3 * d3
        ep4 = pbar**4 + 6 * pbar**2 * b2 * d2 + 4 * pbar * b3 * d3 + b4 * d4
        # E[D p^j]
        dp1 = b1 * d2
        dp2 = 2 * pbar * b1 * d2 + b2 * d3
        dp3 = 3 * pbar**2 * b1 * d2 + 3 * pbar * b2 * d3 + b3 * d4
        # E[D^2 p^j]
        ddp1 = pbar * d2 + b1 * d3
        ddp2 = pbar * pbar * d2 + 2 * pbar * b1 * d3 + b2 * d4
        # Bernoulli central moments as polynomials in p
        e_m2 = ep1 - ep2
        e_m3 = ep1 - 3 * ep2 + 2 * ep3
        e_m4 = ep1 - 4 * ep2 + 6 * ep3 - 3 * ep4
        d_m2 = dp1 - dp2
        d_m3 = dp1 - 3 * dp2 + 2 * dp3
        dd_m2 = ddp1 - ddp2
        n2 = c * c * d2 + e_m2
        n3 = c**3 * d3 + 3 * c * d_m2 + e_m3
        n4 = c**4 * d4 + 6 * c * c * dd_m2 + 4 * c * d_m3 + e_m4
        mu += pbar
        m2, m3, m4 = n2, n3, n4
    return mu, m2, m3, m4


@njit(cache=True)
def total_count_falling_moments(alpha, theta, h, smax):
    """E[(K_h)_s] for s = 0..smax from
    E[(K_{k+1})_s] = E[(K_k)_s] (1 + s alpha / (theta + k))
                     + s (theta + (s - 1) alpha) E[(K_k)_{s-1}] / (theta + k),
    started at K_1 = 1. Every term is non-negative."""
    mu = np.zeros(smax + 1)
    mu[0] = 1.0
    if smax >= 1:
        mu[1] = 1.0
    for k in range(1, h):
        denom = theta + k
        for s in range(smax, 0, -1):
            mu[s] = mu[s] * (1.0 + s * alpha / denom) + s * (theta + (s - 1) * alpha) * mu[s - 1] / denom
    return mu
