# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: split scans for tree building and skip-gram SGD.

Mirrors pykernels.py operation-for-operation. Split-scan arithmetic keeps
the exact accumulation order of the numpy fallback (sequential prefix sums,
integer class counts) so both backends choose identical splits.
"""

from libc.math cimport exp, INFINITY
from libc.stdlib cimport calloc, free, malloc

COMPILED = True

cdef unsigned long long GOLDEN = 0x9E3779B97F4A7C15
cdef unsigned long long MIX1 = 0xBF58476D1CE4E5B9
cdef unsigned long long MIX2 = 0x94D049BB133111EB
cdef double INV53 = 1.0 / 9007199254740992.0


cdef inline double _sigmoid(double x) nogil:
    cdef double z
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    z = exp(x)
    return z / (1.0 + z)


cdef inline double _midpoint(double lo, double hi) nogil:
    cdef double thr = 0.5 * (lo + hi)
    if thr >= hi:
        thr = lo
    return thr


def scan_split_gini(double[::1] values, long long[::1] labels,
                    int n_classes, long long min_leaf):
    cdef Py_ssize_t n = values.shape[0]
    if n < 2 * min_leaf:
        return -1, 0.0, 0.0
    cdef long long* left = <long long*>calloc(n_classes, sizeof(long long))
    cdef long long* total = <long long*>calloc(n_classes, sizeof(long long))
    if left == NULL or total == NULL:
        free(left)
        free(total)
        raise MemoryError()
    cdef Py_ssize_t i, best_pos = -1
    cdef long long k, nl, nr, c
    cdef long long sumsq_left = 0, sumsq_right = 0, parent_sumsq = 0
    cdef double parent, gain, best_gain = -INFINITY
    with nogil:
        for i in range(n):
            total[labels[i]] += 1
        for k in range(n_classes):
            parent_sumsq += total[k] * total[k]
        sumsq_right = parent_sumsq
        parent = <double>parent_sumsq / <double>n
        for i in range(n - 1):
            k = labels[i]
            c = left[k]
            sumsq_left += 2 * c + 1
            left[k] = c + 1
            c = total[k] - left[k] + 1  # right count before the move
            sumsq_right -= 2 * c - 1
            nl = i + 1
            nr = n - nl
            if nl >= min_leaf and nr >= min_leaf and values[i] < values[i + 1]:
                gain = <double>sumsq_left / <double>nl \
                    + <double>sumsq_right / <double>nr - parent
                if gain > best_gain:
                    best_gain = gain
                    best_pos = i
    free(left)
    free(total)
    if best_pos < 0:
        return -1, 0.0, 0.0
    return best_pos, _midpoint(values[best_pos], values[best_pos + 1]), \
        best_gain


def scan_split_mse(double[::1] values, double[::1] targets,
                   long long min_leaf):
    cdef Py_ssize_t n = values.shape[0]
    if n < 2 * min_leaf:
        return -1, 0.0, 0.0
    cdef Py_ssize_t i, best_pos = -1
    cdef double s_total = 0.0, s_left = 0.0, s_right, parent
    cdef long long nl, nr
    cdef double gain, best_gain = -INFINITY
    with nogil:
        for i in range(n):
            s_total += targets[i]
        parent = s_total * s_total / <double>n
        for i in range(n - 1):
            s_left += targets[i]
            s_right = s_total - s_left
            nl = i + 1
            nr = n - nl
            if nl >= min_leaf and nr >= min_leaf and values[i] < values[i + 1]:
                gain = s_left * s_left / <double>nl \
                    + s_right * s_right / <double>nr - parent
                if gain > best_gain:
                    best_gain = gain
                    best_pos = i
    if best_pos < 0:
        return -1, 0.0, 0.0
    return best_pos, _midpoint(values[best_pos], values[best_pos + 1]), \
        best_gain


def scan_split_xgb(double[::1] values, double[::1] grad, double[::1] hess,
                   double lam, double gamma, long long min_leaf):
    cdef Py_ssize_t n = values.shape[0]
    if n < 2 * min_leaf:
        return -1, 0.0, 0.0
    cdef Py_ssize_t i, best_pos = -1
    cdef double g_total = 0.0, h_total = 0.0
    cdef double gl = 0.0, hl = 0.0, gr, hr, parent
    cdef long long nl, nr
    cdef double gain, best_gain = -INFINITY
    with nogil:
        for i in range(n):
            g_total += grad[i]
        for i in range(n):
            h_total += hess[i]
        parent = g_total * g_total / (h_total + lam)
        for i in range(n - 1):
            gl += grad[i]
            hl += hess[i]
            gr = g_total - gl
            hr = h_total - hl
            nl = i + 1
            nr = n - nl
            if nl >= min_leaf and nr >= min_leaf and values[i] < values[i + 1]:
                gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam)
                              - parent) - gamma
                if gain > best_gain:
                    best_gain = gain
                    best_pos = i
    if best_pos < 0:
        return -1, 0.0, 0.0
    return best_pos, _midpoint(values[best_pos], values[best_pos + 1]), \
        best_gain


def sgns_train(double[:, ::1] syn0, double[:, ::1] syn1, int[:, ::1] walks,
               Py_ssize_t walk_lo, Py_ssize_t walk_hi, int window,
               int negative, double[::1] cum_table, double alpha0,
               double alpha_min, long long step, long long total_steps,
               unsigned long long rng_state):
    """Skip-gram negative-sampling pass over walks[walk_lo:walk_hi].

    Releases the GIL, so shards may run hogwild on shared vectors from
    python threads. Returns the advanced (rng_state, step).
    """
    cdef Py_ssize_t L = walks.shape[1]
    cdef Py_ssize_t dim = syn0.shape[1]
    cdef Py_ssize_t n_nodes = cum_table.shape[0]
    cdef double total_w = cum_table[n_nodes - 1]
    cdef double* neu = <double*>malloc(dim * sizeof(double))
    if neu == NULL:
        raise MemoryError()
    cdef Py_ssize_t w, i, j, t, k, lo, hi, wl, blo, bhi, bmid
    cdef Py_ssize_t center, context, target
    cdef int d
    cdef double alpha, label, f, g, r
    cdef double* u
    cdef double* v
    cdef unsigned long long z
    with nogil:
        for w in range(walk_lo, walk_hi):
            wl = L
            for t in range(L):
                if walks[w, t] < 0:
                    wl = t
                    break
            for i in range(wl):
                center = walks[w, i]
                alpha = alpha0 * (1.0 - <double>step / <double>total_steps)
                if alpha < alpha_min:
                    alpha = alpha_min
                step += 1
                u = &syn0[center, 0]
                lo = i - window
                if lo < 0:
                    lo = 0
                hi = i + window + 1
                if hi > wl:
                    hi = wl
                for j in range(lo, hi):
                    if j == i:
                        continue
                    context = walks[w, j]
                    for k in range(dim):
                        neu[k] = 0.0
                    for d in range(negative + 1):
                        if d == 0:
                            target = context
                            label = 1.0
                        else:
                            rng_state = rng_state + GOLDEN
                            z = rng_state
                            z = (z ^ (z >> 30)) * MIX1
                            z = (z ^ (z >> 27)) * MIX2
                            z = z ^ (z >> 31)
                            r = <double>(z >> 11) * INV53 * total_w
                            blo = 0
                            bhi = n_nodes
                            while blo < bhi:
                                bmid = (blo + bhi) >> 1
                                if cum_table[bmid] > r:
                                    bhi = bmid
                                else:
                                    blo = bmid + 1
                            target = blo
                            if target >= n_nodes:
                                target = n_nodes - 1
                            if target == context:
                                continue
                            label = 0.0
                        v = &syn1[target, 0]
                        f = 0.0
                        for k in range(dim):
                            f += u[k] * v[k]
                        g = (label - _sigmoid(f)) * alpha
                        for k in range(dim):
                            neu[k] += g * v[k]
                            v[k] += g * u[k]
                    for k in range(dim):
                        u[k] += neu[k]
    free(neu)
    return rng_state, step
