# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for SLIM, BPR and the CFGAN optimizer.

All functions mutate their array arguments in place and mirror the
reference implementations in ``_fallback.py`` operation for operation.
"""

cimport cython
from libc.math cimport fabs, exp, log1p, sqrt, sqrtf


def elastic_net_cd(const long[::1] col_ptr, const long[::1] col_rows,
                   const double[::1] col_sq, const long[::1] cand,
                   double[::1] w, double[::1] resid,
                   double l1_pen, double l2_pen, int max_iter, double tol):
    """Non-negative elastic-net coordinate descent on a binary design matrix.

    Minimizes 0.5*||resid||^2 + l1_pen*|w|_1 + 0.5*l2_pen*|w|^2 over the
    candidate columns ``cand`` (CSC pointers ``col_ptr``/``col_rows``), with
    ``resid = y - X[:, cand] @ w`` maintained incrementally.
    Returns the number of sweeps and whether the tolerance was met.
    """
    cdef Py_ssize_t n_cand = cand.shape[0]
    cdef Py_ssize_t t, k, p, col
    cdef double rho, w_old, w_new, delta, max_delta, max_w, denom
    cdef int it = 0
    cdef bint converged = False
    while it < max_iter:
        it += 1
        max_delta = 0.0
        max_w = 0.0
        for t in range(n_cand):
            col = cand[t]
            if col_sq[col] == 0.0:
                continue
            w_old = w[t]
            rho = 0.0
            for p in range(col_ptr[col], col_ptr[col + 1]):
                rho += resid[col_rows[p]]
            rho += col_sq[col] * w_old
            denom = col_sq[col] + l2_pen
            w_new = (rho - l1_pen) / denom
            if w_new < 0.0:
                w_new = 0.0
            delta = w_new - w_old
            if delta != 0.0:
                for p in range(col_ptr[col], col_ptr[col + 1]):
                    resid[col_rows[p]] -= delta
                w[t] = w_new
            if fabs(delta) > max_delta:
                max_delta = fabs(delta)
            if w_new > max_w:
                max_w = w_new
        if max_w == 0.0 or max_delta <= tol * max_w:
            converged = True
            break
    return it, converged


def bpr_epoch(double[:, ::1] P, double[:, ::1] Q,
              const long[::1] users, const long[::1] pos, const long[::1] neg,
              double lr, double reg):
    """One pass of BPR stochastic gradient steps over pre-drawn triples.

    Returns the summed BPR log-loss of the visited triples (before update).
    """
    cdef Py_ssize_t n = users.shape[0]
    cdef Py_ssize_t k_dim = P.shape[1]
    cdef Py_ssize_t s, f, u, i, j
    cdef double x, z, loss = 0.0, pu, qi, qj
    for s in range(n):
        u = users[s]
        i = pos[s]
        j = neg[s]
        x = 0.0
        for f in range(k_dim):
            x += P[u, f] * (Q[i, f] - Q[j, f])
        if x > 0:
            loss += log1p(exp(-x))
            z = exp(-x) / (1.0 + exp(-x))
        else:
            loss += -x + log1p(exp(x))
            z = 1.0 / (1.0 + exp(x))
        for f in range(k_dim):
            pu = P[u, f]
            qi = Q[i, f]
            qj = Q[j, f]
            P[u, f] = pu + lr * (z * (qi - qj) - reg * pu)
            Q[i, f] = qi + lr * (z * pu - reg * qi)
            Q[j, f] = qj + lr * (-z * pu - reg * qj)
    return loss


def adam_update(cython.floating[::1] p, const cython.floating[::1] g,
                cython.floating[::1] m, cython.floating[::1] v,
                double l2, double b1, double b2, double eps, double step_size, double v_scale):
    """Fused weight decay plus one bias-corrected ADAM update of a flat parameter.

    Scalars are rounded to the array precision first and every operation is
    rounded separately, matching NumPy's in-place sequence bit for bit; only
    the ``v_scale`` product is formed in double, as NumPy does for a float64
    scalar.
    """
    cdef Py_ssize_t k, n = p.shape[0]
    cdef cython.floating gk, t
    cdef cython.floating c_l2 = <cython.floating>l2
    cdef cython.floating c_b1 = <cython.floating>b1
    cdef cython.floating c_1b1 = <cython.floating>(1.0 - b1)
    cdef cython.floating c_b2 = <cython.floating>b2
    cdef cython.floating c_1b2 = <cython.floating>(1.0 - b2)
    cdef cython.floating c_eps = <cython.floating>eps
    cdef cython.floating c_step = <cython.floating>step_size
    for k in range(n):
        gk = g[k]
        if l2 != 0.0:
            t = c_l2 * p[k]
            gk = gk + t
        t = c_1b1 * gk
        m[k] = m[k] * c_b1
        m[k] = m[k] + t
        t = gk * gk
        t = t * c_1b2
        v[k] = v[k] * c_b2
        v[k] = v[k] + t
        if cython.floating is float:
            t = sqrtf(v[k])
        else:
            t = sqrt(v[k])
        t = <cython.floating>(<double>t * v_scale)
        t = t + c_eps
        t = m[k] / t
        t = t * c_step
        p[k] = p[k] - t
