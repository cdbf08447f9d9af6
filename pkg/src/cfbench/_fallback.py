"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and update order; used when the extension is not built.
"""

import math

import numpy as np


def elastic_net_cd(col_ptr, col_rows, col_sq, cand, w, resid,
                   l1_pen, l2_pen, max_iter, tol):
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        max_delta = 0.0
        max_w = 0.0
        for t in range(len(cand)):
            col = cand[t]
            sq = col_sq[col]
            if sq == 0.0:
                continue
            lo, hi = col_ptr[col], col_ptr[col + 1]
            w_old = w[t]
            rho = 0.0
            for p in range(lo, hi):
                rho += resid[col_rows[p]]
            rho += sq * w_old
            w_new = (rho - l1_pen) / (sq + l2_pen)
            if w_new < 0.0:
                w_new = 0.0
            delta = w_new - w_old
            if delta != 0.0:
                for p in range(lo, hi):
                    resid[col_rows[p]] -= delta
                w[t] = w_new
            if abs(delta) > max_delta:
                max_delta = abs(delta)
            if w_new > max_w:
                max_w = w_new
        if max_w == 0.0 or max_delta <= tol * max_w:
            converged = True
            break
    return it, converged


def bpr_epoch(P, Q, users, pos, neg, lr, reg):
    k_dim = P.shape[1]
    loss = 0.0
    for s in range(len(users)):
        u, i, j = users[s], pos[s], neg[s]
        pu_row, qi_row, qj_row = P[u], Q[i], Q[j]
        x = 0.0
        for f in range(k_dim):
            x += pu_row[f] * (qi_row[f] - qj_row[f])
        if x > 0:
            loss += math.log1p(math.exp(-x))
            z = math.exp(-x) / (1.0 + math.exp(-x))
        else:
            loss += -x + math.log1p(math.exp(x))
            z = 1.0 / (1.0 + math.exp(x))
        for f in range(k_dim):
            pu, qi, qj = pu_row[f], qi_row[f], qj_row[f]
            pu_row[f] = pu + lr * (z * (qi - qj) - reg * pu)
            qi_row[f] = qi + lr * (z * pu - reg * qi)
            qj_row[f] = qj + lr * (-z * pu - reg * qj)
    return loss


def adam_update(p, g, m, v, l2, b1, b2, eps, step_size, v_scale):
    if l2 != 0.0:
        g = g + l2 * p
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    tmp = np.square(g)
    tmp *= 1.0 - b2
    v += tmp
    # tmp <- sqrt(v_hat) + eps, then the update m_hat / tmp
    np.sqrt(v, out=tmp)
    tmp *= np.float64(v_scale)
    tmp += eps
    np.divide(m, tmp, out=tmp)
    tmp *= step_size
    p -= tmp
