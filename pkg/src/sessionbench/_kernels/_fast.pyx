# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: LSTM sequence forward/backward and HVG construction.

Same contract as the pure backend (see pure.py). The recurrent matrix
products go through BLAS dgemm; gate math and the visibility stack run as
plain C loops.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp as c_exp
from libc.math cimport tanh as c_tanh
from libc.string cimport memcpy, memset
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef inline double c_sigmoid(double z) noexcept nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + c_exp(-z))
    e = c_exp(z)
    return e / (1.0 + e)


cdef inline void gemm_rm(char ta, char tb, int m, int n, int k, double alpha,
                         const double* a, int lda, const double* b, int ldb,
                         double beta, double* c, int ldc) noexcept nogil:
    # Row-major C(m,n) = alpha * op(A)(m,k) @ op(B)(k,n) + beta * C,
    # expressed as the column-major product C^T = op(B)^T op(A)^T.
    dgemm(&tb, &ta, &n, &m, &k, &alpha, <double*> b, &ldb, <double*> a, &lda,
          &beta, c, &ldc)


def lstm_forward(long[:, ::1] tokens, long[::1] lengths,
                 double[:, ::1] wx, double[:, ::1] wh, double[::1] bias):
    cdef Py_ssize_t B = tokens.shape[0]
    cdef Py_ssize_t T = tokens.shape[1]
    cdef Py_ssize_t H4 = wx.shape[0]
    cdef Py_ssize_t D = wx.shape[1]
    cdef Py_ssize_t H = H4 // 4

    wxT_np = np.ascontiguousarray(np.asarray(wx).T)
    whT_np = np.ascontiguousarray(np.asarray(wh).T)
    cdef double[:, ::1] wxT = wxT_np
    cdef double[:, ::1] whT = whT_np

    h_np = np.zeros((T, B, H))
    c_np = np.zeros((T, B, H))
    ig_np = np.zeros((T, B, H))
    fg_np = np.zeros((T, B, H))
    og_np = np.zeros((T, B, H))
    gg_np = np.zeros((T, B, H))
    tc_np = np.zeros((T, B, H))
    z_np = np.zeros((B, H4))
    hprev0_np = np.zeros((B, H))
    cprev0_np = np.zeros((B, H))

    cdef double[:, :, ::1] h = h_np
    cdef double[:, :, ::1] c = c_np
    cdef double[:, :, ::1] ig = ig_np
    cdef double[:, :, ::1] fg = fg_np
    cdef double[:, :, ::1] og = og_np
    cdef double[:, :, ::1] gg = gg_np
    cdef double[:, :, ::1] tc = tc_np
    cdef double[:, ::1] z = z_np
    cdef double[:, ::1] hprev0 = hprev0_np
    cdef double[:, ::1] cprev0 = cprev0_np

    cdef Py_ssize_t t, b, j
    cdef long tok
    cdef double iv, fv, ov, gv, cn, tcv
    cdef double* hprev_ptr
    cdef double* cprev_row
    cdef double* hprev_row

    with nogil:
        for t in range(T):
            # z = wxT[token] + bias (token clamped to 0 at masked steps)
            for b in range(B):
                tok = tokens[b, t] if t < lengths[b] else 0
                if tok < 0 or tok >= <long> D:
                    tok = 0
                memcpy(&z[b, 0], &wxT[tok, 0], H4 * sizeof(double))
                for j in range(H4):
                    z[b, j] += bias[j]
            # z += h_prev @ whT
            if t == 0:
                hprev_ptr = &hprev0[0, 0]
            else:
                hprev_ptr = &h[t - 1, 0, 0]
            gemm_rm(b'N', b'N', <int> B, <int> H4, <int> H, 1.0,
                    hprev_ptr, <int> H, &whT[0, 0], <int> H4, 1.0,
                    &z[0, 0], <int> H4)
            for b in range(B):
                if t == 0:
                    cprev_row = &cprev0[b, 0]
                    hprev_row = &hprev0[b, 0]
                else:
                    cprev_row = &c[t - 1, b, 0]
                    hprev_row = &h[t - 1, b, 0]
                if t < lengths[b]:
                    for j in range(H):
                        iv = c_sigmoid(z[b, j])
                        fv = c_sigmoid(z[b, H + j])
                        ov = c_sigmoid(z[b, 2 * H + j])
                        gv = c_tanh(z[b, 3 * H + j])
                        cn = fv * cprev_row[j] + iv * gv
                        tcv = c_tanh(cn)
                        ig[t, b, j] = iv
                        fg[t, b, j] = fv
                        og[t, b, j] = ov
                        gg[t, b, j] = gv
                        tc[t, b, j] = tcv
                        c[t, b, j] = cn
                        h[t, b, j] = ov * tcv
                else:
                    # pass-through: copy previous state, keep gate slots zero
                    memcpy(&h[t, b, 0], hprev_row, H * sizeof(double))
                    memcpy(&c[t, b, 0], cprev_row, H * sizeof(double))
    return h_np, c_np, ig_np, fg_np, og_np, gg_np, tc_np


def lstm_backward(long[:, ::1] tokens, long[::1] lengths, Py_ssize_t input_dim,
                  double[:, ::1] wh,
                  double[:, :, ::1] h, double[:, :, ::1] c,
                  double[:, :, ::1] ig, double[:, :, ::1] fg,
                  double[:, :, ::1] og, double[:, :, ::1] gg,
                  double[:, :, ::1] tc, double[:, :, ::1] d_h):
    cdef Py_ssize_t T = h.shape[0]
    cdef Py_ssize_t B = h.shape[1]
    cdef Py_ssize_t H = h.shape[2]
    cdef Py_ssize_t H4 = 4 * H
    cdef Py_ssize_t D = input_dim

    d_wxT_np = np.zeros((D, H4))
    d_wh_np = np.zeros((H4, H))
    d_bias_np = np.zeros(H4)
    dz_np = np.zeros((B, H4))
    dh_carry_np = np.zeros((B, H))
    dc_carry_np = np.zeros((B, H))

    cdef double[:, ::1] d_wxT = d_wxT_np
    cdef double[:, ::1] d_wh = d_wh_np
    cdef double[::1] d_bias = d_bias_np
    cdef double[:, ::1] dz = dz_np
    cdef double[:, ::1] dh_carry = dh_carry_np
    cdef double[:, ::1] dc_carry = dc_carry_np

    cdef Py_ssize_t t, b, j
    cdef long tok
    cdef double dh_tot, d_o, dc_new, d_i, d_f, d_g
    cdef double iv, fv, ov, gv, tcv, cprev

    with nogil:
        for t in range(T - 1, -1, -1):
            for b in range(B):
                if t < lengths[b]:
                    for j in range(H):
                        dh_tot = d_h[t, b, j] + dh_carry[b, j]
                        iv = ig[t, b, j]
                        fv = fg[t, b, j]
                        ov = og[t, b, j]
                        gv = gg[t, b, j]
                        tcv = tc[t, b, j]
                        cprev = c[t - 1, b, j] if t > 0 else 0.0
                        d_o = tcv * dh_tot
                        dc_new = ov * (1.0 - tcv * tcv) * dh_tot + dc_carry[b, j]
                        d_i = gv * dc_new
                        d_f = cprev * dc_new
                        d_g = iv * dc_new
                        dz[b, j] = iv * (1.0 - iv) * d_i
                        dz[b, H + j] = fv * (1.0 - fv) * d_f
                        dz[b, 2 * H + j] = ov * (1.0 - ov) * d_o
                        dz[b, 3 * H + j] = (1.0 - gv * gv) * d_g
                        dc_carry[b, j] = fv * dc_new
                        dh_carry[b, j] = 0.0
                else:
                    for j in range(H):
                        dh_carry[b, j] = d_h[t, b, j] + dh_carry[b, j]
                        dz[b, j] = 0.0
                        dz[b, H + j] = 0.0
                        dz[b, 2 * H + j] = 0.0
                        dz[b, 3 * H + j] = 0.0
            # dh_carry += dz @ wh
            gemm_rm(b'N', b'N', <int> B, <int> H, <int> H4, 1.0,
                    &dz[0, 0], <int> H4, &wh[0, 0], <int> H, 1.0,
                    &dh_carry[0, 0], <int> H)
            # d_wh += dz^T @ h_prev (h_prev is zero at t == 0)
            if t > 0:
                gemm_rm(b'T', b'N', <int> H4, <int> H, <int> B, 1.0,
                        &dz[0, 0], <int> H4, &h[t - 1, 0, 0], <int> H, 1.0,
                        &d_wh[0, 0], <int> H)
            for b in range(B):
                if t < lengths[b]:
                    tok = tokens[b, t]
                    if tok < 0 or tok >= <long> D:
                        tok = 0
                    for j in range(H4):
                        d_bias[j] += dz[b, j]
                        d_wxT[tok, j] += dz[b, j]
    return np.ascontiguousarray(d_wxT_np.T), d_wh_np, d_bias_np


def hvg_edges(values):
    """Strict-criterion horizontal visibility edges via a monotone stack."""
    cdef long[::1] x = np.ascontiguousarray(values, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0]
    # An HVG on n nodes has at most 2n - 3 edges.
    out_np = np.empty((max(2 * n, 1), 2), dtype=np.int64)
    cdef long[:, ::1] out = out_np
    stack_np = np.empty(n + 1, dtype=np.int64)
    cdef long[::1] stack = stack_np
    cdef Py_ssize_t top = 0  # stack size
    cdef Py_ssize_t j, m = 0
    cdef long vj
    with nogil:
        for j in range(n):
            vj = x[j]
            while top > 0 and x[stack[top - 1]] < vj:
                out[m, 0] = stack[top - 1]
                out[m, 1] = j
                m += 1
                top -= 1
            if top > 0:
                out[m, 0] = stack[top - 1]
                out[m, 1] = j
                m += 1
                if x[stack[top - 1]] == vj:
                    top -= 1
            stack[top] = j
            top += 1
    return out_np[:m].copy()


def window_codes(values):
    """Bit code of the optional edges in every 4 consecutive points."""
    cdef long[::1] x = np.ascontiguousarray(values, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0]
    if n < 4:
        return np.empty(0, dtype=np.int64)
    out_np = np.empty(n - 3, dtype=np.int64)
    cdef long[::1] out = out_np
    cdef Py_ssize_t i
    cdef long a, b, c, d, code
    with nogil:
        for i in range(n - 3):
            a = x[i]
            b = x[i + 1]
            c = x[i + 2]
            d = x[i + 3]
            code = 0
            if b < a and b < c:
                code += 1
            if c < b and c < d:
                code += 2
            if b < a and b < d and c < a and c < d:
                code += 4
            out[i] = code
    return out_np
