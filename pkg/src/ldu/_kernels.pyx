# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled training kernel: forward, backprop and optimiser steps in C.

Same contract as ``ldu._fallback``.  Dense products go through BLAS dgemm
(scipy's Cython bindings); everything else is plain loops, so one training
step makes no Python calls.  Row-major (n, d) arrays are passed to the
column-major BLAS as their (d, n) transposes.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt, pow, isfinite
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

NAME = "cython"


cdef struct Net:
    int L
    int* dims        # L + 1 widths
    int* acts        # L activation codes
    double** W       # (dims[l+1], dims[l]) row-major
    double** b
    double** gW
    double** gb
    double** H       # H[l]: (batch, dims[l]) layer inputs / outputs
    double** D       # D[l]: (batch, dims[l]) loss derivative w.r.t. H[l]


cdef inline void _gemm(char ta, char tb, int m, int n, int k, double* A, int lda,
                       double* B, int ldb, double* C, int ldc) noexcept nogil:
    cdef double one = 1.0
    cdef double zero = 0.0
    dgemm(&ta, &tb, &m, &n, &k, &one, A, &lda, B, &ldb, &zero, C, &ldc)


cdef double* _ptr(object arr) except NULL:
    cdef cnp.ndarray a = <cnp.ndarray> arr
    if not (a.dtype == np.float64 and a.flags["C_CONTIGUOUS"]):
        raise ValueError("parameter arrays must be C-contiguous float64")
    return <double*> cnp.PyArray_DATA(a)


cdef int _alloc(Net* net, list weights, list biases, list acts, list grad_w,
                list grad_b, int batch) except -1:
    cdef int L = len(weights)
    cdef int l
    net.L = L
    net.dims = <int*> malloc((L + 1) * sizeof(int))
    net.acts = <int*> malloc(L * sizeof(int))
    net.W = <double**> malloc(L * sizeof(double*))
    net.b = <double**> malloc(L * sizeof(double*))
    net.gW = <double**> malloc(L * sizeof(double*))
    net.gb = <double**> malloc(L * sizeof(double*))
    net.H = <double**> malloc((L + 1) * sizeof(double*))
    net.D = <double**> malloc((L + 1) * sizeof(double*))
    for l in range(L + 1):
        net.H[l] = NULL
        net.D[l] = NULL
    net.dims[0] = weights[0].shape[1]
    for l in range(L):
        net.dims[l + 1] = weights[l].shape[0]
        net.acts[l] = acts[l]
        net.W[l] = _ptr(weights[l])
        net.b[l] = _ptr(biases[l])
        net.gW[l] = _ptr(grad_w[l])
        net.gb[l] = _ptr(grad_b[l])
    for l in range(L + 1):
        net.H[l] = <double*> malloc(batch * net.dims[l] * sizeof(double))
        net.D[l] = <double*> malloc(batch * net.dims[l] * sizeof(double))
    return 0


cdef void _release(Net* net) noexcept:
    cdef int l
    for l in range(net.L + 1):
        free(net.H[l])
        free(net.D[l])
    free(net.dims)
    free(net.acts)
    free(net.W)
    free(net.b)
    free(net.gW)
    free(net.gb)
    free(net.H)
    free(net.D)


cdef double _step(Net* net, int nb, const cnp.int64_t* targets, double alpha, int defer) noexcept nogil:
    """Forward + backward on the batch already copied into H[0]."""
    cdef int L = net.L
    cdef int l, i, j, din, dout, J, t
    cdef double* h
    cdef double* bias
    cdef double* z
    cdef double* d
    cdef double m, s, lse, a, total, p

    # forward
    for l in range(L):
        din = net.dims[l]
        dout = net.dims[l + 1]
        _gemm(b'T', b'N', dout, nb, din, net.W[l], din, net.H[l], din, net.H[l + 1], dout)
        h = net.H[l + 1]
        bias = net.b[l]
        for i in range(nb):
            for j in range(dout):
                h[i * dout + j] += bias[j]
        if net.acts[l] == 1:
            for i in range(nb * dout):
                h[i] = 1.0 / (1.0 + exp(-h[i]))

    # loss and output delta
    J = net.dims[L]
    a = alpha if defer else 0.0
    total = 0.0
    for i in range(nb):
        z = net.H[L] + i * J
        d = net.D[L] + i * J
        t = <int> targets[i]
        m = z[0]
        for j in range(1, J):
            if z[j] > m:
                m = z[j]
        s = 0.0
        for j in range(J):
            s += exp(z[j] - m)
        lse = m + log(s)
        p = -z[t] + (1.0 + a) * lse
        if defer:
            p -= a * z[J - 1]
        total += p
        for j in range(J):
            d[j] = (1.0 + a) * exp(z[j] - lse)
        d[t] -= 1.0
        if defer:
            d[J - 1] -= a
        for j in range(J):
            d[j] /= nb

    # backward
    for l in range(L - 1, -1, -1):
        din = net.dims[l]
        dout = net.dims[l + 1]
        d = net.D[l + 1]
        h = net.H[l + 1]
        if net.acts[l] == 1:
            for i in range(nb * dout):
                d[i] = d[i] * (h[i] * (1.0 - h[i]))
        _gemm(b'N', b'T', din, dout, nb, net.H[l], din, d, dout, net.gW[l], din)
        for j in range(dout):
            net.gb[l][j] = 0.0
        for i in range(nb):
            for j in range(dout):
                net.gb[l][j] += d[i * dout + j]
        if l > 0:
            _gemm(b'N', b'N', din, nb, dout, net.W[l], din, d, dout, net.D[l], din)
    return total / nb


cdef void _gather(Net* net, const double* x, const cnp.int64_t* rows, int nb) noexcept nogil:
    cdef int d0 = net.dims[0]
    cdef int i
    for i in range(nb):
        memcpy(net.H[0] + i * d0, x + rows[i] * d0, d0 * sizeof(double))


def loss_and_grads(list weights, list biases, list acts, x, targets, double alpha,
                   bint defer, list grad_w, list grad_b):
    """Fill ``grad_w``/``grad_b`` in place and return the mean loss."""
    cdef cnp.ndarray xa = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray ta = np.ascontiguousarray(targets, dtype=np.int64)
    cdef int nb = xa.shape[0]
    cdef cnp.ndarray rows = np.arange(nb, dtype=np.int64)
    cdef Net net
    cdef double loss
    _alloc(&net, weights, biases, acts, grad_w, grad_b, nb)
    try:
        _gather(&net, <double*> cnp.PyArray_DATA(xa), <cnp.int64_t*> cnp.PyArray_DATA(rows), nb)
        loss = _step(&net, nb, <cnp.int64_t*> cnp.PyArray_DATA(ta), alpha, defer)
    finally:
        _release(&net)
    return loss


cdef void _update(double* p, double* g, double* m, double* v, int n, int optimizer,
                  double lr, double wd, double beta1, double beta2, double eps,
                  double c1, double c2) noexcept nogil:
    cdef int i
    cdef double gi, mhat, vhat
    for i in range(n):
        gi = g[i]
        if wd != 0.0:
            gi = gi + wd * p[i]
        if optimizer == 0:
            p[i] -= lr * gi
        else:
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi
            v[i] = beta2 * v[i] + (1.0 - beta2) * (gi * gi)
            mhat = m[i] / c1
            vhat = v[i] / c2
            p[i] -= lr * mhat / (sqrt(vhat) + eps)


def train_epochs(list weights, list biases, list acts, x, targets, double alpha,
                 bint defer, orders, int batch_size, int optimizer, double lr,
                 double weight_decay, double beta1, double beta2, double eps,
                 list m_w, list m_b, list v_w, list v_b, long step0, losses):
    """Run every epoch in ``orders``; see ``ldu._fallback.train_epochs``."""
    cdef cnp.ndarray xa = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray ta = np.ascontiguousarray(targets, dtype=np.int64)
    cdef cnp.ndarray oa = np.ascontiguousarray(orders, dtype=np.int64)
    cdef double[::1] loss_out = losses
    cdef int n = xa.shape[0]
    cdef int n_epochs = oa.shape[0]
    cdef int L = len(weights)
    cdef int batch = batch_size if batch_size < n else n
    cdef list grad_w = [np.empty_like(w) for w in weights]
    cdef list grad_b = [np.empty_like(bb) for bb in biases]
    cdef cnp.ndarray tb = np.empty(batch, dtype=np.int64)
    cdef double* xp = <double*> cnp.PyArray_DATA(xa)
    cdef cnp.int64_t* tp = <cnp.int64_t*> cnp.PyArray_DATA(ta)
    cdef cnp.int64_t* op = <cnp.int64_t*> cnp.PyArray_DATA(oa)
    cdef cnp.int64_t* tbp = <cnp.int64_t*> cnp.PyArray_DATA(tb)
    cdef double** mw = <double**> malloc(L * sizeof(double*))
    cdef double** mb = <double**> malloc(L * sizeof(double*))
    cdef double** vw = <double**> malloc(L * sizeof(double*))
    cdef double** vb = <double**> malloc(L * sizeof(double*))
    cdef Net net
    cdef int e, start, nb, i, l, step = 0, failed = -1
    cdef long t
    cdef cnp.int64_t* rows
    cdef double loss, c1, c2
    try:
        for l in range(L):
            mw[l] = _ptr(m_w[l])
            mb[l] = _ptr(m_b[l])
            vw[l] = _ptr(v_w[l])
            vb[l] = _ptr(v_b[l])
        _alloc(&net, weights, biases, acts, grad_w, grad_b, batch)
        try:
            with nogil:
                for e in range(n_epochs):
                    start = 0
                    while start < n:
                        nb = batch if start + batch <= n else n - start
                        rows = op + e * n + start
                        _gather(&net, xp, rows, nb)
                        for i in range(nb):
                            tbp[i] = tp[rows[i]]
                        loss = _step(&net, nb, tbp, alpha, defer)
                        loss_out[step] = loss
                        if not isfinite(loss):
                            failed = step
                            break
                        t = step0 + step + 1
                        c1 = 1.0 - pow(beta1, <double> t)
                        c2 = 1.0 - pow(beta2, <double> t)
                        for l in range(L):
                            _update(net.W[l], net.gW[l], mw[l], vw[l],
                                    net.dims[l] * net.dims[l + 1], optimizer, lr,
                                    weight_decay, beta1, beta2, eps, c1, c2)
                            _update(net.b[l], net.gb[l], mb[l], vb[l], net.dims[l + 1],
                                    optimizer, lr, weight_decay, beta1, beta2, eps, c1, c2)
                        step += 1
                        start += batch
                    if failed >= 0:
                        break
        finally:
            _release(&net)
    finally:
        free(mw)
        free(mb)
        free(vw)
        free(vb)
    return failed
