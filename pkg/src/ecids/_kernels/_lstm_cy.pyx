# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Fused LSTM cell math (compiled twin of numpy_backend).

Inner loops run over contiguous gate blocks through raw pointers so gcc
can vectorize the exp/tanh calls via libmvec; formulas are identical to
the numpy backend and results agree to round-off.
"""

from libc.math cimport exp, expf, tanh, tanhf

ctypedef fused real:
    float
    double


cdef inline real _exp(real x) noexcept nogil:
    if real is float:
        return expf(x)
    else:
        return exp(x)


cdef inline real _tanh(real x) noexcept nogil:
    if real is float:
        return tanhf(x)
    else:
        return tanh(x)


cdef inline real _sigmoid(real x) noexcept nogil:
    # Stable form: exp never sees a positive argument, so it cannot
    # overflow (fast-math assumes finite intermediates).
    cdef real t = _exp(-x if x > 0 else x)
    if x >= 0:
        return <real>1.0 / (<real>1.0 + t)
    return t / (<real>1.0 + t)


def forward_cell(real[:, ::1] z, real[:, ::1] c_prev,
                 real[:, ::1] gates_out, real[:, ::1] c_out,
                 real[:, ::1] tanh_c_out, real[:, ::1] h_out):
    """Gate activations and state update for one timestep (see numpy twin)."""
    cdef Py_ssize_t batch = c_prev.shape[0]
    cdef Py_ssize_t hidden = c_prev.shape[1]
    cdef Py_ssize_t n, k
    cdef real one = <real>1.0
    cdef real *zr
    cdef real *gr
    cdef real *cp
    cdef real *cr
    cdef real *tc
    cdef real *hr
    with nogil:
        for n in range(batch):
            zr = &z[n, 0]
            gr = &gates_out[n, 0]
            cp = &c_prev[n, 0]
            cr = &c_out[n, 0]
            tc = &tanh_c_out[n, 0]
            hr = &h_out[n, 0]
            # sigmoid over the adjacent input+forget blocks, then cell, output.
            for k in range(2 * hidden):
                gr[k] = _sigmoid(zr[k])
            for k in range(2 * hidden, 3 * hidden):
                gr[k] = _tanh(zr[k])
            for k in range(3 * hidden, 4 * hidden):
                gr[k] = _sigmoid(zr[k])
            for k in range(hidden):
                cr[k] = gr[hidden + k] * cp[k] + gr[k] * gr[2 * hidden + k]
            for k in range(hidden):
                tc[k] = _tanh(cr[k])
            for k in range(hidden):
                hr[k] = gr[3 * hidden + k] * tc[k]


def backward_cell(real[:, ::1] dh, real[:, ::1] dc,
                  real[:, ::1] gates, real[:, ::1] c_prev,
                  real[:, ::1] tanh_c, real[:, ::1] dz_out):
    """Gradient of one timestep; ``dc`` is updated in place to the carry."""
    cdef Py_ssize_t batch = dc.shape[0]
    cdef Py_ssize_t hidden = dc.shape[1]
    cdef Py_ssize_t n, k
    cdef real one = <real>1.0
    cdef real i, f, g, o, tc_k, dht, dct
    cdef real *dhr
    cdef real *dcr
    cdef real *gr
    cdef real *cp
    cdef real *tcr
    cdef real *dzr
    with nogil:
        for n in range(batch):
            dhr = &dh[n, 0]
            dcr = &dc[n, 0]
            gr = &gates[n, 0]
            cp = &c_prev[n, 0]
            tcr = &tanh_c[n, 0]
            dzr = &dz_out[n, 0]
            for k in range(hidden):
                i = gr[k]
                f = gr[hidden + k]
                g = gr[2 * hidden + k]
                o = gr[3 * hidden + k]
                tc_k = tcr[k]
                dht = dhr[k]
                dct = dcr[k] + dht * o * (one - tc_k * tc_k)
                dzr[k] = dct * g * i * (one - i)
                dzr[hidden + k] = dct * cp[k] * f * (one - f)
                dzr[2 * hidden + k] = dct * i * (one - g * g)
                dzr[3 * hidden + k] = dht * tc_k * o * (one - o)
                dcr[k] = dct * f
