# cython: language_level=3
"""Compiled hot kernels; line-for-line twin of ``_pykernel``.

Uniforms come from the generator's ``bitgen_t.next_double``, the same source
``Generator.random()`` reads, so both backends consume identical streams.
"""

import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, log, sqrt, floor, fabs, INFINITY, NAN, isfinite, pow
from numpy.random cimport bitgen_t

cnp.import_array()

cdef enum:
    MAXN = 4
    MAXD = 3

cdef int REASON_CONVERGED = 0
cdef int REASON_MAX_ITERATIONS = 1
cdef int REASON_DEGENERATE = 2
cdef int MAX_DEGENERATE_REDRAWS = 100
cdef double POISSON_INVERSION_CUTOFF = 30.0
cdef double STALL_RTOL = 4.0 * 2.0**-52

cdef double[10] LOGGAM_COEF = [
    8.333333333333333e-02,
    -2.777777777777778e-03,
    7.936507936507937e-04,
    -5.952380952380952e-04,
    8.417508417508418e-04,
    -1.917526917526918e-03,
    6.410256410256410e-03,
    -2.955065359477124e-02,
    1.796443723688307e-01,
    -1.39243221690590e00,
]
cdef double HALF_LOG_2PI = 0.5 * log(2.0 * 3.141592653589793)


cdef bitgen_t *_bitgen(object gen) except NULL:
    capsule = gen.bit_generator.capsule
    return <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double _uniform(bitgen_t *rng) noexcept nogil:
    return rng.next_double(rng.state)


cdef double c_loggam(double x) noexcept nogil:
    cdef double x0, x2, gl0, gl
    cdef int n = 0, k
    if x == 1.0 or x == 2.0:
        return 0.0
    x0 = x
    if x < 7.0:
        n = <int> (7.0 - x)
        x0 = x + n
    x2 = 1.0 / (x0 * x0)
    gl0 = LOGGAM_COEF[9]
    for k in range(8, -1, -1):
        gl0 = gl0 * x2 + LOGGAM_COEF[k]
    gl = gl0 / x0 + HALF_LOG_2PI + (x0 - 0.5) * log(x0) - x0
    if x < 7.0:
        for k in range(n):
            x0 -= 1.0
            gl -= log(x0)
    return gl


def loggam(double x):
    return c_loggam(x)


cdef long _poisson_inversion(bitgen_t *rng, double lam) noexcept nogil:
    cdef double u = _uniform(rng)
    cdef long k = 0
    cdef double p = exp(-lam)
    cdef double cdf = p
    while u > cdf and p > 0.0:
        k += 1
        p = p * lam / k
        cdf += p
    return k


cdef long _poisson_ptrs(bitgen_t *rng, double lam) noexcept nogil:
    cdef double slam = sqrt(lam)
    cdef double loglam = log(lam)
    cdef double b = 0.931 + 2.53 * slam
    cdef double a = -0.059 + 0.02483 * b
    cdef double invalpha = 1.1239 + 1.1328 / (b - 3.4)
    cdef double vr = 0.9277 - 3.6224 / (b - 2.0)
    cdef double u, v, us, k
    while True:
        u = _uniform(rng) - 0.5
        v = _uniform(rng)
        us = 0.5 - fabs(u)
        k = floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return <long> k
        if k < 0.0 or (us < 0.013 and v > us):
            continue
        if (log(v) + log(invalpha) - log(a / (us * us) + b)) <= (
            -lam + k * loglam - c_loggam(k + 1.0)
        ):
            return <long> k


cdef long c_poisson(bitgen_t *rng, double lam) noexcept nogil:
    if lam <= 0.0:
        return 0
    if lam < POISSON_INVERSION_CUTOFF:
        return _poisson_inversion(rng, lam)
    return _poisson_ptrs(rng, lam)


def poisson(object gen, double lam):
    cdef bitgen_t *rng = _bitgen(gen)
    cdef long k
    with gen.bit_generator.lock, nogil:
        k = c_poisson(rng, lam)
    return k


def poisson_fill(object gen, const double[::1] means, double[::1] out):
    cdef bitgen_t *rng = _bitgen(gen)
    cdef Py_ssize_t i
    with gen.bit_generator.lock, nogil:
        for i in range(means.shape[0]):
            out[i] = <double> c_poisson(rng, means[i])


def poisson_array(object gen, double lam, Py_ssize_t size):
    out = np.empty(size, dtype=np.float64)
    cdef double[::1] view = out
    cdef bitgen_t *rng = _bitgen(gen)
    cdef Py_ssize_t i
    with gen.bit_generator.lock, nogil:
        for i in range(size):
            view[i] = <double> c_poisson(rng, lam)
    return out


cdef struct Geometry:
    int n
    int dim
    double X[MAXN][MAXD]
    double T[MAXD][MAXD]
    double alpha
    double guard
    double eps


cdef double _barycentric_min(Geometry *g, double *p) noexcept nogil:
    cdef double wmin = INFINITY
    cdef double total = 0.0
    cdef double w
    cdef int j, k
    for j in range(g.dim):
        w = 0.0
        for k in range(g.dim):
            w += g.T[j][k] * (p[k] - g.X[g.n - 1][k])
        total += w
        if w < wmin:
            wmin = w
    w = 1.0 - total
    if w < wmin:
        wmin = w
    return wmin


cdef bint _near_sensor(Geometry *g, double *p) noexcept nogil:
    cdef int i, k
    cdef double dist2, diff
    for i in range(g.n):
        dist2 = 0.0
        for k in range(g.dim):
            diff = g.X[i][k] - p[k]
            dist2 += diff * diff
        if sqrt(dist2) <= g.guard:
            return True
    return False


cdef void _sample_interior(bitgen_t *rng, Geometry *g, double *p) noexcept nogil:
    cdef double e[MAXN]
    cdef double total, w
    cdef int i, k
    while True:
        total = 0.0
        for i in range(g.n):
            e[i] = -log(1.0 - _uniform(rng))
            total += e[i]
        if not total > 0.0:
            continue
        for k in range(g.dim):
            p[k] = 0.0
        for i in range(g.n):
            w = e[i] / total
            for k in range(g.dim):
                p[k] += w * g.X[i][k]
        if _barycentric_min(g, p) > g.eps and not _near_sensor(g, p):
            return


cdef void _load_geometry(Geometry *g, const double[:, ::1] vertices, const double[:, ::1] tinv,
                         double alpha, double eps, double guard):
    cdef int i, k
    g.n = vertices.shape[0]
    g.dim = vertices.shape[1]
    if g.n != g.dim + 1 or g.dim < 1 or g.dim > MAXD:
        raise ValueError("kernel supports simplices in 1 to 3 dimensions")
    for i in range(g.n):
        for k in range(g.dim):
            g.X[i][k] = vertices[i, k]
    for i in range(g.dim):
        for k in range(g.dim):
            g.T[i][k] = tinv[i, k]
    g.alpha = alpha
    g.eps = eps
    g.guard = guard


def sample_interior(object gen, const double[:, ::1] vertices, const double[:, ::1] tinv,
                    double eps, double guard):
    cdef Geometry g
    _load_geometry(&g, vertices, tinv, 0.0, eps, guard)
    cdef bitgen_t *rng = _bitgen(gen)
    cdef double p[MAXD]
    with gen.bit_generator.lock, nogil:
        _sample_interior(rng, &g, p)
    return np.array([p[k] for k in range(g.dim)])


cdef bint _profile(Geometry *g, double *s, double S, double *y, double *J_out,
                   double *A_out, double *grad) noexcept nogil:
    cdef double d[MAXN]
    cdef double gw[MAXN]
    cdef double G = 0.0, A, J, z, coef, dist2, diff, di
    cdef int i, k
    for i in range(g.n):
        dist2 = 0.0
        for k in range(g.dim):
            diff = g.X[i][k] - y[k]
            dist2 += diff * diff
        di = sqrt(dist2)
        if di <= g.guard:
            return False
        d[i] = di
        gw[i] = exp(-g.alpha * di) / (di * di)
        G += gw[i]
    A = S / G
    J = 0.0
    for i in range(g.n):
        z = A * gw[i]
        if s[i] > 0.0:
            if z > 0.0:
                J += s[i] * log(z)
            else:
                J = -INFINITY
        J -= z
    if grad != NULL:
        for k in range(g.dim):
            grad[k] = 0.0
        for i in range(g.n):
            z = A * gw[i]
            coef = (s[i] - z) * (g.alpha + 2.0 / d[i]) / d[i]
            for k in range(g.dim):
                grad[k] += coef * (g.X[i][k] - y[k])
    J_out[0] = J
    A_out[0] = A
    return True


cdef bint _polish_step(Geometry *g, double *s, double S, double *y, double *grad,
                       double gnorm2, double t, double backtrack, int max_backtracks,
                       double *cand) noexcept nogil:
    cdef double gc[MAXD]
    cdef double trial[MAXD]
    cdef double phi, gc2, gs2, ts, Jj, Aj
    cdef int b, j
    cdef int dim = g.dim
    for b in range(max_backtracks):
        for j in range(dim):
            cand[j] = y[j] + t * grad[j]
        if _profile(g, s, S, cand, &Jj, &Aj, gc):
            phi = 0.0
            gc2 = 0.0
            for j in range(dim):
                phi += gc[j] * grad[j]
                gc2 += gc[j] * gc[j]
            if gnorm2 - phi > 0.0:
                ts = t * gnorm2 / (gnorm2 - phi)
                for j in range(dim):
                    trial[j] = y[j] + ts * grad[j]
                if _profile(g, s, S, trial, &Jj, &Aj, gc):
                    gs2 = 0.0
                    for j in range(dim):
                        gs2 += gc[j] * gc[j]
                    if gs2 < gnorm2:
                        for j in range(dim):
                            cand[j] = trial[j]
                        return True
            if gc2 < gnorm2:
                return True
        t *= backtrack
    return False


cdef double _draw_counts(bitgen_t *rng, double *means, double *s, int n) noexcept nogil:
    cdef int attempt, i
    cdef double S
    for attempt in range(MAX_DEGENERATE_REDRAWS):
        S = 0.0
        for i in range(n):
            s[i] = <double> c_poisson(rng, means[i])
            S += s[i]
        if S > 0.0:
            return S
    return 0.0


def ascend(
    const double[:, ::1] vertices,
    const double[:, ::1] tinv,
    double alpha,
    counts,
    means,
    bint resample,
    double step_size,
    double initial_step_fraction,
    double gain_exponent,
    double armijo,
    double backtrack,
    int max_backtracks,
    int max_iterations,
    double gradient_tolerance,
    double step_tolerance,
    double diameter,
    double guard,
    double eps,
    y0,
    object gen,
):
    """Compiled twin of ``_pykernel.ascend``; same arguments and returns."""
    cdef Geometry g
    _load_geometry(&g, vertices, tinv, alpha, eps, guard)
    cdef int n = g.n, dim = g.dim
    cdef Py_ssize_t cap = max_iterations + 1
    ys_arr = np.empty((cap, dim))
    Js_arr = np.empty(cap)
    As_arr = np.empty(cap)
    gns_arr = np.empty(cap)
    escs_arr = np.zeros(cap, dtype=np.uint8)
    cdef double[:, ::1] ys = ys_arr
    cdef double[::1] Js = Js_arr
    cdef double[::1] As = As_arr
    cdef double[::1] gns = gns_arr
    cdef unsigned char[::1] escs = escs_arr

    cdef double y[MAXD]
    cdef double cand[MAXD]
    cdef double grad[MAXD]
    cdef double s[MAXN]
    cdef double mv[MAXN]
    cdef bint have_means = means is not None
    cdef bint stochastic = have_means and resample
    cdef int i, j, b
    for j in range(dim):
        y[j] = y0[j]
    cdef bitgen_t *rng = _bitgen(gen)
    cdef double S = 0.0
    if have_means:
        for i in range(n):
            mv[i] = means[i]
    else:
        for i in range(n):
            s[i] = counts[i]
            S += s[i]

    cdef int escaped = 0
    cdef bint small_step = False, polish = False, ok, okc, clipped, short
    cdef double A_hat = NAN, J = 0.0, Jc = 0.0, Ajunk = 0.0
    cdef double gnorm2, gnorm, t, disp2, diff, reach
    cdef int reason = REASON_MAX_ITERATIONS
    cdef Py_ssize_t count = 0, k

    with gen.bit_generator.lock, nogil:
        if have_means:
            S = _draw_counts(rng, mv, s, n)
        for k in range(cap):
            if k > 0 and stochastic:
                S = _draw_counts(rng, mv, s, n)
                polish = False
            if not S > 0.0:
                for j in range(dim):
                    ys[count, j] = y[j]
                Js[count] = NAN
                As[count] = NAN
                gns[count] = NAN
                escs[count] = escaped
                count += 1
                reason = REASON_DEGENERATE
                break
            _profile(&g, s, S, y, &J, &A_hat, grad)
            gnorm2 = 0.0
            for j in range(dim):
                gnorm2 += grad[j] * grad[j]
            gnorm = sqrt(gnorm2)
            for j in range(dim):
                ys[count, j] = y[j]
            Js[count] = J
            As[count] = A_hat
            gns[count] = gnorm
            escs[count] = escaped
            count += 1
            if small_step or gnorm == 0.0 or (
                isfinite(J) and gnorm * diameter < gradient_tolerance * fabs(J)
            ):
                reason = REASON_CONVERGED
                break
            if k == max_iterations:
                break

            ok = False
            clipped = False
            reach = initial_step_fraction * diameter
            if stochastic:
                reach = reach / pow(k + 1.0, gain_exponent)
            if step_size > 0.0:
                for j in range(dim):
                    cand[j] = y[j] + step_size * grad[j]
                ok = not _near_sensor(&g, cand)
            elif not polish:
                t = reach / gnorm
                for b in range(max_backtracks):
                    for j in range(dim):
                        cand[j] = y[j] + t * grad[j]
                    okc = _profile(&g, s, S, cand, &Jc, &Ajunk, NULL)
                    if okc and Jc >= J + armijo * t * gnorm2:
                        if _barycentric_min(&g, cand) > g.eps:
                            ok = True
                            polish = Jc - J <= STALL_RTOL * fabs(J)
                            break
                        clipped = True
                    t *= backtrack
                polish = polish or not ok
            if step_size <= 0.0 and polish and not ok:
                ok = _polish_step(&g, s, S, y, grad, gnorm2, reach / gnorm,
                                  backtrack, max_backtracks, cand)
            if not ok and step_size <= 0.0:
                for j in range(dim):
                    cand[j] = y[j]
                ok = True
            disp2 = 0.0
            for j in range(dim):
                diff = cand[j] - y[j]
                disp2 += diff * diff
            short = sqrt(disp2) < step_tolerance * diameter
            if ok and not (clipped and short) and _barycentric_min(&g, cand) > g.eps:
                escaped = 0
            else:
                _sample_interior(rng, &g, cand)
                escaped = 1
            small_step = not stochastic and escaped == 0 and short and (disp2 == 0.0 or not polish)
            for j in range(dim):
                y[j] = cand[j]

    return (ys_arr[:count].copy(), Js_arr[:count].copy(), As_arr[:count].copy(),
            gns_arr[:count].copy(), escs_arr[:count].copy(), reason)
