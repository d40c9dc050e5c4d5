"""Pure-Python hot kernels.

Reference implementation of the inner loops that ``_ckernel.pyx`` compiles.
Both consume uniforms from the same numpy bit generator (``next_double``),
evaluate the same floating-point expressions in the same order and so
produce identical streams of samples and iterates.  Any change here must be
mirrored in the Cython module.
"""

import math

import numpy as np

REASON_CONVERGED = 0
REASON_MAX_ITERATIONS = 1
REASON_DEGENERATE = 2

# consecutive all-zero measurements tolerated before a run is abandoned
MAX_DEGENERATE_REDRAWS = 100
# mean below which Poisson variates come from sequential-search inversion
POISSON_INVERSION_CUTOFF = 30.0
# an accepted line-search gain below this fraction of |J| is rounding noise
STALL_RTOL = 4.0 * 2.0**-52

_LOGGAM_COEF = (
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
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def loggam(x):
    """log Gamma(x) for x > 0 by the shifted Stirling series."""
    if x == 1.0 or x == 2.0:
        return 0.0
    x0 = x
    n = 0
    if x < 7.0:
        n = int(7.0 - x)
        x0 = x + n
    x2 = 1.0 / (x0 * x0)
    gl0 = _LOGGAM_COEF[9]
    for k in range(8, -1, -1):
        gl0 = gl0 * x2 + _LOGGAM_COEF[k]
    gl = gl0 / x0 + _HALF_LOG_2PI + (x0 - 0.5) * math.log(x0) - x0
    if x < 7.0:
        for _ in range(n):
            x0 -= 1.0
            gl -= math.log(x0)
    return gl


def _poisson_inversion(rng, lam):
    u = rng.random()
    k = 0
    p = math.exp(-lam)
    cdf = p
    while u > cdf and p > 0.0:
        k += 1
        p = p * lam / k
        cdf += p
    return k


def _poisson_ptrs(rng, lam):
    # transformed rejection with squeeze (Hormann 1993)
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = rng.random() - 0.5
        v = rng.random()
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return int(k)
        if k < 0.0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b)) <= (
            -lam + k * loglam - loggam(k + 1.0)
        ):
            return int(k)


def poisson(rng, lam):
    """One Poisson(lam) variate; ``rng`` is a ``numpy.random.Generator``."""
    if lam <= 0.0:
        return 0
    if lam < POISSON_INVERSION_CUTOFF:
        return _poisson_inversion(rng, lam)
    return _poisson_ptrs(rng, lam)


def poisson_fill(rng, means, out):
    for i in range(means.shape[0]):
        out[i] = poisson(rng, float(means[i]))


def poisson_array(rng, lam, size):
    out = np.empty(size, dtype=np.float64)
    for i in range(size):
        out[i] = poisson(rng, lam)
    return out


def _barycentric_min(tinv, base, p, dim):
    wmin = math.inf
    total = 0.0
    for j in range(dim):
        w = 0.0
        for k in range(dim):
            w += tinv[j][k] * (p[k] - base[k])
        total += w
        if w < wmin:
            wmin = w
    w = 1.0 - total
    if w < wmin:
        wmin = w
    return wmin


def _near_sensor(X, p, guard):
    for row in X:
        dist2 = 0.0
        for k in range(len(p)):
            diff = row[k] - p[k]
            dist2 += diff * diff
        if math.sqrt(dist2) <= guard:
            return True
    return False


def _sample_interior(rng, X, tinv, base, eps, guard):
    n = len(X)
    dim = n - 1
    while True:
        e = [0.0] * n
        total = 0.0
        for i in range(n):
            e[i] = -math.log(1.0 - rng.random())
            total += e[i]
        if not total > 0.0:
            continue
        p = [0.0] * dim
        for i in range(n):
            w = e[i] / total
            for k in range(dim):
                p[k] += w * X[i][k]
        if _barycentric_min(tinv, base, p, dim) > eps and not _near_sensor(X, p, guard):
            return p


def sample_interior(rng, vertices, tinv, eps, guard):
    X = vertices.tolist()
    return np.array(_sample_interior(rng, X, tinv.tolist(), X[-1], eps, guard))


def _profile(X, alpha, s, S, y, guard, grad):
    """Concentrated log-likelihood at y; fills ``grad`` when it is a list.

    Returns (ok, J, A_hat); ok is False inside the guard radius of a sensor.
    """
    n = len(X)
    dim = len(y)
    d = [0.0] * n
    g = [0.0] * n
    G = 0.0
    for i in range(n):
        dist2 = 0.0
        for k in range(dim):
            diff = X[i][k] - y[k]
            dist2 += diff * diff
        di = math.sqrt(dist2)
        if di <= guard:
            return False, 0.0, 0.0
        d[i] = di
        g[i] = math.exp(-alpha * di) / (di * di)
        G += g[i]
    A = S / G
    J = 0.0
    for i in range(n):
        z = A * g[i]
        if s[i] > 0.0:
            if z > 0.0:
                J += s[i] * math.log(z)
            else:
                J = -math.inf
        J -= z
    if grad is not None:
        for k in range(dim):
            grad[k] = 0.0
        for i in range(n):
            z = A * g[i]
            coef = (s[i] - z) * (alpha + 2.0 / d[i]) / d[i]
            for k in range(dim):
                grad[k] += coef * (X[i][k] - y[k])
    return True, J, A


def _polish_step(X, alpha, s, S, y, grad, gnorm2, guard, t, backtrack, max_backtracks, cand):
    """Secant line search on the directional derivative along ``grad``.

    Accepts the first point whose gradient norm is below the current one.
    """
    dim = len(y)
    gc = [0.0] * dim
    for _ in range(max_backtracks):
        for j in range(dim):
            cand[j] = y[j] + t * grad[j]
        okc, _, _ = _profile(X, alpha, s, S, cand, guard, gc)
        if okc:
            phi = 0.0
            gc2 = 0.0
            for j in range(dim):
                phi += gc[j] * grad[j]
                gc2 += gc[j] * gc[j]
            if gnorm2 - phi > 0.0:
                ts = t * gnorm2 / (gnorm2 - phi)
                trial = [0.0] * dim
                for j in range(dim):
                    trial[j] = y[j] + ts * grad[j]
                oks, _, _ = _profile(X, alpha, s, S, trial, guard, gc)
                if oks:
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


def _draw_counts(rng, means, s):
    for _ in range(MAX_DEGENERATE_REDRAWS):
        S = 0.0
        for i in range(len(means)):
            s[i] = float(poisson(rng, means[i]))
            S += s[i]
        if S > 0.0:
            return S
    return 0.0


def ascend(
    vertices,
    tinv,
    alpha,
    counts,
    means,
    resample,
    step_size,
    initial_step_fraction,
    gain_exponent,
    armijo,
    backtrack,
    max_backtracks,
    max_iterations,
    gradient_tolerance,
    step_tolerance,
    diameter,
    guard,
    eps,
    y0,
    rng,
):
    """Projection-augmented gradient ascent on the concentrated likelihood.

    ``means`` is None for a fixed measurement ``counts``; otherwise counts are
    Poisson draws with these means, redrawn before every gradient evaluation
    when ``resample`` is set.  ``step_size`` <= 0 selects the backtracking
    line search; while resampling its initial displacement at iteration k
    is scaled by (k + 1)**-gain_exponent, so late iterates average over
    draws instead of chasing each one.

    Returns (ys, J, A_hat, grad_norm, escaped, reason), one row per iterate.
    """
    X = vertices.tolist()
    T = tinv.tolist()
    base = X[-1]
    n = len(X)
    dim = n - 1
    cap = max_iterations + 1
    ys = np.empty((cap, dim))
    Js = np.empty(cap)
    As = np.empty(cap)
    gns = np.empty(cap)
    escs = np.zeros(cap, dtype=np.uint8)

    y = [float(v) for v in y0]
    grad = [0.0] * dim
    s = [0.0] * n
    mv = None if means is None else [float(m) for m in means]
    if mv is None:
        S = 0.0
        for i in range(n):
            s[i] = float(counts[i])
            S += s[i]
    else:
        S = _draw_counts(rng, mv, s)

    escaped = 0
    small_step = False
    polish = False
    reason = REASON_MAX_ITERATIONS
    count = 0
    stochastic = mv is not None and resample
    for k in range(cap):
        if k > 0 and stochastic:
            S = _draw_counts(rng, mv, s)
            polish = False
        if not S > 0.0:
            ys[count] = y
            Js[count] = math.nan
            As[count] = math.nan
            gns[count] = math.nan
            escs[count] = escaped
            count += 1
            reason = REASON_DEGENERATE
            break
        _, J, A_hat = _profile(X, alpha, s, S, y, guard, grad)
        gnorm2 = 0.0
        for j in range(dim):
            gnorm2 += grad[j] * grad[j]
        gnorm = math.sqrt(gnorm2)
        ys[count] = y
        Js[count] = J
        As[count] = A_hat
        gns[count] = gnorm
        escs[count] = escaped
        count += 1
        if small_step or gnorm == 0.0 or (
            math.isfinite(J) and gnorm * diameter < gradient_tolerance * abs(J)
        ):
            reason = REASON_CONVERGED
            break
        if k == max_iterations:
            break

        cand = [0.0] * dim
        ok = False
        clipped = False
        reach = initial_step_fraction * diameter
        if stochastic:
            reach = reach / (k + 1.0) ** gain_exponent
        if step_size > 0.0:
            for j in range(dim):
                cand[j] = y[j] + step_size * grad[j]
            ok = not _near_sensor(X, cand, guard)
        elif not polish:
            t = reach / gnorm
            for _ in range(max_backtracks):
                for j in range(dim):
                    cand[j] = y[j] + t * grad[j]
                okc, Jc, _ = _profile(X, alpha, s, S, cand, guard, None)
                if okc and Jc >= J + armijo * t * gnorm2:
                    # trial points outside the hull are backtracked like failed ones
                    if _barycentric_min(T, base, cand, dim) > eps:
                        ok = True
                        # J gains are now rounding noise; continue on gradient norm
                        polish = Jc - J <= STALL_RTOL * abs(J)
                        break
                    clipped = True
                t *= backtrack
            polish = polish or not ok
        if step_size <= 0.0 and polish and not ok:
            ok = _polish_step(X, alpha, s, S, y, grad, gnorm2, guard, reach / gnorm,
                              backtrack, max_backtracks, cand)
        if not ok and step_size <= 0.0:
            # no improving step at working precision; stay put
            cand = list(y)
            ok = True
        disp2 = 0.0
        for j in range(dim):
            diff = cand[j] - y[j]
            disp2 += diff * diff
        short = math.sqrt(disp2) < step_tolerance * diameter
        # an ascent direction blocked by the hull wall counts as an escape,
        # otherwise iterates creep into the face
        if ok and not (clipped and short) and _barycentric_min(T, base, cand, dim) > eps:
            escaped = 0
        else:
            cand = _sample_interior(rng, X, T, base, eps, guard)
            escaped = 1
        # while polishing only a failed step (no move at all) ends the run
        small_step = not stochastic and escaped == 0 and short and (disp2 == 0.0 or not polish)
        y = cand

    return (
        ys[:count].copy(),
        Js[:count].copy(),
        As[:count].copy(),
        gns[:count].copy(),
        escs[:count].copy(),
        reason,
    )
