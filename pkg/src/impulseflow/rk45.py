"""Embedded Dormand-Prince 5(4) stepper with PI step-size control.

This is the single low-level integrator used everywhere in the package:
the coordinate-chart flows call it in endpoint mode, the trajectory
integrator calls it in dense mode (one call per smooth segment) and glues
the accepted steps into a cubic-Hermite interpolant.

The right-hand sides used here are small (a handful of components), so
Python call overhead dominates; stage combinations are therefore single
row-times-matrix products against a stage buffer rather than generic
Butcher-table loops.
"""

import math

import numpy as np

from .errors import MaxStepsExceededError, NonFiniteStateError, StepSizeCollapseError

# Dormand-Prince tableau.
_C = (0.2, 0.3, 0.8, 8 / 9)
_A2 = np.array([1 / 5])
_A3 = np.array([3 / 40, 9 / 40])
_A4 = np.array([44 / 45, -56 / 15, 32 / 9])
_A5 = np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729])
_A6 = np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656])
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

# PI controller exponents and limits (order-5 pair).
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5
_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0

_EPS = float(np.finfo(float).eps)


def _initial_step(fun, t0, y0, f0, direction, rtol, atol, span):
    """Cheap variant of the classic starting-step heuristic."""
    sc = atol + rtol * np.abs(y0)
    d0 = math.sqrt(float(np.mean((y0 / sc) ** 2)))
    d1 = math.sqrt(float(np.mean((f0 / sc) ** 2)))
    h0 = 1e-6 * span if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + h0 * direction * f0
    f1 = fun(t0 + h0 * direction, y1)
    d2 = math.sqrt(float(np.mean(((f1 - f0) / sc) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6 * span, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def dp45(fun, t0, t1, y0, rtol, atol, max_step=math.inf, first_step=None,
         max_steps=1_000_000, dense=False, f0=None):
    """Integrate y' = fun(t, y) from t0 to t1.

    Returns ``(ts, ys, fs, stats)``. In dense mode ``ts`` holds every
    accepted node (t0 included), ``ys``/``fs`` the states and derivatives
    there; in endpoint mode the lists hold only the two ends. ``stats``
    carries step counts, the accumulated local-error estimate in both
    tolerance units (``err_sum``) and absolute units (``err_abs``), and
    the mean accepted step ``h_mean`` (a reusable first-step hint).

    Raises :class:`StepSizeCollapseError`, :class:`NonFiniteStateError` or
    :class:`MaxStepsExceededError` on failure; each carries the time
    reached, which callers translate into their own diagnostics.
    """
    y = np.asarray(y0, dtype=float)
    d = y.size
    span = abs(t1 - t0)
    direction = 1.0 if t1 >= t0 else -1.0
    if f0 is None:
        f0 = fun(t0, y)
    f = np.asarray(f0, dtype=float)
    if not np.all(np.isfinite(f)):
        raise NonFiniteStateError(t0)

    if span == 0.0:
        stats = {"n_accepted": 0, "n_rejected": 0, "err_sum": 0.0, "err_abs": 0.0,
                 "h_mean": 0.0}
        return [t0], [y.copy()], [f.copy()], stats

    if first_step is not None and first_step > 0.0:
        h = min(abs(first_step), span, max_step)
    else:
        h = min(_initial_step(fun, t0, y, f, direction, rtol, atol, span), max_step)
    h = max(h, 16 * _EPS * span)

    ts = [t0]
    ys = [y.copy()]
    fs = [f.copy()]

    K = np.empty((7, d))
    t = t0
    err_prev = 1e-4
    err_sum = 0.0
    err_abs = 0.0
    n_acc = 0
    n_rej = 0

    while True:
        remaining = (t1 - t) * direction
        if remaining <= 0.0:
            break
        if n_acc + n_rej >= max_steps:
            raise MaxStepsExceededError(t, max_steps)
        hmin = 16 * _EPS * max(abs(t), span)
        last = h >= remaining
        if last:
            h = remaining

        hd = h * direction
        K[0] = f
        K[1] = fun(t + _C[0] * hd, y + hd * np.dot(_A2, K[:1]))
        K[2] = fun(t + _C[1] * hd, y + hd * np.dot(_A3, K[:2]))
        K[3] = fun(t + _C[2] * hd, y + hd * np.dot(_A4, K[:3]))
        K[4] = fun(t + _C[3] * hd, y + hd * np.dot(_A5, K[:4]))
        K[5] = fun(t + hd, y + hd * np.dot(_A6, K[:5]))
        y_new = y + hd * np.dot(_B, K[:6])
        t_new = t1 if last else t + hd

        finite = np.all(np.isfinite(y_new))
        if finite:
            K[6] = fun(t_new, y_new)
            finite = np.all(np.isfinite(K[6]))
        if not finite:
            if h <= hmin:
                raise NonFiniteStateError(t)
            h = max(0.25 * h, hmin)
            n_rej += 1
            continue

        err_vec = hd * np.dot(_E, K)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        q = err_vec / sc
        err = math.sqrt(float(np.dot(q, q)) / d)

        if err <= 1.0:
            t, y, f = t_new, y_new, K[6].copy()
            n_acc += 1
            err_sum += err  # in units of the local tolerance
            err_abs += err * float(sc.sum()) / d
            if dense or (t1 - t) * direction <= 0.0:
                ts.append(t)
                ys.append(y)
                fs.append(f)
            fac = _SAFETY * (err + 1e-300) ** (-_ALPHA) * (err_prev + 1e-300) ** _BETA
            err_prev = max(err, 1e-10)
            h = min(h * min(_FAC_MAX, max(_FAC_MIN, fac)), max_step)
        else:
            if h <= hmin:
                raise StepSizeCollapseError(t, f"error {err:.3g}x tolerance at minimum step")
            n_rej += 1
            fac = _SAFETY * err ** (-_ALPHA)
            h = max(h * max(0.1, min(0.9, fac)), hmin)

    stats = {"n_accepted": n_acc, "n_rejected": n_rej, "err_sum": err_sum,
             "err_abs": err_abs, "h_mean": span / max(n_acc, 1)}
    return ts, ys, fs, stats


def hermite_eval(t0, t1, y0, y1, f0, f1, t):
    """Cubic Hermite interpolation on one accepted step."""
    h = t1 - t0
    if h == 0.0:
        return y0.copy()
    s = (t - t0) / h
    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return h00 * y0 + (h10 * h) * f0 + h01 * y1 + (h11 * h) * f1
