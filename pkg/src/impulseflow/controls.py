"""Control signals: everywhere-defined impulsive inputs and ordinary inputs.

An impulsive control is a genuine function of time, defined at *every*
instant of [a, b], together with an explicit description of where it is
discontinuous. Pointwise values matter here: two controls that coincide
almost everywhere can drive different trajectories at the exceptional
instants, so the representation keeps per-instant overrides instead of
identifying controls up to null sets.

Discontinuity times may accumulate (for example jump times 1 - 1/k piling
up at 1). Such families are described by a *breakpoint function* mapping a
truncation radius ``eps`` to the finite list of breakpoints at distance
>= eps from every declared accumulation point; the integrator picks the
radius.
"""

import bisect
import math

import numpy as np

from .errors import ConfigurationError, ControlRangeError
from .sets import Box, FiniteSet

_RANGE_TOL = 1e-9


def _as_value_rows(values, dim=None):
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None] if dim in (None, 1) else arr[None, :]
    if arr.ndim != 2:
        raise ConfigurationError("control values must form a (num_pieces, dim) array")
    return arr


class ImpulsiveControl:
    """u: [a,b] -> U, defined pointwise everywhere.

    Parameters
    ----------
    interval : (a, b)
    box : Box
        Admissible value set U; every evaluation is checked against it.
    fn : callable t -> array of shape (m,)
    breakpoints : sequence of floats, or callable eps -> sequence
        Declared discontinuity times. A callable must return the finite
        truncated family for the given radius around accumulation points.
    accumulation_points : floats where breakpoints accumulate.
    derivative : callable t -> array, for absolutely continuous controls.
    derivative_kinks : times where the derivative jumps (mesh hints).
    value_at_a : anchor value at t = a; must equal fn(a) exactly.
    overrides : {t: value} pointwise redefinitions on a null set.
    """

    def __init__(self, interval, box, fn, breakpoints=(), accumulation_points=(),
                 derivative=None, derivative_kinks=(), value_at_a=None,
                 overrides=None, name=""):
        a, b = float(interval[0]), float(interval[1])
        if not a < b:
            raise ConfigurationError("control interval must satisfy a < b")
        if not isinstance(box, Box):
            raise ConfigurationError("impulsive controls need a Box value set")
        self.interval = (a, b)
        self.box = box
        self._fn = fn
        self._breakpoints = breakpoints
        self.accumulation_points = tuple(float(t) for t in accumulation_points)
        self._derivative = derivative
        self.derivative_kinks = tuple(float(t) for t in derivative_kinks)
        self.overrides = {float(t): np.atleast_1d(np.asarray(v, dtype=float))
                          for t, v in (overrides or {}).items()}
        self.name = name

        got = self(a)
        if value_at_a is None:
            self.value_at_a = got
        else:
            want = np.atleast_1d(np.asarray(value_at_a, dtype=float))
            if want.shape != got.shape or not np.array_equal(want, got):
                raise ConfigurationError(
                    f"declared value at a={a} is {want!r} but the control evaluates to {got!r}")
            self.value_at_a = want

    @property
    def dim(self):
        return self.box.dim

    def __call__(self, t):
        t = float(t)
        a, b = self.interval
        slack = 1e-9 * (b - a)
        if t < a - slack or t > b + slack:
            raise ConfigurationError(f"control evaluated outside [{a}, {b}]: t={t}")
        t = min(max(t, a), b)
        v = self.overrides.get(t)
        if v is None:
            v = np.atleast_1d(np.asarray(self._fn(t), dtype=float))
        if not self.box.contains(v, _RANGE_TOL):
            raise ControlRangeError(f"control value {v!r} at t={t} outside its box")
        return v

    @property
    def is_absolutely_continuous(self):
        """True when the control is a declared AC (piecewise-C1) signal."""
        if self._derivative is None or self.overrides or self.accumulation_points:
            return False
        if callable(self._breakpoints):
            return False
        return len(tuple(self._breakpoints)) == 0

    def derivative(self, t):
        if self._derivative is None:
            raise ConfigurationError(
                "control has no declared derivative (not absolutely continuous)")
        return np.atleast_1d(np.asarray(self._derivative(float(t)), dtype=float))

    def breakpoint_list(self, eps=0.0):
        """Sorted discontinuity times inside (a, b], truncated around
        accumulation points by ``eps`` (the points themselves survive)."""
        raw = self._breakpoints(eps) if callable(self._breakpoints) else self._breakpoints
        a, b = self.interval
        out = set()
        for t in list(raw) + list(self.overrides.keys()):
            t = float(t)
            if not (a < t <= b):
                continue
            near = any(abs(t - acc) < eps and t != acc for acc in self.accumulation_points)
            if not near:
                out.add(t)
        return sorted(out)

    def mesh_points(self, eps=0.0):
        """All times where the integrand driven by this control may lose
        smoothness: jumps, derivative kinks and accumulation points."""
        a, b = self.interval
        pts = set(self.breakpoint_list(eps))
        pts.update(t for t in self.derivative_kinks if a < t < b)
        pts.update(t for t in self.accumulation_points if a < t <= b)
        return sorted(pts)

    def with_value_at(self, t, value):
        """Copy of this control redefined at the single instant ``t``."""
        t = float(t)
        a, b = self.interval
        if not a <= t <= b:
            raise ConfigurationError("override instant outside the interval")
        value = np.atleast_1d(np.asarray(value, dtype=float))
        if not self.box.contains(value, _RANGE_TOL):
            raise ControlRangeError(f"override value {value!r} outside the box")
        overrides = dict(self.overrides)
        overrides[t] = value
        return ImpulsiveControl(
            self.interval, self.box, self._fn,
            breakpoints=self._breakpoints,
            accumulation_points=self.accumulation_points,
            derivative=self._derivative,
            derivative_kinks=self.derivative_kinks,
            overrides=overrides,
            name=self.name + f"@{t}" if self.name else "",
        )

    # -- constructors ---------------------------------------------------

    @classmethod
    def piecewise_constant(cls, interval, box, times, values, overrides=None, name=""):
        """Left-closed pieces: u(t) = values[i] on [times[i], times[i+1]),
        and the last value up to and including b. times[0] must equal a."""
        a, b = float(interval[0]), float(interval[1])
        ts = [float(t) for t in times]
        vals = _as_value_rows(values, box.dim)
        if len(ts) != vals.shape[0]:
            raise ConfigurationError("times and values lengths differ")
        if ts[0] != a or any(t2 <= t1 for t1, t2 in zip(ts, ts[1:])) or ts[-1] > b:
            raise ConfigurationError("piece times must be increasing, start at a, stay in [a,b]")

        def fn(t, _ts=ts, _vals=vals):
            return _vals[bisect.bisect_right(_ts, t) - 1]

        return cls(interval, box, fn, breakpoints=tuple(ts[1:]),
                   overrides=overrides, name=name)

    @classmethod
    def piecewise_linear(cls, interval, box, times, values, name=""):
        """Continuous interpolant of (times, values); derivative is
        piecewise constant with kinks at the interior nodes."""
        a, b = float(interval[0]), float(interval[1])
        ts = [float(t) for t in times]
        vals = _as_value_rows(values, box.dim)
        if len(ts) != vals.shape[0] or len(ts) < 2:
            raise ConfigurationError("need matching times/values with at least two nodes")
        if ts[0] != a or ts[-1] != b or any(t2 <= t1 for t1, t2 in zip(ts, ts[1:])):
            raise ConfigurationError("node times must be strictly increasing from a to b")
        slopes = (vals[1:] - vals[:-1]) / np.diff(ts)[:, None]

        def fn(t, _ts=ts, _vals=vals, _sl=slopes):
            i = min(max(bisect.bisect_right(_ts, t) - 1, 0), len(_ts) - 2)
            return _vals[i] + (t - _ts[i]) * _sl[i]

        def deriv(t, _ts=ts, _sl=slopes):
            i = min(max(bisect.bisect_right(_ts, t) - 1, 0), len(_ts) - 2)
            return _sl[i]

        return cls(interval, box, fn, derivative=deriv,
                   derivative_kinks=tuple(ts[1:-1]), name=name)

    @classmethod
    def constant(cls, interval, box, value, name=""):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(interval, box, lambda t: value,
                   derivative=lambda t: np.zeros(value.size), name=name)

    @classmethod
    def from_function(cls, interval, box, fn, breakpoints=(), accumulation_points=(),
                      derivative=None, derivative_kinks=(), value_at_a=None,
                      overrides=None, name=""):
        return cls(interval, box, fn, breakpoints=breakpoints,
                   accumulation_points=accumulation_points, derivative=derivative,
                   derivative_kinks=derivative_kinks, value_at_a=value_at_a,
                   overrides=overrides, name=name)


class OrdinaryControl:
    """Piecewise-constant v: [a,b] -> V with finitely many pieces.

    The pieces partition [a, b] (left-closed); every piece value must lie
    in V, which may be a finite set or a box.
    """

    def __init__(self, interval, value_set, times, values, name=""):
        a, b = float(interval[0]), float(interval[1])
        if not a < b:
            raise ConfigurationError("control interval must satisfy a < b")
        self.interval = (a, b)
        self.value_set = value_set
        self.times = [float(t) for t in times]
        dim = value_set.dim if isinstance(value_set, (Box, FiniteSet)) else None
        self.values = _as_value_rows(values, dim)
        if len(self.times) != self.values.shape[0]:
            raise ConfigurationError("times and values lengths differ")
        if self.times[0] != a or any(t2 <= t1 for t1, t2 in zip(self.times, self.times[1:])) \
                or self.times[-1] > b:
            raise ConfigurationError("piece times must be increasing, start at a, stay in [a,b]")
        for row in self.values:
            if not value_set.contains(row, _RANGE_TOL):
                raise ConfigurationError(f"ordinary control value {row!r} not in V")
        self.name = name

    @property
    def dim(self):
        return self.values.shape[1]

    def __call__(self, t):
        t = float(t)
        a, b = self.interval
        slack = 1e-9 * (b - a)
        if t < a - slack or t > b + slack:
            raise ConfigurationError(f"control evaluated outside [{a}, {b}]: t={t}")
        t = min(max(t, a), b)
        return self.values[bisect.bisect_right(self.times, t) - 1]

    def breakpoint_list(self, eps=0.0):
        return list(self.times[1:])

    def mesh_points(self, eps=0.0):
        return list(self.times[1:])

    @classmethod
    def none(cls, interval):
        """Placeholder for systems without an ordinary control (l = 0)."""
        from .sets import empty_value_set
        return cls(interval, empty_value_set(), [interval[0]], np.zeros((1, 0)))

    @classmethod
    def constant(cls, interval, value_set, value, name=""):
        return cls(interval, value_set, [interval[0]], [value], name=name)


def accumulating_breakpoints(generator, accumulation_points):
    """Wrap an increasing generator factory into a breakpoint function.

    ``generator()`` must yield strictly increasing times accumulating at
    its supremum; pulling stops once a time enters the eps-neighborhood of
    an accumulation point, so infinite families like 1 - 1/k terminate.
    Richer structures (resumption past an interior accumulation point)
    should supply an explicit ``eps -> list`` callable instead.
    """
    accs = sorted(accumulation_points)

    def fn(eps):
        if eps <= 0.0:
            raise ConfigurationError(
                "a positive truncation radius is required to enumerate an "
                "accumulating breakpoint family")
        out = []
        for t in generator():
            if any(abs(t - acc) < eps for acc in accs):
                break
            out.append(t)
        return out

    return fn


# -- L1 distances ------------------------------------------------------


def _affine_l1(p, q, width):
    """Integral of ||p + s q|| over s in [0,1], times ``width``. Exact."""
    qn2 = float(np.dot(q, q))
    if qn2 < 1e-300:
        return width * float(np.linalg.norm(p))
    qn = math.sqrt(qn2)
    c = float(np.dot(p, q)) / qn2
    d2 = float(np.dot(p, p)) / qn2 - c * c
    d2 = max(d2, 0.0)

    def anti(x):
        r = math.sqrt(x * x + d2)
        if d2 < 1e-300:
            return x * abs(x) / 2.0
        return 0.5 * (x * r + d2 * math.asinh(x / math.sqrt(d2)))

    return width * qn * (anti(1.0 + c) - anti(c))


def control_l1_distance(u1, u2, eps=1e-8):
    """L1 distance of two controls on their common interval.

    Exact on each cell between declared mesh points, assuming the controls
    are affine there (true for the piecewise-constant/linear constructors);
    generic function controls are treated the same way, which amounts to a
    chord approximation on their smooth cells.
    """
    a, b = u1.interval
    if u2.interval != u1.interval:
        raise ConfigurationError("controls live on different intervals")
    nodes = sorted({a, b} | set(u1.mesh_points(eps)) | set(u2.mesh_points(eps)))
    total = 0.0
    for lo, hi in zip(nodes, nodes[1:]):
        w = hi - lo
        if w <= 0:
            continue
        nudge = 1e-12 * w
        d_lo = u1(lo + nudge) - u2(lo + nudge)
        d_hi = u1(hi - nudge) - u2(hi - nudge)
        total += _affine_l1(d_lo, d_hi - d_lo, w)
    return total
