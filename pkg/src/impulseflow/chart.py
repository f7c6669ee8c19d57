"""Flow-box coordinates built from the impulse fields.

The change of variables straightens the (augmented) impulse fields into
coordinate directions: composing the backward flows of the fields, in the
fixed order alpha = 1..m, gives a map

    varphi(x, z) = exp(-z_m g_m) o ... o exp(-z_1 g_1) (x),

and phi(x, z) = (varphi(x, z), z) is a diffeomorphism of R^{n+m} with
inverse phi^{-1}(xi, zeta) = (varphi(xi, -zeta), zeta). In the new
coordinates the impulsive part of the dynamics becomes constant and only
the pushed-forward drift survives; that pushforward is what
``transformed_drift`` evaluates.

The augmented fields act on the z-block as plain unit translations, so
every composition above reduces exactly to flows of the base fields on
R^n; no approximation is involved in that reduction.

All flows are integrated numerically (no closed-form detection). The
``flow_tol`` parameter is used directly as the per-step tolerance of the
embedded 5(4) pair; since the propagated solution is one order more
accurate than the controlled error estimate, end-to-end flow errors land
well below ``flow_tol`` per unit flow time, which is what the documented
round-trip contract (10 * flow_tol) relies on.
"""

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (CompletenessError, ConfigurationError, IntegrationError)
from .rk45 import dp45
from .system import _halton_points, finite_difference_jacobian

_FLOW_MAX_STEPS = 50_000


@dataclass(frozen=True)
class ChartConfig:
    """Numerical parameters of the coordinate chart.

    jac_mode selects how the state Jacobian of varphi is computed:
    "variational" integrates the variational equation along each flow leg
    (default; smooth enough to sit inside an outer integrator),
    "finite-difference" is a slower cross-check mode.
    """

    flow_tol: float = 1e-10
    jac_mode: str = "variational"
    max_flow_time: Optional[float] = None

    def __post_init__(self):
        if not self.flow_tol > 0:
            raise ConfigurationError("flow_tol must be positive")
        if self.jac_mode not in ("variational", "finite-difference"):
            raise ConfigurationError(f"unknown jac_mode {self.jac_mode!r}")


@dataclass
class ChartPoint:
    """A point (xi, z) in chart coordinates; z tracks the impulse value."""

    xi: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        self.xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        self.z = np.atleast_1d(np.asarray(self.z, dtype=float))
        if not (np.all(np.isfinite(self.xi)) and np.all(np.isfinite(self.z))):
            raise ConfigurationError("chart points must have finite entries")


class Chart:
    """Flow-box chart bound to one system."""

    def __init__(self, spec, config=None):
        self.spec = spec
        self.config = config or ChartConfig()
        diam = float(np.max(spec.u_box.diameters)) if spec.m else 1.0
        if self.config.max_flow_time is None:
            self.max_flow_time = 10.0 * max(1.0, diam)
        else:
            self.max_flow_time = float(self.config.max_flow_time)
            if not self.max_flow_time > diam:
                raise ConfigurationError(
                    "max_flow_time must exceed the U-box diameter in every coordinate")
        # Fast closures: raw field access, no per-call validation. dp45's
        # finiteness checks catch silent escapes; exceptions are mapped to
        # completeness errors below.
        self._ode_fns = [
            (lambda t, y, _g=g: np.asarray(_g(y), dtype=float)) for g in spec.fields
        ]
        self._jac_fns = []
        for g, jac in zip(spec.fields, spec.jacobians):
            if jac is None:
                self._jac_fns.append(lambda x, _g=g: finite_difference_jacobian(_g, x))
            else:
                self._jac_fns.append(lambda x, _j=jac: np.asarray(_j(x), dtype=float))

    # -- single flows ----------------------------------------------------

    def flow(self, g, t, x):
        """exp(t g)(x) for a field index or a raw field callable."""
        t = float(t)
        if abs(t) > self.max_flow_time:
            raise ConfigurationError(
                f"|t| = {abs(t)} exceeds the configured flow-time cap {self.max_flow_time}")
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if isinstance(g, (int, np.integer)):
            return self._field_flow(int(g), t, x)
        fn = lambda s, y: np.asarray(g(y), dtype=float)  # noqa: E731
        return self._run_flow(fn, None, t, x)

    def _field_flow(self, alpha, t, x):
        if not 0 <= alpha < self.spec.m:
            raise ConfigurationError(f"field index {alpha} out of range")
        return self._run_flow(self._ode_fns[alpha], alpha, t, x)

    def _run_flow(self, fn, alpha, t, x):
        if t == 0.0:
            return x.copy()
        tol = self.config.flow_tol
        try:
            _, ys, _, _ = dp45(fn, 0.0, t, x, tol, tol, max_steps=_FLOW_MAX_STEPS)
        except IntegrationError as exc:
            raise CompletenessError(alpha, getattr(exc, "t", None), str(exc)) from exc
        except (ArithmeticError, ValueError) as exc:
            raise CompletenessError(alpha, None, str(exc)) from exc
        return ys[-1]

    def _var_flow(self, alpha, t, x, first_step=None):
        """Flow a field together with its variational equation.

        Returns the endpoint, the Jacobian of the time-t flow map at x,
        and the mean accepted step (reusable as a first-step hint).
        """
        n = self.spec.n
        if t == 0.0:
            return x.copy(), np.eye(n), None
        g = self._ode_fns[alpha]
        jac = self._jac_fns[alpha]

        def joint(s, Y):
            y = Y[:n]
            M = Y[n:].reshape(n, n)
            out = np.empty(n + n * n)
            out[:n] = g(s, y)
            out[n:] = (jac(y) @ M).ravel()
            return out

        Y0 = np.concatenate([x, np.eye(n).ravel()])
        tol = self.config.flow_tol
        try:
            _, ys, _, st = dp45(joint, 0.0, t, Y0, tol, tol,
                                first_step=first_step, max_steps=_FLOW_MAX_STEPS)
        except IntegrationError as exc:
            raise CompletenessError(alpha, getattr(exc, "t", None), str(exc)) from exc
        except (ArithmeticError, ValueError) as exc:
            raise CompletenessError(alpha, None, str(exc)) from exc
        return ys[-1][:n], ys[-1][n:].reshape(n, n), st["h_mean"]

    # -- chart maps -------------------------------------------------------

    def varphi(self, x, z, order=None):
        """Compose the m backward flows; order is fixed unless diagnosing."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if z.size != self.spec.m:
            raise ConfigurationError("z must have one entry per impulse field")
        y = x.copy()
        for alpha in order if order is not None else range(self.spec.m):
            za = float(z[alpha])
            if za != 0.0:
                y = self._field_flow(alpha, -za, y)
        return y

    def phi(self, x, z):
        return ChartPoint(self.varphi(x, z), np.asarray(z, dtype=float).copy())

    def phi_inverse(self, p, z=None):
        """Accepts a ChartPoint or an (xi, zeta) pair; returns (x, z)."""
        if z is None:
            xi, zeta = p.xi, p.z
        else:
            xi, zeta = p, np.atleast_1d(np.asarray(z, dtype=float))
        return self.varphi(xi, -np.asarray(zeta, dtype=float)), np.asarray(zeta, dtype=float).copy()

    def varphi_with_jacobian(self, x, z, h_hints=None):
        """varphi(x, z) together with its state Jacobian, in one pass.

        Each flow leg is integrated jointly with its variational equation,
        so the point and the Jacobian come from the same mesh. ``h_hints``
        is an optional mutable mapping (owned by a session) that carries
        per-leg first-step hints between repeated nearby calls.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        J = np.eye(self.spec.n)
        y = x.copy()
        for alpha in range(self.spec.m):
            za = float(z[alpha])
            if za == 0.0:
                continue
            key = (alpha, za > 0)
            hint = h_hints.get(key) if h_hints is not None else None
            y, M, h_mean = self._var_flow(alpha, -za, y, first_step=hint)
            if h_hints is not None and h_mean:
                h_hints[key] = h_mean
            J = M @ J
        return y, J

    def dvarphi_dx(self, x, z):
        """Jacobian of varphi(., z) at x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        n = self.spec.n
        if self.config.jac_mode == "finite-difference":
            h = max(1e-7, (30 * self.config.flow_tol) ** (1 / 3)) * (1 + float(np.max(np.abs(x))))
            J = np.empty((n, n))
            for j in range(n):
                e = np.zeros(n)
                e[j] = h
                J[:, j] = (self.varphi(x + e, z) - self.varphi(x - e, z)) / (2 * h)
            return J
        return self.varphi_with_jacobian(x, z)[1]

    def transformed_drift(self, t, p, v):
        """Drift of the straightened system at chart point p.

        Only the state block is returned; the z-block of the pushed-forward
        drift vanishes identically by construction.

        The value is D_x varphi(x, z) f(t, x, z, v) at (x, z) = phi^{-1}(p).
        In the default variational mode both factors come from a single
        joint pass along the inverse leg: the Jacobian of the inverse leg
        is inverted instead of integrating a second (forward) leg, which
        is exact wherever varphi(., z) and varphi(., -z) are mutual
        inverses, i.e. under the commutativity hypothesis the chart
        presupposes. The finite-difference mode recomputes everything the
        literal two-pass way as a cross-check.
        """
        z = np.asarray(p.z, dtype=float)
        if self.config.jac_mode == "finite-difference":
            x, _ = self.phi_inverse(p)
            J = self.dvarphi_dx(x, z)
            return J @ self.spec.drift_at(t, x, z, v)
        x, P = self.varphi_with_jacobian(p.xi, -z)
        f = self.spec.drift_at(t, x, z, v)
        return np.linalg.solve(P, f)

    # -- diagnostics -------------------------------------------------------

    def roundtrip_error(self, x, z):
        xi = self.varphi(x, z)
        back = self.varphi(xi, -np.asarray(z, dtype=float))
        return float(np.linalg.norm(back - np.atleast_1d(np.asarray(x, dtype=float))))

    def pushforward_check(self, region, samples=200, tol=1e-6, seed=0, csv_path=None):
        """Largest deviation of the pushed-forward augmented fields from
        the corresponding unit directions, over sampled (x, z).

        The z-block of the pushforward is a unit vector identically, so
        the deviation measured (and returned) is the norm of the state
        block D_x varphi g_alpha + d varphi / d z_alpha, with the z-slope
        taken by central differences.
        """
        n, m = self.spec.n, self.spec.m
        xs = _halton_points(region, samples, seed)
        zs = _halton_points(self.spec.u_box, samples, seed + 1)
        worst = 0.0
        rows = []
        for x, z in zip(xs, zs):
            J = self.dvarphi_dx(x, z)
            for alpha in range(m):
                # 5-point stencil: the z-slope must be resolved well below
                # the requested deviation, and flow errors are tiny but not
                # zero, so a wide high-order stencil beats a narrow one.
                h = 0.005 * (1 + abs(float(z[alpha])))
                e = np.zeros(m)
                e[alpha] = h
                dz = (-self.varphi(x, z + 2 * e) + 8 * self.varphi(x, z + e)
                      - 8 * self.varphi(x, z - e) + self.varphi(x, z - 2 * e)) / (12 * h)
                dev = float(np.linalg.norm(J @ self._ode_fns[alpha](0.0, x) + dz))
                worst = max(worst, dev)
                if csv_path is not None:
                    rows.append([alpha, *x, *z, dev])
        if csv_path is not None:
            with open(csv_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["alpha"] + [f"x{i+1}" for i in range(n)]
                           + [f"z{i+1}" for i in range(m)] + ["deviation"])
                w.writerows(rows)
        return worst

    def order_sensitivity(self, x, z, max_orders=24):
        """Worst deviation of varphi under permuted flow order (diagnostic;
        small only when the fields actually commute)."""
        base = self.varphi(x, z)
        worst = 0.0
        for perm in itertools.islice(itertools.permutations(range(self.spec.m)), max_orders):
            dev = float(np.linalg.norm(self.varphi(x, z, order=perm) - base))
            worst = max(worst, dev)
        return worst

    def session(self):
        return ChartSession(self)


def _sig12(v):
    if v == 0.0 or not math.isfinite(v):
        return v
    return round(v, 11 - int(math.floor(math.log10(abs(v)))))


def _key(arr):
    return tuple(_sig12(float(v)) for v in arr)


class ChartSession:
    """Memoizing view of a chart for a single solve.

    varphi and dvarphi_dx results are cached per argument pair rounded to
    12 significant digits. The cache is private to the session, so
    concurrent solves never share it.
    """

    def __init__(self, chart):
        self.chart = chart
        self._pairs = {}
        self._h_hints = {}

    def varphi_with_jacobian(self, x, z):
        k = (_key(x), _key(z))
        hit = self._pairs.get(k)
        if hit is None:
            hit = self.chart.varphi_with_jacobian(x, z, h_hints=self._h_hints)
            self._pairs[k] = hit
        return hit

    def varphi(self, x, z):
        return self.varphi_with_jacobian(x, z)[0]

    def dvarphi_dx(self, x, z):
        return self.varphi_with_jacobian(x, z)[1]

    def transformed_drift(self, t, xi, z, v):
        z = np.asarray(z, dtype=float)
        x, P = self.varphi_with_jacobian(xi, -z)
        f = self.chart.spec.drift_at(t, x, z, v)
        return np.linalg.solve(P, f)
