"""Breakpoint-aware adaptive integration with dense output.

Right-hand sides here are smooth in the state but only measurable in time,
through the control signals. Runge-Kutta order collapses across integrand
discontinuities, so the time axis is split at every declared breakpoint
and no accepted step ever straddles one.

Breakpoints may accumulate (infinitely many jumps piling up at a point).
The integrator processes breakpoints outside a truncation radius
``eps_accumulation`` exactly; across the residual gap it takes a single
conservative step with the control frozen at the gap's left endpoint and
reports the incurred worst-case error bound in the trajectory metadata.

Control values at stage times are taken from inside the current segment
(times are nudged inward by a 1e-12 fraction of the segment), so the
computed integral never depends on how a control defines itself exactly at
a breakpoint; pointwise values on null sets are deliberately invisible
here and resurface only in chart evaluation.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .rk45 import dp45, hermite_eval


@dataclass(frozen=True)
class IntegrationConfig:
    """Tolerances and safeguards for one trajectory solve.

    ``max_step`` caps accepted steps (default: 1/25 of the interval) so
    the cubic-Hermite dense output resolves pointwise queries well below
    the integration tolerances.
    """

    rtol: float = 1e-10
    atol: float = 1e-12
    eps_accumulation: float = 1e-6
    max_steps: int = 1_000_000
    max_step: Optional[float] = None

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0 or self.eps_accumulation <= 0:
            raise ConfigurationError("tolerances must be positive")
        if self.max_steps <= 0:
            raise ConfigurationError("max_steps must be positive")

    def refined(self, factor=2.0):
        return IntegrationConfig(self.rtol / factor, self.atol / factor,
                                 self.eps_accumulation / factor, self.max_steps,
                                 self.max_step)


class DenseTrajectory:
    """Continuous dense-output solution, evaluable anywhere on [a, b].

    Stores every accepted step with endpoint states and derivatives;
    evaluation is cubic Hermite inside the containing step. The mesh
    contains every processed breakpoint, and interpolation never crosses
    one, so one-sided smoothness is preserved.
    """

    def __init__(self, steps, interval, tol_used, metadata):
        t0s, t1s, y0s, y1s, f0s, f1s = zip(*steps)
        self._t0s = np.asarray(t0s)
        self._t1s = np.asarray(t1s)
        self._y0s = np.asarray(y0s)
        self._y1s = np.asarray(y1s)
        self._f0s = np.asarray(f0s)
        self._f1s = np.asarray(f1s)
        self.interval = (float(interval[0]), float(interval[1]))
        self.tol_used = tol_used
        self.metadata = metadata

    @property
    def dim(self):
        return self._y0s.shape[1]

    @property
    def mesh(self):
        return np.concatenate([self._t0s, self._t1s[-1:]])

    @property
    def t_final(self):
        return float(self._t1s[-1])

    @property
    def y_final(self):
        return self._y1s[-1].copy()

    def __call__(self, t):
        t = float(t)
        a, b = self.interval
        slack = 1e-9 * (b - a)
        if t < a - slack or t > b + slack:
            raise ConfigurationError(f"evaluation outside [{a}, {b}]: t={t}")
        t = min(max(t, a), b)
        i = int(np.searchsorted(self._t0s, t, side="right")) - 1
        i = min(max(i, 0), self._t0s.size - 1)
        return hermite_eval(self._t0s[i], self._t1s[i], self._y0s[i], self._y1s[i],
                            self._f0s[i], self._f1s[i], t)

    def eval_many(self, ts):
        return np.array([self(t) for t in np.asarray(ts, dtype=float)])


def _collect_gaps(u, interval, eps):
    """Residual gaps [acc - eps, acc] around declared accumulation points."""
    a, b = interval
    gaps = []
    for acc in getattr(u, "accumulation_points", ()):
        if a < acc <= b:
            lo = max(acc - eps, a)
            gaps.append((lo, min(acc, b)))
    return sorted(gaps)


def _segment_nodes(u, v, interval, eps):
    a, b = interval
    pts = {a, b}
    pts.update(t for t in u.mesh_points(eps) if a < t < b)
    pts.update(t for t in v.mesh_points(eps) if a < t < b)
    gaps = _collect_gaps(u, interval, eps)
    for lo, hi in gaps:
        pts.add(lo)
        if hi < b:
            pts.add(hi)
    return sorted(pts), gaps


def _conservative_step(fun, lo, hi, y0):
    """One unadaptive embedded step across a frozen gap.

    Returns endpoint data plus the embedded error estimate; acceptance is
    unconditional, the estimate goes into the gap report.
    """
    ts, ys, fs, st = dp45(fun, lo, hi, y0, rtol=1.0, atol=1e300, first_step=hi - lo,
                          max_steps=8)
    return ys[-1], fs[0], fs[-1], st["err_abs"]


def integrate(rhs, y0, interval, u, v, cfg=None):
    """Solve y' = rhs(t, y, u(t), v(t)) with breakpoint-aware stepping.

    ``rhs`` must be smooth in y on the reachable set and may depend on
    time only through (t, u(t), v(t)) with the declared discontinuities.
    Returns a :class:`DenseTrajectory`.
    """
    cfg = cfg or IntegrationConfig()
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise ConfigurationError("integration interval must satisfy a < b")
    if cfg.eps_accumulation >= (b - a) / 10:
        raise ConfigurationError("eps_accumulation must be below (b - a)/10")
    max_step = cfg.max_step if cfg.max_step is not None else (b - a) / 25

    nodes, gaps = _segment_nodes(u, v, (a, b), cfg.eps_accumulation)
    y = np.atleast_1d(np.asarray(y0, dtype=float))

    steps = []
    gap_reports = []
    n_eval = 0
    n_acc = 0
    n_rej = 0
    err_abs = 0.0
    budget = cfg.max_steps
    h_carry = None

    def in_gap(lo, hi):
        return next(((glo, ghi) for glo, ghi in gaps if lo >= glo - 1e-15 and hi <= ghi + 1e-15),
                    None)

    for lo, hi in zip(nodes, nodes[1:]):
        width = hi - lo
        if width <= 0.0:
            continue
        nudge = 1e-12 * width
        t_lo, t_hi = lo + nudge, hi - nudge
        gap = in_gap(lo, hi)

        if gap is not None:
            u_frozen = u(gap[0] + nudge)

            def fun(t, yy, _uf=u_frozen):
                nonlocal n_eval
                n_eval += 1
                tc = min(max(t, t_lo), t_hi)
                return np.asarray(rhs(tc, yy, _uf, v(tc)), dtype=float)

            y_new, f_lo, f_hi, est = _conservative_step(fun, lo, hi, y)
            # Worst-case effect of freezing u across the gap: gap length
            # times the spread of the right-hand side over probed control
            # values, plus the embedded estimate of the single step.
            spread = 0.0
            for t_probe in (gap[1], gap[0] + nudge, 0.5 * (gap[0] + gap[1])):
                du = rhs(t_hi, y_new, u(t_probe), v(t_hi)) - rhs(t_hi, y_new, u_frozen, v(t_hi))
                spread = max(spread, float(np.linalg.norm(du)))
                n_eval += 2
            bound = width * spread + est
            gap_reports.append({
                "accumulation_point": gap[1],
                "gap": [gap[0], gap[1]],
                "frozen_value": np.asarray(u_frozen, dtype=float).tolist(),
                "error_bound": bound,
            })
            steps.append((lo, hi, y, y_new, f_lo, f_hi))
            err_abs += bound
            n_acc += 1
            y = y_new
            h_carry = None
            continue

        def fun(t, yy):
            nonlocal n_eval
            n_eval += 1
            tc = min(max(t, t_lo), t_hi)
            return np.asarray(rhs(tc, yy, u(tc), v(tc)), dtype=float)

        first = min(h_carry, width) if h_carry else None
        ts, ys, fs, st = dp45(fun, lo, hi, y, cfg.rtol, cfg.atol, max_step=max_step,
                              first_step=first, max_steps=budget, dense=True)
        budget -= st["n_accepted"] + st["n_rejected"]
        n_acc += st["n_accepted"]
        n_rej += st["n_rejected"]
        err_abs += st["err_abs"]
        h_carry = st["h_mean"]
        for i in range(len(ts) - 1):
            steps.append((ts[i], ts[i + 1], ys[i], ys[i + 1], fs[i], fs[i + 1]))
        y = ys[-1]

    metadata = {
        "steps_accepted": n_acc,
        "steps_rejected": n_rej,
        "rhs_evaluations": n_eval,
        "segments": len(nodes) - 1,
        "gaps": gap_reports,
        "error_estimate": err_abs,
        "config": {"rtol": cfg.rtol, "atol": cfg.atol,
                   "eps_accumulation": cfg.eps_accumulation, "max_step": max_step},
    }
    return DenseTrajectory(steps, (a, b), (cfg.rtol, cfg.atol), metadata)


def classical_solve(spec, x0, u, v, cfg=None):
    """Carathéodory solution of the original system for an AC control.

    Integrates dx/dt = f(t, x, u, v) + sum_a g_a(x) du_a/dt directly; u
    must be piecewise-C1 and continuous (a declared derivative and no jump
    breakpoints). The mesh is split at u's derivative kinks.
    """
    cfg = cfg or IntegrationConfig()
    if getattr(u, "_derivative", None) is None:
        raise ConfigurationError("classical solutions need a control with a derivative")
    if u.breakpoint_list(cfg.eps_accumulation) or u.accumulation_points:
        raise ConfigurationError("classical solutions need a continuous (jump-free) control")
    fields = spec.fields
    du = u.derivative

    def rhs(t, x, u_t, v_t):
        out = spec.drift_at(t, x, u_t, v_t).copy()
        d = du(t)
        for alpha in range(spec.m):
            da = d[alpha]
            if da != 0.0:
                out += da * np.asarray(fields[alpha](x), dtype=float)
        return out

    return integrate(rhs, x0, spec.interval, u, v, cfg)
