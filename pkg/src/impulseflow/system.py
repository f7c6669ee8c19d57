"""Problem data for impulsive control systems and standing-hypothesis audits.

A system couples a drift f(t, x, u, v) with impulse fields g_1..g_m whose
time derivatives of the impulsive control multiply them. The theory behind
the solver needs the fields to commute (vanishing Lie brackets on all of
R^n), to be complete, and the whole right-hand side to grow at most
linearly. None of these are decidable by sampling, so the audits here are
evidence collectors, not certificates: a passing report means "no
violation found at N points with this tolerance".
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.stats import qmc

from .errors import ConfigurationError, DomainEvaluationError
from .sets import Box, FiniteSet, empty_value_set

FD_JAC_STEP = 1e-6  # central difference step factor: 1e-6 * (1 + |x|)


def finite_difference_jacobian(g, x, step=FD_JAC_STEP):
    """Central-difference Jacobian of a field, step 1e-6 * (1 + |x|)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    h = step * (1.0 + float(np.linalg.norm(x)))
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        J[:, j] = (np.asarray(g(x + e), dtype=float) - np.asarray(g(x - e), dtype=float)) / (2 * h)
    return J


@dataclass(frozen=True)
class SystemSpec:
    """Full problem data of an impulsive control system.

    ``drift`` evaluates f(t, x, u, v); ``fields`` the impulse fields
    g_alpha(x); ``jacobians`` their Jacobians Dg_alpha(x) (entries may be
    None, in which case a central finite-difference fallback is used and
    flagged in audit reports). All field evaluators must be defined on the
    whole state space.
    """

    n: int
    m: int
    l: int
    interval: tuple
    drift: Callable
    fields: tuple
    jacobians: tuple
    u_box: Box
    v_set: Union[Box, FiniteSet]
    growth_constant: float
    name: str = ""

    def __init__(self, n, m, l, interval, drift, fields, jacobians, u_box,
                 v_set=None, growth_constant=1.0, name=""):
        if n < 1 or m < 1 or l < 0:
            raise ConfigurationError("need n >= 1, m >= 1, l >= 0")
        a, b = float(interval[0]), float(interval[1])
        if not a < b:
            raise ConfigurationError("time interval must satisfy a < b")
        fields = tuple(fields)
        if len(fields) != m:
            raise ConfigurationError(f"expected {m} impulse fields, got {len(fields)}")
        jacobians = tuple(jacobians) if jacobians is not None else (None,) * m
        if len(jacobians) != m:
            raise ConfigurationError("one Jacobian entry (or None) per field required")
        if not isinstance(u_box, Box):
            raise ConfigurationError(
                "U must be an axis-aligned Box; other compact sets are not supported")
        if u_box.dim != m:
            raise ConfigurationError("U box dimension must equal m")
        if v_set is None:
            if l != 0:
                raise ConfigurationError("v_set required when l > 0")
            v_set = empty_value_set()
        if v_set.dim != l:
            raise ConfigurationError("V dimension must equal l")
        if not growth_constant > 0:
            raise ConfigurationError("growth constant must be positive")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "m", int(m))
        object.__setattr__(self, "l", int(l))
        object.__setattr__(self, "interval", (a, b))
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "fields", fields)
        object.__setattr__(self, "jacobians", jacobians)
        object.__setattr__(self, "u_box", u_box)
        object.__setattr__(self, "v_set", v_set)
        object.__setattr__(self, "growth_constant", float(growth_constant))
        object.__setattr__(self, "name", name)

    # -- evaluators with domain-failure reporting ------------------------

    def field_at(self, alpha, x):
        try:
            with np.errstate(divide="raise", invalid="raise", over="raise"):
                v = np.asarray(self.fields[alpha](np.asarray(x, dtype=float)), dtype=float)
        except (ArithmeticError, ValueError) as exc:
            raise DomainEvaluationError(np.asarray(x, dtype=float), str(exc)) from exc
        if v.shape != (self.n,) or not np.all(np.isfinite(v)):
            raise DomainEvaluationError(np.asarray(x, dtype=float),
                                        f"field {alpha} returned {v!r}")
        return v

    def jacobian_at(self, alpha, x):
        """Dg_alpha(x); falls back to finite differences when undeclared."""
        jac = self.jacobians[alpha]
        try:
            with np.errstate(divide="raise", invalid="raise", over="raise"):
                if jac is None:
                    J = finite_difference_jacobian(self.fields[alpha], x)
                else:
                    J = np.asarray(jac(np.asarray(x, dtype=float)), dtype=float)
        except (ArithmeticError, ValueError) as exc:
            raise DomainEvaluationError(np.asarray(x, dtype=float), str(exc)) from exc
        if J.shape != (self.n, self.n) or not np.all(np.isfinite(J)):
            raise DomainEvaluationError(np.asarray(x, dtype=float),
                                        f"Jacobian {alpha} returned {J!r}")
        return J

    def drift_at(self, t, x, u, v):
        try:
            with np.errstate(divide="raise", invalid="raise", over="raise"):
                f = np.asarray(self.drift(t, np.asarray(x, dtype=float), u, v), dtype=float)
        except (ArithmeticError, ValueError) as exc:
            raise DomainEvaluationError(np.asarray(x, dtype=float), str(exc)) from exc
        if f.shape != (self.n,) or not np.all(np.isfinite(f)):
            raise DomainEvaluationError(np.asarray(x, dtype=float), f"drift returned {f!r}")
        return f

    @property
    def fd_jacobian_indices(self):
        return tuple(i for i, j in enumerate(self.jacobians) if j is None)


@dataclass
class HypothesisReport:
    """Aggregated result of a sampling audit.

    The audit passed at every sample iff both lists are empty and (for
    commutativity audits) ``max_bracket_norm`` is within tolerance.
    """

    max_bracket_norm: float = 0.0
    bracket_argmax_point: Optional[np.ndarray] = None
    growth_violations: list = field(default_factory=list)
    domain_failures: list = field(default_factory=list)
    fd_jacobian_fields: tuple = ()
    samples_used: int = 0
    tol: Optional[float] = None

    @property
    def passed(self):
        ok = not self.growth_violations and not self.domain_failures
        if self.tol is not None:
            ok = ok and self.max_bracket_norm <= self.tol
        return ok

    @classmethod
    def merge(cls, reports):
        """Combine shard reports: max/argmax for brackets, concatenation
        for violation lists."""
        out = cls()
        for r in reports:
            if r.max_bracket_norm >= out.max_bracket_norm:
                out.max_bracket_norm = r.max_bracket_norm
                out.bracket_argmax_point = r.bracket_argmax_point
            out.growth_violations.extend(r.growth_violations)
            out.domain_failures.extend(r.domain_failures)
            out.fd_jacobian_fields = tuple(sorted(set(out.fd_jacobian_fields)
                                                  | set(r.fd_jacobian_fields)))
            out.samples_used += r.samples_used
            if r.tol is not None:
                out.tol = r.tol if out.tol is None else max(out.tol, r.tol)
        return out


def lie_bracket(spec, alpha, beta, x):
    """[g_alpha, g_beta](x) = Dg_beta(x) g_alpha(x) - Dg_alpha(x) g_beta(x).

    Field indices are 0-based. Raises :class:`DomainEvaluationError` when
    an evaluator fails at x.
    """
    if not (0 <= alpha < spec.m and 0 <= beta < spec.m):
        raise ConfigurationError(f"field index out of range: {alpha}, {beta}")
    x = np.asarray(x, dtype=float)
    ga = spec.field_at(alpha, x)
    gb = spec.field_at(beta, x)
    Ja = spec.jacobian_at(alpha, x)
    Jb = spec.jacobian_at(beta, x)
    return Jb @ ga - Ja @ gb


def _halton_points(box, count, seed):
    if count <= 0 or box.dim == 0:
        return np.zeros((max(count, 0), box.dim))
    sampler = qmc.Halton(d=box.dim, scramble=True, seed=seed)
    return box.scale01(sampler.random(count))


def audit_commutativity(spec, region, samples=1000, tol=1e-9, seed=0):
    """Estimate the worst Lie bracket over a state-space box.

    Samples a Halton sequence plus the deterministic 3-level probe lattice
    of the region (corners, edge/face midpoints, center); the lattice is
    what gives the audit a chance to land exactly on symmetric singular
    sets. Evaluator failures are recorded as domain failures: the
    commutativity hypothesis asks for fields defined on the whole space,
    so a single undefined point already disqualifies the system even if
    every computed bracket vanishes.
    """
    if samples < 1:
        raise ConfigurationError("samples >= 1 required")
    if tol <= 0:
        raise ConfigurationError("tol > 0 required")
    pts = np.vstack([_halton_points(region, samples, seed), region.probe_lattice()])
    report = HypothesisReport(tol=tol, fd_jacobian_fields=spec.fd_jacobian_indices)
    for x in pts:
        report.samples_used += 1
        try:
            for a in range(spec.m):
                for b in range(a + 1, spec.m):
                    nrm = float(np.linalg.norm(lie_bracket(spec, a, b, x)))
                    if nrm >= report.max_bracket_norm:
                        report.max_bracket_norm = nrm
                        report.bracket_argmax_point = x.copy()
        except DomainEvaluationError as exc:
            report.domain_failures.append(np.asarray(exc.point, dtype=float))
    if report.bracket_argmax_point is None and len(pts):
        report.bracket_argmax_point = pts[0].copy()
    return report


def audit_growth(spec, region, samples=1000, seed=0, slack=1e-12):
    """Check |(f, g_1, ..., g_m)| <= A (1 + |(x, u)|) at random samples.

    Draws (t, x, u, v) uniformly from [a,b] x region x U x V and records
    every violating sample together with its ratio.
    """
    if samples < 1:
        raise ConfigurationError("samples >= 1 required")
    rng = np.random.default_rng(seed)
    a, b = spec.interval
    ts = a + (b - a) * rng.random(samples)
    xs = np.vstack([region.sample(rng, samples - region.probe_lattice().shape[0]),
                    region.probe_lattice()]) if samples > region.probe_lattice().shape[0] \
        else region.sample(rng, samples)
    us = spec.u_box.sample(rng, xs.shape[0])
    vs = spec.v_set.sample(rng, xs.shape[0])
    A = spec.growth_constant
    report = HypothesisReport(fd_jacobian_fields=spec.fd_jacobian_indices)
    for t, x, u, v in zip(ts, xs, us, vs):
        report.samples_used += 1
        try:
            stacked = [spec.drift_at(t, x, u, v)]
            stacked += [spec.field_at(al, x) for al in range(spec.m)]
        except DomainEvaluationError as exc:
            report.domain_failures.append(np.asarray(exc.point, dtype=float))
            continue
        lhs = math.sqrt(sum(float(np.dot(w, w)) for w in stacked))
        rhs = A * (1.0 + math.sqrt(float(np.dot(x, x)) + float(np.dot(u, u))))
        if lhs > rhs * (1 + slack):
            report.growth_violations.append(((float(t), x.copy(), u.copy(), v.copy()),
                                             lhs / rhs))
    return report
