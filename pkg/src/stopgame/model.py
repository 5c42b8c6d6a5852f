"""Problem instances: coefficients, the running-gain function and its zero
level, and numerical validation of the standing assumptions.

A game instance couples a one-dimensional diffusion dX = mu(X) ds + sigma(X) dW
on R or (0, inf) with a stopper reward g(t), a running payoff h(t, x), a
discount r and a marginal control cost alpha0 over a finite horizon T.
The volatility is sigma0 (constant) on the real line and sigma1 * x on the
half line, so ``sigma(x) = sigma0 + sigma1 * x`` with exactly one term active.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import expr as expr_mod
from .errors import AssumptionViolation, ConfigError, DomainError

__all__ = [
    "Domain", "ScalarFn", "GameSpec", "ClauseVerdict", "AssumptionReport",
    "theta", "theta_lower", "validate_assumptions",
    "benchmark_spec", "real_line_quadratic_spec", "piecewise_power_spec",
    "expr_spec",
]

# floating-point slack for monotonicity checks on flat regions
def _slack(v) -> float:
    return 1e-9 * (1.0 + float(np.max(np.abs(v))))


class Domain(enum.Enum):
    REAL_LINE = "real_line"
    HALF_LINE = "half_line"

    @property
    def infimum(self) -> float:
        return 0.0 if self is Domain.HALF_LINE else -math.inf

    def contains_closure(self, x) -> bool:
        if self is Domain.HALF_LINE:
            return bool(np.all(np.asarray(x) >= 0.0))
        return bool(np.all(np.isfinite(np.asarray(x, dtype=float))))


class ScalarFn:
    """A scalar coefficient of (t, x) with exact first partials.

    Backed either by closed-form callables (parametric families) or by a
    parsed expression evaluated on dual numbers.  All evaluations broadcast
    over numpy arrays.
    """

    def __init__(self, value: Callable, d_x: Optional[Callable] = None,
                 d_t: Optional[Callable] = None, name: str = "fn",
                 source: Optional[str] = None):
        self._value = value
        self._d_x = d_x
        self._d_t = d_t
        self.name = name
        self.source = source

    def __call__(self, t, x):
        return self._value(t, x)

    def d_x(self, t, x):
        if self._d_x is not None:
            return self._d_x(t, x)
        return self._fd(t, x, wrt="x")

    def d_t(self, t, x):
        if self._d_t is not None:
            return self._d_t(t, x)
        return self._fd(t, x, wrt="t")

    def _fd(self, t, x, wrt):
        # central-difference fallback for bare callables
        if wrt == "x":
            step = 1e-6 * (1.0 + np.abs(x))
            return (self._value(t, x + step) - self._value(t, x - step)) / (2 * step)
        step = 1e-6 * (1.0 + np.abs(t))
        return (self._value(t + step, x) - self._value(t - step, x)) / (2 * step)

    @classmethod
    def from_expr(cls, source: str) -> "ScalarFn":
        ast = expr_mod.parse(source)

        def like_inputs(out, t, x):
            shape = np.broadcast(np.asarray(t), np.asarray(x)).shape
            if shape and np.ndim(out) == 0:
                return np.broadcast_to(np.asarray(out, dtype=float), shape)
            return out

        def value(t, x):
            return like_inputs(expr_mod.eval_dual(ast, t, x).value, t, x)

        def d_x(t, x):
            return like_inputs(expr_mod.eval_dual(ast, t, x).dx, t, x)

        def d_t(t, x):
            return like_inputs(expr_mod.eval_dual(ast, t, x).dt, t, x)

        return cls(value, d_x, d_t, name=source, source=source)

    @classmethod
    def constant(cls, c: float) -> "ScalarFn":
        c = float(c)
        return cls(lambda t, x: c + 0.0 * (np.asarray(t, dtype=float) + np.asarray(x, dtype=float)),
                   lambda t, x: 0.0 * (np.asarray(t, dtype=float) + np.asarray(x, dtype=float)),
                   lambda t, x: 0.0 * (np.asarray(t, dtype=float) + np.asarray(x, dtype=float)),
                   name=str(c), source=str(c))

    def __repr__(self):
        return f"ScalarFn({self.name})"


@dataclass
class GameSpec:
    """Full problem instance.

    ``mu_fn``, ``g_fn``, ``h_fn`` are ScalarFn; ``sigma0``/``sigma1`` pick the
    volatility regime consistent with ``domain``.  Read-only after
    construction; safe to share across workers.
    """

    domain: Domain
    mu_fn: ScalarFn
    sigma0: float
    sigma1: float
    g_fn: ScalarFn
    h_fn: ScalarFn
    r: float
    alpha0: float
    T: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.alpha0 <= 0:
            raise ConfigError("alpha0 must be positive")
        if self.T <= 0:
            raise ConfigError("horizon T must be positive")
        if self.r < 0:
            raise ConfigError("discount r must be non-negative")
        if self.domain is Domain.REAL_LINE:
            if not (self.sigma0 > 0 and self.sigma1 == 0):
                raise ConfigError("real-line instances need sigma0 > 0 and sigma1 = 0")
        else:
            if not (self.sigma1 > 0 and self.sigma0 == 0):
                raise ConfigError("half-line instances need sigma1 > 0 and sigma0 = 0")
            if abs(float(self.mu_fn(0.0, 0.0))) > 1e-10:
                raise ConfigError("half-line instances need mu(0) = 0")

    # -- coefficient accessors (vectorized) --
    def mu(self, x):
        return self.mu_fn(0.0, x)

    def mu_x(self, x):
        return self.mu_fn.d_x(0.0, x)

    def sigma(self, x):
        return self.sigma0 + self.sigma1 * np.asarray(x, dtype=float)

    def sigma_x(self, x):
        return self.sigma1 + 0.0 * np.asarray(x, dtype=float)

    def g(self, t):
        return self.g_fn(t, 0.0)

    def g_dot(self, t):
        return self.g_fn.d_t(t, 0.0)

    def h(self, t, x):
        return self.h_fn(t, x)

    def h_x(self, t, x):
        return self.h_fn.d_x(t, x)

    def h_t(self, t, x):
        return self.h_fn.d_t(t, x)

    def check_point(self, t, x):
        tt = np.asarray(t, dtype=float)
        if np.any(tt < -1e-12) or np.any(tt > self.T * (1 + 1e-12) + 1e-12):
            raise DomainError(f"t outside [0, {self.T}]")
        if not self.domain.contains_closure(x):
            raise DomainError("x outside the closure of the state space")


def theta(spec: GameSpec, t, x):
    """Effective running gain g'(t) - r g(t) + h(t, x)."""
    spec.check_point(t, x)
    return spec.g_dot(t) - spec.r * spec.g(t) + spec.h(t, x)


def theta_lower(spec: GameSpec, t: float, bracket: Tuple[float, float],
                tol_x: float = 1e-9) -> float:
    """Smallest y in ``bracket`` with theta(t, y) > 0, by bisection.

    Returns +inf when theta <= 0 on the whole bracket and the domain infimum
    when theta > 0 everywhere on it.  The bracket must see theta(t, .)
    non-decreasing; violations raise AssumptionViolation.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if spec.domain is Domain.HALF_LINE:
        lo = max(lo, 0.0)
    if not hi > lo:
        raise ConfigError("empty bracket")
    xs = np.linspace(lo, hi, 65)
    vals = np.asarray(theta(spec, t, xs), dtype=float)
    diffs = np.diff(vals)
    if np.any(diffs < -_slack(vals)):
        k = int(np.argmin(diffs))
        raise AssumptionViolation(
            f"theta(t={t}, .) decreases between x={xs[k]:.6g} and x={xs[k+1]:.6g}")
    if vals[-1] <= 0:
        return math.inf
    if vals[0] > 0:
        return spec.domain.infimum
    # invariant: theta(lo) <= 0 < theta(hi)
    f = lambda y: float(theta(spec, t, y))
    while hi - lo > tol_x:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass
class ClauseVerdict:
    clause: str
    passed: bool
    witnesses: List[Tuple[float, float, float]] = field(default_factory=list)
    note: str = ""


@dataclass
class AssumptionReport:
    clauses: List[ClauseVerdict]
    k1_empirical: float
    mu_x_sup: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def clause(self, name: str) -> ClauseVerdict:
        for c in self.clauses:
            if c.clause == name:
                return c
        raise KeyError(name)

    def summary(self) -> str:
        lines = [f"{'PASS' if c.passed else 'FAIL'} {c.clause}"
                 + (f"  [{c.note}]" if c.note else "") for c in self.clauses]
        return "\n".join(lines)


def _fail(clause, tt, xx, vals, mask, note=""):
    idx = np.argwhere(mask)
    witnesses = [(float(tt[i, j]), float(xx[i, j]), float(vals[i, j]))
                 for i, j in idx[:5]]
    return ClauseVerdict(clause, False, witnesses, note)


def validate_assumptions(spec: GameSpec,
                         probes: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
                         *, x_window: Optional[Tuple[float, float]] = None,
                         n_t: int = 64, n_x: int = 256) -> AssumptionReport:
    """Sample-based verdicts for the standing assumptions on a probe lattice.

    ``probes`` is an optional (t_nodes, x_nodes) pair; otherwise a lattice of
    ``n_t`` x ``n_x`` points is built over [0, T] x ``x_window``.  Failures
    are verdicts with witness points, never exceptions.
    """
    if probes is not None:
        t_nodes = np.asarray(probes[0], dtype=float)
        x_nodes = np.asarray(probes[1], dtype=float)
    else:
        if x_window is None:
            raise ConfigError("need probes or x_window")
        lo, hi = x_window
        if spec.domain is Domain.HALF_LINE:
            lo = max(lo, 0.0)
        t_nodes = np.linspace(0.0, spec.T, n_t)
        x_nodes = np.linspace(lo, hi, n_x)

    tt, xx = np.meshgrid(t_nodes, x_nodes, indexing="ij")
    clauses: List[ClauseVerdict] = []

    mu_vals = np.asarray(spec.mu(x_nodes), dtype=float)
    mu_x_vals = np.asarray(spec.mu_x(x_nodes), dtype=float)
    h_x_vals = np.asarray(spec.h_x(tt, xx), dtype=float)
    th_vals = np.asarray(theta(spec, tt, xx), dtype=float)

    # mu convex: discrete second difference >= -slack
    d2mu = mu_vals[2:] - 2 * mu_vals[1:-1] + mu_vals[:-2]
    bad = d2mu < -_slack(mu_vals)
    if np.any(bad):
        k = int(np.argmax(bad))
        clauses.append(ClauseVerdict("mu_convex", False,
                                     [(0.0, float(x_nodes[k + 1]), float(d2mu[k]))],
                                     "second difference negative"))
    else:
        clauses.append(ClauseVerdict("mu_convex", True))

    # mu_x bounded above (finite on probes; empirical sup reported)
    mu_x_sup = float(np.max(mu_x_vals))
    clauses.append(ClauseVerdict("mu_x_bounded_above", bool(np.isfinite(mu_x_sup)),
                                 note=f"sup mu_x = {mu_x_sup:.6g}"))

    # h_x >= 0
    bad = h_x_vals < -_slack(h_x_vals)
    clauses.append(_fail("h_x_nonnegative", tt, xx, h_x_vals, bad)
                   if np.any(bad) else ClauseVerdict("h_x_nonnegative", True))

    # x -> h_x non-decreasing
    d = np.diff(h_x_vals, axis=1)
    bad = d < -_slack(h_x_vals)
    clauses.append(_fail("h_x_nondecreasing_in_x", tt[:, 1:], xx[:, 1:], d, bad)
                   if np.any(bad) else ClauseVerdict("h_x_nondecreasing_in_x", True))

    # t -> h_x non-increasing
    d = np.diff(h_x_vals, axis=0)
    bad = d > _slack(h_x_vals)
    clauses.append(_fail("h_x_nonincreasing_in_t", tt[1:, :], xx[1:, :], d, bad)
                   if np.any(bad) else ClauseVerdict("h_x_nonincreasing_in_t", True))

    # t -> theta non-increasing
    d = np.diff(th_vals, axis=0)
    bad = d > _slack(th_vals)
    clauses.append(_fail("theta_nonincreasing_in_t", tt[1:, :], xx[1:, :], d, bad)
                   if np.any(bad) else ClauseVerdict("theta_nonincreasing_in_t", True))

    # theta bounded below; empirical K1
    k1 = float(-np.min(th_vals))
    clauses.append(ClauseVerdict("theta_bounded_below", bool(np.isfinite(k1)),
                                 note=f"empirical K1 = {k1:.6g}"))

    # sup_x theta(t, .) > 0 for t < T
    row_max = np.max(th_vals, axis=1)
    interior = t_nodes < spec.T
    bad_rows = interior & (row_max <= 0)
    if np.any(bad_rows):
        k = int(np.argmax(bad_rows))
        j = int(np.argmax(th_vals[k]))
        clauses.append(ClauseVerdict(
            "theta_sup_positive", False,
            [(float(t_nodes[k]), float(x_nodes[j]), float(row_max[k]))],
            "degenerate instance: the stopper ends the game immediately"))
    else:
        clauses.append(ClauseVerdict("theta_sup_positive", True))

    if spec.domain is Domain.HALF_LINE:
        mu0 = float(spec.mu(0.0))
        clauses.append(ClauseVerdict("mu_zero_at_origin", abs(mu0) <= 1e-10,
                                     [] if abs(mu0) <= 1e-10 else [(0.0, 0.0, mu0)]))
        th00 = float(theta(spec, 0.0, 0.0))
        clauses.append(ClauseVerdict("theta_negative_at_origin", th00 < 0,
                                     [] if th00 < 0 else [(0.0, 0.0, th00)],
                                     note=f"theta(0,0) = {th00:.6g}"))

    return AssumptionReport(clauses, k1_empirical=k1, mu_x_sup=mu_x_sup)


# --- shipped coefficient families -------------------------------------------

def benchmark_spec(kappa1: float, kappa2: float, mu_lin: float, sigma_lin: float,
                   *, r: float = 0.02, alpha0: float = 3.5,
                   horizon: float = 1.0) -> GameSpec:
    """Half-line instance with g = 0, h = kappa1 x^2 - kappa2, mu = mu_lin x,
    sigma = sigma_lin x."""
    if kappa1 <= 0 or kappa2 <= 0:
        raise ConfigError("kappa1 and kappa2 must be positive")
    if sigma_lin <= 0:
        raise ConfigError("sigma_lin must be positive")
    k1, k2, m = float(kappa1), float(kappa2), float(mu_lin)
    mu = ScalarFn(lambda t, x: m * np.asarray(x, dtype=float),
                  lambda t, x: m + 0.0 * np.asarray(x, dtype=float),
                  lambda t, x: 0.0 * np.asarray(x, dtype=float),
                  name=f"{m}*x")
    h = ScalarFn(lambda t, x: k1 * np.asarray(x, dtype=float) ** 2 - k2,
                 lambda t, x: 2 * k1 * np.asarray(x, dtype=float),
                 lambda t, x: 0.0 * np.asarray(x, dtype=float),
                 name=f"{k1}*x^2 - {k2}")
    spec = GameSpec(Domain.HALF_LINE, mu, 0.0, float(sigma_lin),
                    ScalarFn.constant(0.0), h, r, alpha0, horizon)
    spec.meta.update(family="benchmark", kappa1=k1, kappa2=k2,
                     mu_lin=m, sigma_lin=float(sigma_lin))
    return spec


def real_line_quadratic_spec(beta: float, c: float, sigma0: float,
                             q2: float, q1: float, q0: float,
                             *, g_scale: float = 0.0, g_rate: float = 1.0,
                             r: float = 0.0, alpha0: float = 1.0,
                             horizon: float = 1.0) -> GameSpec:
    """Real-line instance: mu = beta x + c, sigma constant, quadratic h,
    g(t) = g_scale * exp(g_rate * t).

    h_x >= 0 can only hold on a window for q2 != 0; assumption checks are
    window-relative by design.
    """
    if sigma0 <= 0:
        raise ConfigError("sigma0 must be positive")
    b, cc = float(beta), float(c)
    mu = ScalarFn(lambda t, x: b * np.asarray(x, dtype=float) + cc,
                  lambda t, x: b + 0.0 * np.asarray(x, dtype=float),
                  lambda t, x: 0.0 * np.asarray(x, dtype=float),
                  name=f"{b}*x + {cc}")
    a2, a1, a0 = float(q2), float(q1), float(q0)
    h = ScalarFn(lambda t, x: a2 * np.asarray(x, dtype=float) ** 2 + a1 * np.asarray(x, dtype=float) + a0,
                 lambda t, x: 2 * a2 * np.asarray(x, dtype=float) + a1,
                 lambda t, x: 0.0 * np.asarray(x, dtype=float),
                 name=f"{a2}*x^2 + {a1}*x + {a0}")
    gs, gr = float(g_scale), float(g_rate)
    g = ScalarFn(lambda t, x: gs * np.exp(gr * np.asarray(t, dtype=float)),
                 lambda t, x: 0.0 * np.asarray(t, dtype=float),
                 lambda t, x: gs * gr * np.exp(gr * np.asarray(t, dtype=float)),
                 name=f"{gs}*exp({gr}*t)")
    spec = GameSpec(Domain.REAL_LINE, mu, float(sigma0), 0.0, g, h, r, alpha0, horizon)
    spec.meta.update(family="quadratic_real_line", beta=b, c=cc, sigma0=float(sigma0),
                     q2=a2, q1=a1, q0=a0, g_scale=gs, g_rate=gr)
    return spec


def piecewise_power_spec(p: float, knee: float, shift: float, sigma_lin: float,
                         kappa1: float, kappa2: float,
                         *, r: float = 0.02, alpha0: float = 3.5,
                         horizon: float = 1.0) -> GameSpec:
    """Half-line instance with the piecewise-power drift

        mu(x) = ((x - shift)^+)^p            for x <= knee,
        mu(x) = (knee-shift)^(p-1) (knee-shift + p (x-knee))   for x >  knee,

    which is convex and C^1 for p > 1, knee > shift >= 0."""
    if not (p > 1 and knee > shift >= 0):
        raise ConfigError("need p > 1 and knee > shift >= 0")
    if sigma_lin <= 0 or kappa1 <= 0 or kappa2 <= 0:
        raise ConfigError("sigma_lin, kappa1, kappa2 must be positive")
    pp, nn, cc = float(p), float(knee), float(shift)
    base = (nn - cc) ** (pp - 1)

    def mu_val(t, x):
        xa = np.asarray(x, dtype=float)
        below = np.maximum(xa - cc, 0.0) ** pp
        above = base * ((nn - cc) + pp * (xa - nn))
        return np.where(xa <= nn, below, above)

    def mu_dx(t, x):
        xa = np.asarray(x, dtype=float)
        below = pp * np.maximum(xa - cc, 0.0) ** (pp - 1)
        return np.where(xa <= nn, below, pp * base)

    mu = ScalarFn(mu_val, mu_dx,
                  lambda t, x: 0.0 * np.asarray(x, dtype=float),
                  name=f"((x-{cc})^+)^{pp} kneed at {nn}")
    k1, k2 = float(kappa1), float(kappa2)
    h = ScalarFn(lambda t, x: k1 * np.asarray(x, dtype=float) ** 2 - k2,
                 lambda t, x: 2 * k1 * np.asarray(x, dtype=float),
                 lambda t, x: 0.0 * np.asarray(x, dtype=float),
                 name=f"{k1}*x^2 - {k2}")
    spec = GameSpec(Domain.HALF_LINE, mu, 0.0, float(sigma_lin),
                    ScalarFn.constant(0.0), h, r, alpha0, horizon)
    spec.meta.update(family="piecewise_power", p=pp, knee=nn, shift=cc,
                     sigma_lin=float(sigma_lin), kappa1=k1, kappa2=k2)
    return spec


def expr_spec(domain: Domain, mu: str, g: str, h: str,
              *, sigma0: float = 0.0, sigma1: float = 0.0,
              r: float = 0.0, alpha0: float = 1.0, horizon: float = 1.0) -> GameSpec:
    """Instance with expression-string coefficients (variables t, x)."""
    spec = GameSpec(domain, ScalarFn.from_expr(mu), float(sigma0), float(sigma1),
                    ScalarFn.from_expr(g), ScalarFn.from_expr(h),
                    r, alpha0, horizon)
    spec.meta.update(family="expr", mu=mu, g=g, h=h)
    return spec
