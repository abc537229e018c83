"""Nonlinear conjugate gradient with Polak-Ribière (PR+) updates.

The objective is any callable ``fun(theta) -> (value, gradient)``. Step lengths
come from a bracketing/zoom line search that enforces the strong Wolfe
conditions.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import LineSearchError, NonDescentError, OptimizerAbort, StallError

GRADIENT_TOLERANCE = "gradient_tolerance"
LOSS_GOAL = "loss_goal"
MAX_ITERATIONS = "max_iterations"
STALL = "stall"

MIN_STEP = 1e-16


@dataclass(frozen=True)
class CgConfig:
    max_iterations: int = 1000
    gradient_tolerance: float = 1e-6
    loss_goal: float | None = 1e-5
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.1
    max_line_search_evals: int = 40
    restart_interval: int | None = None  # None: twice the dimension of theta

    def __post_init__(self):
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise ValueError(f"need 0 < c1 < c2 < 1, got c1={self.wolfe_c1}, c2={self.wolfe_c2}")
        if self.max_iterations < 0 or self.max_line_search_evals < 1:
            raise ValueError("iteration limits must be positive")
        if self.restart_interval is not None and self.restart_interval < 1:
            raise ValueError("restart_interval must be >= 1")


@dataclass
class CgStep:
    iteration: int
    loss: float
    grad_inf_norm: float
    alpha: float
    beta: float
    restart: bool
    line_search_ok: bool = True


@dataclass
class CgTrace:
    steps: list[CgStep] = field(default_factory=list)

    @property
    def losses(self) -> np.ndarray:
        return np.array([s.loss for s in self.steps])

    @property
    def n_iterations(self) -> int:
        return max(len(self.steps) - 1, 0)

    def to_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "loss", "grad_inf_norm", "alpha", "beta", "restart"])
            for s in self.steps:
                w.writerow([s.iteration, repr(s.loss), repr(s.grad_inf_norm), repr(s.alpha),
                            repr(s.beta), int(s.restart)])

    @classmethod
    def from_csv(cls, path: str | os.PathLike) -> "CgTrace":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls([
            CgStep(int(r["iter"]), float(r["loss"]), float(r["grad_inf_norm"]), float(r["alpha"]),
                   float(r["beta"]), bool(int(r["restart"])))
            for r in rows
        ])


@dataclass
class CgResult:
    theta: np.ndarray
    loss: float
    gradient: np.ndarray
    trace: CgTrace
    reason: str
    n_evals: int


def polak_ribiere_beta(g, g_prev) -> float:
    """``max(0, g·(g - g_prev) / g_prev·g_prev)``."""
    g = np.asarray(g, dtype=np.float64)
    g_prev = np.asarray(g_prev, dtype=np.float64)
    denom = float(g_prev @ g_prev)
    if denom == 0.0:
        raise ZeroDivisionError("previous gradient is zero; the minimizer should already have stopped")
    return max(0.0, float(g @ (g - g_prev)) / denom)


def _cubic_min(a0, f0, d0, a1, f1, d1):
    """Minimizer of the cubic matching value and slope at two points, or None."""
    if a0 == a1:
        return None
    t1 = d0 + d1 - 3.0 * (f0 - f1) / (a0 - a1)
    disc = t1 * t1 - d0 * d1
    if disc < 0 or not math.isfinite(disc):
        return None
    t2 = math.copysign(math.sqrt(disc), a1 - a0)
    denom = d1 - d0 + 2.0 * t2
    if denom == 0:
        return None
    a = a1 - (a1 - a0) * (d1 + t2 - t1) / denom
    return a if math.isfinite(a) else None


@dataclass
class LineSearchResult:
    alpha: float
    value: float
    slope: float
    n_evals: int
    wolfe: bool


def line_search_wolfe(phi, phi0: float, dphi0: float, alpha0: float = 1.0, c1: float = 1e-4,
                      c2: float = 0.1, max_evals: int = 40, alpha_max: float = 1e10,
                      refine: bool = True) -> LineSearchResult:
    """Find a step satisfying the strong Wolfe conditions.

    ``phi(alpha)`` must return ``(value, slope)`` of the objective restricted to
    the search line. If the evaluation budget runs out, the best point with
    sufficient decrease is returned with ``wolfe=False``.

    With ``refine``, a Wolfe point is polished by up to two secant steps on the
    slope, each kept only if it preserves sufficient decrease and shrinks
    ``|phi'|`` (so the strong Wolfe conditions still hold). Without it,
    conjugate gradient loses conjugacy quickly on ill-conditioned problems.

    Raises
    ------
    NonDescentError
        If ``dphi0 >= 0``.
    StallError
        If no step down to ``1e-16`` gives any decrease.
    """
    if not dphi0 < 0:
        raise NonDescentError(f"search direction is not a descent direction (slope {dphi0:g})")
    n_evals = 0
    best = None

    def armijo(a, f):
        return f <= phi0 + c1 * a * dphi0 and f < phi0

    def curvature(d):
        return abs(d) <= -c2 * dphi0

    def evaluate(a):
        nonlocal n_evals, best
        n_evals += 1
        f, d = phi(a)
        f, d = float(f), float(d)
        if not (math.isfinite(f) and math.isfinite(d)):
            f, d = math.inf, math.inf
        if armijo(a, f) and (best is None or f < best.value):
            best = LineSearchResult(a, f, d, 0, False)
        return f, d

    def accept(a, f, d, a_other, d_other):
        found = LineSearchResult(a, f, d, n_evals, True)
        for _ in range(2 if refine else 0):
            if n_evals >= max_evals or d == d_other or d == 0.0:
                break
            # secant on the slope: exact line minimizer for quadratics
            a_new = a - d * (a - a_other) / (d - d_other)
            if not (math.isfinite(a_new) and a_new > 0) or abs(a_new - a) <= 1e-12 * a:
                break
            f_new, d_new = evaluate(a_new)
            if not (armijo(a_new, f_new) and abs(d_new) < abs(d)):
                break
            a_other, d_other = a, d
            a, f, d = a_new, f_new, d_new
            found = LineSearchResult(a, f, d, n_evals, True)
        found.n_evals = n_evals
        return found

    def give_up():
        if best is None:
            raise StallError("line search found no decrease")
        best.n_evals = n_evals
        return best

    def zoom(lo, f_lo, d_lo, hi, f_hi, d_hi):
        while n_evals < max_evals:
            width = abs(hi - lo)
            if width <= MIN_STEP * max(1.0, abs(lo)):
                break
            a = None
            if math.isfinite(f_hi) and math.isfinite(d_hi):
                a = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
            left, right = min(lo, hi), max(lo, hi)
            margin = 0.1 * width
            if a is None or not (left + margin <= a <= right - margin):
                a = 0.5 * (lo + hi)
            f, d = evaluate(a)
            if not armijo(a, f) or f >= f_lo:
                hi, f_hi, d_hi = a, f, d
            else:
                if curvature(d):
                    if d * (hi - lo) >= 0:
                        return accept(a, f, d, hi, d_hi)
                    return accept(a, f, d, lo, d_lo)
                if d * (hi - lo) >= 0:
                    hi, f_hi, d_hi = lo, f_lo, d_lo
                lo, f_lo, d_lo = a, f, d
        return give_up()

    a_prev, f_prev, d_prev = 0.0, float(phi0), float(dphi0)
    a = min(max(float(alpha0), MIN_STEP), alpha_max)
    first = True
    while n_evals < max_evals:
        f, d = evaluate(a)
        if not armijo(a, f) or (not first and f >= f_prev):
            return zoom(a_prev, f_prev, d_prev, a, f, d)
        if curvature(d):
            return accept(a, f, d, a_prev, d_prev)
        if d >= 0:
            return zoom(a, f, d, a_prev, f_prev, d_prev)
        if a >= alpha_max:
            break
        guess = _cubic_min(a_prev, f_prev, d_prev, a, f, d)
        lo_ext, hi_ext = 2.0 * a, 10.0 * a
        nxt = guess if guess is not None and lo_ext <= guess <= hi_ext else 2.0 * a
        a_prev, f_prev, d_prev = a, f, d
        a = min(nxt, alpha_max)
        first = False
    return give_up()


def cg_minimize(fun, theta0, cfg: CgConfig = CgConfig(), callback=None) -> CgResult:
    """Minimize ``fun`` by PR+ conjugate gradient.

    The direction is reset to steepest descent on the first iteration, every
    ``restart_interval`` iterations, whenever beta clamps to zero, and whenever
    the conjugate direction fails to be a descent direction.
    """
    theta = np.array(theta0, dtype=np.float64)
    n_evals = 0

    def evaluate(x):
        nonlocal n_evals
        n_evals += 1
        f, g = fun(x)
        f = float(f)
        g = np.asarray(g, dtype=np.float64)
        if not math.isfinite(f) or not np.isfinite(g).all():
            raise OptimizerAbort(f"objective returned a non-finite value after {n_evals} evaluations")
        return f, g

    restart_every = cfg.restart_interval or 2 * theta.size
    f, g = evaluate(theta)
    ginf = float(np.max(np.abs(g))) if g.size else 0.0
    trace = CgTrace([CgStep(0, f, ginf, 0.0, 0.0, False)])
    d = g_prev = f_prev = None
    k = 0
    reason = MAX_ITERATIONS
    while True:
        if ginf <= cfg.gradient_tolerance:
            reason = GRADIENT_TOLERANCE
            break
        if cfg.loss_goal is not None and f <= cfg.loss_goal:
            reason = LOSS_GOAL
            break
        if k >= cfg.max_iterations:
            reason = MAX_ITERATIONS
            break

        beta = 0.0
        restart = d is None or k % restart_every == 0
        if not restart:
            beta = polak_ribiere_beta(g, g_prev)
            restart = beta == 0.0
            d = -g + beta * d
            if d @ g >= 0:
                restart, beta = True, 0.0
        if restart:
            d = -g
        dphi0 = float(d @ g)

        if f_prev is None:
            alpha0 = 1.0 / ginf
        else:
            alpha0 = min(1.0, 2.0 * (f - f_prev) / dphi0)
            if not alpha0 > 0:
                alpha0 = 1.0

        cache = {}

        def phi(a, theta=theta, d=d):
            fa, ga = evaluate(theta + a * d)
            cache[a] = ga
            return fa, float(ga @ d)

        try:
            ls = line_search_wolfe(phi, f, dphi0, alpha0, cfg.wolfe_c1, cfg.wolfe_c2,
                                   cfg.max_line_search_evals)
        except LineSearchError:
            reason = STALL
            break

        theta = theta + ls.alpha * d
        f_prev, g_prev = f, g
        f, g = ls.value, cache[ls.alpha]
        ginf = float(np.max(np.abs(g)))
        k += 1
        step = CgStep(k, f, ginf, ls.alpha, beta, restart, ls.wolfe)
        trace.steps.append(step)
        if callback is not None:
            callback(step)
    return CgResult(theta, f, g, trace, reason, n_evals)
