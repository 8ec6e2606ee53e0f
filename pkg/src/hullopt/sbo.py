"""Single-objective minimization of the penalized mass over the surrogates.

Bayesian optimization with a scalar GPR on the penalized mass, linear cuts
from the incumbent and the VCG limit, ILP rounding onto the discrete
thickness grid, and the principal dimensions search (PDS).
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.stats import norm

from .criteria import PenaltyConfig, penalized_mass_arrays
from .errors import ConfigError, DataError, DomainError, SearchExhausted
from .hull_model import ParameterSpace
from .ilp import AssignmentIlp, Coupling, IlpStatus, solve_assignment
from .rom.gpr import GprModel, condition, gpr_fit

Objective = Callable[[np.ndarray], np.ndarray]  # (B, d) configs -> (B,) penalized mass

FEAS_TOL = 1e-9


class AcqKind(str, Enum):
    NLCB = "NLCB"
    EI = "EI"
    PI = "PI"


ROTATION = (AcqKind.NLCB, AcqKind.EI, AcqKind.PI)


@dataclass
class AcquisitionConfig:
    kind: AcqKind = AcqKind.NLCB
    beta: float = 2.0
    epsilon: float = 0.1  # t
    switch_patience: int = 100

    def __post_init__(self):
        self.kind = AcqKind(self.kind)
        if self.beta < 0:
            raise ConfigError("beta must be non-negative")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.switch_patience < 1:
            raise ConfigError("switch_patience must be at least 1")

    def rotated(self) -> "AcquisitionConfig":
        nxt = ROTATION[(ROTATION.index(self.kind) + 1) % len(ROTATION)]
        return AcquisitionConfig(nxt, self.beta, self.epsilon, self.switch_patience)


# -- acquisition functions ----------------------------------------------------


def acquisition(kind, mu, sigma, y_star: float, config: AcquisitionConfig | None = None):
    """Acquisition value for posterior mean ``mu`` and std ``sigma`` (to maximize)."""
    return acquisition_with_grad(kind, mu, sigma, y_star, config)[0]


def acquisition_with_grad(kind, mu, sigma, y_star: float, config: AcquisitionConfig | None = None):
    """Value and partial derivatives with respect to ``mu`` and ``sigma``."""
    cfg = config or AcquisitionConfig()
    kind = AcqKind(kind)
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0):
        raise DomainError("sigma must be non-negative")
    if kind is AcqKind.NLCB:
        val = -(mu - cfg.beta * sigma)
        return val, -np.ones_like(mu), np.full_like(sigma, cfg.beta)
    gap = y_star - mu if kind is AcqKind.EI else y_star - cfg.epsilon - mu
    pos = sigma > 0
    s = np.where(pos, sigma, 1.0)
    z = gap / s
    cdf, pdf = norm.cdf(z), norm.pdf(z)
    if kind is AcqKind.EI:
        val = np.where(pos, gap * cdf + sigma * pdf, np.maximum(gap, 0.0))
        d_mu = np.where(pos, -cdf, -(gap > 0).astype(float))
        d_sigma = np.where(pos, pdf, 0.0)
    else:
        val = np.where(pos, cdf, (gap > 0).astype(float))
        d_mu = np.where(pos, -pdf / s, 0.0)
        d_sigma = np.where(pos, -pdf * z / s, 0.0)
    return val, d_mu, d_sigma


# -- linear feasible region ---------------------------------------------------


def mass_halfspace(space: ParameterSpace, pen: PenaltyConfig, f_star: float) -> tuple[np.ndarray, float]:
    """Cut m_fixed + d.x <= f*: only configurations below it can beat f*."""
    return space.d.astype(float), float(f_star - pen.m_fixed)


def vcg_halfspace(space: ParameterSpace, pen: PenaltyConfig) -> tuple[np.ndarray, float] | None:
    """sum_i (VCG_i - VCG_crit) d_i x_i <= (VCG_crit - VCG_fixed) m_fixed."""
    if not np.isfinite(pen.vcg_crit):
        return None
    a = (space.vcg - pen.vcg_crit) * space.d
    return a.astype(float), float((pen.vcg_crit - pen.vcg_fixed) * pen.m_fixed)


class Polytope:
    """Box [lo, hi] intersected with half-spaces a.x <= b, handled in unit
    coordinates u = (x - lo) / (hi - lo)."""

    def __init__(self, lo, hi, halfspaces: Sequence[tuple[np.ndarray, float]]):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.span = np.where(self.hi > self.lo, self.hi - self.lo, 1.0)
        self.A_x = np.array([a for a, _ in halfspaces], dtype=float).reshape(-1, len(self.lo))
        self.b_x = np.array([b for _, b in halfspaces], dtype=float)
        # unit coordinates
        self.A = self.A_x * self.span
        self.b = self.b_x - self.A_x @ self.lo
        self.center = self._chebyshev_center()

    @property
    def dim(self) -> int:
        return len(self.lo)

    def to_x(self, U) -> np.ndarray:
        return self.lo + np.asarray(U) * self.span

    def to_u(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.lo) / self.span

    def _chebyshev_center(self) -> np.ndarray:
        d = self.dim
        norms = np.linalg.norm(self.A, axis=1)
        eye = np.eye(d)
        A_ub = np.vstack(
            [
                np.column_stack([self.A, norms]),
                np.column_stack([eye, np.ones(d)]),
                np.column_stack([-eye, np.ones(d)]),
            ]
        )
        b_ub = np.concatenate([self.b, np.ones(d), np.zeros(d)])
        c = np.zeros(d + 1)
        c[-1] = -1.0
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * d + [(0.0, 1.0)], method="highs")
        if res.status != 0:
            raise SearchExhausted("the constrained search region is empty")
        u = np.clip(res.x[:d], 0.0, 1.0)
        if np.any(self.A @ u > self.b + FEAS_TOL * (1.0 + np.abs(self.b))):
            raise SearchExhausted("the constrained search region is empty")
        return u

    def violation(self, X) -> np.ndarray:
        """Largest half-space excess in x units, per row."""
        X = np.atleast_2d(X)
        if not len(self.b_x):
            return np.zeros(len(X))
        return np.max(X @ self.A_x.T - self.b_x, axis=1)

    def project(self, U, max_iter: int = 200, tol: float = 1e-12) -> np.ndarray:
        """Euclidean projection of rows of U by Dykstra's alternating scheme,
        followed by a shrink toward the center that makes every row exactly
        feasible."""
        x = np.clip(np.atleast_2d(np.asarray(U, dtype=float)), -1e6, 1e6).copy()
        boxed = np.clip(x, 0.0, 1.0)
        if not len(self.b) or np.all(boxed @ self.A.T <= self.b):
            return boxed
        n_sets = 1 + len(self.b)
        p = np.zeros((n_sets,) + x.shape)
        for _ in range(max_iter):
            x_old, p_old = x, p.copy()
            for k in range(n_sets):
                y = x + p[k]
                if k == 0:
                    x_new = np.clip(y, 0.0, 1.0)
                else:
                    a, b = self.A[k - 1], self.b[k - 1]
                    nn = a @ a
                    x_new = y if nn == 0 else y - (np.maximum(y @ a - b, 0.0) / nn)[:, None] * a
                p[k] = y - x_new
                x = x_new
            # x can stall for a cycle while the corrections still move
            if np.max(np.abs(x - x_old)) < tol and np.max(np.abs(p - p_old)) < tol:
                break
        return self.shrink(np.clip(x, 0.0, 1.0))

    def shrink(self, U) -> np.ndarray:
        """Pull box points along the segment to the center until every
        half-space holds."""
        U = np.atleast_2d(U).copy()
        if not len(self.b):
            return U
        c = self.center
        slack_c = self.b - self.A @ c  # >= 0 up to rounding
        excess = U @ self.A.T - self.b
        bad = np.any(excess > 0, axis=1)
        if not np.any(bad):
            return U
        D = U[bad] - c
        AD = D @ self.A.T
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(AD > 0, np.maximum(slack_c, 0.0) / AD, np.inf)
        t = np.clip(np.min(t, axis=1), 0.0, 1.0) * (1.0 - 1e-12)
        U[bad] = c + t[:, None] * D
        return U

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.project(rng.random((n, self.dim)))


def projected_ascent(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    poly: Polytope,
    starts: np.ndarray,
    max_iter: int = 50,
    step0: float = 0.1,
    min_step: float = 1e-5,
) -> tuple[np.ndarray, float]:
    """Maximize ``fun`` (value, gradient in unit coordinates) over ``poly``
    from each start with an adaptive step; returns the best point (unit
    coordinates) and its value."""
    best_u, best_v = None, -np.inf
    for u0 in np.atleast_2d(starts):
        u = poly.project(u0)[0]
        v, g = fun(u)
        step = step0
        for _ in range(max_iter):
            gn = np.linalg.norm(g)
            if gn == 0 or not np.isfinite(gn):
                break
            cand = poly.project(u + step * g / gn)[0]
            if np.max(np.abs(cand - u)) < 1e-10:
                break
            cv, cg = fun(cand)
            if cv > v:
                u, v, g = cand, cv, cg
                step = min(step * 1.5, 1.0)
            else:
                step *= 0.5
                if step < min_step:
                    break
        if v > best_v:
            best_u, best_v = u, v
    return best_u, best_v


# -- BO state -----------------------------------------------------------------


def config_key(x) -> tuple[float, ...]:
    return tuple(np.round(np.asarray(x, dtype=float), 9).tolist())


@dataclass
class BoBudget:
    max_iters: int = 200
    time_limit: float | None = 300.0  # s


@dataclass
class TraceRow:
    iteration: int
    kind: str
    config: tuple[float, ...]
    f: float
    incumbent_f: float
    event: str = ""


@dataclass
class BoState:
    space: ParameterSpace
    pen: PenaltyConfig
    X: list[np.ndarray]
    y: list[float]
    visited: set[tuple[float, ...]]
    incumbent: np.ndarray
    f_star: float
    gpr: GprModel | None = None
    y_mean: float = 0.0
    y_std: float = 1.0

    @classmethod
    def from_evaluations(cls, space: ParameterSpace, pen: PenaltyConfig, X, y) -> "BoState":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float)
        if len(X) == 0 or len(X) != len(y):
            raise DataError("BO needs matching, non-empty configurations and values")
        feas = np.array([is_feasible(x, space, pen) for x in X])
        if not np.any(feas):
            raise DataError("no VCG-feasible configuration to start from")
        i = int(np.argmin(np.where(feas, y, np.inf)))
        return cls(
            space=space,
            pen=pen,
            X=[x for x in X],
            y=[float(v) for v in y],
            visited={config_key(x) for x in X},
            incumbent=X[i].copy(),
            f_star=float(y[i]),
        )

    # unit coordinates over the full thickness range of each parameter
    def normalize(self, X) -> np.ndarray:
        lo, hi = self.space.lower, self.space.upper
        return (np.asarray(X, dtype=float) - lo) / np.where(hi > lo, hi - lo, 1.0)

    def fit(self, restarts: int = 3, seed: int = 0, refit: bool = True):
        U = self.normalize(np.array(self.X))
        y = np.array(self.y)
        self.y_mean = float(y.mean())
        self.y_std = float(y.std()) or 1.0
        Y = (y - self.y_mean) / self.y_std
        if refit or self.gpr is None:
            theta0 = None if self.gpr is None else self.gpr.theta
            self.gpr = gpr_fit(U, Y, restarts=restarts, seed=seed, theta0=theta0)
        else:
            self.gpr = condition(U, Y[:, None], self.gpr.theta)

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        mean, var = self.gpr.predict(self.normalize(np.atleast_2d(X)))
        return self.y_mean + self.y_std * mean[:, 0], self.y_std * np.sqrt(var)

    def polytope(self) -> Polytope:
        hs = [mass_halfspace(self.space, self.pen, self.f_star)]
        v = vcg_halfspace(self.space, self.pen)
        if v is not None:
            hs.append(v)
        return Polytope(self.space.lower, self.space.upper, hs)

    def record(self, x, f: float) -> bool:
        """Add an evaluation; returns True when it improves the incumbent."""
        x = np.asarray(x, dtype=float)
        self.X.append(x)
        self.y.append(float(f))
        self.visited.add(config_key(x))
        if f < self.f_star and is_feasible(x, self.space, self.pen):
            self.incumbent, self.f_star = x.copy(), float(f)
            return True
        return False


def is_feasible(x, space: ParameterSpace, pen: PenaltyConfig, f_star: float | None = None) -> bool:
    x = np.asarray(x, dtype=float)
    v = vcg_halfspace(space, pen)
    if v is not None and x @ v[0] > v[1] + FEAS_TOL:
        return False
    if f_star is not None:
        a, b = mass_halfspace(space, pen, f_star)
        if x @ a > b + FEAS_TOL:
            return False
    return True


def maximize_acquisition(
    state: BoState, acq: AcquisitionConfig, rng: np.random.Generator | int | None = 0,
    n_pool: int = 256, n_starts: int = 6,
) -> np.ndarray:
    """Continuous maximizer of the acquisition inside the box and both cuts."""
    if state.gpr is None:
        raise DataError("objective GPR is not fitted")
    rng = np.random.default_rng(rng)
    poly = state.polytope()

    def batch_value(U):
        mu, sd = state.predict(poly.to_x(U))
        return acquisition(acq.kind, mu, sd, state.f_star, acq)

    def fun(u):
        # the polytope and the GPR share the same unit coordinates
        m, s, dm, ds = state.gpr.predict_with_grad(u)
        mu, sd = state.y_mean + state.y_std * m[0], state.y_std * s
        val, d_mu, d_sd = acquisition_with_grad(acq.kind, mu, sd, state.f_star, acq)
        g = d_mu * state.y_std * dm[:, 0] + d_sd * state.y_std * ds
        return float(val), g

    pool = poly.sample(n_pool, rng)
    inc = poly.to_u(state.incumbent)
    pert = poly.project(inc + 0.05 * rng.standard_normal((max(n_starts // 2, 1), poly.dim)))
    vals = batch_value(pool)
    top = pool[np.argsort(-vals)[: max(n_starts - len(pert), 1)]]
    starts = np.vstack([top, pert, poly.center[None]])
    u, _ = projected_ascent(fun, poly, starts)
    x = poly.to_x(u)
    if poly.violation(x)[0] > FEAS_TOL:  # numerical safety net
        x = poly.to_x(poly.center)
    return x


def _nearest(space: ParameterSpace, x) -> np.ndarray:
    out = np.empty(space.n_params)
    for i in range(space.n_params):
        dom = space.domain(i)
        out[i] = dom[int(np.argmin(np.abs(dom - x[i])))]
    return out


def _indices(space: ParameterSpace, x) -> tuple[int, ...]:
    return tuple(int(np.argmin(np.abs(space.domain(i) - x[i]))) for i in range(space.n_params))


def rounding_ilp(x_bar, state: BoState, exclude: Sequence[np.ndarray]) -> AssignmentIlp:
    """Closest grid point to ``x_bar`` under the mass and VCG cuts, excluding
    the given configurations."""
    sp = state.space
    doms = [sp.domain(i) for i in range(sp.n_params)]
    costs = [(dom - x_bar[i]) ** 2 for i, dom in enumerate(doms)]
    a, b = mass_halfspace(sp, state.pen, state.f_star)
    couplings = [Coupling([a[i] * dom for i, dom in enumerate(doms)], b + FEAS_TOL)]
    v = vcg_halfspace(sp, state.pen)
    if v is not None:
        couplings.append(Coupling([v[0][i] * dom for i, dom in enumerate(doms)], v[1] + FEAS_TOL))
    exclusions = sorted({_indices(sp, e) for e in exclude})
    return AssignmentIlp(costs, couplings, exclusions=exclusions, labels=doms)


def ilp_round(
    x_bar, state: BoState, rng: np.random.Generator | int | None = 0,
    max_attempts: int = 50, time_limit: float | None = 10.0,
) -> np.ndarray:
    """Map a continuous point to an unvisited feasible configuration."""
    sp = state.space
    x_bar = np.clip(np.asarray(x_bar, dtype=float), sp.lower, sp.upper)
    naive = _nearest(sp, x_bar)
    if config_key(naive) not in state.visited and is_feasible(naive, sp, state.pen, state.f_star):
        return naive
    exclude = [naive] + [np.asarray(k) for k in state.visited]
    sol = solve_assignment(rounding_ilp(x_bar, state, exclude), time_limit=time_limit)
    if sol.status is IlpStatus.INFEASIBLE:
        raise SearchExhausted("no admissible candidate left for rounding")
    x = naive if sol.assignment is None else np.array(
        [sp.domain(i)[j] for i, j in enumerate(sol.assignment)]
    )
    if config_key(x) not in state.visited and is_feasible(x, sp, state.pen, state.f_star):
        return x
    rng = np.random.default_rng(rng)
    for _ in range(max_attempts):
        i = int(rng.integers(sp.n_params))
        y = x.copy()
        y[i] = rng.choice(sp.domain(i))
        if config_key(y) not in state.visited and is_feasible(y, sp, state.pen, state.f_star):
            return y
    raise SearchExhausted("random perturbations found no unvisited admissible configuration")


# -- BO driver ----------------------------------------------------------------


@dataclass
class BoResult:
    candidates: list[tuple[np.ndarray, float]]  # ranked by objective, best first
    trace: list[TraceRow]
    incumbent: np.ndarray
    f_star: float
    stop_reason: str
    evaluations: int = 0


def surrogate_objective(surrogate, pen: PenaltyConfig) -> Objective:
    """Penalized mass predicted by the POD-GPR field surrogate."""

    def f(X):
        return penalized_mass_arrays(surrogate.predict_qois(np.atleast_2d(X), pen), pen)

    return f


def bo_minimize(
    objective: Objective,
    space: ParameterSpace,
    pen: PenaltyConfig,
    X0,
    y0=None,
    budget: BoBudget = BoBudget(),
    acq: AcquisitionConfig | None = None,
    seed: int = 0,
    n_candidates: int = 5,
    refit_every: int = 10,
    restarts: int = 3,
) -> BoResult:
    """BO loop: maximize acquisition, round, evaluate, update incumbent and
    cuts, rotate the acquisition after ``switch_patience`` stale iterations."""
    acq = acq or AcquisitionConfig()
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    y0 = objective(X0) if y0 is None else np.asarray(y0, dtype=float)
    state = BoState.from_evaluations(space, pen, X0, y0)
    trace = [TraceRow(0, acq.kind.value, tuple(state.incumbent.tolist()), state.f_star, state.f_star, "incumbent")]
    n_initial = len(state.X)
    stale, it, reason = 0, 0, "iterations"
    new: list[tuple[np.ndarray, float]] = []

    def out_of_time():
        return budget.time_limit is not None and time.perf_counter() - t0 > budget.time_limit

    while it < budget.max_iters:
        if out_of_time():
            reason = "time"
            break
        try:
            if len(state.X) < 2:
                x = ilp_round(state.polytope().to_x(state.polytope().center), state, rng)
            else:
                state.fit(restarts=restarts, seed=seed + it, refit=it % refit_every == 0)
                x_bar = maximize_acquisition(state, acq, rng)
                x = ilp_round(x_bar, state, rng)
        except SearchExhausted:
            reason = "exhausted"
            break
        it += 1
        f = float(objective(x[None])[0])
        improved = state.record(x, f)
        new.append((x, f))
        event = "improved" if improved else ""
        if improved:
            stale = 0
        else:
            stale += 1
            if stale == acq.switch_patience:
                acq = acq.rotated()
                stale = 0
                event = "switch"
        trace.append(TraceRow(it, acq.kind.value, tuple(x.tolist()), f, state.f_star, event))

    ranked = sorted(new, key=lambda r: r[1])[:n_candidates]
    return BoResult(ranked, trace, state.incumbent, state.f_star, reason, len(state.X) - n_initial)


def bo_run(
    surrogate,
    db,
    pen: PenaltyConfig,
    budget: BoBudget = BoBudget(),
    acq: AcquisitionConfig | None = None,
    seed: int = 0,
    n_candidates: int = 5,
    space: ParameterSpace | None = None,
    refit_every: int = 10,
) -> BoResult:
    """BO over the surrogate penalized mass, seeded with the database configs."""
    space = space or surrogate.space
    if len(db) == 0:
        raise DataError("BO needs a non-empty database")
    X0 = db.configs(space)
    return bo_minimize(
        surrogate_objective(surrogate, pen), space, pen, X0,
        budget=budget, acq=acq, seed=seed, n_candidates=n_candidates, refit_every=refit_every,
    )


def write_trace_csv(path, trace: Sequence[TraceRow]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "acquisition", "config", "f", "incumbent_f", "event"])
        for r in trace:
            w.writerow([r.iteration, r.kind, " ".join(f"{v:g}" for v in r.config), f"{r.f:.6f}",
                        f"{r.incumbent_f:.6f}", r.event])


# -- principal dimensions search ------------------------------------------------


@dataclass
class PdsResult:
    config: np.ndarray
    f: float
    start_f: float
    sweeps: int
    evaluations: int
    sweep_evaluations: list[int] = field(default_factory=list)
    history: list[tuple[int, tuple[float, ...], float]] = field(default_factory=list)


def pds_run(
    objective,
    space: ParameterSpace,
    pen: PenaltyConfig,
    start,
    max_sweeps: int = 100,
    time_limit: float | None = 300.0,
    variant: str = "carry",
    max_evals: int | None = None,
) -> PdsResult:
    """Exhaustive one-parameter scans around the incumbent.

    ``variant="carry"`` moves the scan base to the incumbent after each
    parameter, so later parameters are scanned around earlier improvements;
    ``variant="paper"`` keeps every move a single change of the sweep's base
    point. Candidates violating the VCG cut or the incumbent mass cut are
    skipped without evaluation; only strict improvements are accepted.
    """
    if variant not in ("carry", "paper"):
        raise ConfigError(f"unknown PDS variant {variant!r}")
    if not callable(objective):
        objective = surrogate_objective(objective, pen)
    x_star = np.asarray(start, dtype=float).copy()
    space.validate(x_star)
    if not is_feasible(x_star, space, pen):
        raise DomainError("PDS start violates the VCG bound")
    f_star = float(objective(x_star[None])[0])
    res = PdsResult(x_star, f_star, f_star, 0, 1)
    res.history.append((0, tuple(x_star.tolist()), f_star))
    t0 = time.perf_counter()
    a_v = vcg_halfspace(space, pen)
    while res.sweeps < max_sweeps:
        if time_limit is not None and time.perf_counter() - t0 > time_limit:
            break
        if max_evals is not None and res.evaluations >= max_evals:
            break
        base = x_star.copy()
        f_base = f_star
        x = base.copy()
        n_eval = 0
        for i in range(space.n_params):
            dom = space.domain(i)
            vals = dom[np.abs(dom - base[i]) > 1e-12]
            C = np.repeat(x[None], len(vals), axis=0)
            C[:, i] = vals
            ok = pen.m_fixed + C @ space.d <= f_star + FEAS_TOL
            if a_v is not None:
                ok &= C @ a_v[0] <= a_v[1] + FEAS_TOL
            C = C[ok]
            if len(C):
                f = np.asarray(objective(C), dtype=float)
                n_eval += len(C)
                j = int(np.argmin(f))
                if f[j] < f_star:
                    x_star, f_star = C[j].copy(), float(f[j])
            x = x_star.copy() if variant == "carry" else base.copy()
        res.sweeps += 1
        res.evaluations += n_eval
        res.sweep_evaluations.append(n_eval)
        res.history.append((res.sweeps, tuple(x_star.tolist()), f_star))
        if not f_star < f_base:
            break
    res.config, res.f = x_star, f_star
    return res


__all__ = [
    "AcqKind",
    "AcquisitionConfig",
    "BoBudget",
    "BoResult",
    "BoState",
    "Polytope",
    "PdsResult",
    "TraceRow",
    "acquisition",
    "acquisition_with_grad",
    "bo_minimize",
    "bo_run",
    "ilp_round",
    "is_feasible",
    "mass_halfspace",
    "maximize_acquisition",
    "pds_run",
    "projected_ascent",
    "rounding_ilp",
    "surrogate_objective",
    "vcg_halfspace",
    "write_trace_csv",
]
