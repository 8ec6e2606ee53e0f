"""Data-driven refinement of the parameterization.

Around the incumbent, each parameterized section is scanned over its
thickness domain to record per-patch yielded and buckled counts. A clustering
ILP then assigns a thickness to every patch of the section with a fixed
number of distinct values, a knapsack picks which sections to split under a
parameter budget, and the chosen clusters become child parameters.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .criteria import PenaltyConfig
from .errors import ConfigError, DataError
from .hull_model import ParameterSpace
from .ilp import AssignmentIlp, Coupling, IlpStatus, KnapsackItem, solve_assignment, solve_knapsack


@dataclass
class PatchResponse:
    section: int
    patch: int
    domain: np.ndarray  # (T,) thickness values of the section
    y: np.ndarray  # (T,) yielded elements in the patch per value
    b: np.ndarray  # (T,) buckled elements in the patch per value
    mass: np.ndarray  # (T,) d_p * t
    vcg: float
    source: list[str] = field(default_factory=list)  # "hifi" or "surrogate" per value


@dataclass
class RefinementProposal:
    section: int
    n_clusters: int
    patch_ids: tuple[int, ...]
    assignment: tuple[float, ...]  # thickness per patch, aligned with patch_ids
    ilp_objective: float
    baseline: float  # every patch at the incumbent value
    improvement: float
    feasible: bool = True
    status: str = IlpStatus.OPTIMAL.value

    def clusters(self) -> dict[float, list[int]]:
        out: dict[float, list[int]] = {}
        for p, t in zip(self.patch_ids, self.assignment):
            out.setdefault(float(t), []).append(int(p))
        return dict(sorted(out.items()))


# -- responses ----------------------------------------------------------------


def collect_responses(surrogate, x_star, section: int, pen: PenaltyConfig, db=None,
                      space: ParameterSpace | None = None) -> list[PatchResponse]:
    """Per-patch failure counts with parameter ``section`` scanned over its
    domain and every other parameter held at the incumbent. Exact database
    snapshots replace surrogate predictions where available."""
    space = space or surrogate.space
    crit = surrogate.criteria
    x_star = np.asarray(space.validate(x_star), dtype=float)
    dom = space.domain(section)
    C = np.repeat(x_star[None], len(dom), axis=0)
    C[:, section] = dom
    _, py, pb = surrogate.predict_qois(C, pen, patch_counts=True)
    source = ["surrogate"] * len(dom)
    if db is not None:
        for k, c in enumerate(C):
            entry = db.lookup_config(space, c)
            if entry is not None:
                state = crit.failure_state(entry.snapshot)
                py[k] = crit.patch_counts(state.yielded)
                pb[k] = crit.patch_counts(state.buckled)
                source[k] = "hifi"
    out = []
    for p in space.params[section].patch_ids:
        patch = space.patches[p]
        n_el = len(patch.element_ids)
        out.append(
            PatchResponse(
                section=section,
                patch=int(p),
                domain=dom.copy(),
                y=np.clip(py[:, p], 0, n_el).astype(float),
                b=np.clip(pb[:, p], 0, n_el).astype(float),
                mass=patch.linear_density_coeff * dom,
                vcg=float(patch.vcg_p),
                source=list(source),
            )
        )
    return out


def monotone_buckling_fraction(responses: Sequence[PatchResponse]) -> float:
    """Share of patches whose buckled count never grows with thickness
    (a diagnostic; stress redistribution can break it)."""
    if not responses:
        return 1.0
    return float(np.mean([np.all(np.diff(r.b) <= 0) for r in responses]))


# -- clustering ILP -----------------------------------------------------------


def vcg_context(space: ParameterSpace, pen: PenaltyConfig, x_star, section: int) -> tuple[float, float]:
    """(VCG_res, m_res) of everything not controlled by ``section``."""
    x = np.asarray(x_star, dtype=float)
    w = space.d * x
    w[section] = 0.0
    m_res = pen.m_fixed + w.sum()
    vcg_res = (pen.vcg_fixed * pen.m_fixed + w @ space.vcg) / m_res
    return float(vcg_res), float(m_res)


def patch_costs(responses: Sequence[PatchResponse], pen: PenaltyConfig) -> np.ndarray:
    """Per-(patch, value) cost: mass + bars + per-patch squared penalties."""
    return np.array(
        [r.mass + pen.m_bar * r.b + pen.c_y * r.y**2 + pen.c_b * r.b**2 for r in responses]
    )


def clustering_ilp(responses: Sequence[PatchResponse], pen: PenaltyConfig, n_clusters: int,
                   vcg_res: float, m_res: float) -> AssignmentIlp:
    costs = patch_costs(responses, pen)
    couplings = []
    if np.isfinite(pen.vcg_crit):
        coef = [(r.vcg - pen.vcg_crit) * r.mass for r in responses]
        couplings.append(Coupling(coef, (pen.vcg_crit - vcg_res) * m_res))
    dom = responses[0].domain
    return AssignmentIlp(list(costs), couplings, n_clusters=n_clusters, labels=[dom] * len(responses))


def propose_refinement(responses: Sequence[PatchResponse], pen: PenaltyConfig, n_clusters: int,
                       vcg_res: float, m_res: float, incumbent_value: float,
                       time_limit: float | None = 30.0) -> RefinementProposal:
    if not responses:
        raise DataError("no patch responses")
    dom = responses[0].domain
    if any(not np.array_equal(r.domain, dom) for r in responses):
        raise DataError("patch responses of one section must share the domain")
    if not 2 <= n_clusters <= len(dom) or len(responses) < n_clusters:
        raise ConfigError(
            f"n_clusters={n_clusters} needs 2 <= n <= |D|={len(dom)} and at least n patches"
        )
    k0 = int(np.argmin(np.abs(dom - incumbent_value)))
    if abs(dom[k0] - incumbent_value) > 1e-9:
        raise DataError(f"incumbent value {incumbent_value} not in the section domain")
    costs = patch_costs(responses, pen)
    baseline = float(costs[:, k0].sum())
    prob = clustering_ilp(responses, pen, n_clusters, vcg_res, m_res)
    sol = solve_assignment(prob, time_limit=time_limit)
    patch_ids = tuple(r.patch for r in responses)
    if sol.assignment is None:
        return RefinementProposal(responses[0].section, n_clusters, patch_ids, (), np.inf, baseline,
                                  -np.inf, False, sol.status.value)
    assign = tuple(float(dom[j]) for j in sol.assignment)
    return RefinementProposal(
        section=responses[0].section,
        n_clusters=n_clusters,
        patch_ids=patch_ids,
        assignment=assign,
        ilp_objective=float(sol.objective),
        baseline=baseline,
        improvement=baseline - float(sol.objective),
        feasible=True,
        status=sol.status.value,
    )


def select_refinements(proposals: Sequence[RefinementProposal], n_params: int,
                       max_params: int) -> list[RefinementProposal]:
    """Knapsack over sections: at most one proposal per section, at most
    ``max_params - n_params`` added parameters, maximal total improvement."""
    if max_params < n_params:
        raise ConfigError(f"parameter budget {max_params} is below the current count {n_params}")
    by_section: dict[int, list[RefinementProposal]] = {}
    for p in proposals:
        if p.feasible and p.improvement > 0:
            by_section.setdefault(p.section, []).append(p)
    sections = sorted(by_section)
    groups = [[KnapsackItem(p.n_clusters, p.improvement, p) for p in by_section[s]] for s in sections]
    choice = solve_knapsack(groups, max_params - n_params)
    return [groups[g][i].tag for g, i in enumerate(choice) if i is not None]


# -- applying refinements ---------------------------------------------------------


def _kept_value(clusters: dict[float, list[int]], incumbent_value: float) -> float:
    # closest value to the incumbent keeps the parent index; ties go to the
    # larger cluster, then to the smaller thickness
    return min(clusters, key=lambda t: (abs(t - incumbent_value), -len(clusters[t]), t))


def apply_refinements(space: ParameterSpace, chosen: Sequence[RefinementProposal],
                      incumbent) -> ParameterSpace:
    """Split each chosen section into its clusters. The cluster whose value
    is closest to the incumbent stays on the original parameter; the others
    become new child parameters with the parent's domain."""
    if not chosen:
        return space
    x = np.asarray(incumbent, dtype=float)
    groups = [[p.name, list(p.patch_ids), list(p.domain), p.parent] for p in space.params]
    seen = set()
    for prop in chosen:
        i = prop.section
        if i in seen:
            raise DataError(f"two refinements for section {i}")
        seen.add(i)
        if not 0 <= i < space.n_params or set(prop.patch_ids) != set(space.params[i].patch_ids):
            raise DataError(f"proposal patches do not match section {i}")
        dom = space.domain(i)
        if any(not np.any(np.abs(dom - t) < 1e-12) for t in prop.assignment):
            raise DataError(f"proposal for section {i} uses values outside its domain")
        clusters = prop.clusters()
        keep = _kept_value(clusters, x[i])
        groups[i][1] = sorted(clusters[keep])
        k = 0
        for t, members in clusters.items():
            if t == keep:
                continue
            k += 1
            groups.append([f"{space.params[i].name}.{k}", sorted(members), list(dom), i])
    new = ParameterSpace.from_groups([tuple(g) for g in groups], space.patches)
    for j in range(space.n_params, new.n_params):
        assert np.array_equal(new.domain(j), new.domain(new.params[j].parent))
    return new


def lift_config(old: ParameterSpace, new: ParameterSpace, config) -> tuple[float, ...]:
    """Coarse configuration in the refined space: every child copies its
    parent, so the patch thickness field is unchanged."""
    return new.config_from_patch_thickness(old.patch_thickness(config))


def joined_assignment(space: ParameterSpace, chosen: Sequence[RefinementProposal], incumbent) -> np.ndarray:
    """Per-patch thickness with every chosen assignment applied to the incumbent."""
    pt = space.patch_thickness(incumbent)
    for prop in chosen:
        pt[list(prop.patch_ids)] = prop.assignment
    return pt


def joined_vcg_violation(space: ParameterSpace, chosen: Sequence[RefinementProposal], incumbent,
                         pen: PenaltyConfig) -> bool:
    """True when joining the per-section optima breaks the global VCG limit;
    each section ILP only sees its own patches, so this can happen."""
    if not np.isfinite(pen.vcg_crit):
        return False
    pt = joined_assignment(space, chosen, incumbent)
    dens = np.array([p.linear_density_coeff for p in space.patches])
    vcgs = np.array([p.vcg_p for p in space.patches])
    owned = np.isfinite(pt)
    w = dens[owned] * pt[owned]
    v = (pen.vcg_fixed * pen.m_fixed + w @ vcgs[owned]) / (pen.m_fixed + w.sum())
    return bool(v > pen.vcg_crit + 1e-12)


# -- resampling ---------------------------------------------------------------


def _unit(space: ParameterSpace, X) -> np.ndarray:
    lo, hi = space.lower, space.upper
    return (np.asarray(X, dtype=float) - lo) / np.where(hi > lo, hi - lo, 1.0)


def set_score(space: ParameterSpace, candidates, existing) -> float:
    """Minimum normalized distance among candidates and between candidates
    and existing samples (existing pairs are fixed and not scored)."""
    U = _unit(space, candidates)
    d = [pdist(U).min()] if len(U) > 1 else []
    if existing is not None and len(existing):
        d.append(cdist(U, _unit(space, existing)).min())
    return float(min(d)) if d else float("inf")


@dataclass
class ResampleResult:
    configs: np.ndarray
    score: float
    trial_scores: list[float]


def resample_domain(space: ParameterSpace, db=None, count: int = 20, trials: int = 50,
                    seed: int = 0, existing=None) -> ResampleResult:
    """Space-filling draw of unvisited configurations: best of ``trials``
    uniform candidate sets by the max-min distance score."""
    if count < 1:
        raise ConfigError("count must be at least 1")
    rng = np.random.default_rng(seed)
    if existing is None and db is not None and len(db):
        existing = db.configs(space)
    visited = set() if existing is None else {tuple(np.round(e, 9)) for e in np.asarray(existing, float)}
    total = int(np.prod([float(s) for s in space.sizes]))
    available = total - len(visited)
    if available < count:
        warnings.warn(f"only {available} unvisited configurations remain; returning fewer", RuntimeWarning)
        count = max(available, 0)
        if count == 0:
            return ResampleResult(np.empty((0, space.n_params)), float("inf"), [])
    best, best_score, scores = None, -np.inf, []
    for _ in range(max(trials, 1)):
        chosen: list[tuple] = []
        seen = set(visited)
        attempts = 0
        while len(chosen) < count:
            attempts += 1
            if attempts > 1000 * count:
                raise DataError("could not draw enough unvisited configurations")
            c = tuple(float(rng.choice(space.domain(i))) for i in range(space.n_params))
            key = tuple(np.round(c, 9))
            if key in seen:
                continue
            seen.add(key)
            chosen.append(c)
        C = np.array(chosen)
        s = set_score(space, C, existing)
        scores.append(s)
        if s > best_score:
            best, best_score = C, s
    return ResampleResult(best, best_score, scores)


# -- orchestration and report ----------------------------------------------------


@dataclass
class SectionReport:
    section: int
    name: str
    n_clusters: int
    clusters: dict[str, list[int]]
    baseline: float
    objective: float
    improvement: float
    new_params: list[str]


@dataclass
class RefinementReport:
    n_params_before: int
    n_params_after: int
    sections: list[SectionReport]
    proposals: list[dict]
    vcg_violation: bool
    monotone_buckling: float

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, default=float)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["section", "name", "n_clusters", "clusters", "baseline", "objective",
                        "improvement", "new_params"])
            for s in self.sections:
                clusters = ";".join(f"{t}:{' '.join(map(str, m))}" for t, m in s.clusters.items())
                w.writerow([s.section, s.name, s.n_clusters, clusters, f"{s.baseline:.6f}",
                            f"{s.objective:.6f}", f"{s.improvement:.6f}", " ".join(s.new_params)])


@dataclass
class RefinementResult:
    space: ParameterSpace
    incumbent: tuple[float, ...]  # lifted into the new space
    chosen: list[RefinementProposal]
    report: RefinementReport


def refine(surrogate, db, space: ParameterSpace, pen: PenaltyConfig, incumbent, max_params: int,
           max_clusters: int = 2, time_limit: float | None = 30.0) -> RefinementResult:
    """One refinement round: responses, clustering ILPs for every section and
    cluster count, knapsack selection and the split."""
    x = np.asarray(space.validate(incumbent), dtype=float)
    proposals: list[RefinementProposal] = []
    all_resp: list[PatchResponse] = []
    for i in range(space.n_params):
        resp = collect_responses(surrogate, x, i, pen, db=db, space=space)
        all_resp.extend(resp)
        vcg_res, m_res = vcg_context(space, pen, x, i)
        for n in range(2, max_clusters + 1):
            if n > len(space.domain(i)) or n > len(resp):
                break
            proposals.append(propose_refinement(resp, pen, n, vcg_res, m_res, x[i], time_limit))
    chosen = select_refinements(proposals, space.n_params, max_params)
    new_space = apply_refinements(space, chosen, x)
    sections = []
    for prop in sorted(chosen, key=lambda p: p.section):
        clusters = prop.clusters()
        keep = _kept_value(clusters, x[prop.section])
        children = [p.name for p in new_space.params if p.parent == prop.section
                    and p.index >= space.n_params]
        sections.append(SectionReport(
            section=prop.section,
            name=space.params[prop.section].name,
            n_clusters=prop.n_clusters,
            clusters={("kept " if t == keep else "") + f"{t:g}": m for t, m in clusters.items()},
            baseline=prop.baseline,
            objective=prop.ilp_objective,
            improvement=prop.improvement,
            new_params=children,
        ))
    report = RefinementReport(
        n_params_before=space.n_params,
        n_params_after=new_space.n_params,
        sections=sections,
        proposals=[
            {"section": p.section, "n_clusters": p.n_clusters, "improvement": p.improvement,
             "feasible": p.feasible, "status": p.status}
            for p in proposals
        ],
        vcg_violation=joined_vcg_violation(space, chosen, x, pen),
        monotone_buckling=monotone_buckling_fraction(all_resp),
    )
    return RefinementResult(new_space, lift_config(space, new_space, x), chosen, report)


__all__ = [
    "PatchResponse",
    "RefinementProposal",
    "RefinementReport",
    "RefinementResult",
    "ResampleResult",
    "SectionReport",
    "apply_refinements",
    "clustering_ilp",
    "collect_responses",
    "joined_vcg_violation",
    "lift_config",
    "monotone_buckling_fraction",
    "patch_costs",
    "propose_refinement",
    "refine",
    "resample_domain",
    "select_refinements",
    "set_score",
    "vcg_context",
]
