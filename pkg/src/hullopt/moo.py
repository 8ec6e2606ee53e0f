"""Multi-objective genetic search over the surrogate and the covariance infill
criterion used to pick configurations for high-fidelity validation."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .criteria import QOI_NAMES, PenaltyConfig
from .errors import DataError
from .hull_model import COMPONENTS, LOAD_CASES, ParameterSpace
from .rom.surrogate import SurrogateModel, field_name

HV_SAMPLES = 20000


# --------------------------------------------------------------------------
# Sorting and niching
# --------------------------------------------------------------------------


def dominates(a, b) -> bool:
    a = np.asarray(a)
    b = np.asarray(b)
    return bool(np.all(a <= b) and np.any(a < b))


def domination_matrix(F: np.ndarray) -> np.ndarray:
    """D[i, j] is True when row i dominates row j."""
    F = np.asarray(F, dtype=float)
    n = len(F)
    le = np.ones((n, n), dtype=bool)
    lt = np.zeros((n, n), dtype=bool)
    for col in F.T:
        le &= col[:, None] <= col[None, :]
        lt |= col[:, None] < col[None, :]
    return le & lt


def non_dominated_sort(F) -> list[np.ndarray]:
    """Partition row indices into successive non-dominated layers (minimization)."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    n = len(F)
    if n == 0:
        return []
    if not np.all(np.isfinite(F)):
        raise DataError("objectives must be finite")
    D = domination_matrix(F)
    count = D.sum(axis=0)  # how many rows dominate each row
    layers = []
    remaining = np.ones(n, dtype=bool)
    while remaining.any():
        front = np.flatnonzero(remaining & (count == 0))
        layers.append(front)
        remaining[front] = False
        count = count - D[front].sum(axis=0)
    return layers


def das_dennis(k: int, divisions: int) -> np.ndarray:
    """Uniformly spaced points on the unit simplex in k dimensions."""
    if k == 1:
        return np.ones((1, 1))
    pts = []
    for bars in combinations(range(divisions + k - 1), k - 1):
        prev = -1
        coords = []
        for b in bars:
            coords.append(b - prev - 1)
            prev = b
        coords.append(divisions + k - 2 - prev)
        pts.append(coords)
    return np.asarray(pts, dtype=float) / divisions


def reference_directions(k: int, target: int) -> np.ndarray:
    """Das-Dennis set with the smallest division count giving >= target points."""
    h = 1
    while math.comb(h + k - 1, k - 1) < max(target, 1) and h < 64:
        h += 1
    return das_dennis(k, h)


def _normalize(F: np.ndarray) -> np.ndarray:
    lo = F.min(axis=0)
    span = F.max(axis=0) - lo
    return (F - lo) / np.where(span > 0, span, 1.0)


def associate(Fn: np.ndarray, dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest reference direction (perpendicular distance) for each row."""
    unit = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    proj = Fn @ unit.T
    dist2 = (Fn**2).sum(1)[:, None] - proj**2
    dist = np.sqrt(np.maximum(dist2, 0.0))
    idx = np.argmin(dist, axis=1)
    return idx, dist[np.arange(len(Fn)), idx]


def select_survivors(F, limit: int, rng: np.random.Generator | int | None = 0,
                     dirs: np.ndarray | None = None) -> np.ndarray:
    """Indices of at most ``limit`` survivors: whole layers, then reference
    direction niching on the boundary layer."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    n = len(F)
    if limit < 1:
        raise DataError("survivor limit must be at least 1")
    if limit >= n:
        return np.arange(n)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    layers = non_dominated_sort(F)
    chosen: list[int] = []
    boundary = None
    for layer in layers:
        if len(chosen) + len(layer) <= limit:
            chosen.extend(layer.tolist())
            if len(chosen) == limit:
                return np.sort(np.asarray(chosen))
        else:
            boundary = layer
            break
    members = np.concatenate([np.asarray(chosen, dtype=int), boundary])
    Fn = _normalize(F[members])
    if dirs is None:
        dirs = reference_directions(F.shape[1], limit)
    niche, dist = associate(Fn, dirs)
    n_chosen = len(chosen)
    niche_count = np.bincount(niche[:n_chosen], minlength=len(dirs))
    cand_niche = niche[n_chosen:]
    cand_dist = dist[n_chosen:]
    available = np.ones(len(boundary), dtype=bool)
    tie = rng.permutation(len(dirs))  # seeded tie-break order among directions
    open_dirs = np.zeros(len(dirs), dtype=bool)
    open_dirs[np.unique(cand_niche)] = True
    picked: list[int] = []
    need = limit - n_chosen
    while len(picked) < need:
        cands = np.flatnonzero(open_dirs)
        best = cands[np.lexsort((tie[cands], niche_count[cands]))[0]]
        pool = np.flatnonzero(available & (cand_niche == best))
        if pool.size == 0:
            open_dirs[best] = False
            continue
        j = pool[np.lexsort((pool, cand_dist[pool]))[0]]  # closest, then smallest index
        picked.append(int(j))
        available[j] = False
        niche_count[best] += 1
    return np.sort(np.concatenate([np.asarray(chosen, dtype=int), boundary[picked]]))


def niche_counts(F: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    idx, _ = associate(_normalize(np.asarray(F, dtype=float)), dirs)
    return np.bincount(idx, minlength=len(dirs))[idx]


# --------------------------------------------------------------------------
# Hypervolume (Monte Carlo with a fixed sample set)
# --------------------------------------------------------------------------


class HypervolumeTracker:
    """Dominated fraction of a fixed box between a lower corner and ``ref``.

    The sample set is fixed at construction, so the estimate is monotone in the
    dominated region: adding points never lowers it.
    """

    def __init__(self, reference: np.ndarray, lower: np.ndarray, n_samples: int = HV_SAMPLES, seed: int = 0):
        self.ref = np.asarray(reference, dtype=float)
        self.lower = np.asarray(lower, dtype=float)
        rng = np.random.default_rng(seed)
        self.samples = self.lower + rng.random((n_samples, len(self.ref))) * (self.ref - self.lower)
        self.covered = np.zeros(n_samples, dtype=bool)
        self._seen: set[bytes] = set()

    def add(self, F) -> float:
        new = []
        for f in np.atleast_2d(np.asarray(F, dtype=float)):
            key = f.tobytes()
            if key not in self._seen:
                self._seen.add(key)
                if np.all(f <= self.ref):
                    new.append(f)
        for s in range(0, len(new), 64):
            block = np.asarray(new[s : s + 64])
            open_ = np.flatnonzero(~self.covered)
            if open_.size == 0:
                break
            hit = np.all(self.samples[open_][None, :, :] >= block[:, None, :], axis=2).any(axis=0)
            self.covered[open_[hit]] = True
        return self.value

    @property
    def value(self) -> float:
        return float(self.covered.mean() * np.prod(self.ref - self.lower))


# --------------------------------------------------------------------------
# Genetic algorithm
# --------------------------------------------------------------------------


@dataclass
class Population:
    configs: np.ndarray  # (p, d) thickness values
    objectives: np.ndarray  # (p, 5) n_y, n_b, deflection, mass, vcg
    hv_history: list[float] = field(default_factory=list)
    archive_configs: np.ndarray | None = None  # non-dominated set seen over all generations
    archive_objectives: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.configs)

    def layers(self) -> list[np.ndarray]:
        return non_dominated_sort(self.objectives)

    def pareto(self) -> tuple[np.ndarray, np.ndarray]:
        """Non-dominated configurations and objectives (archive when available)."""
        if self.archive_configs is not None:
            return self.archive_configs, self.archive_objectives
        front = self.layers()[0]
        return self.configs[front], self.objectives[front]


def _index_bounds(space: ParameterSpace) -> np.ndarray:
    return np.asarray(space.sizes)


def _to_values(space: ParameterSpace, idx: np.ndarray) -> np.ndarray:
    return np.column_stack([space.domain(i)[idx[:, i]] for i in range(space.n_params)])


def _to_indices(space: ParameterSpace, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape, dtype=np.int64)
    for i in range(space.n_params):
        dom = space.domain(i)
        j = np.searchsorted(dom, X[:, i])
        j = np.clip(j, 0, len(dom) - 1)
        if not np.allclose(dom[j], X[:, i]):
            raise DataError(f"values of parameter {i} are not domain members")
        out[:, i] = j
    return out


def _unique_rows(idx: np.ndarray, exclude: set[tuple] | None = None) -> np.ndarray:
    seen = set(exclude or ())
    keep = []
    for r, row in enumerate(map(tuple, idx)):
        if row not in seen:
            seen.add(row)
            keep.append(r)
    return idx[keep]


def random_configs(space: ParameterSpace, count: int, rng: np.random.Generator,
                   exclude: set[tuple] | None = None) -> np.ndarray:
    """Up to ``count`` distinct uniform index vectors not in ``exclude``."""
    sizes = _index_bounds(space)
    total = space.n_configurations - len(exclude or ())
    count = min(count, max(total, 0))
    out = np.empty((0, len(sizes)), dtype=np.int64)
    seen = set(exclude or ())
    attempts = 0
    while len(out) < count and attempts < 50:
        draw = rng.integers(0, sizes, size=(2 * (count - len(out)) + 8, len(sizes)))
        draw = _unique_rows(draw, seen)[: count - len(out)]
        seen.update(map(tuple, draw))
        out = np.vstack([out, draw])
        attempts += 1
    return out


def _tournament(rank: np.ndarray, crowd: np.ndarray, n: int, rng) -> np.ndarray:
    a = rng.integers(0, len(rank), n)
    b = rng.integers(0, len(rank), n)
    key_a = np.stack([rank[a], crowd[a]], 1)
    key_b = np.stack([rank[b], crowd[b]], 1)
    a_wins = (key_a[:, 0] < key_b[:, 0]) | ((key_a[:, 0] == key_b[:, 0]) & (key_a[:, 1] < key_b[:, 1]))
    b_wins = (key_b[:, 0] < key_a[:, 0]) | ((key_a[:, 0] == key_b[:, 0]) & (key_b[:, 1] < key_a[:, 1]))
    coin = rng.random(n) < 0.5
    return np.where(a_wins, a, np.where(b_wins, b, np.where(coin, a, b)))


def make_children(parents: np.ndarray, rank, crowd, sizes, n_children: int, rng) -> np.ndarray:
    """Uniform crossover plus adjacent-value mutation with rate 1/d, in index space."""
    d = parents.shape[1]
    pa = parents[_tournament(rank, crowd, n_children, rng)]
    pb = parents[_tournament(rank, crowd, n_children, rng)]
    mask = rng.random((n_children, d)) < 0.5
    child = np.where(mask, pa, pb)
    mutate = rng.random((n_children, d)) < 1.0 / d
    step = np.where(rng.random((n_children, d)) < 0.5, -1, 1)
    moved = child + step
    # at a domain end the only adjacent value is inward
    moved = np.where(moved < 0, 1, moved)
    moved = np.where(moved >= sizes, sizes - 2, moved)
    moved = np.clip(moved, 0, sizes - 1)
    return np.where(mutate, moved, child)


def evolve(
    surrogate: SurrogateModel,
    space: ParameterSpace,
    pen: PenaltyConfig,
    pop_size: int = 2000,
    generations: int = 10,
    seed: int = 0,
    inject=None,
) -> Population:
    """Genetic search minimizing all five QoIs predicted by the surrogate."""
    if pop_size < 2:
        raise DataError("population size must be at least 2")
    rng = np.random.default_rng(seed)
    sizes = _index_bounds(space)

    def evaluate(idx):
        return surrogate.predict_qois(_to_values(space, idx), pen)

    pop = np.empty((0, space.n_params), dtype=np.int64)
    if inject is not None and len(inject):
        pop = _unique_rows(_to_indices(space, np.atleast_2d(np.asarray(inject, dtype=float))))
    extra = random_configs(space, max(pop_size - len(pop), 0), rng, set(map(tuple, pop)))
    pop = np.vstack([pop, extra])
    F = evaluate(pop)

    dirs = reference_directions(F.shape[1], pop_size)
    ref = F.max(axis=0)
    lo = F.min(axis=0)
    hv = HypervolumeTracker(ref, lo - (ref - lo), seed=seed)
    arch_idx, arch_F = _merge_archive(np.empty((0, pop.shape[1]), np.int64), np.empty((0, F.shape[1])), pop, F)
    history = [hv.add(arch_F)]

    for _ in range(generations):
        layers = non_dominated_sort(F)
        rank = np.empty(len(F), dtype=int)
        for r, layer in enumerate(layers):
            rank[layer] = r
        crowd = niche_counts(F, dirs)
        kids = make_children(pop, rank, crowd, sizes, pop_size, rng)
        kids = _unique_rows(kids, set(map(tuple, pop)))
        if len(kids):
            pop = np.vstack([pop, kids])
            F = np.vstack([F, evaluate(kids)])
        keep = select_survivors(F, pop_size, rng, dirs)
        pop, F = pop[keep], F[keep]
        arch_idx, arch_F = _merge_archive(arch_idx, arch_F, pop, F)
        history.append(hv.add(arch_F))

    return Population(
        configs=_to_values(space, pop),
        objectives=F,
        hv_history=history,
        archive_configs=_to_values(space, arch_idx),
        archive_objectives=arch_F,
    )


def _merge_archive(a_idx, a_F, idx, F):
    all_idx = np.vstack([a_idx, idx])
    all_F = np.vstack([a_F, F])
    # drop duplicate configurations (first occurrence kept)
    _, first = np.unique(all_idx, axis=0, return_index=True)
    first = np.sort(first)
    all_idx, all_F = all_idx[first], all_F[first]
    front = non_dominated_sort(all_F)[0]
    front = np.sort(front)
    return all_idx[front], all_F[front]


# --------------------------------------------------------------------------
# Infill criterion
# --------------------------------------------------------------------------


def aggregate_kernels(surrogate: SurrogateModel, A, B) -> np.ndarray:
    """Sum over stress components of the max over load cases of the field
    GPR prior covariance; identically zero fields do not contribute."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    total = np.zeros((len(A), len(B)))
    for c in range(len(COMPONENTS)):
        mats = [
            surrogate.field_kernel(field_name(l, c), A, B)
            for l in range(len(LOAD_CASES))
            if not surrogate.fields[field_name(l, c)].degenerate
        ]
        if mats:
            total += np.max(mats, axis=0)
    return total


def infill_delta(C_LL: np.ndarray, C_LH: np.ndarray) -> np.ndarray:
    """Total positive relative covariance increase of each low-fidelity point
    over the high-fidelity coverage of the rest of the front."""
    C_LL = np.asarray(C_LL, dtype=float)
    C_LH = np.asarray(C_LH, dtype=float)
    n = len(C_LL)
    hmax = C_LH.max(axis=1) if C_LH.shape[1] else np.zeros(n)
    excess = np.maximum(C_LL - hmax[None, :], 0.0)
    np.fill_diagonal(excess, 0.0)
    num = excess.sum(axis=1)
    den = hmax.sum() - hmax
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    return delta


@dataclass
class InfillState:
    C_LL: np.ndarray
    C_LH: np.ndarray
    remaining: list[int]  # original low-fidelity indices still unselected
    selected: list[int] = field(default_factory=list)
    deltas: list[float] = field(default_factory=list)

    def step(self) -> int:
        """Select the argmax of Delta (smallest index on ties) and simulate its
        promotion to the high-fidelity set."""
        if not self.remaining:
            raise DataError("no candidates left")
        delta = infill_delta(self.C_LL, self.C_LH)
        k = int(np.argmax(delta))
        self.deltas.append(float(delta[k]))
        keep = np.arange(len(self.C_LL)) != k
        new_col = self.C_LL[keep, k]
        self.C_LH = np.column_stack([self.C_LH[keep], new_col])
        self.C_LL = self.C_LL[np.ix_(keep, keep)]
        chosen = self.remaining.pop(k)
        self.selected.append(chosen)
        return chosen


def infill_select_matrices(C_LL, C_LH, count: int) -> InfillState:
    C_LL = np.asarray(C_LL, dtype=float)
    C_LH = np.asarray(C_LH, dtype=float).reshape(len(C_LL), -1)
    if count > len(C_LL):
        raise DataError("count exceeds the number of low-fidelity candidates")
    state = InfillState(C_LL.copy(), C_LH.copy(), list(range(len(C_LL))))
    for _ in range(count):
        state.step()
    return state


def infill_select(pareto_lowfi, hifi_configs, surrogate: SurrogateModel, count: int = 9) -> InfillState:
    """Greedy covariance-based selection of ``count`` front members."""
    L = np.atleast_2d(np.asarray(pareto_lowfi, dtype=float))
    H = np.atleast_2d(np.asarray(hifi_configs, dtype=float))
    if len(L) == 0:
        raise DataError("low-fidelity front is empty")
    hset = set(map(tuple, H))
    if any(tuple(x) in hset for x in L):
        raise DataError("low-fidelity candidates must not be high-fidelity configurations")
    count = min(count, len(L))
    return infill_select_matrices(aggregate_kernels(surrogate, L, L), aggregate_kernels(surrogate, L, H), count)


# --------------------------------------------------------------------------
# Export
# --------------------------------------------------------------------------


def write_front_csv(path, configs, objectives, provenance, n_params: int):
    """One row per non-dominated individual: config, objectives, provenance."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(n_params)] + list(QOI_NAMES) + ["provenance"])
        for x, f, p in zip(configs, objectives, provenance):
            w.writerow([*map(float, x), *map(float, f), p])


def projections(objectives) -> dict[tuple[str, str], np.ndarray]:
    """2-D projections for every objective pair."""
    F = np.asarray(objectives, dtype=float)
    return {
        (QOI_NAMES[i], QOI_NAMES[j]): F[:, [i, j]]
        for i, j in combinations(range(F.shape[1]), 2)
    }


__all__ = [
    "HypervolumeTracker",
    "InfillState",
    "Population",
    "aggregate_kernels",
    "das_dennis",
    "dominates",
    "domination_matrix",
    "evolve",
    "infill_delta",
    "infill_select",
    "infill_select_matrices",
    "non_dominated_sort",
    "projections",
    "random_configs",
    "reference_directions",
    "select_survivors",
    "write_front_csv",
]
