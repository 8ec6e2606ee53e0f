"""End-to-end optimization driver with a persistent, resumable run directory.

Run directory layout::

    config.yaml        copy of the configuration
    manifest.json      format version
    state.json         phase, counters, HF history and stage table
    space.json         current parameterization
    db/                high-fidelity snapshot cache (append-only)
    surrogates/        current surrogate archive
    reports/           CSV, JSON and SVG outputs
    logs/run.log

Every stage operation loads nothing implicitly: it acts on a ``RunState``,
then persists it. A high-fidelity solve is written to ``db/`` as soon as it
finishes; the state only "commits" the entries it has seen, so a
killed stage replays identically on resume and finds its solves cached.
"""
from __future__ import annotations

import copy
import json
import logging
import os
import shutil
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import __version__
from .criteria import (
    Criteria,
    PenaltyConfig,
    QoiVector,
    YieldLimits,
    compute_qois,
    mass_gap,
    penalized_mass,
)
from .errors import ConfigError, DataError, HullOptError
from .hull_model import HullModel, ModelSpec, ParameterSpace, build_demo_model
from .moo import evolve, infill_select, write_front_csv
from .reparam import refine, resample_domain
from .rom.crossval import cross_validate, summarize, write_cv_csv
from .rom.database import SnapshotDatabase, thickness_key
from .rom.surrogate import RankPolicy, SurrogateModel, singular_value_table, surrogate_fit
from .sbo import AcquisitionConfig, BoBudget, bo_run, pds_run, surrogate_objective, write_trace_csv
from .svg import line_plot, scatter_plot

MANIFEST_VERSION = 1
log = logging.getLogger("hullopt")


# -- configuration ---------------------------------------------------------------


def _from_dict(cls, data: dict | None, what: str):
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")
    return cls(**data)


@dataclass
class MooSettings:
    pop_size: int = 2000
    generations: int = 10
    infill: int = 9
    max_rounds: int = 3
    delta_tol: float = 0.05


@dataclass
class BoSettings:
    max_iters: int = 200
    time_limit: float | None = 300.0
    candidates: int = 3
    max_rounds: int = 3
    beta: float = 2.0
    epsilon: float = 0.1
    switch_patience: int = 100
    refit_every: int = 10


@dataclass
class PdsSettings:
    max_sweeps: int = 50
    time_limit: float | None = 300.0
    max_rounds: int = 5
    variant: str = "carry"


@dataclass
class ReparamSettings:
    schedule: list[int] = field(default_factory=lambda: [10])
    max_clusters: int = 2
    resample: int = 20
    trials: int = 50
    tolerance: float = 0.5  # percent of d . x_LB


@dataclass
class PipelineConfig:
    model: dict[str, Any]
    penalty: dict[str, Any] = field(default_factory=dict)
    yield_limits: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    initial_samples: int = 21  # including the default configuration
    max_hifi: int = 500
    rank_tau: float = 0.01
    fit_restarts: int = 5
    strict_incumbent: bool = True  # incumbent must also meet y_crit and b_crit
    moo: MooSettings = field(default_factory=MooSettings)
    bo: BoSettings = field(default_factory=BoSettings)
    pds: PdsSettings = field(default_factory=PdsSettings)
    reparam: ReparamSettings = field(default_factory=ReparamSettings)

    def __post_init__(self):
        for name in ("initial_samples", "max_hifi", "fit_restarts"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.initial_samples < 1:
            raise ConfigError("initial_samples must be at least 1")
        for s in (self.moo, self.bo, self.pds):
            for f in fields(s):
                v = getattr(s, f.name)
                if isinstance(v, (int, float)) and not isinstance(v, bool) and v is not None and v < 0:
                    raise ConfigError(f"{type(s).__name__}.{f.name} must be non-negative")
        sched = list(self.reparam.schedule)
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ConfigError("reparameterization schedule must be strictly increasing")
        if self.pds.variant not in ("carry", "paper"):
            raise ConfigError(f"unknown PDS variant {self.pds.variant!r}")

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "PipelineConfig":
        data = dict(data)
        if "model" not in data:
            raise ConfigError("configuration has no 'model' section")
        model = data["model"]
        if isinstance(model, str):  # path to a model file
            path = Path(model)
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            with open(path) as fh:
                loaded = yaml.safe_load(fh)
            model = loaded.get("model", loaded)
        pipe = dict(data.get("pipeline") or {})
        kw = {k: pipe.pop(k) for k in ("moo", "bo", "pds", "reparam") if k in pipe}
        known = {f.name for f in fields(cls)} - {"model", "penalty", "yield_limits", "moo", "bo", "pds", "reparam"}
        unknown = set(pipe) - known
        if unknown:
            raise ConfigError(f"unknown pipeline keys: {sorted(unknown)}")
        return cls(
            model=model,
            penalty=dict(data.get("penalty") or {}),
            yield_limits=dict(data.get("yield_limits") or {}),
            moo=_from_dict(MooSettings, kw.get("moo"), "moo"),
            bo=_from_dict(BoSettings, kw.get("bo"), "bo"),
            pds=_from_dict(PdsSettings, kw.get("pds"), "pds"),
            reparam=_from_dict(ReparamSettings, kw.get("reparam"), "reparam"),
            **pipe,
        )

    @classmethod
    def from_yaml(cls, path) -> "PipelineConfig":
        path = Path(path)
        with open(path) as fh:
            data = yaml.safe_load(fh)
        if not isinstance(data, dict):
            raise ConfigError(f"{path} does not hold a mapping")
        return cls.from_dict(data, path.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        pipe = {k: d.pop(k) for k in list(d) if k not in ("model", "penalty", "yield_limits")}
        return {"model": d["model"], "penalty": d["penalty"], "yield_limits": d["yield_limits"], "pipeline": pipe}

    def with_overrides(self, seed=None, time_limit=None, max_iters=None, params_target=None) -> "PipelineConfig":
        cfg = copy.deepcopy(self)
        if seed is not None:
            cfg.seed = int(seed)
        if time_limit is not None:
            cfg.bo.time_limit = float(time_limit)
            cfg.pds.time_limit = float(time_limit)
        if max_iters is not None:
            cfg.bo.max_iters = int(max_iters)
        if params_target is not None:
            cfg.reparam.schedule = [int(params_target)]
        return cfg


def demo_config_path() -> Path:
    return Path(str(resources.files("hullopt") / "data" / "demo.yaml"))


def load_config(path=None) -> PipelineConfig:
    return PipelineConfig.from_yaml(path or demo_config_path())


# -- run state ------------------------------------------------------------------


PHASES = ("sample", "solve", "fit", "moo", "bo", "pds", "reparam", "done")


@dataclass
class Context:
    """Objects rebuilt from the configuration (never persisted)."""

    config: PipelineConfig
    model: HullModel
    criteria: Criteria
    pen: PenaltyConfig

    @classmethod
    def build(cls, config: PipelineConfig) -> "Context":
        model = build_demo_model(ModelSpec.from_dict(config.model))
        criteria = Criteria(model, YieldLimits(**config.yield_limits))
        pen = PenaltyConfig.from_dict(config.penalty, model)
        return cls(config, model, criteria, pen)


@dataclass
class Progress:
    phase: str = "sample"
    stage: int = 0  # number of refinements applied
    op_counter: int = 0
    committed: list[str] = field(default_factory=list)  # db keys in commit order
    round: int = 0  # rounds of the current phase
    pending: list[list[float]] = field(default_factory=list)
    pending_provenance: str = "initial-sample"
    history: list[dict] = field(default_factory=list)
    stages: list[dict] = field(default_factory=list)
    stage_start_f: float | None = None
    stop_reason: str = ""


class RunState:
    def __init__(self, root, ctx: Context, progress: Progress, space: ParameterSpace,
                 surrogate: SurrogateModel | None):
        self.root = Path(root)
        self.ctx = ctx
        self.progress = progress
        self.space = space
        self.surrogate = surrogate
        self.db = SnapshotDatabase(self.root / "db")

    # -- paths
    @property
    def reports(self) -> Path:
        p = self.root / "reports"
        p.mkdir(parents=True, exist_ok=True)
        return p

    @property
    def pen(self) -> PenaltyConfig:
        return self.ctx.pen

    @property
    def config(self) -> PipelineConfig:
        return self.ctx.config

    # -- persistence
    def save(self):
        def atomic(path: Path, text: str):
            tmp = path.with_suffix(path.suffix + ".tmp")
            tmp.write_text(text)
            os.replace(tmp, path)

        atomic(self.root / "space.json", json.dumps(self.space.to_dict(), indent=1))
        atomic(self.root / "state.json", json.dumps(asdict(self.progress), indent=1))

    def save_surrogate(self):
        target = self.root / "surrogates" / "current"
        tmp = self.root / "surrogates" / "incoming"
        if tmp.exists():
            shutil.rmtree(tmp)
        self.surrogate.save(tmp)
        if target.exists():
            shutil.rmtree(target)
        os.replace(tmp, target)

    # -- views
    @property
    def n_committed(self) -> int:
        return len(self.progress.committed)

    def visible_db(self) -> SnapshotDatabase:
        keys = self.progress.committed
        if len(keys) == len(self.db) and all(e.key == k for e, k in zip(self.db, keys)):
            return self.db
        index = {e.key: e.order for e in self.db}
        return self.db.subset([index[k] for k in keys])

    def seed(self) -> int:
        ss = np.random.SeedSequence([self.config.seed, self.progress.op_counter])
        return int(ss.generate_state(1)[0])

    def f_of(self, q: QoiVector) -> float:
        return penalized_mass(q, self.pen)

    def vcg_ok(self, q: QoiVector) -> bool:
        return q.vcg <= self.pen.vcg_crit + 1e-12

    def feasible(self, q: QoiVector) -> bool:
        """VCG limit, plus the failure thresholds when ``strict_incumbent``."""
        if not self.vcg_ok(q):
            return False
        if self.config.strict_incumbent:
            return q.n_y <= self.pen.y_crit and q.n_b <= self.pen.b_crit
        return True

    def incumbent(self):
        """(config in the current space, QoiVector, f) of the best feasible
        committed HF entry. Under ``strict_incumbent`` with no entry inside the
        failure thresholds yet, the best VCG-feasible entry is used instead."""
        best = best_vcg = None
        for e in self.visible_db():
            if not self.vcg_ok(e.qoi):
                continue
            f = self.f_of(e.qoi)
            if best_vcg is None or f < best_vcg[2]:
                best_vcg = (e, e.qoi, f)
            if self.feasible(e.qoi) and (best is None or f < best[2]):
                best = (e, e.qoi, f)
        best = best or best_vcg
        if best is None:
            raise DataError("no VCG-feasible high-fidelity configuration yet")
        e, q, f = best
        return np.array(self.space.config_from_patch_thickness(e.patch_thickness)), q, f

    def best_f(self) -> float | None:
        try:
            return self.incumbent()[2]
        except DataError:
            return None

    def hifi_remaining(self) -> int:
        return max(self.config.max_hifi - self.n_committed, 0)


def _manifest(root: Path) -> dict:
    return {"format": "hullopt-run", "version": MANIFEST_VERSION, "hullopt": __version__}


def init_run(root, config: PipelineConfig, overwrite: bool = False) -> RunState:
    """Create a run directory holding a copy of the configuration."""
    root = Path(root)
    if (root / "manifest.json").exists() and not overwrite:
        raise ConfigError(f"{root} already holds a run; pass overwrite to replace it")
    if overwrite and root.exists():
        for name in ("db", "surrogates", "reports", "logs"):
            shutil.rmtree(root / name, ignore_errors=True)
        for name in ("state.json", "space.json"):
            (root / name).unlink(missing_ok=True)
    root.mkdir(parents=True, exist_ok=True)
    (root / "logs").mkdir(exist_ok=True)
    (root / "config.yaml").write_text(yaml.safe_dump(config.to_dict(), sort_keys=False))
    (root / "manifest.json").write_text(json.dumps(_manifest(root), indent=1))
    ctx = Context.build(config)
    state = RunState(root, ctx, Progress(), ctx.model.space, None)
    state.save()
    return state


def check_manifest(root) -> dict:
    path = Path(root) / "manifest.json"
    if not path.exists():
        raise ConfigError(f"{root} is not a run directory (no manifest.json)")
    m = json.loads(path.read_text())
    if m.get("format") != "hullopt-run" or m.get("version") != MANIFEST_VERSION:
        raise ConfigError(f"unsupported run directory version {m.get('version')!r}")
    return m


def open_run(root, overrides: dict | None = None) -> RunState:
    root = Path(root)
    check_manifest(root)
    config = PipelineConfig.from_yaml(root / "config.yaml")
    if overrides:
        config = config.with_overrides(**overrides)
    ctx = Context.build(config)
    prog = Progress(**json.loads((root / "state.json").read_text()))
    space = ParameterSpace.from_dict(json.loads((root / "space.json").read_text()), ctx.model.patches)
    sur_dir = root / "surrogates" / "current"
    sur = SurrogateModel.load(sur_dir, ctx.criteria, space) if (sur_dir / "manifest.json").exists() else None
    if sur is not None and sur.space.fingerprint() != space.fingerprint():
        sur = None  # parameterization changed after the last fit
    return RunState(root, ctx, prog, space, sur)


def attach_log(root) -> logging.Handler:
    (Path(root) / "logs").mkdir(parents=True, exist_ok=True)
    h = logging.FileHandler(Path(root) / "logs" / "run.log")
    h.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(h)
    log.setLevel(logging.INFO)
    return h


# -- stage operations -----------------------------------------------------------------


def initial_sample(space: ParameterSpace, count: int, seed: int, default=None) -> np.ndarray:
    """Default configuration plus ``count - 1`` distinct uniform draws."""
    if count < 1:
        raise ConfigError("count must be at least 1")
    rng = np.random.default_rng(seed)
    first = np.asarray(space.validate(default if default is not None else space.lower), dtype=float)
    out, seen = [first], {tuple(first)}
    total = float(np.prod([float(s) for s in space.sizes]))
    count = int(min(count, total))
    while len(out) < count:
        c = tuple(float(rng.choice(space.domain(i))) for i in range(space.n_params))
        if c not in seen:
            seen.add(c)
            out.append(np.array(c))
    return np.array(out)


def _begin(state: RunState, name: str):
    state.progress.op_counter += 1
    log.info("stage op %s (stage %d, op %d)", name, state.progress.stage, state.progress.op_counter)


def op_sample(state: RunState, count: int | None = None) -> dict:
    _begin(state, "sample")
    cfg = state.config
    X = initial_sample(state.space, count or cfg.initial_samples, state.seed(), state.ctx.model.default_config)
    state.progress.pending = X.tolist()
    state.progress.pending_provenance = "initial-sample"
    state.save()
    return {"sampled": len(X)}


def validate_hifi(state: RunState, configs, provenance: str) -> dict:
    """HF-solve unvisited configurations (cached solves are reused), commit
    them in order and record the history. Returns counts and improvement."""
    ctx = state.ctx
    before = state.best_f()
    committed_keys = {e.key for e in state.visible_db()}
    todo, seen = [], set()
    for c in np.atleast_2d(np.asarray(configs, dtype=float)) if len(configs) else []:
        pt = state.space.patch_thickness(c)
        key = thickness_key(pt)
        if key in committed_keys or key in seen:
            continue
        seen.add(key)
        todo.append((np.asarray(c, float), pt, key))
    todo = todo[: state.hifi_remaining()]
    fresh = [(c, pt) for c, pt, key in todo if state.db.get(pt) is None]
    threads = int(os.environ.get("HULLOPT_THREADS", "0")) or min(4, os.cpu_count() or 1)
    failures = []

    def solve(item):
        c, _ = item
        try:
            return ctx.model.solve_hifi(c, space=state.space)
        except (HullOptError, np.linalg.LinAlgError, ValueError) as exc:
            return exc

    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        snaps = list(pool.map(solve, fresh))
    solved = {}
    for (c, pt), s in zip(fresh, snaps):
        if isinstance(s, Exception):
            failures.append({"config": c.tolist(), "error": str(s)})
            log.warning("HF solve failed for %s: %s", c.tolist(), s)
            continue
        solved[thickness_key(pt)] = s
    n_ok = 0
    for c, pt, key in todo:
        entry = state.db.get(pt)
        if entry is None:
            if key not in solved:
                continue
            s = solved[key]
            q = compute_qois(s, state.space, state.pen, ctx.model.monitored_node, ctx.criteria)
            entry = state.db.add(s, q, provenance)
        state.progress.committed.append(entry.key)
        n_ok += 1
        f = state.f_of(entry.qoi)
        best = state.best_f()
        state.progress.history.append({
            "order": entry.order,
            "stage": state.progress.stage,
            "n_params": state.space.n_params,
            "phase": provenance,
            "config": [float(v) for v in c],
            "f": f,
            "feasible": state.feasible(entry.qoi),
            "best_f": best,
        })
    after = state.best_f()
    improved = after is not None and (before is None or after < before)
    return {"validated": n_ok, "failures": failures, "improved": bool(improved), "best_f": after}


def op_solve(state: RunState, configs=None, provenance: str = "manual") -> dict:
    _begin(state, "solve")
    if configs is None:
        configs, provenance = state.progress.pending, state.progress.pending_provenance
    out = validate_hifi(state, configs, provenance)
    state.progress.pending = []
    state.save()
    return out


def op_fit(state: RunState, policy: RankPolicy | None = None) -> dict:
    _begin(state, "fit")
    cfg = state.config
    db = state.visible_db()
    prev = state.surrogate
    if policy is None:
        policy = prev.policy if prev is not None else RankPolicy(tau=cfg.rank_tau)
    t0 = time.perf_counter()
    state.surrogate = surrogate_fit(
        db, state.space, state.ctx.criteria, policy=policy, restarts=cfg.fit_restarts,
        seed=state.seed(), previous=prev,
    )
    state.save_surrogate()
    state.save()
    return {"n_train": len(db), "ranks": state.surrogate.ranks, "seconds": time.perf_counter() - t0}


def _need_surrogate(state: RunState):
    if state.surrogate is None:
        raise ConfigError("no surrogate fitted for the current parameterization; run 'fit' first")


def op_moo(state: RunState) -> dict:
    _need_surrogate(state)
    _begin(state, "moo")
    cfg, sp, pen = state.config.moo, state.space, state.pen
    db = state.visible_db()
    H = db.configs(sp)
    pop = evolve(state.surrogate, sp, pen, cfg.pop_size, cfg.generations, state.seed(), inject=H)
    L, FL = pop.pareto()
    hset = {tuple(np.round(h, 9)) for h in H}
    mask = np.array([tuple(np.round(x, 9)) not in hset for x in L], dtype=bool)
    tag = f"stage{state.progress.stage}_op{state.progress.op_counter}"
    prov = ["hifi" if not m else "lowfi" for m in mask]
    write_front_csv(state.reports / f"pf_{tag}.csv", L, FL, prov, sp.n_params)
    out = {"pareto": len(L), "hv": pop.hv_history[-1], "selected": 0, "delta": 0.0, "improved": False}
    if mask.any() and cfg.infill > 0:
        cand = L[mask]
        inf = infill_select(cand, H, state.surrogate, min(cfg.infill, len(cand)))
        sel = cand[inf.selected]
        out["delta"] = float(inf.deltas[0]) if len(inf.deltas) else 0.0
        res = validate_hifi(state, sel, "moo-infill")
        out.update(selected=len(sel), validated=res["validated"], improved=res["improved"])
    state.save()
    return out


def _bo_acq(cfg: BoSettings) -> AcquisitionConfig:
    return AcquisitionConfig("NLCB", cfg.beta, cfg.epsilon, cfg.switch_patience)


def op_bo(state: RunState) -> dict:
    _need_surrogate(state)
    _begin(state, "bo")
    cfg = state.config.bo
    db = state.visible_db()
    res = bo_run(state.surrogate, db, state.pen, BoBudget(cfg.max_iters, cfg.time_limit), _bo_acq(cfg),
                 seed=state.seed() % (2**31), n_candidates=cfg.candidates, space=state.space,
                 refit_every=cfg.refit_every)
    tag = f"stage{state.progress.stage}_op{state.progress.op_counter}"
    write_trace_csv(state.reports / f"bo_trace_{tag}.csv", res.trace)
    start_f = res.trace[0].incumbent_f
    cands = [c for c, f in res.candidates if f < start_f]
    out = {"iterations": res.evaluations, "stop": res.stop_reason, "candidates": len(cands),
           "surrogate_best": res.f_star, "improved": False, "validated": 0}
    if cands:
        v = validate_hifi(state, np.array(cands), "bo")
        out.update(validated=v["validated"], improved=v["improved"])
    state.save()
    return out


def op_pds(state: RunState) -> dict:
    _need_surrogate(state)
    _begin(state, "pds")
    cfg = state.config.pds
    x0, _, _ = state.incumbent()
    res = pds_run(surrogate_objective(state.surrogate, state.pen), state.space, state.pen, x0,
                  max_sweeps=cfg.max_sweeps, time_limit=cfg.time_limit, variant=cfg.variant)
    out = {"sweeps": res.sweeps, "evaluations": res.evaluations, "surrogate_f": res.f,
           "improved": False, "validated": 0}
    if res.f < res.start_f and state.db.lookup_config(state.space, res.config) is None:
        v = validate_hifi(state, res.config[None], "pds")
        out.update(validated=v["validated"], improved=v["improved"])
    state.save()
    return out


def op_reparam(state: RunState, params_target: int | None = None) -> dict:
    _need_surrogate(state)
    _begin(state, "reparam")
    cfg = state.config.reparam
    prog = state.progress
    if params_target is None:
        if prog.stage >= len(cfg.schedule):
            return {"applied": False, "reason": "schedule exhausted"}
        params_target = cfg.schedule[prog.stage]
    x0, _, _ = state.incumbent()
    old = state.space
    if params_target <= old.n_params:
        return {"applied": False, "reason": "target not above the current parameter count"}
    r = refine(state.surrogate, state.visible_db(), old, state.pen, x0, params_target, cfg.max_clusters)
    tag = f"stage{prog.stage + 1}"
    r.report.to_json(state.reports / f"reparam_{tag}.json")
    r.report.to_csv(state.reports / f"reparam_{tag}.csv")
    if not r.chosen:
        state.save()
        return {"applied": False, "reason": "no refinement improves the section objectives"}
    added = r.space.n_params - old.n_params
    policy = state.surrogate.policy.bumped(state.surrogate.ranks, added)
    state.space = r.space
    state.surrogate = None
    prog.stage += 1
    state.save()
    sample = resample_domain(r.space, state.visible_db(), cfg.resample, cfg.trials, state.seed())
    v = validate_hifi(state, sample.configs, "reparam-sample")
    op_fit(state, policy=policy)
    return {"applied": True, "n_params": r.space.n_params, "added": added, "validated": v["validated"],
            "improved": v["improved"], "vcg_violation": r.report.vcg_violation}


def op_crossval(state: RunState, folds: int = 5, ranks=None) -> dict:
    _begin(state, "crossval")
    db = state.visible_db()
    if ranks is None:
        ranks = sorted({r for r in (state.surrogate.ranks.values() if state.surrogate else [4, 6, 8])})
    rows = cross_validate(db, state.space, state.ctx.criteria, state.pen, list(ranks), folds,
                          seed=state.config.seed)
    path, summary = write_cv_csv(rows, state.reports / "crossval.csv")
    state.save()
    return {"rows": len(rows), "csv": str(path), "summary_csv": str(summary), "summary": summarize(rows)}


# -- reporting ------------------------------------------------------------------------


STAGE_COLUMNS = ("stage", "n_params", "n_hifi", "config", "f", "m_gap", "n_y", "n_b", "deflection",
                 "mass", "vcg")


def stage_row(state: RunState, label: str) -> dict:
    x, q, f = state.incumbent()
    sp = state.space
    return {
        "stage": label,
        "n_params": sp.n_params,
        "n_hifi": state.n_committed,
        "config": [float(v) for v in x],
        "f": f,
        "m_gap": mass_gap(x, q, state.pen, sp.lower, sp),
        "n_y": q.n_y,
        "n_b": q.n_b,
        "deflection": q.deflection,
        "mass": q.mass,
        "vcg": q.vcg,
    }


def write_report(state: RunState) -> dict:
    """Regenerate every summary artifact from the persisted state (idempotent)."""
    import csv

    rep = state.reports
    prog = state.progress
    with open(rep / "stage_table.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STAGE_COLUMNS)
        for r in prog.stages:
            w.writerow([r["stage"], r["n_params"], r["n_hifi"], " ".join(f"{v:g}" for v in r["config"]),
                        repr(r["f"]), repr(r["m_gap"]), r["n_y"], r["n_b"], repr(r["deflection"]),
                        repr(r["mass"]), repr(r["vcg"])])
    with open(rep / "hifi_history.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["order", "stage", "n_params", "phase", "config", "f", "feasible", "best_f"])
        for h in prog.history:
            w.writerow([h["order"], h["stage"], h["n_params"], h["phase"], " ".join(f"{v:g}" for v in h["config"]),
                        repr(h["f"]), int(h["feasible"]), "" if h["best_f"] is None else repr(h["best_f"])])
    if state.surrogate is not None:
        with open(rep / "singular_values.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["field", "mode", "normalized", "retained", "flagged"])
            for r in singular_value_table(state.surrogate):
                w.writerow([r["field"], r["mode"], repr(float(r["normalized"])), int(r["retained"]), int(r["flagged"])])
    best = [h["best_f"] for h in prog.history if h["best_f"] is not None]
    if best:
        (rep / "hifi_history.svg").write_text(
            line_plot(list(range(len(best))), best, "HF evaluation", "best penalized mass [t]",
                      "Best high-fidelity penalized mass")
        )
    summary = {"phase": prog.phase, "stage": prog.stage, "n_hifi": state.n_committed,
               "n_params": state.space.n_params, "stop_reason": prog.stop_reason}
    if prog.stages:
        summary["incumbent"] = prog.stages[-1]
        stage_f = [r["f"] for r in prog.stages]
        (rep / "stage_f.svg").write_text(
            line_plot(list(range(len(stage_f))), stage_f, "stage", "penalized mass [t]", "Incumbent per stage")
        )
    front = sorted(rep.glob("pf_*.csv"))
    if front:
        data = np.genfromtxt(front[-1], delimiter=",", names=True, dtype=None, encoding=None)
        data = np.atleast_1d(data)
        (rep / "pf_latest_mass_nb.svg").write_text(
            scatter_plot(data["mass"], data["n_b"], "mass [t]", "buckled elements", "Latest Pareto front")
        )
    (rep / "summary.json").write_text(json.dumps(summary, indent=1, default=float))
    return summary


# -- driver ---------------------------------------------------------------------------


def _record_stage(state: RunState, label: str):
    try:
        state.progress.stages.append(stage_row(state, label))
    except DataError:
        pass


def _advance(state: RunState, phase: str):
    state.progress.phase = phase
    state.progress.round = 0


def step(state: RunState) -> dict:
    """Execute the next stage operation according to the phase machine."""
    prog, cfg = state.progress, state.config
    if prog.phase != "done" and prog.phase not in ("sample", "solve") and state.hifi_remaining() == 0:
        _record_stage(state, f"stage{prog.stage}")
        prog.stop_reason = "high-fidelity budget exhausted"
        _advance(state, "done")
        state.save()
        return {"phase": "done"}
    phase = prog.phase
    if phase == "sample":
        out = op_sample(state)
        _advance(state, "solve")
    elif phase == "solve":
        out = op_solve(state)
        _advance(state, "fit")
    elif phase == "fit":
        out = op_fit(state)
        if not prog.stages:
            _record_stage(state, "initial")
        prog.stage_start_f = state.best_f()
        _advance(state, "moo")
    elif phase == "moo":
        out = op_moo(state)
        prog.round += 1
        if out["selected"]:
            op_fit(state)
        if out["delta"] < cfg.moo.delta_tol or prog.round >= cfg.moo.max_rounds or not out["selected"]:
            _advance(state, "bo")
    elif phase == "bo":
        out = op_bo(state)
        prog.round += 1
        if out["validated"]:
            op_fit(state)
        if not out["improved"] or prog.round >= cfg.bo.max_rounds:
            _advance(state, "pds")
    elif phase == "pds":
        out = op_pds(state)
        prog.round += 1
        if out["validated"]:
            op_fit(state)
        if not out["improved"] or prog.round >= cfg.pds.max_rounds:
            _record_stage(state, f"stage{prog.stage}")
            _advance(state, "reparam")
    elif phase == "reparam":
        tol = cfg.reparam.tolerance / 100.0 * float(state.space.d @ state.space.lower)
        gain = (prog.stage_start_f or 0.0) - (state.best_f() or 0.0)
        if prog.stage >= len(cfg.reparam.schedule):
            prog.stop_reason = "reparameterization schedule exhausted"
            out = {"applied": False}
        elif prog.stage > 0 and gain < tol:
            prog.stop_reason = f"last refinement improved f by {gain:.4g} t < tolerance {tol:.4g} t"
            out = {"applied": False}
        else:
            out = op_reparam(state)
            if out["applied"]:
                prog.stage_start_f = state.best_f()
                _advance(state, "moo")
                state.save()
                return {"phase": "reparam", **out}
            prog.stop_reason = out.get("reason", "")
        _advance(state, "done")
    else:
        return {"phase": "done"}
    state.save()
    return {"phase": phase, **out}


def run(root, config: PipelineConfig | None = None, resume: bool = True, max_steps: int | None = None) -> dict:
    """Run (or resume) the full pipeline in ``root`` and write the report."""
    root = Path(root)
    if (root / "manifest.json").exists() and resume:
        state = open_run(root)
    else:
        state = init_run(root, config or load_config(), overwrite=True)
    handler = attach_log(root)
    try:
        steps = 0
        while state.progress.phase != "done":
            out = step(state)
            log.info("step %s -> %s", out.get("phase"), {k: v for k, v in out.items() if k != "phase"})
            steps += 1
            if max_steps is not None and steps >= max_steps:
                break
        return write_report(state)
    finally:
        log.removeHandler(handler)
        handler.close()


__all__ = [
    "BoSettings",
    "Context",
    "MANIFEST_VERSION",
    "MooSettings",
    "PdsSettings",
    "PipelineConfig",
    "Progress",
    "ReparamSettings",
    "RunState",
    "check_manifest",
    "demo_config_path",
    "init_run",
    "initial_sample",
    "load_config",
    "op_bo",
    "op_crossval",
    "op_fit",
    "op_moo",
    "op_pds",
    "op_reparam",
    "op_sample",
    "op_solve",
    "open_run",
    "run",
    "stage_row",
    "step",
    "validate_hifi",
    "write_report",
]
