"""POD-GPR surrogate of the stress fields plus deflection regressors."""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..criteria import Criteria, PenaltyConfig, mass, vcg
from ..errors import DataError, FitError
from ..hull_model import COMPONENTS, IN_PLANE, LOAD_CASES, ParameterSpace
from .database import FIELDS, SnapshotDatabase
from .gpr import GprModel, condition, gpr_fit
from .pod import DEFAULT_ENERGY_TOL, PodBasis, energy_rank, pod_fit

ARCHIVE_VERSION = 1
PREDICT_CHUNK = 128


def field_name(load: int, comp: int) -> str:
    return f"{LOAD_CASES[load]}_{COMPONENTS[comp]}"


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("HULLOPT_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class RankPolicy:
    """Energy threshold ``tau`` unless ``fixed`` is set; ``floors`` raises the
    rank of individual fields (used after refinements add parameters)."""

    tau: float = DEFAULT_ENERGY_TOL
    fixed: int | None = None
    floors: dict[str, int] = field(default_factory=dict)

    def rank_for(self, name: str, singular_values: np.ndarray, m: int) -> int:
        r = self.fixed if self.fixed is not None else energy_rank(singular_values, self.tau)
        r = max(r, self.floors.get(name, 0))
        return max(1, min(r, m, int(np.count_nonzero(singular_values > 0)) or 1))

    def bumped(self, ranks: dict[str, int], added: int) -> "RankPolicy":
        return RankPolicy(self.tau, self.fixed, {k: v + added for k, v in ranks.items()})

    def to_dict(self) -> dict:
        return {"tau": self.tau, "fixed": self.fixed, "floors": dict(self.floors)}

    @classmethod
    def from_dict(cls, d: dict) -> "RankPolicy":
        return cls(float(d.get("tau", DEFAULT_ENERGY_TOL)), d.get("fixed"), dict(d.get("floors", {})))


@dataclass(frozen=True)
class FieldSurrogate:
    name: str
    pod: PodBasis
    gpr: GprModel | None  # None for identically zero fields
    coef_mean: np.ndarray
    coef_scale: np.ndarray

    @property
    def degenerate(self) -> bool:
        return self.gpr is None

    @property
    def rank(self) -> int:
        return self.pod.rank


@dataclass(frozen=True)
class ScalarSurrogate:
    gpr: GprModel
    mean: float
    scale: float

    def predict(self, Xn) -> np.ndarray:
        return self.mean + self.scale * self.gpr.predict(Xn, return_var=False)[:, 0]


def _standardize(Y: np.ndarray):
    mean = Y.mean(axis=0)
    scale = Y.std(axis=0)
    peak = np.abs(Y).max(axis=0)
    scale = np.where(scale > 1e-12 * np.maximum(peak, 1e-300), scale, 1.0)
    return (Y - mean) / scale, mean, scale


class SurrogateModel:
    """Immutable after construction; prediction is reentrant."""

    def __init__(
        self,
        space: ParameterSpace,
        criteria: Criteria,
        monitored_node: int,
        fields: dict[str, FieldSurrogate],
        deflection: list[ScalarSurrogate],
        train_configs: np.ndarray,
        policy: RankPolicy,
    ):
        self.space = space
        self.criteria = criteria
        self.monitored_node = int(monitored_node)
        self.fields = fields
        self.deflection = deflection
        self.train_configs = np.asarray(train_configs, dtype=float)
        self.policy = policy
        self._lower = space.lower
        span = space.upper - space.lower
        self._span = np.where(span > 0, span, 1.0)

    # -- basic properties ---------------------------------------------------
    @property
    def n_params(self) -> int:
        return self.space.n_params

    @property
    def n_train(self) -> int:
        return len(self.train_configs)

    @property
    def ranks(self) -> dict[str, int]:
        return {k: f.rank for k, f in self.fields.items() if not f.degenerate}

    @property
    def active_fields(self) -> list[FieldSurrogate]:
        return [f for f in self.fields.values() if not f.degenerate]

    def normalize(self, configs) -> np.ndarray:
        X = np.atleast_2d(np.asarray(configs, dtype=float))
        if X.shape[1] != self.n_params:
            raise DataError(f"expected {self.n_params} parameters, got {X.shape[1]}")
        return (X - self._lower) / self._span

    # -- predictions ----------------------------------------------------------
    def predict_fields(self, configs) -> np.ndarray:
        """Reconstructed stresses, shape (B, n_loads, 6, n_elements)."""
        Xn = self.normalize(configs)
        n_el = self.criteria.model.n_elements
        out = np.zeros((len(Xn), len(LOAD_CASES), len(COMPONENTS), n_el))
        for (l, c) in FIELDS:
            f = self.fields[field_name(l, c)]
            if f.degenerate:
                continue
            coef = f.coef_mean + f.coef_scale * f.gpr.predict(Xn, return_var=False)
            out[:, l, c] = coef @ f.pod.basis.T
        return out

    def predict_deflection(self, configs) -> np.ndarray:
        """Max over load cases of |predicted vertical displacement| in mm."""
        Xn = self.normalize(configs)
        preds = np.column_stack([d.predict(Xn) for d in self.deflection])
        return np.abs(preds).max(axis=1)

    def predict_qois(self, configs, pen: PenaltyConfig, patch_counts: bool = False):
        """QoI rows (n_y, n_b, deflection, mass, vcg) for a batch of configs.

        With ``patch_counts`` also returns per-patch yielded and buckled counts,
        each shaped (B, n_patches).
        """
        X = np.atleast_2d(np.asarray(configs, dtype=float))
        q = np.empty((len(X), 5))
        py = pb = None
        if patch_counts:
            py = np.empty((len(X), len(self.space.patches)), dtype=int)
            pb = np.empty_like(py)
        for s in range(0, len(X), PREDICT_CHUNK):
            xb = X[s : s + PREDICT_CHUNK]
            stress = self.predict_fields(xb)
            t = self.criteria.model.element_thickness(self.space.patch_thickness_batch(xb))
            y, b, _ = self.criteria.failure(stress, t)
            n_b = b.sum(axis=1)
            q[s : s + len(xb), 0] = y.sum(axis=1)
            q[s : s + len(xb), 1] = n_b
            q[s : s + len(xb), 2] = self.predict_deflection(xb)
            q[s : s + len(xb), 3] = mass(xb, self.space, pen, n_b)
            q[s : s + len(xb), 4] = vcg(xb, self.space, pen)
            if patch_counts:
                py[s : s + len(xb)] = self.criteria.patch_counts(y)
                pb[s : s + len(xb)] = self.criteria.patch_counts(b)
        return (q, py, pb) if patch_counts else q

    def field_kernel(self, name: str, A, B) -> np.ndarray:
        """Prior covariance of one field GPR between two config batches."""
        return self.fields[name].gpr.kernel(self.normalize(A), self.normalize(B))

    # -- persistence -----------------------------------------------------------
    def save(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)

        def put(name, arr):
            np.ascontiguousarray(arr, dtype="<f8").tofile(d / f"{name}.f64")
            return list(np.shape(arr))

        manifest = {
            "version": ARCHIVE_VERSION,
            "space": self.space.to_dict(),
            "monitored_node": self.monitored_node,
            "policy": self.policy.to_dict(),
            "train_configs": put("train_configs", self.train_configs),
            "normalization": {"lower": self._lower.tolist(), "span": self._span.tolist()},
            "fields": {},
            "deflection": [],
        }
        for name, f in self.fields.items():
            rec = {
                "rank": f.rank,
                "degenerate": f.degenerate,
                "basis": put(f"{name}_basis", f.pod.basis),
                "singular_values": put(f"{name}_sv", f.pod.singular_values),
                "coef_mean": f.coef_mean.tolist(),
                "coef_scale": f.coef_scale.tolist(),
            }
            if not f.degenerate:
                rec.update(_gpr_record(d, name, f.gpr, put))
            manifest["fields"][name] = rec
        for i, s in enumerate(self.deflection):
            rec = {"mean": s.mean, "scale": s.scale}
            rec.update(_gpr_record(d, f"deflection{i}", s.gpr, put))
            manifest["deflection"].append(rec)
        (d / "manifest.json").write_text(json.dumps(manifest, indent=1))
        return d

    @classmethod
    def load(cls, directory, criteria: Criteria, space: ParameterSpace | None = None) -> "SurrogateModel":
        d = Path(directory)
        m = json.loads((d / "manifest.json").read_text())
        if m.get("version") != ARCHIVE_VERSION:
            raise DataError(f"unsupported surrogate archive version {m.get('version')}")

        def get(name, shape):
            return np.fromfile(d / f"{name}.f64", dtype="<f8").reshape(shape)

        if space is None:
            space = ParameterSpace.from_dict(m["space"], criteria.model.patches)
        elif space.to_dict() != m["space"]:
            raise DataError("surrogate archive was fitted on a different parameter space")
        X = get("train_configs", m["train_configs"])
        fields = {}
        for name, rec in m["fields"].items():
            pod = PodBasis(get(f"{name}_basis", rec["basis"]), get(f"{name}_sv", rec["singular_values"]))
            gpr = None if rec["degenerate"] else _gpr_from_record(d, name, rec, get)
            fields[name] = FieldSurrogate(
                name, pod, gpr, np.asarray(rec["coef_mean"]), np.asarray(rec["coef_scale"])
            )
        deflection = [
            ScalarSurrogate(_gpr_from_record(d, f"deflection{i}", rec, get), rec["mean"], rec["scale"])
            for i, rec in enumerate(m["deflection"])
        ]
        return cls(space, criteria, m["monitored_node"], fields, deflection, X,
                   RankPolicy.from_dict(m["policy"]))


def _gpr_record(d: Path, name: str, g: GprModel, put) -> dict:
    return {
        "theta": g.theta.tolist(),
        "log_likelihood": g.log_likelihood,
        "X": put(f"{name}_X", g.X),
        "L": put(f"{name}_L", g.L),
        "alpha": put(f"{name}_alpha", g.alpha),
    }


def _gpr_from_record(d: Path, name: str, rec: dict, get) -> GprModel:
    return GprModel(
        X=get(f"{name}_X", rec["X"]),
        theta=np.asarray(rec["theta"], dtype=float),
        L=get(f"{name}_L", rec["L"]),
        alpha=get(f"{name}_alpha", rec["alpha"]),
        log_likelihood=float(rec["log_likelihood"]),
    )


def surrogate_fit(
    db: SnapshotDatabase,
    space: ParameterSpace,
    criteria: Criteria,
    policy: RankPolicy | None = None,
    monitored_node: int | None = None,
    restarts: int = 5,
    seed: int = 0,
    previous: SurrogateModel | None = None,
    warm_restarts: int = 1,
    threads: int | None = None,
) -> SurrogateModel:
    """Fit the per-(load, component) POD-GPRs and the deflection GPRs.

    With ``previous`` fitted on the same number of parameters, each GPR starts
    from its previous hyperparameters and uses ``warm_restarts`` starts.
    """
    if len(db) < 2:
        raise DataError("surrogate fit needs at least two snapshots")
    policy = policy or RankPolicy()
    node = criteria.model.monitored_node if monitored_node is None else int(monitored_node)
    X = db.configs(space)
    lower, span = space.lower, space.upper - space.lower
    Xn = (X - lower) / np.where(span > 0, span, 1.0)
    m = len(X)
    warm = previous is not None and previous.n_params == space.n_params

    def fit_field(idx_lc):
        idx, (l, c) = idx_lc
        name = field_name(l, c)
        S = db.stress_matrix(l, c)
        if not np.any(S):
            return name, FieldSurrogate(name, PodBasis.zero(S.shape[0], m), None, np.zeros(1), np.ones(1))
        full = pod_fit(S, rank=min(S.shape))
        r = policy.rank_for(name, full.singular_values, m)
        pod = full.truncated(r)
        coef = pod.reduce(S).T  # (m, r)
        Yc, mean, scale = _standardize(coef)
        theta0 = None
        n_starts = restarts
        if warm and name in previous.fields and not previous.fields[name].degenerate:
            theta0, n_starts = previous.fields[name].gpr.theta, warm_restarts
        try:
            g = gpr_fit(Xn, Yc, restarts=n_starts, seed=seed + idx, theta0=theta0)
        except FitError as exc:
            raise FitError(f"GPR fit failed for {name}: {exc}") from exc
        return name, FieldSurrogate(name, pod, g, mean, scale)

    def fit_deflection(l):
        y = db.deflection_targets(node)[:, l : l + 1]
        Yd, mean, scale = _standardize(y)
        theta0, n_starts = None, restarts
        if warm and l < len(previous.deflection):
            theta0, n_starts = previous.deflection[l].gpr.theta, warm_restarts
        try:
            g = gpr_fit(Xn, Yd, restarts=n_starts, seed=seed + 100 + l, theta0=theta0)
        except FitError as exc:
            raise FitError(f"GPR fit failed for deflection under {LOAD_CASES[l]}: {exc}") from exc
        return ScalarSurrogate(g, float(mean[0]), float(scale[0]))

    n_threads = threads or thread_count()
    jobs = list(enumerate(FIELDS))
    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as ex:
            fitted = dict(ex.map(fit_field, jobs))
            deflection = list(ex.map(fit_deflection, range(len(LOAD_CASES))))
    else:
        fitted = dict(map(fit_field, jobs))
        deflection = [fit_deflection(l) for l in range(len(LOAD_CASES))]
    fields = {field_name(l, c): fitted[field_name(l, c)] for (l, c) in FIELDS}
    return SurrogateModel(space, criteria, node, fields, deflection, X, policy)


def refit_condition_only(model: SurrogateModel, db: SnapshotDatabase) -> SurrogateModel:
    """Re-condition every GPR on the current database with the previous
    hyperparameters and ranks (no likelihood optimization)."""
    space = model.space
    X = db.configs(space)
    Xn = model.normalize(X)
    fields = {}
    for (l, c) in FIELDS:
        name = field_name(l, c)
        old = model.fields[name]
        S = db.stress_matrix(l, c)
        if old.degenerate:
            fields[name] = FieldSurrogate(name, PodBasis.zero(S.shape[0], len(X)), None, np.zeros(1), np.ones(1))
            continue
        full = pod_fit(S, rank=min(S.shape))
        pod = full.truncated(min(old.rank, full.basis.shape[1]))
        Yc, mean, scale = _standardize(pod.reduce(S).T)
        fields[name] = FieldSurrogate(name, pod, condition(Xn, Yc, old.gpr.theta), mean, scale)
    deflection = []
    for l, old in enumerate(model.deflection):
        Yd, mean, scale = _standardize(db.deflection_targets(model.monitored_node)[:, l : l + 1])
        deflection.append(ScalarSurrogate(condition(Xn, Yd, old.gpr.theta), float(mean[0]), float(scale[0])))
    return SurrogateModel(space, model.criteria, model.monitored_node, fields, deflection, X, model.policy)


def singular_value_table(model: SurrogateModel) -> list[dict]:
    """Per-field normalized singular values with retention and policy flags.

    ``flagged`` marks retained modes whose normalized value is below the
    energy threshold (kept only because of a fixed rank or a rank floor).
    """
    rows = []
    for name, f in model.fields.items():
        if f.degenerate:
            continue
        norm = f.pod.normalized_singular_values()
        for k, v in enumerate(norm):
            retained = k < f.rank
            rows.append(
                {
                    "field": name,
                    "mode": k + 1,
                    "normalized": float(v),
                    "retained": retained,
                    "flagged": bool(retained and v < model.policy.tau),
                }
            )
    return rows


__all__ = [
    "FieldSurrogate",
    "RankPolicy",
    "ScalarSurrogate",
    "SurrogateModel",
    "field_name",
    "refit_condition_only",
    "singular_value_table",
    "surrogate_fit",
]
