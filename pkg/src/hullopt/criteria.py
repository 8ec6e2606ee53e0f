"""Yield and buckling post-processing, QoIs and the penalized mass objective."""
from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, DomainError
from .hull_model import HullModel, ParameterSpace, StressSnapshot, vertical_deflection

SX, SY, SZ, TXY, TXZ, TYZ = range(6)

BUCKLING_K_DIRECT = 4.0


@dataclass(frozen=True)
class YieldLimits:
    """Allowable stresses in MPa; defaults are the AH36 values."""

    direct: float = 245.0
    shear: float = 153.0
    von_mises: float = 307.0


@dataclass(frozen=True)
class Material:
    E: float = 206000.0
    nu: float = 0.3


@dataclass
class PenaltyConfig:
    c_y: float = 0.01
    c_b: float = 0.01
    y_crit: float = 0.0
    b_crit: float = 0.0
    m_bar: float = 0.0
    m_fixed: float = 0.0
    vcg_fixed: float = 0.0
    vcg_crit: float = float("inf")
    deflection_crit: float | None = None
    c_d: float = 1.0  # t per mm^2 of deflection excess

    def __post_init__(self):
        for name in ("c_y", "c_b", "y_crit", "b_crit", "m_bar", "c_d"):
            if getattr(self, name) < 0:
                raise ConfigError(f"penalty parameter {name} must be non-negative")

    @classmethod
    def from_dict(cls, data: dict, model: HullModel | None = None) -> "PenaltyConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown penalty keys: {sorted(unknown)}")
        kw = dict(data)
        if model is not None:
            kw.setdefault("m_fixed", model.m_fixed)
            kw.setdefault("vcg_fixed", model.vcg_fixed)
        return cls(**kw)


@dataclass(frozen=True)
class QoiVector:
    n_y: int
    n_b: int
    deflection: float
    mass: float
    vcg: float

    def as_array(self) -> np.ndarray:
        return np.array([self.n_y, self.n_b, self.deflection, self.mass, self.vcg], dtype=float)

    @classmethod
    def from_array(cls, a) -> "QoiVector":
        return cls(int(round(a[0])), int(round(a[1])), float(a[2]), float(a[3]), float(a[4]))


QOI_NAMES = tuple(f.name for f in fields(QoiVector))


@dataclass
class FailureState:
    yielded: np.ndarray
    buckled: np.ndarray
    usage_factors: np.ndarray  # (n_el, 3): max over load cases

    @property
    def n_y(self) -> int:
        return int(self.yielded.sum())

    @property
    def n_b(self) -> int:
        return int(self.buckled.sum())


def von_mises(stress) -> np.ndarray:
    s = np.asarray(stress, dtype=float)
    sx, sy, sz, txy, txz, tyz = s[SX], s[SY], s[SZ], s[TXY], s[TXZ], s[TYZ]
    return np.sqrt(
        0.5 * ((sx - sy) ** 2 + (sy - sz) ** 2 + (sz - sx) ** 2) + 3.0 * (txy**2 + txz**2 + tyz**2)
    )


def check_yield(stress, limits: YieldLimits = YieldLimits()):
    """True where any direct stress, shear stress or the von Mises stress
    exceeds its allowable. ``stress`` has the six components on axis 0."""
    s = np.asarray(stress, dtype=float)
    a = np.abs(s)
    direct = np.max(a[SX : SZ + 1], axis=0) > limits.direct
    shear = np.max(a[TXY : TYZ + 1], axis=0) > limits.shear
    out = direct | shear | (von_mises(s) > limits.von_mises)
    return bool(out) if out.ndim == 0 else out


def critical_stresses(thickness, b, a, material: Material = Material()):
    """Elastic critical stresses (direct, shear) of a simply supported plate.

    thickness in mm, panel width ``b`` and length ``a`` in m.
    """
    t = np.asarray(thickness, dtype=float)
    b = np.asarray(b, dtype=float)
    a = np.asarray(a, dtype=float)
    if np.any(t <= 0) or np.any(b <= 0) or np.any(a <= 0):
        raise DomainError("plate thickness and dimensions must be positive")
    base = np.pi**2 * material.E / (12.0 * (1.0 - material.nu**2)) * (t / (1000.0 * b)) ** 2
    k_shear = 5.34 + 4.0 * (b / a) ** 2
    return BUCKLING_K_DIRECT * base, k_shear * base


def check_buckling(stress, thickness, b, a, material: Material = Material()) -> np.ndarray:
    """Usage factors (longitudinal, transverse, shear) with the factor index on
    axis 0. Only compressive direct stresses contribute."""
    s = np.asarray(stress, dtype=float)
    sig_cr, tau_cr = critical_stresses(thickness, b, a, material)
    return np.stack(
        [
            np.maximum(-s[SX], 0.0) / sig_cr,
            np.maximum(-s[SY], 0.0) / sig_cr,
            np.abs(s[TXY]) / tau_cr,
        ]
    )


class Criteria:
    """Vectorized post-processing bound to one hull model."""

    def __init__(
        self,
        model: HullModel,
        limits: YieldLimits = YieldLimits(),
        buckling_threshold: float = 1.0,
    ):
        self.model = model
        self.limits = limits
        self.material = Material(model.spec.E, model.spec.nu)
        self.buckling_threshold = buckling_threshold
        self._indicator = np.zeros((model.n_elements, len(model.patches)))
        owned = model.element_patch >= 0
        self._indicator[np.flatnonzero(owned), model.element_patch[owned]] = 1.0

    def failure(self, stress, element_thickness) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Element failure flags for a batch.

        Parameters
        ----------
        stress : (..., n_loads, 6, n_el)
        element_thickness : (..., n_el)

        Returns yielded, buckled (both (..., n_el) bool) and the usage
        factors maximized over load cases (..., 3, n_el).
        """
        s = np.moveaxis(np.asarray(stress, dtype=float), -2, 0)  # (6, ..., n_loads, n_el)
        t = np.asarray(element_thickness, dtype=float)[..., None, :]
        yielded = check_yield(s, self.limits).any(axis=-2)
        eta = check_buckling(s, t, self.model.panel_b, self.model.panel_a, self.material)
        eta = eta.max(axis=-2)  # over load cases -> (3, ..., n_el)
        buckled = (eta > self.buckling_threshold).any(axis=0)
        return yielded, buckled, np.moveaxis(eta, 0, -2)

    def failure_state(self, snapshot: StressSnapshot) -> FailureState:
        t = self.model.element_thickness(snapshot.patch_thickness)
        y, b, eta = self.failure(snapshot.stress, t)
        return FailureState(yielded=y, buckled=b, usage_factors=eta.T)

    def patch_counts(self, flags: np.ndarray) -> np.ndarray:
        """Per-patch counts of flagged elements; accepts a leading batch axis."""
        return (np.asarray(flags, dtype=float) @ self._indicator).round().astype(int)

    def counts(self, stress, element_thickness) -> tuple[np.ndarray, np.ndarray]:
        y, b, _ = self.failure(stress, element_thickness)
        return y.sum(axis=-1), b.sum(axis=-1)


def _patch_masses(config, space: ParameterSpace) -> np.ndarray:
    """Per-patch structural mass t_p * d_p, shape (..., n_patches).

    Summing over patches rather than parameters keeps mass and VCG bitwise
    unchanged when a refinement regroups the same patch thicknesses."""
    x = np.asarray(config, dtype=float)
    t = np.nan_to_num(space.patch_thickness_batch(x))
    rho = np.array([p.linear_density_coeff for p in space.patches])
    w = t * rho
    return w[0] if x.ndim == 1 else w


def mass(config, space: ParameterSpace, pen: PenaltyConfig, n_b) -> np.ndarray | float:
    return pen.m_fixed + _patch_masses(config, space).sum(axis=-1) + pen.m_bar * np.asarray(n_b, dtype=float)


def vcg(config, space: ParameterSpace, pen: PenaltyConfig):
    w = _patch_masses(config, space)
    z = np.array([p.vcg_p for p in space.patches])
    return (pen.vcg_fixed * pen.m_fixed + w @ z) / (pen.m_fixed + w.sum(axis=-1))


def compute_qois(
    snapshot: StressSnapshot,
    space: ParameterSpace,
    pen: PenaltyConfig,
    monitored_node: int,
    criteria: Criteria,
) -> QoiVector:
    if snapshot.n_elements != criteria.model.n_elements:
        raise DataError(
            f"snapshot has {snapshot.n_elements} elements, model has {criteria.model.n_elements}"
        )
    x = space.config_from_patch_thickness(snapshot.patch_thickness)
    state = criteria.failure_state(snapshot)
    n_b = state.n_b
    return QoiVector(
        n_y=state.n_y,
        n_b=n_b,
        deflection=vertical_deflection(snapshot, monitored_node),
        mass=float(mass(x, space, pen, n_b)),
        vcg=float(vcg(x, space, pen)),
    )


def penalty(n_y, n_b, pen: PenaltyConfig, deflection=None):
    n_y = np.asarray(n_y, dtype=float)
    n_b = np.asarray(n_b, dtype=float)
    out = pen.c_y * np.maximum(n_y - pen.y_crit, 0.0) ** 2 + pen.c_b * np.maximum(n_b - pen.b_crit, 0.0) ** 2
    if pen.deflection_crit is not None and deflection is not None:
        out = out + pen.c_d * np.maximum(np.asarray(deflection, float) - pen.deflection_crit, 0.0) ** 2
    return out


def penalized_mass(q: QoiVector, pen: PenaltyConfig) -> float:
    return float(q.mass + penalty(q.n_y, q.n_b, pen, q.deflection))


def penalized_mass_arrays(qois: np.ndarray, pen: PenaltyConfig) -> np.ndarray:
    """Batch version over rows of (n_y, n_b, deflection, mass, vcg)."""
    q = np.atleast_2d(qois)
    return q[:, 3] + penalty(q[:, 0], q[:, 1], pen, q[:, 2])


def mass_gap(config, q: QoiVector, pen: PenaltyConfig, x_lb, space: ParameterSpace) -> float:
    """Percentage excess over the theoretical lower bound ``d . x_LB``."""
    d = space.d
    denom = float(d @ np.asarray(x_lb, dtype=float))
    if denom == 0.0:
        raise DomainError("d . x_LB is zero; mass gap undefined")
    f_pen = float(penalty(q.n_y, q.n_b, pen, q.deflection))
    num = float(d @ (np.asarray(config, float) - np.asarray(x_lb, float))) + pen.m_bar * q.n_b + f_pen
    return 100.0 * num / denom


def vcg_feasible(config, space: ParameterSpace, pen: PenaltyConfig, tol: float = 1e-9):
    """Linearized VCG bound: (VCG_crit - VCG_fixed) m_fixed >= sum_i (VCG_i - VCG_crit) d_i x_i."""
    if not np.isfinite(pen.vcg_crit):
        return np.ones(np.shape(config)[:-1], dtype=bool) if np.ndim(config) > 1 else True
    x = np.asarray(config, dtype=float)
    lhs = x @ ((space.vcg - pen.vcg_crit) * space.d)
    rhs = (pen.vcg_crit - pen.vcg_fixed) * pen.m_fixed
    return lhs <= rhs + tol


def write_qoi_csv(path, rows: Sequence[tuple[Sequence[float], QoiVector]], pen: PenaltyConfig, n_params: int):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(n_params)] + list(QOI_NAMES) + ["penalized"])
        for x, q in rows:
            w.writerow(list(x) + [q.n_y, q.n_b, q.deflection, q.mass, q.vcg, penalized_mass(q, pen)])


__all__ = [
    "Criteria",
    "FailureState",
    "Material",
    "PenaltyConfig",
    "QOI_NAMES",
    "QoiVector",
    "YieldLimits",
    "check_buckling",
    "check_yield",
    "compute_qois",
    "critical_stresses",
    "mass",
    "mass_gap",
    "penalized_mass",
    "penalized_mass_arrays",
    "penalty",
    "vcg",
    "vcg_feasible",
    "von_mises",
    "write_qoi_csv",
]
