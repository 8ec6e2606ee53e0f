"""Parameterized hull model and the synthetic high-fidelity solver.

The mesh is a side view of a hull girder: a grid of rectangular panels
(panel = patch = one steel sheet), each meshed with bilinear plane-stress
quadrilaterals. The second in-plane mesh axis is the hull's vertical axis,
so ``centroid_z`` and vertical deflections refer to it. Hogging and sagging
are applied as self-equilibrated loads: end tractions linear in the vertical
coordinate plus a cosine wave pressure along the length.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from .errors import ConfigError, DataError, DomainError
from .fem import PlaneStressAssembler, SolverError

LOAD_CASES = ("hogging", "sagging")
COMPONENTS = ("sigma_x", "sigma_y", "sigma_z", "tau_xy", "tau_xz", "tau_yz")
IN_PLANE = (0, 1, 3)  # positions of sigma_x, sigma_y, tau_xy in COMPONENTS


class RegionTag(str, Enum):
    Deck = "Deck"
    Bulkhead = "Bulkhead"
    Shell = "Shell"
    InnerBottom = "InnerBottom"
    Bottom = "Bottom"


@dataclass(frozen=True)
class Element:
    id: int
    patch_id: int  # -1 for elements outside any patch (fixed thickness)
    centroid_z: float
    area: float
    panel_width_b: float
    panel_length_a: float
    region_tag: RegionTag


@dataclass(frozen=True)
class Patch:
    id: int
    element_ids: tuple[int, ...]
    linear_density_coeff: float  # t/mm
    vcg_p: float  # m
    panel: tuple[int, int]  # (column, row) in the panel grid

    def __post_init__(self):
        if not self.element_ids:
            raise ConfigError(f"patch {self.id} has no elements")
        if self.linear_density_coeff <= 0:
            raise ConfigError(f"patch {self.id} has non-positive linear density")


@dataclass(frozen=True)
class ParameterDef:
    index: int
    name: str
    patch_ids: tuple[int, ...]
    domain: tuple[float, ...]
    linear_density: float
    vcg: float
    parent: int | None = None


class ParameterSpace:
    """Discrete thickness parameters with their patch assignment and hierarchy."""

    def __init__(self, params: Sequence[ParameterDef], patches: Sequence[Patch]):
        self.params = tuple(params)
        self.patches = tuple(patches)
        self._validate()
        self._patch_owner = np.full(len(self.patches), -1, dtype=np.int64)
        for p in self.params:
            self._patch_owner[list(p.patch_ids)] = p.index

    @classmethod
    def from_groups(cls, groups, patches: Sequence[Patch]) -> "ParameterSpace":
        """Build from ``(name, patch_ids, domain, parent)`` tuples; densities and
        VCGs are derived from the patches."""
        params = []
        for i, (name, patch_ids, domain, parent) in enumerate(groups):
            patch_ids = tuple(sorted(int(p) for p in patch_ids))
            if not patch_ids:
                raise ConfigError(f"parameter {name!r} controls no patches")
            dens = np.array([patches[p].linear_density_coeff for p in patch_ids])
            vcgs = np.array([patches[p].vcg_p for p in patch_ids])
            params.append(
                ParameterDef(
                    index=i,
                    name=name,
                    patch_ids=patch_ids,
                    domain=tuple(float(t) for t in domain),
                    linear_density=float(dens.sum()),
                    vcg=float(dens @ vcgs / dens.sum()),
                    parent=parent,
                )
            )
        return cls(params, patches)

    def _validate(self):
        seen: set[int] = set()
        for i, p in enumerate(self.params):
            if p.index != i:
                raise ConfigError("parameter indices must be 0..n-1 in order")
            if not p.domain:
                raise ConfigError(f"parameter {p.name!r} has an empty domain")
            d = np.asarray(p.domain)
            if np.any(d <= 0) or np.any(np.diff(d) <= 0):
                raise ConfigError(f"domain of {p.name!r} must be positive and strictly ascending")
            overlap = seen.intersection(p.patch_ids)
            if overlap:
                raise ConfigError(f"patches {sorted(overlap)} assigned to two parameters")
            seen.update(p.patch_ids)
            if p.parent is not None and not 0 <= p.parent < len(self.params):
                raise ConfigError(f"parameter {p.name!r} has invalid parent {p.parent}")
        # parent links must form a forest
        for p in self.params:
            hops, cur = 0, p.parent
            while cur is not None:
                hops += 1
                if hops > len(self.params):
                    raise ConfigError("parameter hierarchy contains a cycle")
                cur = self.params[cur].parent

    def __len__(self) -> int:
        return len(self.params)

    @property
    def n_params(self) -> int:
        return len(self.params)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(p.domain) for p in self.params)

    @property
    def n_configurations(self) -> int:
        return math.prod(self.sizes)

    @property
    def d(self) -> np.ndarray:
        return np.array([p.linear_density for p in self.params])

    @property
    def vcg(self) -> np.ndarray:
        return np.array([p.vcg for p in self.params])

    @property
    def lower(self) -> np.ndarray:
        return np.array([p.domain[0] for p in self.params])

    @property
    def upper(self) -> np.ndarray:
        return np.array([p.domain[-1] for p in self.params])

    def domain(self, i: int) -> np.ndarray:
        return np.asarray(self.params[i].domain)

    def enumerate(self) -> Iterable[tuple[float, ...]]:
        return itertools.product(*(p.domain for p in self.params))

    def fingerprint(self) -> str:
        payload = json.dumps(
            [[p.name, list(p.patch_ids), list(p.domain), p.parent] for p in self.params]
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def validate(self, config) -> tuple[float, ...]:
        x = tuple(float(v) for v in config)
        if len(x) != self.n_params:
            raise DomainError(f"configuration has {len(x)} values, expected {self.n_params}")
        for p, v in zip(self.params, x):
            if v not in p.domain:
                raise DomainError(f"thickness {v} not in domain of {p.name!r}")
        return x

    def contains(self, config) -> bool:
        try:
            self.validate(config)
        except DomainError:
            return False
        return True

    def indices(self, config) -> tuple[int, ...]:
        x = self.validate(config)
        return tuple(p.domain.index(v) for p, v in zip(self.params, x))

    def patch_thickness(self, config) -> np.ndarray:
        x = self.validate(config)
        pt = np.full(len(self.patches), np.nan)
        for p, v in zip(self.params, x):
            pt[list(p.patch_ids)] = v
        return pt

    def patch_thickness_batch(self, configs) -> np.ndarray:
        """Patch thicknesses for a batch of (possibly continuous) configurations,
        shape (B, n_patches); unparameterized patches are NaN. No membership check."""
        X = np.atleast_2d(np.asarray(configs, dtype=float))
        if X.shape[1] != self.n_params:
            raise DomainError(f"configuration has {X.shape[1]} values, expected {self.n_params}")
        out = np.full((len(X), len(self.patches)), np.nan)
        owned = self._patch_owner >= 0
        out[:, owned] = X[:, self._patch_owner[owned]]
        return out

    def config_from_patch_thickness(self, patch_thickness) -> tuple[float, ...]:
        """Inverse of :meth:`patch_thickness`; fails if a parameter's patches
        disagree, i.e. the thickness field is not representable here."""
        pt = np.asarray(patch_thickness, dtype=float)
        out = []
        for p in self.params:
            vals = np.unique(pt[list(p.patch_ids)])
            if len(vals) != 1:
                raise DomainError(f"patches of {p.name!r} carry different thicknesses {vals}")
            out.append(float(vals[0]))
        return self.validate(out)

    def mass_terms(self, config) -> float:
        return float(self.d @ np.asarray(config, dtype=float))

    def children(self, i: int) -> list[int]:
        return [p.index for p in self.params if p.parent == i]

    def to_dict(self) -> dict:
        return {
            "params": [
                {
                    "name": p.name,
                    "patch_ids": list(p.patch_ids),
                    "domain": list(p.domain),
                    "parent": p.parent,
                }
                for p in self.params
            ]
        }

    @classmethod
    def from_dict(cls, data: dict, patches: Sequence[Patch]) -> "ParameterSpace":
        groups = [(p["name"], p["patch_ids"], p["domain"], p["parent"]) for p in data["params"]]
        return cls.from_groups(groups, patches)


@dataclass(frozen=True)
class LoadCase:
    kind: str
    boundary_tractions: np.ndarray  # (n_nodes, 2) N
    lateral_pressure: np.ndarray  # (n_elements,) Pa


@dataclass(frozen=True)
class StressSnapshot:
    config: tuple[float, ...]
    patch_thickness: np.ndarray
    stress: np.ndarray  # (n_loads, 6, n_elements) MPa
    displacement: np.ndarray  # (n_loads, n_nodes, 2) m

    @property
    def n_elements(self) -> int:
        return self.stress.shape[-1]

    def component(self, load: str, comp: str) -> np.ndarray:
        return self.stress[LOAD_CASES.index(load), COMPONENTS.index(comp)]

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.stress, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.displacement, dtype="<f8").tobytes())
        return h.hexdigest()


# --------------------------------------------------------------------------
# Model specification
# --------------------------------------------------------------------------


@dataclass
class RegionSpec:
    name: str
    tags: list[str]
    domain: list[float]
    default: float
    panel_width_b: float = 0.7
    panel_length_a: float = 2.5
    columns: list[int] | None = None


@dataclass
class ModelSpec:
    length: float
    height: float
    panel_columns: int
    panel_rows: list[str]
    grid: tuple[int, int]
    regions: list[RegionSpec]
    bulkhead_columns: list[int] = field(default_factory=list)
    E: float = 206000.0
    nu: float = 0.3
    density: float = 7.85
    fixed_thickness: float = 10.0
    fixed_panel_width_b: float = 0.7
    fixed_panel_length_a: float = 2.5
    extra_fixed_mass: float = 0.0
    extra_fixed_vcg: float = 0.0
    end_moment: float = 0.0  # N m, hogging sign
    wave_pressure: float = 0.0  # Pa amplitude, hogging sign
    monitored_node: int | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        try:
            geo = data["geometry"]
            mat = data.get("material", {})
            fixed = data.get("fixed", {})
            loads = data.get("loads", {})
            master = [float(t) for t in data.get("thickness_set", [])]
            regions = []
            for r in data["regions"]:
                if "domain" in r:
                    dom = [float(t) for t in r["domain"]]
                else:
                    lo, hi = float(r["min"]), float(r["max"])
                    dom = [t for t in master if lo <= t <= hi]
                if master and any(t not in master for t in dom):
                    raise ConfigError(f"region {r['name']!r} uses values outside thickness_set")
                regions.append(
                    RegionSpec(
                        name=str(r["name"]),
                        tags=[str(t) for t in r["tags"]],
                        domain=sorted(dom),
                        default=float(r.get("default", min(dom) if dom else 0.0)),
                        panel_width_b=float(r.get("panel_width_b", 0.7)),
                        panel_length_a=float(r.get("panel_length_a", 2.5)),
                        columns=r.get("columns"),
                    )
                )
            spec = cls(
                length=float(geo["length"]),
                height=float(geo["height"]),
                panel_columns=int(geo["panel_columns"]),
                panel_rows=[str(t) for t in geo["panel_rows"]],
                grid=tuple(int(g) for g in geo.get("grid", (4, 2))),
                bulkhead_columns=[int(c) for c in geo.get("bulkhead_columns", [])],
                regions=regions,
                E=float(mat.get("E", 206000.0)),
                nu=float(mat.get("nu", 0.3)),
                density=float(mat.get("density", 7.85)),
                fixed_thickness=float(fixed.get("thickness", 10.0)),
                fixed_panel_width_b=float(fixed.get("panel_width_b", 0.7)),
                fixed_panel_length_a=float(fixed.get("panel_length_a", 2.5)),
                extra_fixed_mass=float(fixed.get("mass", 0.0)),
                extra_fixed_vcg=float(fixed.get("vcg", 0.0)),
                end_moment=float(loads.get("end_moment", 0.0)),
                wave_pressure=float(loads.get("wave_pressure", 0.0)),
                monitored_node=data.get("monitored_node"),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"invalid model spec: missing or malformed {exc}") from exc
        spec.check()
        return spec

    def check(self):
        if self.panel_columns < 1 or not self.panel_rows:
            raise ConfigError("model needs at least one panel")
        if min(self.grid) < 1:
            raise ConfigError("grid must have at least one quad per panel in each direction")
        if self.length <= 0 or self.height <= 0:
            raise ConfigError("length and height must be positive")
        if not self.regions:
            raise ConfigError("at least one parameterized region is required")
        valid = {t.value for t in RegionTag}
        for tag in self.panel_rows:
            if tag not in valid:
                raise ConfigError(f"unknown region tag {tag!r}")
        for r in self.regions:
            if not r.domain:
                raise ConfigError(f"region {r.name!r} has an empty domain")
            if r.default not in r.domain:
                raise ConfigError(f"default of {r.name!r} not in its domain")
            if r.panel_width_b <= 0 or r.panel_length_a <= 0:
                raise ConfigError(f"region {r.name!r} has non-positive panel dimensions")
        if not (0 < self.nu < 0.5) or self.E <= 0 or self.density <= 0:
            raise ConfigError("invalid material constants")


def load_model_spec(path) -> ModelSpec:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if isinstance(data, dict) and "model" in data:
        data = data["model"]
    return ModelSpec.from_dict(data)


# --------------------------------------------------------------------------
# Model and solver
# --------------------------------------------------------------------------


class HullModel:
    """Mesh, patches, initial parameterization and loads of the demo hull."""

    def __init__(
        self,
        spec: ModelSpec,
        nodes: np.ndarray,
        connectivity: np.ndarray,
        elements: list[Element],
        patches: list[Patch],
        space: ParameterSpace,
        default_config: tuple[float, ...],
        loads: tuple[LoadCase, LoadCase],
        fixed_dofs: np.ndarray,
        monitored_node: int,
        fixed_element_thickness: np.ndarray,
    ):
        self.spec = spec
        self.nodes = nodes
        self.connectivity = connectivity
        self.elements = elements
        self.patches = patches
        self.space = space
        self.default_config = default_config
        self.loads = loads
        self.fixed_dofs = fixed_dofs
        self.monitored_node = monitored_node
        self._fixed_thickness = fixed_element_thickness

        self.element_patch = np.array([e.patch_id for e in elements], dtype=np.int64)
        self.element_area = np.array([e.area for e in elements])
        self.centroid_z = np.array([e.centroid_z for e in elements])
        self.panel_b = np.array([e.panel_width_b for e in elements])
        self.panel_a = np.array([e.panel_length_a for e in elements])
        self.patch_elements = [np.asarray(p.element_ids, dtype=np.int64) for p in patches]

        fixed = self.element_patch < 0
        fixed_mass = spec.density * 1e-3 * float(self.element_area[fixed] @ self._fixed_thickness[fixed])
        fixed_moment = spec.density * 1e-3 * float(
            (self.element_area * self.centroid_z)[fixed] @ self._fixed_thickness[fixed]
        )
        self.m_fixed = fixed_mass + spec.extra_fixed_mass
        if self.m_fixed <= 0:
            raise ConfigError("fixed mass must be positive (set fixed.mass)")
        self.vcg_fixed = (fixed_moment + spec.extra_fixed_mass * spec.extra_fixed_vcg) / self.m_fixed

        self._assembler = PlaneStressAssembler(nodes * 1000.0, connectivity, spec.E, spec.nu)
        self._load_matrix = np.column_stack([self._nodal_forces(lc) for lc in loads])

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def _nodal_forces(self, lc: LoadCase) -> np.ndarray:
        f = np.asarray(lc.boundary_tractions, dtype=float).copy()
        # uniform face load split equally over the four corners of each element
        face = np.asarray(lc.lateral_pressure) * self.element_area / 4.0
        np.add.at(f[:, 1], self.connectivity.ravel(), np.repeat(face, 4))
        return f.ravel()

    def element_thickness(self, patch_thickness: np.ndarray) -> np.ndarray:
        """Element thickness for one (n_patches,) or a batch (B, n_patches)."""
        pt = np.asarray(patch_thickness, dtype=float)
        t = np.broadcast_to(self._fixed_thickness, pt.shape[:-1] + (self.n_elements,)).copy()
        mask = self.element_patch >= 0
        t[..., mask] = pt[..., self.element_patch[mask]]
        return t

    def solve_hifi(self, config, space: ParameterSpace | None = None) -> StressSnapshot:
        """Assemble and solve both load cases for one configuration."""
        space = space or self.space
        pt = space.patch_thickness(config)
        return self.solve_patch_thickness(pt, config=space.validate(config))

    def solve_patch_thickness(self, patch_thickness, config=None) -> StressSnapshot:
        pt = np.asarray(patch_thickness, dtype=float)
        if pt.shape != (len(self.patches),) or not np.all(np.isfinite(pt)) or np.any(pt <= 0):
            raise DomainError("patch thickness vector must be positive, one value per patch")
        t = self.element_thickness(pt)
        u = self._assembler.solve(t, self._load_matrix, self.fixed_dofs)
        n_el = self.n_elements
        stress = np.zeros((len(LOAD_CASES), len(COMPONENTS), n_el))
        disp = np.empty((len(LOAD_CASES), self.n_nodes, 2))
        for l in range(len(LOAD_CASES)):
            s = self._assembler.centroid_stress(u[:, l])
            stress[l, IN_PLANE[0]] = s[:, 0]
            stress[l, IN_PLANE[1]] = s[:, 1]
            stress[l, IN_PLANE[2]] = s[:, 2]
            disp[l] = u[:, l].reshape(-1, 2) / 1000.0
        cfg = tuple(config) if config is not None else tuple(float(v) for v in pt)
        return StressSnapshot(config=cfg, patch_thickness=pt.copy(), stress=stress, displacement=disp)

    def stiffness(self, patch_thickness):
        return self._assembler.stiffness(self.element_thickness(np.asarray(patch_thickness, float)))


def vertical_deflection(snapshot: StressSnapshot, monitored_node: int) -> float:
    """Maximum absolute vertical displacement of a node over load cases, in mm."""
    n_nodes = snapshot.displacement.shape[1]
    if not 0 <= int(monitored_node) < n_nodes:
        raise KeyError(f"unknown node id {monitored_node}")
    return float(np.max(np.abs(snapshot.displacement[:, int(monitored_node), 1])) * 1000.0)


def build_demo_model(spec: ModelSpec) -> HullModel:
    """Mesh the panel grid, group panels into patches and parameters, and set up
    the hogging/sagging loads. Deterministic in ``spec``."""
    spec.check()
    ncol, rows = spec.panel_columns, list(spec.panel_rows)
    nrow = len(rows)
    gx, gz = spec.grid
    nx, nz = ncol * gx, nrow * gz
    xs = np.linspace(0.0, spec.length, nx + 1)
    zs = np.linspace(0.0, spec.height, nz + 1)
    X, Z = np.meshgrid(xs, zs)  # node id = j * (nx + 1) + i
    nodes = np.column_stack([X.ravel(), Z.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    panel_tag = {}
    for c in range(ncol):
        for r, tag in enumerate(rows):
            if tag == RegionTag.Shell.value and c in spec.bulkhead_columns:
                tag = RegionTag.Bulkhead.value
            panel_tag[(c, r)] = tag

    def region_of(c, r):
        tag = panel_tag[(c, r)]
        for k, reg in enumerate(spec.regions):
            if tag in reg.tags and (reg.columns is None or c in reg.columns):
                return k
        return None

    connectivity, elements = [], []
    panel_elements: dict[tuple[int, int], list[int]] = {}
    panel_region = {}
    dx, dz = spec.length / nx, spec.height / nz
    for r in range(nrow):
        for c in range(ncol):
            panel_region[(c, r)] = region_of(c, r)
            panel_elements[(c, r)] = []
    # patch ids follow panel order, skipping fixed panels
    patch_id = {}
    for r in range(nrow):
        for c in range(ncol):
            if panel_region[(c, r)] is not None:
                patch_id[(c, r)] = len(patch_id)
    fixed_t = []
    for j in range(nz):
        for i in range(nx):
            c, r = i // gx, j // gz
            reg = panel_region[(c, r)]
            eid = len(elements)
            connectivity.append([nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)])
            if reg is None:
                b, a = spec.fixed_panel_width_b, spec.fixed_panel_length_a
            else:
                b, a = spec.regions[reg].panel_width_b, spec.regions[reg].panel_length_a
            elements.append(
                Element(
                    id=eid,
                    patch_id=patch_id.get((c, r), -1),
                    centroid_z=float((zs[j] + zs[j + 1]) / 2),
                    area=dx * dz,
                    panel_width_b=b,
                    panel_length_a=a,
                    region_tag=RegionTag(panel_tag[(c, r)]),
                )
            )
            fixed_t.append(spec.fixed_thickness)
            panel_elements[(c, r)].append(eid)
    connectivity = np.asarray(connectivity, dtype=np.int64)

    patches = []
    for (c, r), pid in sorted(patch_id.items(), key=lambda kv: kv[1]):
        eids = tuple(panel_elements[(c, r)])
        area = sum(elements[e].area for e in eids)
        zc = sum(elements[e].area * elements[e].centroid_z for e in eids) / area
        patches.append(
            Patch(
                id=pid,
                element_ids=eids,
                linear_density_coeff=spec.density * area * 1e-3,
                vcg_p=zc,
                panel=(c, r),
            )
        )

    groups = []
    for k, reg in enumerate(spec.regions):
        pids = [pid for (c, r), pid in patch_id.items() if panel_region[(c, r)] == k]
        if not pids:
            raise ConfigError(f"region {reg.name!r} matches no panels")
        groups.append((reg.name, pids, reg.domain, None))
    space = ParameterSpace.from_groups(groups, patches)
    default = tuple(reg.default for reg in spec.regions)

    # hogging: tension in the upper fibres, buoyancy surplus amidships
    n_nodes = len(nodes)
    tractions = np.zeros((n_nodes, 2))
    zc = spec.height / 2.0
    k = 12.0 * spec.end_moment / spec.height**3  # N/m per m of height
    for end, sign in ((0, -1.0), (nx, 1.0)):
        for j in range(nz):
            z0, z1 = zs[j], zs[j + 1]
            # consistent nodal loads of a linear edge traction
            q0, q1 = k * (z0 - zc), k * (z1 - zc)
            h = z1 - z0
            tractions[nid(end, j), 0] += sign * h * (2 * q0 + q1) / 6.0
            tractions[nid(end, j + 1), 0] += sign * h * (q0 + 2 * q1) / 6.0
    xc = np.array([(xs[i] + xs[i + 1]) / 2 for j in range(nz) for i in range(nx)])
    pressure = spec.wave_pressure * np.cos(2.0 * np.pi * xc / spec.length)
    hog = LoadCase("hogging", tractions, pressure)
    sag = LoadCase("sagging", -tractions, -pressure)

    # simply supported ends at mid-height: pin + roller
    jm = nz // 2
    fixed_dofs = np.array([2 * nid(0, jm), 2 * nid(0, jm) + 1, 2 * nid(nx, jm) + 1])
    monitored = spec.monitored_node
    if monitored is None:
        monitored = nid(nx // 2, 0)
    if not 0 <= int(monitored) < n_nodes:
        raise ConfigError(f"monitored node {monitored} outside mesh")

    return HullModel(
        spec=spec,
        nodes=nodes,
        connectivity=connectivity,
        elements=elements,
        patches=patches,
        space=space,
        default_config=default,
        loads=(hog, sag),
        fixed_dofs=fixed_dofs,
        monitored_node=int(monitored),
        fixed_element_thickness=np.asarray(fixed_t, dtype=float),
    )


# --------------------------------------------------------------------------
# Snapshot persistence
# --------------------------------------------------------------------------


def save_snapshot(snapshot: StressSnapshot, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for l, load in enumerate(LOAD_CASES):
        for c, comp in enumerate(COMPONENTS):
            snapshot.stress[l, c].astype("<f8").tofile(d / f"{load}_{comp}.f64")
    snapshot.displacement.astype("<f8").tofile(d / "displacement.f64")
    manifest = {
        "config": list(snapshot.config),
        "patch_thickness": snapshot.patch_thickness.tolist(),
        "load_cases": list(LOAD_CASES),
        "components": list(COMPONENTS),
        "element_count": snapshot.n_elements,
        "node_count": snapshot.displacement.shape[1],
        "checksum": snapshot.checksum(),
    }
    (d / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return d


def load_snapshot(directory) -> StressSnapshot:
    d = Path(directory)
    m = json.loads((d / "manifest.json").read_text())
    n_el, n_nodes = m["element_count"], m["node_count"]
    stress = np.empty((len(m["load_cases"]), len(m["components"]), n_el))
    for l, load in enumerate(m["load_cases"]):
        for c, comp in enumerate(m["components"]):
            stress[l, c] = np.fromfile(d / f"{load}_{comp}.f64", dtype="<f8")
    disp = np.fromfile(d / "displacement.f64", dtype="<f8").reshape(len(m["load_cases"]), n_nodes, 2)
    snap = StressSnapshot(
        config=tuple(m["config"]),
        patch_thickness=np.asarray(m["patch_thickness"], dtype=float),
        stress=stress,
        displacement=disp,
    )
    if snap.checksum() != m["checksum"]:
        raise DataError(f"checksum mismatch in snapshot {d}")
    return snap


__all__ = [
    "COMPONENTS",
    "LOAD_CASES",
    "Element",
    "HullModel",
    "LoadCase",
    "ModelSpec",
    "ParameterDef",
    "ParameterSpace",
    "Patch",
    "RegionSpec",
    "RegionTag",
    "SolverError",
    "StressSnapshot",
    "build_demo_model",
    "load_model_spec",
    "load_snapshot",
    "save_snapshot",
    "vertical_deflection",
]
