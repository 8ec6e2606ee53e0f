"""High-fidelity snapshot database keyed by patch thickness.

Entries are keyed by the per-patch thickness vector rather than by parameter
values, so a configuration lifted into a refined parameter space finds the
snapshot computed in the coarse space (both describe identical physics).
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..criteria import QoiVector
from ..errors import DataError
from ..hull_model import (
    COMPONENTS,
    LOAD_CASES,
    ParameterSpace,
    StressSnapshot,
    load_snapshot,
    save_snapshot,
)

PROVENANCES = ("initial-sample", "moo-infill", "bo", "pds", "reparam-sample", "manual")


def thickness_key(patch_thickness) -> str:
    pt = np.nan_to_num(np.asarray(patch_thickness, dtype="<f8"), nan=-1.0)
    return hashlib.sha256(np.round(pt, 9).tobytes()).hexdigest()[:20]


@dataclass(frozen=True)
class DbEntry:
    key: str
    patch_thickness: np.ndarray
    snapshot: StressSnapshot
    qoi: QoiVector
    provenance: str
    timestamp: float
    order: int


class SnapshotDatabase:
    """Append-only list of validated snapshots, optionally persisted to ``root``.

    Layout: ``root/index.jsonl`` (one JSON line per entry, in insertion order)
    and ``root/snapshots/<key>/`` per snapshot.
    """

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root is not None else None
        self._entries: list[DbEntry] = []
        self._by_key: dict[str, DbEntry] = {}
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
            self._load()

    # -- persistence -----------------------------------------------------
    def _index_path(self) -> Path:
        return self.root / "index.jsonl"

    def _load(self):
        path = self._index_path()
        if not path.exists():
            return
        for line in path.read_text().splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            snap = load_snapshot(self.root / "snapshots" / rec["key"])
            entry = DbEntry(
                key=rec["key"],
                patch_thickness=np.asarray(rec["patch_thickness"], dtype=float),
                snapshot=snap,
                qoi=QoiVector(**rec["qoi"]),
                provenance=rec["provenance"],
                timestamp=rec["timestamp"],
                order=len(self._entries),
            )
            self._append(entry)

    def _append(self, entry: DbEntry):
        if entry.key in self._by_key:
            raise DataError(f"duplicate configuration {entry.key}")
        self._entries.append(entry)
        self._by_key[entry.key] = entry

    # -- public API -------------------------------------------------------
    def add(self, snapshot: StressSnapshot, qoi: QoiVector, provenance: str) -> DbEntry:
        if provenance not in PROVENANCES:
            raise DataError(f"unknown provenance tag {provenance!r}")
        if not np.all(np.isfinite(snapshot.stress)):
            raise DataError("snapshot contains non-finite stresses")
        if self._entries and snapshot.n_elements != self._entries[0].snapshot.n_elements:
            raise DataError("snapshot element count differs from the database")
        key = thickness_key(snapshot.patch_thickness)
        entry = DbEntry(
            key=key,
            patch_thickness=np.asarray(snapshot.patch_thickness, dtype=float).copy(),
            snapshot=snapshot,
            qoi=qoi,
            provenance=provenance,
            timestamp=time.time(),
            order=len(self._entries),
        )
        self._append(entry)
        if self.root is not None:
            save_snapshot(snapshot, self.root / "snapshots" / key)
            rec = {
                "key": key,
                "patch_thickness": entry.patch_thickness.tolist(),
                "qoi": {
                    "n_y": qoi.n_y,
                    "n_b": qoi.n_b,
                    "deflection": qoi.deflection,
                    "mass": qoi.mass,
                    "vcg": qoi.vcg,
                },
                "provenance": provenance,
                "timestamp": entry.timestamp,
            }
            with open(self._index_path(), "a") as fh:
                fh.write(json.dumps(rec) + "\n")
        return entry

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    @property
    def entries(self) -> list[DbEntry]:
        return list(self._entries)

    def get(self, patch_thickness) -> DbEntry | None:
        return self._by_key.get(thickness_key(patch_thickness))

    def contains(self, patch_thickness) -> bool:
        return thickness_key(patch_thickness) in self._by_key

    def lookup_config(self, space: ParameterSpace, config) -> DbEntry | None:
        return self.get(space.patch_thickness(config))

    def configs(self, space: ParameterSpace) -> np.ndarray:
        """All entries expressed as configurations of ``space``, shape (m, d)."""
        return np.array([space.config_from_patch_thickness(e.patch_thickness) for e in self._entries])

    def qoi_array(self) -> np.ndarray:
        return np.array([e.qoi.as_array() for e in self._entries])

    def stress_matrix(self, load: int, comp: int) -> np.ndarray:
        """Snapshot matrix (n_elements, m) for one load case and component."""
        return np.column_stack([e.snapshot.stress[load, comp] for e in self._entries])

    def deflection_targets(self, node: int) -> np.ndarray:
        """Signed vertical displacement (mm) at ``node``, shape (m, n_loads)."""
        return np.array([e.snapshot.displacement[:, node, 1] * 1000.0 for e in self._entries])

    def subset(self, indices) -> "SnapshotDatabase":
        """In-memory copy holding the given entries (used for cross-validation)."""
        out = SnapshotDatabase()
        for i in indices:
            e = self._entries[int(i)]
            out._append(
                DbEntry(e.key, e.patch_thickness, e.snapshot, e.qoi, e.provenance, e.timestamp, len(out))
            )
        return out


FIELDS = tuple((l, c) for l in range(len(LOAD_CASES)) for c in range(len(COMPONENTS)))

__all__ = ["DbEntry", "FIELDS", "PROVENANCES", "SnapshotDatabase", "thickness_key"]
