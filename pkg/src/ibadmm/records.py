"""Per-run results and per-iteration traces shared by all solvers."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

# CSV column order; golden-file tested, do not reorder.
RECORD_FIELDS = ("method", "beta", "c", "omega", "seed", "converged", "iterations",
                 "I_xz", "I_yz", "residual", "cpu_ms")


@dataclass
class RunRecord:
    method: str
    beta: float
    c: float
    omega: float
    seed: int
    converged: bool
    iterations: int
    I_xz: float
    I_yz: float
    residual: float
    cpu_ms: float
    # final iterate (arrays); not part of the CSV
    state: dict = field(default_factory=dict, repr=False, compare=False)
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)

    def to_row(self) -> list[str]:
        return [_fmt(getattr(self, name)) for name in RECORD_FIELDS]

    def to_json(self, with_state: bool = False) -> dict:
        doc = {name: getattr(self, name) for name in RECORD_FIELDS}
        if self.error:
            doc["error"] = self.error
        if with_state:
            doc["state"] = {k: np.asarray(v).tolist() for k, v in self.state.items()}
        return doc


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


@dataclass
class IterationTrace:
    """Snapshots taken every ``stride`` outer iterations (and at the last one)."""

    stride: int
    iteration: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    lagrangian: list = field(default_factory=list)
    I_xz: list = field(default_factory=list)
    I_yz: list = field(default_factory=list)
    p_z: list = field(default_factory=list)
    mu_z: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.iteration)

    def append(self, iteration, residual, lagrangian, ixz, iyz, p_z, mu_z) -> None:
        self.iteration.append(int(iteration))
        self.residual.append(float(residual))
        self.lagrangian.append(float(lagrangian))
        self.I_xz.append(float(ixz))
        self.I_yz.append(float(iyz))
        self.p_z.append(np.array(p_z, dtype=float))
        self.mu_z.append(np.array(mu_z, dtype=float))

    def jsonl_lines(self, **tags) -> list[str]:
        """One JSON object per recorded iteration, prefixed with ``tags``."""
        out = []
        for k in range(len(self)):
            doc = dict(tags)
            doc.update(iteration=self.iteration[k], residual=self.residual[k],
                       lagrangian=self.lagrangian[k], I_xz=self.I_xz[k], I_yz=self.I_yz[k],
                       p_z=self.p_z[k].tolist(), mu_z=self.mu_z[k].tolist())
            out.append(json.dumps(doc))
        return out
