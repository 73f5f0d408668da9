"""Tolerances and sampling parameters shared by the analysis and the oracle."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

__all__ = ["TiltProbeConfig", "AnalysisConfig", "load_config"]


@dataclass
class TiltProbeConfig:
    """Settings of the brute-force tilt oracle.

    ``delta`` and the cluster tolerance default to fractions of ``gamma``
    when left as ``None``.
    """

    gamma: float = 0.5
    delta: float | None = None
    grid: int = 5
    max_tilts: int = 2000
    starts: int = 64
    explore_starts: int = 16
    rho_schedule: tuple = (1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8)
    cluster_tol: float | None = None
    tie_tol: float = 1e-8
    feas_tol: float = 1e-8
    kkt_tol: float = 1e-6
    newton_steps: int = 60
    polish_steps: int = 40
    lipschitz_min_separation: float = 0.1

    def __post_init__(self):
        self.rho_schedule = tuple(float(r) for r in self.rho_schedule)
        if self.delta is None:
            self.delta = self.gamma / 20.0
        if self.cluster_tol is None:
            self.cluster_tol = 1e-4 * self.gamma
        self.validate()

    def validate(self):
        for name in ("gamma", "delta", "cluster_tol", "tie_tol", "feas_tol", "kkt_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.delta < self.gamma:
            raise ValueError("delta must be smaller than gamma")
        for name in ("grid", "max_tilts", "starts", "explore_starts", "newton_steps", "polish_steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not self.rho_schedule or any(r <= 0 for r in self.rho_schedule):
            raise ValueError("rho_schedule must hold positive penalties")


@dataclass
class AnalysisConfig:
    """Every tolerance, sampling size and cap used by the analyzer.

    ``partition_e1`` and ``partition_i1`` hold 1-based constraint labels;
    ``None`` keeps every equality (inequality) in the first part.
    """

    active_tol: float = 1e-8
    rank_tol: float = 1e-10
    strict_tol: float = 1e-9
    dedupe_tol: float = 1e-8
    feas_tol: float = 1e-9
    lp_pivot_tol: float = 1e-11
    face_tol: float = 1e-8
    cone_tol: float = 1e-9
    first_order_tol: float = 1e-8
    cq_radius: float = 1e-3
    cq_samples: int = 64
    mscq_shells: int = 4
    sphere_samples: int = 500
    subset_cap: int = 4096
    crcq_subset_cap: int = 4096
    kappa: float | None = None
    partition_e1: tuple | None = None
    partition_i1: tuple | None = None
    run_oracle: bool = False
    verbosity: int = 1
    oracle: TiltProbeConfig = field(default_factory=TiltProbeConfig)

    def __post_init__(self):
        if isinstance(self.oracle, dict):
            self.oracle = TiltProbeConfig(**self.oracle)
        for name in ("partition_e1", "partition_i1"):
            val = getattr(self, name)
            if val is not None:
                setattr(self, name, tuple(int(i) for i in val))
        self.validate()

    def validate(self):
        for name in ("active_tol", "rank_tol", "strict_tol", "dedupe_tol", "feas_tol",
                     "lp_pivot_tol", "face_tol", "cone_tol", "first_order_tol", "cq_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("cq_samples", "mscq_shells", "sphere_samples", "subset_cap", "crcq_subset_cap"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.kappa is not None and not self.kappa > 0:
            raise ValueError("kappa must be positive")
        self.oracle.validate()

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("partition_e1", "partition_i1"):
            if d[key] is not None:
                d[key] = list(d[key])
        d["oracle"]["rho_schedule"] = list(d["oracle"]["rho_schedule"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        d = dict(d)
        if "oracle" in d:
            onames = {f.name for f in dataclasses.fields(TiltProbeConfig)}
            bad = set(d["oracle"]) - onames
            if bad:
                raise ValueError(f"unknown oracle field(s): {', '.join(sorted(bad))}")
            d["oracle"] = TiltProbeConfig(**d["oracle"])
        return cls(**d)


def load_config(path) -> AnalysisConfig:
    """Read an :class:`AnalysisConfig` from a JSON file."""
    with open(path, encoding="utf-8") as fh:
        return AnalysisConfig.from_dict(json.load(fh))
