"""
Representation map r : Z -> X and its sampled local Lipschitz estimate across
an admissible transformation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import numpy as np

from lib.errors import DegenerateTransform, DomainMismatch
from lib.reports import CertificateReport, zero_violation_radius
from lib.rng import make_rng

from .environments import ANY_KEY, Environment, EnvironmentFamily, TransformSpec, env_distance

log = logging.getLogger("smgi.metamodel")

MAP_KINDS = ("identity", "scale", "affine", "constant", "table")
OUTPUT_METRICS = ("absolute", "euclidean")
DEGENERATE_DISTANCE = 1e-12


@dataclass(frozen=True)
class RepresentationSpec:
    input_space: Any = "reals"  # "reals" or a tuple of observation labels
    output_space: str = "reals"
    map_spec: Mapping[str, Any] = field(default_factory=lambda: {"kind": "identity"})
    local_lipschitz_bound: Optional[float] = None
    metric: str = "absolute"

    def __post_init__(self) -> None:
        kind = self.map_spec.get("kind")
        if kind not in MAP_KINDS:
            raise ValueError(f"representation map kind must be one of {MAP_KINDS}")
        if self.metric not in OUTPUT_METRICS:
            raise ValueError(f"representation metric must be one of {OUTPUT_METRICS}")
        if self.local_lipschitz_bound is not None and self.local_lipschitz_bound < 0:
            raise ValueError("local_lipschitz_bound must be nonnegative")
        if not isinstance(self.input_space, str):
            object.__setattr__(self, "input_space", tuple(self.input_space))
        if kind == "table":
            if isinstance(self.input_space, str):
                raise ValueError("a table map needs a finite input space")
            table = self.map_spec.get("table", {})
            missing = [z for z in self.input_space if str(z) not in table]
            if missing:
                raise ValueError(f"representation table is not total; missing {missing[:3]}")

    def __call__(self, z: Any) -> np.ndarray:
        if not isinstance(self.input_space, str) and z not in self.input_space \
                and str(z) not in {str(v) for v in self.input_space}:
            raise DomainMismatch(f"observation {z!r} outside the representation input space")
        spec = self.map_spec
        kind = spec["kind"]
        if kind == "constant":
            return np.atleast_1d(np.asarray(spec.get("value", 0.0), dtype=float))
        if kind == "table":
            return np.atleast_1d(np.asarray(spec["table"][str(z)], dtype=float))
        x = np.atleast_1d(np.asarray(z, dtype=float))
        if kind == "identity":
            return x
        if kind == "scale":
            return float(spec.get("factor", 1.0)) * x
        return float(spec.get("factor", 1.0)) * x + float(spec.get("offset", 0.0))

    def distance(self, x: np.ndarray, y: np.ndarray) -> float:
        """d_X on the output space."""
        if self.metric == "absolute":
            return float(np.sum(np.abs(x - y)))
        return float(np.linalg.norm(x - y))

    def to_dict(self) -> dict:
        return {
            "input_space": self.input_space if isinstance(self.input_space, str) else list(self.input_space),
            "output_space": self.output_space,
            "map": dict(self.map_spec),
            "local_lipschitz_bound": self.local_lipschitz_bound,
            "metric": self.metric,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RepresentationSpec":
        inp = data.get("input_space", "reals")
        bound = data.get("local_lipschitz_bound")
        return cls(
            input_space=inp if isinstance(inp, str) else tuple(inp),
            output_space=str(data.get("output_space", "reals")),
            map_spec=dict(data.get("map") or {"kind": "identity"}),
            local_lipschitz_bound=float(bound) if bound is not None else None,
            metric=str(data.get("metric", "absolute")),
        )


def _quantile(e: Environment, values: np.ndarray, u: np.ndarray) -> list:
    """Inverse CDF of e's unconditional law at u, support walked in declared order."""
    probs = e.distribution(ANY_KEY) if ANY_KEY in e.conditionals else e.distribution(sorted(e.conditionals)[0])
    order = np.argsort(values, kind="stable")
    cdf = np.cumsum(probs[order])
    idx = np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), len(cdf) - 1)
    return [e.support[order[i]] for i in idx]


def _order_values(e: Environment) -> np.ndarray:
    pos = e.ordered_positions()
    return pos if pos is not None else np.arange(len(e.support), dtype=float)


def _sample_pairs(r: RepresentationSpec, e: Environment, te: Environment,
                  u: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    za = _quantile(e, _order_values(e), u)
    zb = _quantile(te, _order_values(te), u)
    # declared positions are the observed values (a shift moves positions, not labels)
    if e.positions is not None:
        pos_of = dict(zip(e.labels, e.positions))
        za = [pos_of[str(z)] for z in za]
    if te.positions is not None:
        pos_of = dict(zip(te.labels, te.positions))
        zb = [pos_of[str(z)] for z in zb]
    return [(r(a), r(b)) for a, b in zip(za, zb)]


def _lipschitz_samples(r: RepresentationSpec, fam: EnvironmentFamily, t: TransformSpec,
                       n_pairs: int, seed: int) -> tuple[float, int]:
    if n_pairs < 1:
        raise ValueError("n_pairs must be positive")
    rng = make_rng(seed)
    best, used = 0.0, 0
    for e in fam.instances:
        te = t.apply_env(e)
        d_env = env_distance(e, te, fam.metric_kind)
        u = rng.random(n_pairs)
        if d_env < DEGENERATE_DISTANCE:
            continue
        for x, y in _sample_pairs(r, e, te, u):
            best = max(best, r.distance(x, y) / d_env)
            used += 1
    if used == 0:
        raise DegenerateTransform(f"transform {t.identifier!r} moves no environment by more than 1e-12")
    return best, used


def estimate_representation_lipschitz(r: RepresentationSpec, fam: EnvironmentFamily, t: TransformSpec,
                                      n_pairs: int, seed: int) -> float:
    """
    Max over quantile-coupled sample pairs of d_X(r(z), r(z')) / D_E(e, tau(e)).
    A lower bound on the true local constant; deterministic given seed.
    """
    best, used = _lipschitz_samples(r, fam, t, n_pairs, seed)
    log.debug("lipschitz transform=%s pairs=%d estimate=%.6g", t.identifier, used, best)
    return best


def check_representation_lipschitz(r: RepresentationSpec, fam: EnvironmentFamily, t: TransformSpec,
                                   n_pairs: int, seed: int) -> CertificateReport:
    best, used = _lipschitz_samples(r, fam, t, n_pairs, seed)
    declared = r.local_lipschitz_bound
    passed = declared is None or best <= declared + 1e-9
    evidence = {"estimate": best, "sample_count": float(used), "confidence_radius": zero_violation_radius(used)}
    if declared is not None:
        evidence["bound"] = float(declared)
    return CertificateReport(
        obligation="representation_lipschitz",
        passed=passed,
        mode="sampled",
        evidence=evidence,
        flags={"bound_declared": declared is not None},
        witnesses=() if passed else ({"transform": t.identifier, "estimate": best},),
        notes=("estimate is a lower bound on the local Lipschitz constant",),
    )
