"""
Closed-form generalization bounds: baseline PAC-Bayes, the structural bound
with its drift term, the unified bound, the Azuma drift term, the program prior
over meta-models and the KL-length identity.
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp, rel_entr

from lib.rng import make_rng
from modules.certification.certificates import non_explosion_constant
from modules.structure.metamodel import MetaModel, description_length_bits

log = logging.getLogger("smgi.bounds")

SUM_TOL = 1e-12
IDENTITY_TOL = 1e-9
BOUND_KINDS = ("pacbayes_basic", "structural", "structural_trajectory", "unified")
LN2 = math.log(2.0)


@dataclass(frozen=True)
class BoundReport:
    kind: str
    empirical_risk: float
    kl_term: float
    confidence_term: float
    shift_term: float
    drift_term: float
    total: float
    parameters: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        parts = self.empirical_risk + self.confidence_term + self.shift_term + self.drift_term
        if abs(parts - self.total) > SUM_TOL * max(1.0, abs(parts)):
            raise ValueError(f"bound total {self.total!r} differs from its components {parts!r}")
        for name in ("kl_term", "confidence_term", "shift_term", "drift_term"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "empirical_risk": self.empirical_risk,
            "kl_term": self.kl_term,
            "confidence_term": self.confidence_term,
            "shift_term": self.shift_term,
            "drift_term": self.drift_term,
            "total": self.total,
            "parameters": {k: self.parameters[k] for k in sorted(self.parameters)},
        }


def _report(kind: str, emp: float, kl: float, conf: float, shift: float, drift: float, **params) -> BoundReport:
    total = emp + conf + shift + drift
    log.debug("bound kind=%s total=%.6g", kind, total)
    return BoundReport(kind, float(emp), float(kl), float(conf), float(shift), float(drift), float(total),
                       {k: float(v) for k, v in params.items()})


def _check_common(kl: float, n: int, delta: float, n_min: int = 1) -> None:
    if n < n_min:
        raise ValueError(f"n must be >= {n_min}")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if kl < 0:
        raise ValueError("kl must be nonnegative")


def pacbayes_basic(empirical_risk: float, kl: float, n: int, delta: float) -> BoundReport:
    """R_hat + sqrt((KL + ln(1/delta)) / (2n))."""
    _check_common(kl, n, delta)
    conf = math.sqrt((kl + math.log(1.0 / delta)) / (2.0 * n))
    return _report("pacbayes_basic", empirical_risk, kl, conf, 0.0, 0.0, n=n, delta=delta, KL=kl)


def structural_confidence(kl: float, n: int, delta: float) -> float:
    return math.sqrt((kl + math.log(2.0 * math.sqrt(n) / delta)) / (2.0 * (n - 1)))


def structural_bound(empirical_risk: float, kl: float, n: int, delta: float,
                     L: float, B: float, V0: float) -> BoundReport:
    """R_hat + sqrt((KL + ln(2 sqrt(n)/delta)) / (2(n-1))) + 2L(B V0 + B)."""
    _check_common(kl, n, delta, n_min=2)
    if L < 0 or B < 0 or V0 < 0:
        raise ValueError("L, B and V0 must be nonnegative")
    conf = structural_confidence(kl, n, delta)
    drift = 2.0 * L * (B * V0 + B)
    return _report("structural", empirical_risk, kl, conf, 0.0, drift, n=n, delta=delta, KL=kl, L=L, B=B, V0=V0)


def structural_bound_trajectory(empirical_risk: float, kl: float, n: int, delta: float, L: float,
                                lyapunov_means: Sequence[float], alpha: Optional[float] = None,
                                beta: Optional[float] = None, V0: Optional[float] = None) -> BoundReport:
    """
    Structural bound with the drift term (2L/n) sum_t E[V(s_t)] from measured
    Lyapunov means. With (alpha, beta, V0) the closed-form cap 2L(B V0 + B) is
    recorded as parameter 'drift_cap'.
    """
    _check_common(kl, n, delta, n_min=2)
    means = np.asarray(lyapunov_means, dtype=float)
    if means.size == 0 or np.any(means < 0):
        raise ValueError("lyapunov_means must be a non-empty list of nonnegative reals")
    conf = structural_confidence(kl, n, delta)
    drift = 2.0 * L * float(means.mean())
    params = dict(n=n, delta=delta, KL=kl, L=L)
    if alpha is not None and beta is not None and V0 is not None:
        B = non_explosion_constant(alpha, beta)
        params.update(alpha=alpha, beta=beta, V0=V0, B=B, drift_cap=2.0 * L * (B * V0 + B))
    return _report("structural_trajectory", empirical_risk, kl, conf, 0.0, drift, **params)


def unified_bound(empirical_risk: float, gen_term: float, l_ell: float, eps_max: float, c_v: float,
                  lyapunov_means: Sequence[float]) -> BoundReport:
    """R_hat + Gen_n + L_ell eps_max + (c_V / n) sum_t E[V(s_t)]."""
    means = np.asarray(lyapunov_means, dtype=float)
    if means.size == 0:
        raise ValueError("lyapunov_means must be non-empty")
    if min(gen_term, l_ell, eps_max, c_v) < 0 or np.any(means < 0):
        raise ValueError("unified bound inputs must be nonnegative")
    shift = l_ell * eps_max
    drift = c_v * float(means.sum()) / means.size
    return _report("unified", empirical_risk, 0.0, gen_term, shift, drift,
                   L_ell=l_ell, eps_max=eps_max, c_V=c_v, n=means.size)


def azuma_drift_term(L: float, v_max: float, n: int, delta: float) -> float:
    """(2 L V_max / sqrt(n)) sqrt(2 ln(2/delta))."""
    _check_common(0.0, n, delta)
    if L < 0 or v_max < 0:
        raise ValueError("L and v_max must be nonnegative")
    return (2.0 * L * v_max / math.sqrt(n)) * math.sqrt(2.0 * math.log(2.0 / delta))


def _bits(models: Sequence[Union[MetaModel, int, float]]) -> np.ndarray:
    if not models:
        raise ValueError("program prior needs at least one model")
    return np.asarray([description_length_bits(m) if isinstance(m, MetaModel) else float(m) for m in models],
                      dtype=float)


def program_log_normalizer(models: Sequence[Union[MetaModel, int, float]]) -> float:
    """ln Z with Z = sum 2^(-|theta|)."""
    return float(logsumexp(-_bits(models) * LN2))


def program_prior(models: Sequence[Union[MetaModel, int, float]]) -> np.ndarray:
    """Pi(theta) proportional to 2^(-|theta|). Models may be given as bit lengths."""
    logw = -_bits(models) * LN2
    return np.exp(logw - logsumexp(logw))


def kl_length_identity_check(q: Sequence[float], models: Sequence[Union[MetaModel, int, float]]
                             ) -> tuple[float, float]:
    """
    Returns (KL(Q || Pi), E_Q[|theta|] ln 2 + ln Z - H(Q)); the additive
    constant of the identity is the prior's log-normalizer ln Z.
    """
    q = np.asarray(q, dtype=float)
    bits = _bits(models)
    if q.shape != bits.shape:
        raise ValueError("Q must have one weight per model")
    if np.any(q < 0) or abs(q.sum() - 1.0) > SUM_TOL:
        raise ValueError("Q must be a distribution")
    prior = program_prior(list(bits))
    lhs = float(np.sum(rel_entr(q, prior)))
    entropy = float(-np.sum(rel_entr(q, np.ones_like(q))))
    rhs = float(np.dot(q, bits)) * LN2 + program_log_normalizer(list(bits)) - entropy
    return lhs, rhs


_BOUND_FNS = {
    "pacbayes_basic": (pacbayes_basic, ("empirical_risk", "kl", "n", "delta")),
    "structural": (structural_bound, ("empirical_risk", "kl", "n", "delta", "L", "B", "V0")),
}


def evaluate_bound(kind: str, params: Mapping[str, Any]) -> BoundReport:
    if kind not in _BOUND_FNS:
        raise ValueError(f"sweepable bound kinds are {sorted(_BOUND_FNS)}")
    fn, names = _BOUND_FNS[kind]
    missing = [n for n in names if n not in params]
    if missing:
        raise ValueError(f"bound {kind} is missing parameters {missing}")
    args = [int(params[n]) if n == "n" else float(params[n]) for n in names]
    return fn(*args)


def sweep_bound(kind: str, grid: Mapping[str, Sequence[Any]]) -> list[dict]:
    """One row per grid point (cartesian product, parameters in sorted order)."""
    names = sorted(grid)
    rows = []
    for values in itertools.product(*(grid[n] for n in names)):
        params = dict(zip(names, values))
        rep = evaluate_bound(kind, params)
        rows.append({**params, "confidence_term": rep.confidence_term, "shift_term": rep.shift_term,
                     "drift_term": rep.drift_term, "total": rep.total})
    return rows


def write_rows_csv(rows: Sequence[Mapping[str, Any]], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = list(rows[0]) if rows else []
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return path


def bound_validity_experiment(true_risks: Sequence[float], n: int, delta: float, trials: int,
                              seed: int, L: float = 0.0, B: float = 1.0, V0: float = 0.0) -> dict:
    """
    Finite class with Bernoulli losses of known mean. Each trial draws n losses
    per hypothesis, picks the empirical minimizer (Q a point mass, uniform prior
    so KL = ln |H|), and records whether the structural bound covers its true risk.
    """
    risks = np.asarray(true_risks, dtype=float)
    kl = math.log(len(risks))
    rng = make_rng(seed)
    covered, slack = 0, []
    for _ in range(trials):
        emp = rng.binomial(n, risks) / n
        h = int(np.argmin(emp))
        total = structural_bound(float(emp[h]), kl, n, delta, L, B, V0).total
        covered += total >= risks[h]
        slack.append(total - risks[h])
    return {"coverage": covered / trials, "mean_slack": float(np.mean(slack)), "trials": trials, "kl": kl}
