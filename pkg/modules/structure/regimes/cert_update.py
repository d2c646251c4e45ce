"""
Certified evaluator update: project a candidate regime-weight vector onto the
admissible set K_Phi = simplex intersected with linear weight constraints.

Squared-Euclidean projection is solved exactly by active-set enumeration
(small K); the KL divergence variant uses SLSQP from a feasible start.
"""

from __future__ import annotations

import itertools
import logging
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.special import rel_entr

from lib.errors import EmptyAdmissibleSet
from lib.reports import CertificateReport

from .core import ProtectedCore, WeightConstraint, check_protected_core
from .evaluators import EvaluatorFamily, RegimeWeights

log = logging.getLogger("smgi.regimes")

DIVERGENCES = ("squared_euclidean", "kl_on_weights")
ADMISSIBLE_TOL = 1e-9
_MAX_ENUM_ROWS = 20
_KL_FLOOR = 1e-12


def _stack(constraints: Sequence[WeightConstraint], K: int) -> tuple[np.ndarray, np.ndarray]:
    if not constraints:
        return np.zeros((0, K)), np.zeros(0)
    rows = [c.as_leq() for c in constraints]
    G = np.vstack([g for g, _ in rows])
    h = np.array([b for _, b in rows], dtype=float)
    if G.shape[1] != K:
        raise ValueError(f"weight constraints have {G.shape[1]} coefficients, family has K={K}")
    return G, h


def _feasible_point(G: np.ndarray, h: np.ndarray, K: int) -> np.ndarray:
    res = linprog(
        c=np.zeros(K),
        A_ub=G if len(h) else None,
        b_ub=h if len(h) else None,
        A_eq=np.ones((1, K)),
        b_eq=np.array([1.0]),
        bounds=[(0.0, None)] * K,
        method="highs",
    )
    if res.status != 0:
        raise EmptyAdmissibleSet("weight constraints do not intersect the simplex")
    return np.asarray(res.x, dtype=float)


def _project_euclidean(c: np.ndarray, G: np.ndarray, h: np.ndarray) -> np.ndarray:
    """argmin ||x - c||^2 s.t. sum x = 1, x >= 0, G x <= h, by active-set enumeration."""
    K = len(c)
    A = np.vstack([G, -np.eye(K)])
    b = np.concatenate([h, np.zeros(K)])
    m = len(b)
    best, best_d = None, np.inf
    for size in range(0, min(K, m) + 1):
        for active in itertools.combinations(range(m), size):
            E = np.vstack([np.ones((1, K)), A[list(active)]]) if active else np.ones((1, K))
            f = np.concatenate([[1.0], b[list(active)]]) if active else np.array([1.0])
            y, *_ = np.linalg.lstsq(E @ E.T, E @ c - f, rcond=None)
            x = c - E.T @ y
            if np.max(np.abs(E @ x - f)) > 1e-9:
                continue
            if np.any(A @ x > b + 1e-10):
                continue
            d = float(np.sum((x - c) ** 2))
            if d < best_d - 1e-15:
                best, best_d = x, d
    return best


def _project_slsqp(c: np.ndarray, G: np.ndarray, h: np.ndarray, x0: np.ndarray, divergence: str) -> np.ndarray:
    K = len(c)
    target = np.maximum(c, _KL_FLOOR)
    if divergence == "kl_on_weights":
        def objective(x):
            return float(np.sum(rel_entr(np.maximum(x, 0.0), target)))
    else:
        def objective(x):
            return float(np.sum((x - c) ** 2))
    cons = [{"type": "eq", "fun": lambda x: np.sum(x) - 1.0}]
    if len(h):
        cons.append({"type": "ineq", "fun": lambda x: h - G @ x})
    res = minimize(objective, x0, method="SLSQP", bounds=[(0.0, 1.0)] * K, constraints=cons,
                   options={"ftol": 1e-14, "maxiter": 500})
    return np.asarray(res.x, dtype=float)


def divergence_value(divergence: str, x: Sequence[float], c: Sequence[float]) -> float:
    x, c = np.asarray(x, dtype=float), np.asarray(c, dtype=float)
    if divergence == "squared_euclidean":
        return float(np.sum((x - c) ** 2))
    return float(np.sum(rel_entr(x, np.maximum(c, _KL_FLOOR))))


def cert_update(
    core: Optional[ProtectedCore],
    current: EvaluatorFamily,
    candidate_weights: RegimeWeights,
    divergence: str = "squared_euclidean",
    admissible_set: Optional[Sequence[WeightConstraint]] = None,
) -> tuple[RegimeWeights, CertificateReport]:
    """
    CertUpdate_Phi: argmin over K_Phi of D(lambda, candidate). K_Phi is the
    simplex intersected with admissible_set and the core's linearized
    constraints. An admissible candidate is returned unchanged.
    """
    if divergence not in DIVERGENCES:
        raise ValueError(f"divergence must be one of {DIVERGENCES}")
    K = current.K
    if candidate_weights.K != K:
        raise ValueError(f"candidate has K={candidate_weights.K}, family has K={K}")
    constraints = list(admissible_set or ())
    if core is not None:
        constraints += core.linearize(current)
    G, h = _stack(constraints, K)
    x0 = _feasible_point(G, h, K)

    c = candidate_weights.as_array()
    if all(con.holds(c, ADMISSIBLE_TOL) for con in constraints):
        out, mode = candidate_weights, "unchanged"
    else:
        if divergence == "squared_euclidean" and len(h) + K <= _MAX_ENUM_ROWS:
            x = _project_euclidean(c, G, h)
            mode = "active_set"
        else:
            x = None
        if x is None:
            x = _project_slsqp(c, G, h, x0, divergence)
            mode = "slsqp"
        out = RegimeWeights.from_array(x)

    w = out.as_array()
    slacks = [con.slack(w) for con in constraints]
    binding = [con.name or f"constraint_{i}" for i, (con, s) in enumerate(zip(constraints, slacks))
               if abs(s) <= ADMISSIBLE_TOL]
    max_violation = max([0.0] + [-s for s in slacks])
    div = 0.0 if mode == "unchanged" else divergence_value(divergence, w, c)
    children = ()
    if core is not None and core.constraints:
        children = (check_protected_core(core, current, weights=out),)
    passed = max_violation <= ADMISSIBLE_TOL and all(ch.passed for ch in children)
    log.debug("cert-update mode=%s divergence=%s value=%.6g binding=%s", mode, divergence, div, binding)
    report = CertificateReport(
        obligation="evaluative_invariance",
        passed=passed,
        evidence={"divergence": div, "n_binding": float(len(binding)), "max_violation": max_violation},
        witnesses=tuple(binding),
        children=children,
        flags={"unchanged": mode == "unchanged"},
        notes=(f"solver={mode}", f"divergence={divergence}", "audit-set predicate evaluation"),
    )
    return out, report
