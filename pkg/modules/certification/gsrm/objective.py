"""
GSRM over regime sequences: cumulative regime-indexed loss plus alpha-weighted
switching cost and beta-weighted incoherence, minimized exactly by enumeration
or first-order dynamic programming.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Optional, Sequence

import numpy as np
from scipy.stats import norm

from lib.rng import make_rng
from modules.structure.regimes import SwitchingOperator, select_regime

log = logging.getLogger("smgi.gsrm")

TIE_TOL = 1e-12
EXHAUSTIVE_LIMIT = 10 ** 7
AUTO_EXHAUSTIVE_LIMIT = 4096
MODES = ("auto", "exhaustive", "dp")
_CHUNK = 200_000


@dataclass(frozen=True, eq=False)
class GsrmInstance:
    step_losses: np.ndarray  # T x K, regime k in column k-1
    switch_cost: np.ndarray  # K x K, zero diagonal
    alpha: float = 0.0
    incoherence: Optional[np.ndarray] = None  # per-regime penalty
    beta: float = 0.0
    k_init: int = 1

    def __post_init__(self) -> None:
        L = np.array(self.step_losses, dtype=float)
        if L.ndim != 2 or L.shape[0] < 1 or L.shape[1] < 1:
            raise ValueError("step_losses must be a T x K matrix with T, K >= 1")
        if np.any(L < 0) or np.any(L > 1):
            raise ValueError("step losses must lie in [0, 1]")
        K = L.shape[1]
        C = np.array(self.switch_cost, dtype=float)
        if C.shape != (K, K):
            raise ValueError(f"switch_cost must be {K} x {K}")
        if np.any(C < 0) or np.any(np.diag(C) != 0):
            raise ValueError("switch costs must be nonnegative with a zero diagonal")
        inc = np.zeros(K) if self.incoherence is None else np.array(self.incoherence, dtype=float)
        if inc.shape != (K,) or np.any(inc < 0):
            raise ValueError("incoherence must be K nonnegative penalties")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be nonnegative")
        if not 1 <= self.k_init <= K:
            raise ValueError(f"k_init must lie in 1..{K}")
        for name, arr in (("step_losses", L), ("switch_cost", C), ("incoherence", inc)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def horizon(self) -> int:
        return self.step_losses.shape[0]

    @property
    def K(self) -> int:
        return self.step_losses.shape[1]

    @classmethod
    def with_unit_costs(cls, step_losses, alpha: float = 0.0, beta: float = 0.0,
                        forbidden: Sequence[int] = (), k_init: int = 1) -> "GsrmInstance":
        """Unit switch cost between distinct regimes; forbidden regimes get incoherence 1."""
        K = np.asarray(step_losses).shape[1]
        C = 1.0 - np.eye(K)
        inc = np.array([1.0 if k + 1 in set(forbidden) else 0.0 for k in range(K)])
        return cls(np.asarray(step_losses, dtype=float), C, alpha, inc, beta, k_init)

    def to_dict(self) -> dict:
        return {
            "step_losses": self.step_losses.tolist(),
            "switch_cost": self.switch_cost.tolist(),
            "alpha": float(self.alpha),
            "incoherence": self.incoherence.tolist(),
            "beta": float(self.beta),
            "k_init": int(self.k_init),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GsrmInstance":
        losses = np.asarray(data["step_losses"], dtype=float)
        cost = data.get("switch_cost", "unit")
        if isinstance(cost, str):
            if cost != "unit":
                raise ValueError("switch_cost must be a matrix or 'unit'")
            inst = cls.with_unit_costs(losses, float(data.get("alpha", 0.0)), float(data.get("beta", 0.0)),
                                       data.get("forbidden", ()), int(data.get("k_init", 1)))
            if data.get("incoherence") is not None:
                inst = replace(inst, incoherence=np.asarray(data["incoherence"], dtype=float))
            return inst
        inc = data.get("incoherence")
        if inc is None and data.get("forbidden"):
            inc = [1.0 if k + 1 in set(data["forbidden"]) else 0.0 for k in range(losses.shape[1])]
        return cls(losses, np.asarray(cost, dtype=float), float(data.get("alpha", 0.0)),
                   np.asarray(inc, dtype=float) if inc is not None else None,
                   float(data.get("beta", 0.0)), int(data.get("k_init", 1)))


def _validate_sequence(inst: GsrmInstance, seq: Sequence[int]) -> list[int]:
    seq = [int(k) for k in seq]
    if len(seq) != inst.horizon:
        raise ValueError(f"regime sequence has length {len(seq)}, horizon is {inst.horizon}")
    if any(not 1 <= k <= inst.K for k in seq):
        raise ValueError(f"regime indices must lie in 1..{inst.K}")
    return seq


def gsrm_objective(inst: GsrmInstance, regime_sequence: Sequence[int]) -> float:
    """sum_t [ loss_t(k_t) + alpha CostSwitch(k_{t-1}, k_t) + beta Incoh(k_t) ], k_0 = k_init."""
    seq = _validate_sequence(inst, regime_sequence)
    prev = inst.k_init - 1
    total = 0.0
    for t, k in enumerate(seq):
        cur = k - 1
        total += inst.step_losses[t, cur] + inst.alpha * inst.switch_cost[prev, cur] + inst.beta * inst.incoherence[cur]
        prev = cur
    return float(total)


def _objective_batch(inst: GsrmInstance, seqs: np.ndarray) -> np.ndarray:
    """Vectorized objective on an (N, T) array of 0-based regimes."""
    T = inst.horizon
    prev = np.concatenate([np.full((seqs.shape[0], 1), inst.k_init - 1), seqs[:, :-1]], axis=1)
    rows = np.arange(T)[None, :]
    return (inst.step_losses[rows, seqs] + inst.alpha * inst.switch_cost[prev, seqs]
            + inst.beta * inst.incoherence[seqs]).sum(axis=1)


def _minimize_exhaustive(inst: GsrmInstance) -> tuple[int, ...]:
    best_val, best_seq = math.inf, None
    it = itertools.product(range(inst.K), repeat=inst.horizon)
    while True:
        chunk = list(itertools.islice(it, _CHUNK))
        if not chunk:
            break
        seqs = np.asarray(chunk, dtype=int).reshape(len(chunk), inst.horizon)
        vals = _objective_batch(inst, seqs)
        i = int(np.argmin(vals))
        if vals[i] < best_val - TIE_TOL:
            idx = int(np.flatnonzero(vals <= vals[i] + TIE_TOL)[0])
            best_val, best_seq = float(vals[idx]), seqs[idx]
    return tuple(int(k) + 1 for k in best_seq)


def _minimize_dp(inst: GsrmInstance) -> tuple[int, ...]:
    T, K = inst.horizon, inst.K
    step_cost = inst.step_losses + inst.beta * inst.incoherence[None, :]  # T x K
    trans = inst.alpha * inst.switch_cost  # prev x next
    go = np.zeros((T + 1, K))  # go[t, j]: best cost of steps t.. given k_{t-1} = j
    for t in range(T - 1, -1, -1):
        go[t] = np.min(trans + step_cost[t][None, :] + go[t + 1][None, :], axis=1)
    seq, prev = [], inst.k_init - 1
    for t in range(T):
        cand = trans[prev] + step_cost[t] + go[t + 1]
        k = int(np.flatnonzero(cand <= cand.min() + TIE_TOL)[0])
        seq.append(k + 1)
        prev = k
    return tuple(seq)


def gsrm_minimize(inst: GsrmInstance, mode: str = "auto") -> tuple[tuple[int, ...], float]:
    """
    Minimizing regime sequence and its objective value. Ties (within 1e-12)
    go to the lexicographically smallest sequence.

    Args:
        inst: GSRM instance.
        mode: 'exhaustive' (K^T <= 10^7), 'dp', or 'auto' (exhaustive up to 4096 sequences).

    Returns:
        (sequence of 1-based regimes, value)
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    size = inst.K ** inst.horizon
    if mode == "exhaustive" and size > EXHAUSTIVE_LIMIT:
        raise ValueError(f"exhaustive GSRM needs K^T <= {EXHAUSTIVE_LIMIT} (got {size})")
    if mode == "auto":
        mode = "exhaustive" if size <= AUTO_EXHAUSTIVE_LIMIT else "dp"
    seq = _minimize_exhaustive(inst) if mode == "exhaustive" else _minimize_dp(inst)
    value = gsrm_objective(inst, seq)
    log.debug("gsrm minimize mode=%s T=%d K=%d value=%.6g", mode, inst.horizon, inst.K, value)
    return seq, value


def gsrm_expected(inst: GsrmInstance, switching: SwitchingOperator, contexts: Sequence[Any],
                  n_mc: int, seed: int, confidence: float = 0.95) -> tuple[float, float]:
    """
    Monte-Carlo mean of the objective over sequences drawn from the switching
    operator (k_t ~ sigma(. | c_t)); returns (mean, normal confidence radius).
    """
    if len(contexts) != inst.horizon:
        raise ValueError("contexts must have one entry per step")
    if switching.K != inst.K:
        raise ValueError("switching operator and instance disagree on K")
    if n_mc < 1:
        raise ValueError("n_mc must be positive")
    rng = make_rng(seed)
    seqs = np.empty((n_mc, inst.horizon), dtype=int)
    for i in range(n_mc):
        for t, c in enumerate(contexts):
            seqs[i, t] = select_regime(switching, c, None, rng) - 1
    vals = _objective_batch(inst, seqs)
    if np.all(vals == vals[0]):
        return gsrm_objective(inst, seqs[0] + 1), 0.0
    z = float(norm.ppf(0.5 + confidence / 2.0))
    radius = z * float(vals.std(ddof=1)) / math.sqrt(n_mc)
    return float(vals.mean()), radius


def gsrm_exact_expectation(inst: GsrmInstance, switching: SwitchingOperator, contexts: Sequence[Any]) -> float:
    """Exact expectation by enumeration for state-independent switching."""
    if len(contexts) != inst.horizon:
        raise ValueError("contexts must have one entry per step")
    dists = [switching.distribution(c, None) for c in contexts]
    total = 0.0
    for seq in itertools.product(range(inst.K), repeat=inst.horizon):
        p = math.prod(dists[t][k] for t, k in enumerate(seq))
        if p > 0:
            total += p * gsrm_objective(inst, [k + 1 for k in seq])
    return total


def gsrm_rows(results: Sequence[tuple[Sequence[int], float]]) -> list[dict]:
    """CSV rows: sequence as space-joined 1-based regimes, value."""
    return [{"sequence": " ".join(str(k) for k in seq), "value": repr(float(v))} for seq, v in results]
