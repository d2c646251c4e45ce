"""
Trajectory simulation under T_{theta,tau}, CSV export and empirical risks.

Per step t = 1..horizon: draw the context c_t and observation z_t from the
(transformed) environment at s_{t-1}, pick the regime, score the loss of
(h_{t-1}, s_{t-1}, z_t), then step the kernel and update memory.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Sequence, Union

import numpy as np

from lib.errors import EvaluatorError
from lib.rng import make_rng
from modules.structure.memory import update_memory
from modules.structure.regimes import RegimeWeights, SwitchingOperator, active_loss, select_regime

from .kernels import State, TransitionKernel, step

log = logging.getLogger("smgi.dynamics")

CSV_COLUMNS = ("t", "state_repr", "hypothesis_id", "regime", "loss", "lyapunov_value")
LOSS_TOL = 1e-12


@dataclass(frozen=True)
class Trajectory:
    seed: int
    states: tuple[State, ...]
    observations: tuple = ()
    regimes: tuple[int, ...] = ()
    losses: tuple[float, ...] = ()
    lyapunov_values: tuple[float, ...] = ()
    contexts: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        n = len(self.observations)
        if len(self.states) != n + 1:
            raise ValueError("a trajectory has one more state than observations")
        if len(self.regimes) != n or len(self.losses) != n:
            raise ValueError("regimes and losses must have one entry per observation")
        if any(not 0.0 <= x <= 1.0 for x in self.losses):
            raise ValueError("trajectory losses must lie in [0, 1]")

    @property
    def horizon(self) -> int:
        return len(self.observations)


def _lyapunov_fn(lyapunov: Any) -> Optional[Callable[[State], float]]:
    if lyapunov is None:
        return None
    return getattr(lyapunov, "v", lyapunov)


def _dominant_regime(w: RegimeWeights) -> int:
    return int(np.argmax(w.as_array())) + 1


def simulate(
    m,
    t,
    kernel: TransitionKernel,
    s0: State,
    horizon: int,
    seed: int,
    switching: Optional[SwitchingOperator] = None,
    lyapunov: Any = None,
    env_index: int = 0,
    salience: Any = None,
) -> Trajectory:
    """
    Simulate `horizon` steps of kernel in the tau-transformed environment.

    Args:
        m: MetaModel supplying environments, evaluators and the memory spec.
        t: TransformSpec applied to m.environments; its evaluator_action, when
            set, replaces the family's mixing.
        kernel: the induced dynamics.
        s0: initial state.
        horizon: number of steps (>= 1).
        seed: integer seed; identical arguments give identical trajectories.
        switching: optional regime switching operator; without it the active
            mixture is used and the dominant regime is recorded.
        lyapunov: optional witness (object with .v, or callable) recorded per state.
        env_index: which environment of the family drives observations.
        salience: optional salience weight or callable on z.

    Returns:
        Trajectory
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    fam = t.apply(m.environments)
    env = fam.instances[env_index]
    evals = m.evaluators
    v = _lyapunov_fn(lyapunov)
    rng = make_rng(seed)

    states = [s0]
    observations, regimes, losses, contexts = [], [], [], []
    s = s0
    for step_idx in range(horizon):
        c = env.context_at(step_idx, s, rng)
        z = env.sample(s, rng)
        if switching is not None:
            k = select_regime(switching, c, s, rng)
            w = RegimeWeights.one_hot(k, evals.K)
        else:
            w = t.evaluator_action if t.evaluator_action is not None else evals.weights_for(c)
            k = _dominant_regime(w)
        loss = active_loss(evals, w, s.hypothesis_id, s, z, salience)
        if not -LOSS_TOL <= loss <= 1.0 + LOSS_TOL:
            raise EvaluatorError(f"loss {loss!r} outside [0, 1] at step {step_idx + 1}")
        loss = min(max(loss, 0.0), 1.0)
        nxt = step(kernel, s, z, rng)
        if m.memory.update_rule != "noop":
            nxt = replace(nxt, memory=update_memory(m.memory, s.memory, z, k))
        observations.append(z)
        regimes.append(k)
        losses.append(loss)
        contexts.append(c)
        states.append(nxt)
        s = nxt

    lyap = tuple(float(v(x)) for x in states) if v is not None else ()
    log.debug("simulate kernel=%s horizon=%d seed=%d mean_loss=%.6g", kernel.name, horizon, seed,
              float(np.mean(losses)))
    return Trajectory(seed, tuple(states), tuple(observations), tuple(regimes), tuple(losses), lyap,
                      tuple(contexts))


def trajectory_rows(traj: Trajectory) -> list[dict]:
    """One row per time index t = 0..horizon; t = 0 has no regime or loss."""
    rows = []
    for i, s in enumerate(traj.states):
        rows.append({
            "t": i,
            "state_repr": s.label(),
            "hypothesis_id": s.hypothesis_id,
            "regime": traj.regimes[i - 1] if i > 0 else "",
            "loss": repr(traj.losses[i - 1]) if i > 0 else "",
            "lyapunov_value": repr(traj.lyapunov_values[i]) if traj.lyapunov_values else "",
        })
    return rows


def write_trajectory_csv(traj: Trajectory, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(trajectory_rows(traj))
    return path


def empirical_risk(traj: Trajectory) -> float:
    """(1/n) sum of per-step losses."""
    if not traj.losses:
        raise ValueError("empirical risk of an empty trajectory")
    return float(np.mean(traj.losses))


def empirical_risk_posterior(trajs: Sequence[Trajectory], weights: Mapping[str, float]) -> float:
    """
    E_{h~Q}[R_hat(h)]: per-hypothesis mean risk over the trajectories started
    at that hypothesis, averaged under the posterior weights.
    """
    if abs(sum(weights.values()) - 1.0) > 1e-12 or any(w < 0 for w in weights.values()):
        raise ValueError("posterior weights must form a distribution")
    by_h: dict[str, list[float]] = {}
    for traj in trajs:
        by_h.setdefault(traj.states[0].hypothesis_id, []).append(empirical_risk(traj))
    total = 0.0
    for h, w in sorted(weights.items()):
        if w == 0:
            continue
        if h not in by_h:
            raise ValueError(f"posterior puts mass on {h!r} but no trajectory starts there")
        total += w * float(np.mean(by_h[h]))
    return total
