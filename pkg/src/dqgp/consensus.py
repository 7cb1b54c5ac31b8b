"""Consensus ADMM on the torus for multi-agent hyperparameter training.

Each round: the coordinator forms the consensus point as the circular mean of
the dual-offset agent parameters, every agent takes a proximal step from the
consensus point using its local loss gradient evaluated there, and duals
accumulate the (wrap-aware) consensus gap. Agents are updated in id order so
runs are deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import torus
from .errors import NumericError, StructureError


@dataclass
class AgentState:
    """One agent: local data, torus parameters, dual variable, Lipschitz bound."""

    agent_id: int
    X: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    psi: np.ndarray
    lipschitz: float

    def __post_init__(self):
        self.theta = torus.project(self.theta)
        self.psi = np.asarray(self.psi, dtype=float)
        if self.psi.shape != self.theta.shape:
            raise StructureError("dual variable and parameters must have equal length")
        if not self.lipschitz > 0:
            raise StructureError(f"Lipschitz constant must be positive, got {self.lipschitz}")


@dataclass
class StepReport:
    """Outcome of one consensus round."""

    z: np.ndarray
    r_pri: float
    r_dual: float
    lyapunov: float
    losses: tuple[float, ...]
    degenerate_mean: bool


@dataclass
class ConsensusTrace:
    """Residual and Lyapunov history across rounds."""

    rho: float
    reports: list[StepReport] = field(default_factory=list)

    def primal(self) -> np.ndarray:
        return np.array([r.r_pri for r in self.reports])

    def dual(self) -> np.ndarray:
        return np.array([r.r_dual for r in self.reports])

    def lyapunov(self) -> np.ndarray:
        return np.array([r.lyapunov for r in self.reports])

    def csv_rows(self) -> list[str]:
        rows = ["s,r_pri,r_dual,lyapunov"]
        for s, r in enumerate(self.reports):
            rows.append(f"{s},{r.r_pri:.10e},{r.r_dual:.10e},{r.lyapunov:.10e}")
        return rows


def init_agents(parts, num_params: int, lipschitz, seed: int) -> tuple[list[AgentState], np.ndarray]:
    """Agents with uniform random torus parameters (per-agent seed = seed + id).

    Returns the agents and the initial consensus point (their circular mean).
    """
    lipschitz = np.broadcast_to(np.asarray(lipschitz, dtype=float), (len(parts),))
    agents = []
    for m, (X_m, y_m) in enumerate(parts):
        rng = np.random.default_rng(seed + m)
        theta0 = rng.uniform(0.0, np.pi, size=num_params)
        agents.append(
            AgentState(m, np.asarray(X_m), np.asarray(y_m), theta0, np.zeros(num_params), lipschitz[m])
        )
    z0 = torus.circular_mean([a.theta for a in agents])
    return agents, z0


def consensus_update(agents, rho: float) -> np.ndarray:
    """Circular mean of the dual-offset parameters ``theta_m + psi_m / rho``."""
    z, degenerate = consensus_update_with_flags(agents, rho)
    return z


def consensus_update_with_flags(agents, rho: float) -> tuple[np.ndarray, bool]:
    phi = [torus.project(a.theta + a.psi / rho) for a in agents]
    z, flags = torus.circular_mean(phi, with_flags=True)
    return z, bool(np.any(flags))


def local_update(agent: AgentState, z, grad, rho: float) -> np.ndarray:
    """Proximal step from the consensus point along the penalized gradient."""
    step = -(np.asarray(grad, dtype=float) + agent.psi) / (rho + agent.lipschitz)
    return torus.retract(z, step)


def dual_update(agent: AgentState, z, theta_new, rho: float) -> np.ndarray:
    """Dual accumulation ``psi + rho * logmap(z, theta_new)`` (wrap-aware)."""
    return agent.psi + rho * torus.logmap(z, theta_new)


def residuals(agents, z, z_prev, rho: float) -> tuple[float, float]:
    """Primal residual norm over agents and the scaled consensus motion.

    The dual residual is reported as ``inf`` before any previous consensus
    point exists.
    """
    r_pri = float(np.sqrt(sum(torus.distance(a.theta, z) ** 2 for a in agents)))
    r_dual = float("inf") if z_prev is None else rho * torus.distance(z, z_prev)
    return r_pri, r_dual


def lyapunov(agents, z, rho: float, losses) -> float:
    """Augmented-Lagrangian-style descent diagnostic at the current state.

    Sums local losses at the consensus point, the dual/gap coupling, the
    quadratic consensus penalty, and a dual regularization term. Tangent-space
    inner products are plain Euclidean dots (duals are not wrapped).
    """
    total = 0.0
    for agent, loss in zip(agents, losses):
        gap = torus.logmap(z, agent.theta)
        total += loss + float(np.dot(agent.psi, gap))
        total += 0.5 * rho * torus.distance(z, agent.theta) ** 2
        total += float(np.dot(agent.psi, agent.psi)) / (2.0 * rho)
    return total


def dr_admm_step(agents, z_prev, rho: float, loss_and_grad) -> StepReport:
    """One full consensus round; mutates agent parameters and duals in place.

    ``loss_and_grad(agent, z) -> (loss, gradient)`` evaluates the agent's
    local objective at the consensus point. Gradient evaluation is
    independent per agent (safe to parallelize); updates are applied in agent
    order.
    """
    sizes = {a.theta.size for a in agents}
    if len(sizes) != 1:
        raise StructureError("agents disagree on parameter dimension")
    z, degenerate = consensus_update_with_flags(agents, rho)
    losses = []
    for agent in agents:
        try:
            loss, grad = loss_and_grad(agent, z)
        except NumericError as err:
            raise NumericError(f"agent {agent.agent_id}: {err}", err.jitter_trail) from err
        agent.theta = local_update(agent, z, grad, rho)
        agent.psi = dual_update(agent, z, agent.theta, rho)
        losses.append(float(loss))
    r_pri, r_dual = residuals(agents, z, z_prev, rho)
    V = lyapunov(agents, z, rho, losses)
    return StepReport(z, r_pri, r_dual, V, tuple(losses), degenerate)


def run(
    agents,
    rho: float,
    loss_and_grad,
    max_iters: int,
    eps_pri: float,
    eps_dual: float,
    z0=None,
) -> tuple[np.ndarray, ConsensusTrace]:
    """Iterate rounds until both residuals pass or the budget runs out."""
    trace = ConsensusTrace(rho)
    z_prev = None if z0 is None else np.asarray(z0, dtype=float)
    z = z_prev
    for _ in range(max_iters):
        report = dr_admm_step(agents, z_prev, rho, loss_and_grad)
        trace.reports.append(report)
        z_prev = z = report.z
        if report.r_pri <= eps_pri and report.r_dual <= eps_dual:
            break
    return z, trace
