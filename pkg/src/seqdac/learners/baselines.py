"""Value-based comparison learners: VDN, SAQL and ACE."""

from __future__ import annotations

import logging

import numpy as np

from ..mmdp import Batch
from ..nn import Adam, Mlp, pack_nets
from .base import Learner

log = logging.getLogger(__name__)


class _QLearner(Learner):
    """Per-agent Q networks packed into one buffer, with target copies and one Adam."""

    def __init__(self, state_dim, action_sizes, config=None, rng=None, order=None):
        super().__init__(state_dim, action_sizes, config, rng, order)
        h = self.config.hidden_dim
        dims = [(self.input_dim(k), self.sizes[k]) for k in range(self.n_agents)]
        self.q_params, self.q_nets = pack_nets(dims, h, self.rng)
        bounds = np.cumsum([0] + [n.size for n in self.q_nets])
        slices = [slice(bounds[k], bounds[k + 1]) for k in range(self.n_agents)]
        self.target_params = self.q_params.copy()
        self.target_nets = [
            Mlp(n.input_dim, n.output_dim, h, params=self.target_params[sl])
            for n, sl in zip(self.q_nets, slices)
        ]
        self.opt = Adam(self.q_params, self.config.lr, self.config.grad_clip)
        self._grad = np.zeros_like(self.q_params)
        self._grad_views = [self._grad[sl] for sl in slices]

    def scores(self, k: int, x: np.ndarray) -> np.ndarray:
        return self.q_nets[k](x)

    def refresh_targets(self) -> None:
        np.copyto(self.target_params, self.q_params)

    def networks(self) -> dict[str, Mlp]:
        nets = {f"q_{k}": n for k, n in enumerate(self.q_nets)}
        nets.update({f"target_q_{k}": n for k, n in enumerate(self.target_nets)})
        return nets

    def _inputs(self, states: np.ndarray, actions: np.ndarray) -> list[np.ndarray]:
        if self.sequential:
            x = self.prefix_inputs(states, actions)
            return [x[:, : self.input_dim(k)] for k in range(self.n_agents)]
        return [states] * self.n_agents

    def _regress(self, inputs, actions, targets) -> list[float] | None:
        """Independent squared-error regression of each ``Q_k(x_k, a_k)`` onto ``targets[k]``."""
        b = actions.shape[0]
        rows = np.arange(b)
        losses = []
        grads_out = []
        for k in range(self.n_agents):
            q = self.q_nets[k](inputs[k])
            err = q[rows, actions[:, k]] - targets[k]
            losses.append(float(np.mean(err * err)))
            g = np.zeros_like(q)
            g[rows, actions[:, k]] = 2.0 * err / b
            grads_out.append(g)
        if not self._finite(losses):
            log.warning("non-finite loss, update aborted")
            return None
        for k in range(self.n_agents):
            self.q_nets[k].backward(inputs[k], grads_out[k], out=self._grad_views[k])
        if not self._finite(self._grad):
            log.warning("non-finite gradient, update aborted")
            return None
        self.opt.step(self._grad)
        self._after_update()
        return losses


class VdnLearner(_QLearner):
    """Joint value ``Q(s, a) = Σ_k Q_k(s, a_k)`` with independent per-agent argmax."""

    kind = "vdn"
    sequential = False

    def joint_q(self, state: np.ndarray, joint_action) -> float:
        a = self.to_learner_order(np.asarray(joint_action))
        return float(sum(self.q_nets[k](state)[a[k]] for k in range(self.n_agents)))

    def targets(self, batch: Batch) -> np.ndarray:
        nxt = sum(net(batch.next_states).max(axis=1) for net in self.target_nets)
        return batch.rewards + self.config.gamma * (1.0 - batch.dones) * nxt

    def update(self, batch: Batch):
        y = self.targets(batch)
        if not self._finite(y):
            log.warning("non-finite target, batch skipped")
            return None
        b = len(batch)
        rows = np.arange(b)
        actions = self.to_learner_order(batch.actions)
        qs = [net(batch.states) for net in self.q_nets]
        total = sum(q[rows, actions[:, k]] for k, q in enumerate(qs))
        err = total - y
        loss = float(np.mean(err * err))
        if not self._finite(loss):
            log.warning("non-finite loss, update aborted")
            return None
        g = 2.0 * err / b
        for k, q in enumerate(qs):
            grad_out = np.zeros_like(q)
            grad_out[rows, actions[:, k]] = g
            self.q_nets[k].backward(batch.states, grad_out, out=self._grad_views[k])
        if not self._finite(self._grad):
            log.warning("non-finite gradient, update aborted")
            return None
        self.opt.step(self._grad)
        self._after_update()
        return loss


class SaqlLearner(_QLearner):
    """Independent Q-learning where each agent also sees its predecessors' actions."""

    kind = "saql"

    def targets(self, batch: Batch) -> list[np.ndarray]:
        # predecessors at s' act greedily in order with the online nets
        next_actions = self.greedy_batch(batch.next_states)
        nxt = self._inputs(batch.next_states, next_actions)
        cont = self.config.gamma * (1.0 - batch.dones)
        return [
            batch.rewards + cont * self.target_nets[k](nxt[k]).max(axis=1)
            for k in range(self.n_agents)
        ]

    def update(self, batch: Batch):
        targets = self.targets(batch)
        if not self._finite(*targets):
            log.warning("non-finite target, batch skipped")
            return None
        actions = self.to_learner_order(batch.actions)
        return self._regress(self._inputs(batch.states, actions), actions, targets)


class AceLearner(_QLearner):
    """Chained sequential Q-learning.

    Agent ``k < n-1`` regresses onto the best successor value
    ``max_a Q_{k+1}(s, a_{0..k}, a)``; the last agent regresses onto
    ``r + γ max_a Q_0(s', a)``. All targets come from the target nets,
    computed before any regression in the batch.
    """

    kind = "ace"

    def targets(self, batch: Batch) -> list[np.ndarray]:
        actions = self.to_learner_order(batch.actions)
        inputs = self._inputs(batch.states, actions)
        n = self.n_agents
        out = []
        for k in range(n - 1):
            out.append(self.target_nets[k + 1](inputs[k + 1]).max(axis=1))
        first_next = self.target_nets[0](batch.next_states).max(axis=1)
        out.append(batch.rewards + self.config.gamma * (1.0 - batch.dones) * first_next)
        return out

    def update(self, batch: Batch):
        targets = self.targets(batch)
        if not self._finite(*targets):
            log.warning("non-finite target, batch skipped")
            return None
        actions = self.to_learner_order(batch.actions)
        return self._regress(self._inputs(batch.states, actions), actions, targets)
