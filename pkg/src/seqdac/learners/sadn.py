"""Sequential advantage decomposition learner.

Agent ``k`` owns a network over ``[state, onehot(a_0..a_{k-1})]`` that scores
its own actions. The global advantage is the plain sum of the per-agent
advantages and is regressed onto the one-step TD error of a separate state
value network, so every agent net receives its gradient from the same shared
residual in a single backward pass.

Agents ``1..n-1`` emit max-centred advantages: ``A_k = raw_k - max raw_k``
for every predecessor prefix. This is the advantage of a greedy successor
policy, so the sum over agents is maximised exactly by choosing each agent's
argmax in turn. Agent 0 keeps a free offset, which lets the sum reach any TD
error.
"""

from __future__ import annotations

import logging

import numpy as np

from ..mmdp import Batch
from ..nn import Adam, Mlp, pack_nets
from .base import Learner

log = logging.getLogger(__name__)


class SadnLearner(Learner):
    kind = "sadn"

    def __init__(self, state_dim, action_sizes, config=None, rng=None, order=None):
        super().__init__(state_dim, action_sizes, config, rng, order)
        h = self.config.hidden_dim
        dims = [(self.input_dim(k), self.sizes[k]) for k in range(self.n_agents)]
        self.adv_params, self.advantage_nets = pack_nets(dims, h, self.rng)
        self.value_net = Mlp(self.state_dim, 1, h, rng=self.rng)
        self.target_value_net = self.value_net.copy()
        self.adv_opt = Adam(self.adv_params, self.config.lr, self.config.grad_clip)
        self.value_opt = Adam(self.value_net.params, self.config.lr, self.config.grad_clip)
        self._adv_grad = np.zeros_like(self.adv_params)
        bounds = np.cumsum([0] + [n.size for n in self.advantage_nets])
        self._adv_grad_views = [
            self._adv_grad[bounds[k] : bounds[k + 1]] for k in range(self.n_agents)
        ]

    # -- evaluation ----------------------------------------------------------------

    def advantages(self, k: int, x: np.ndarray) -> np.ndarray:
        raw = self.advantage_nets[k](x)
        if k == 0:
            return raw
        return raw - raw.max(axis=-1, keepdims=True)

    scores = advantages

    def value(self, state: np.ndarray) -> float:
        return float(self.value_net(state)[0])

    def global_advantage(self, state: np.ndarray, joint_action) -> float:
        """Sum of per-agent advantages for an env-ordered joint action."""
        a = self.to_learner_order(np.asarray(joint_action, dtype=np.int64))
        x = self.prefix_inputs(np.asarray(state)[None, :], a[None, :])[0]
        total = 0.0
        for k in range(self.n_agents):
            total += self.advantages(k, x[: self.input_dim(k)])[a[k]]
        return float(total)

    def q_value(self, state: np.ndarray, joint_action) -> float:
        return self.value(state) + self.global_advantage(state, joint_action)

    # -- learning ------------------------------------------------------------------

    def bootstrap_targets(self, batch: Batch) -> np.ndarray:
        v_next = self.target_value_net(batch.next_states)[:, 0]
        return batch.rewards + self.config.gamma * (1.0 - batch.dones) * v_next

    def td_target(self, batch: Batch) -> np.ndarray:
        """Per-transition TD error ``r + γ V_target(s')(1-done) - V(s)``."""
        return self.bootstrap_targets(batch) - self.value_net(batch.states)[:, 0]

    def update(self, batch: Batch):
        """One advantage step and one value step; returns ``(advantage_loss, value_loss)``.

        Returns ``None`` and leaves all parameters untouched when the targets
        or losses are not finite.
        """
        b = len(batch)
        rows = np.arange(b)
        y = self.bootstrap_targets(batch)
        v = self.value_net(batch.states)[:, 0]
        delta = y - v
        if not self._finite(delta):
            log.warning("non-finite TD error, batch skipped")
            return None

        actions = self.to_learner_order(batch.actions)
        x = self.prefix_inputs(batch.states, actions)
        raws = []
        total = np.zeros(b)
        for k in range(self.n_agents):
            raw = self.advantage_nets[k](x[:, : self.input_dim(k)])
            raws.append(raw)
            adv = raw if k == 0 else raw - raw.max(axis=1, keepdims=True)
            total += adv[rows, actions[:, k]]
        err = total - delta
        adv_loss = float(np.mean(err * err))
        v_err = v - y
        value_loss = float(np.mean(v_err * v_err))
        if not self._finite(adv_loss, value_loss):
            log.warning("non-finite loss, update aborted")
            return None

        g = 2.0 * err / b
        for k in range(self.n_agents):
            grad_out = np.zeros_like(raws[k])
            grad_out[rows, actions[:, k]] = g
            if k > 0:
                grad_out[rows, raws[k].argmax(axis=1)] -= g
            self.advantage_nets[k].backward(
                x[:, : self.input_dim(k)], grad_out, out=self._adv_grad_views[k]
            )
        v_grad = self.value_net.backward(batch.states, (2.0 * v_err / b)[:, None])
        if not self._finite(self._adv_grad, v_grad):
            log.warning("non-finite gradient, update aborted")
            return None
        self.adv_opt.step(self._adv_grad)
        self.value_opt.step(v_grad)
        self._after_update()
        return adv_loss, value_loss

    def refresh_targets(self) -> None:
        self.target_value_net.load_from(self.value_net)

    def networks(self) -> dict[str, Mlp]:
        nets = {f"advantage_{k}": net for k, net in enumerate(self.advantage_nets)}
        nets["value"] = self.value_net
        nets["target_value"] = self.target_value_net
        return nets
