"""Discrete maximum-entropy actor-critic with twin critics and exact expectations.

Each decision-maker owns one actor (per-UAV factored categorical policy over
masked candidate slots) and two critics over the joint action. Because the
admissible joint-action set is small at desk scale, both the bootstrap target
and the actor objective are computed as exact sums over the joint distribution
rather than sampled; gradients are analytic and finite-difference checked in
the test suite.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import neural
from .env import Env
from .scenario import LearnParams

JOINT_ACTION_CAP = 20_000


class JointSpaceError(RuntimeError):
    """The admissible joint-action set is too large for exact enumeration."""


# ---------------------------------------------------------------------------
# policy helpers

def policy_distribution(actor: neural.Mlp, obs, masks):
    """Per-UAV masked categorical distributions; masks is (m, k+1) bool."""
    masks = np.asarray(masks, dtype=bool)
    m, width = masks.shape
    logits = actor.forward(obs).reshape(m, width)
    return neural.softmax(logits, masks)


def entropy(probs) -> float:
    p = np.asarray(probs, dtype=float)
    nz = p > 0
    return float(-(p[nz] * np.log(p[nz])).sum())


def joint_actions(masks):
    """All admissible joint actions as tuples; errors out past the size cap."""
    masks = np.asarray(masks, dtype=bool)
    choices = [np.flatnonzero(row) for row in masks]
    size = 1
    for c in choices:
        size *= len(c)
        if size > JOINT_ACTION_CAP:
            raise JointSpaceError(f"joint action space exceeds {JOINT_ACTION_CAP}")
    return list(itertools.product(*choices))


def joint_log_probs(probs, combos):
    """log pi(a) = sum_i log pi_i(a_i) for each combo (probs is (m, k+1))."""
    out = np.empty(len(combos))
    for idx, combo in enumerate(combos):
        out[idx] = sum(np.log(probs[i, a]) for i, a in enumerate(combo))
    return out


def one_hot_joint(combos, m: int, width: int):
    """(n_combos, m*width) one-hot encodings of joint actions."""
    out = np.zeros((len(combos), m * width))
    for idx, combo in enumerate(combos):
        for i, a in enumerate(combo):
            out[idx, i * width + a] = 1.0
    return out


# ---------------------------------------------------------------------------
# agent container and replay

@dataclass
class AgentNets:
    actor: neural.Mlp
    q1: neural.Mlp
    q2: neural.Mlp
    q1_target: neural.Mlp
    q2_target: neural.Mlp
    opt_actor: neural.Adam
    opt_q1: neural.Adam
    opt_q2: neural.Adam
    n_uavs: int
    width: int              # k + 1 actions per UAV


def make_agent(obs_dim: int, n_uavs: int, width: int, hidden=(64, 64),
               rng=None) -> AgentNets:
    rng = rng or np.random.default_rng(0)
    actor = neural.Mlp([obs_dim, *hidden, n_uavs * width], rng=rng)
    q_in = obs_dim + n_uavs * width
    q1 = neural.Mlp([q_in, *hidden, 1], rng=rng)
    q2 = neural.Mlp([q_in, *hidden, 1], rng=rng)
    return AgentNets(
        actor=actor, q1=q1, q2=q2, q1_target=q1.copy(), q2_target=q2.copy(),
        opt_actor=neural.Adam(actor.params()),
        opt_q1=neural.Adam(q1.params()), opt_q2=neural.Adam(q2.params()),
        n_uavs=n_uavs, width=width)


@dataclass
class Transition:
    obs: np.ndarray
    mask: np.ndarray        # (m, width) bool at decision time
    action: tuple
    reward: float
    next_obs: np.ndarray
    next_mask: np.ndarray
    done: bool


@dataclass
class ReplayBuffer:
    capacity: int
    items: list = field(default_factory=list)
    _next: int = 0

    def push(self, tr: Transition):
        if len(self.items) < self.capacity:
            self.items.append(tr)
        else:
            self.items[self._next] = tr
        self._next = (self._next + 1) % self.capacity

    def __len__(self):
        return len(self.items)

    def sample(self, batch_size: int, rng):
        """Uniform without replacement within a batch."""
        if batch_size > len(self.items):
            raise ValueError("batch larger than buffer")
        idx = rng.choice(len(self.items), size=batch_size, replace=False)
        return [self.items[i] for i in idx]


# ---------------------------------------------------------------------------
# updates

def _q_over_combos(net: neural.Mlp, obs, onehots):
    inp = np.concatenate([np.repeat(obs[None, :], len(onehots), axis=0), onehots], axis=1)
    return net.forward(inp)[:, 0]


def bootstrap_target(agent: AgentNets, tr: Transition, learn: LearnParams) -> float:
    """r + gamma * (1-done) * E_{a'~pi}[min target Q - alpha log pi(a')]."""
    if tr.done:
        return tr.reward
    probs = policy_distribution(agent.actor, tr.next_obs, tr.next_mask)
    combos = joint_actions(tr.next_mask)
    logp = joint_log_probs(probs, combos)
    pj = np.exp(logp)
    onehots = one_hot_joint(combos, agent.n_uavs, agent.width)
    q1 = _q_over_combos(agent.q1_target, tr.next_obs, onehots)
    q2 = _q_over_combos(agent.q2_target, tr.next_obs, onehots)
    soft_v = float((pj * (np.minimum(q1, q2) - learn.entropy_alpha * logp)).sum())
    return tr.reward + learn.gamma * soft_v


def critic_update(agent: AgentNets, batch, learn: LearnParams):
    """One MSE step for each critic toward the exact-expectation targets."""
    ys = np.array([bootstrap_target(agent, tr, learn) for tr in batch])
    obs = np.stack([tr.obs for tr in batch])
    acts = one_hot_joint([tr.action for tr in batch], agent.n_uavs, agent.width)
    inp = np.concatenate([obs, acts], axis=1)
    losses = []
    for net, opt in ((agent.q1, agent.opt_q1), (agent.q2, agent.opt_q2)):
        q, cache = net.forward_cached(inp)
        err = q[:, 0] - ys
        losses.append(float(np.mean(err ** 2)))
        upstream = (2.0 * err / len(batch))[:, None]
        grads, _ = net.backward(cache, upstream)
        net.set_params(opt.step(net.params(), neural.flatten_grads(grads),
                                learn.critic_lr))
    return losses


def actor_loss_and_grad(agent: AgentNets, obs, mask, learn: LearnParams):
    """Exact E_pi[alpha log pi - min Q] and its gradient w.r.t. actor logits.

    The per-factor derivative uses d/dpi_i(b) of the joint expectation, which
    collapses to the marginal weight of combos with a_i = b times (f(a)+alpha).
    """
    mask = np.asarray(mask, dtype=bool)
    m, width = mask.shape
    probs = policy_distribution(agent.actor, obs, mask)
    combos = joint_actions(mask)
    logp = joint_log_probs(probs, combos)
    pj = np.exp(logp)
    onehots = one_hot_joint(combos, m, width)
    qmin = np.minimum(_q_over_combos(agent.q1, obs, onehots),
                      _q_over_combos(agent.q2, obs, onehots))
    f = learn.entropy_alpha * logp - qmin
    loss = float((pj * f).sum())

    dlogits = np.zeros((m, width))
    for i in range(m):
        g = np.zeros(width)
        for idx, combo in enumerate(combos):
            b = combo[i]
            partial = pj[idx] / probs[i, b]     # product over the other factors
            g[b] += partial * (f[idx] + learn.entropy_alpha)
        gi = probs[i] * (g - float((probs[i] * g).sum()))
        dlogits[i] = np.where(mask[i], gi, 0.0)
    return loss, dlogits.reshape(-1)


def actor_update(agent: AgentNets, batch, learn: LearnParams) -> float:
    total = 0.0
    upstream = np.zeros((len(batch), agent.n_uavs * agent.width))
    obs = np.stack([tr.obs for tr in batch])
    for i, tr in enumerate(batch):
        loss, dl = actor_loss_and_grad(agent, tr.obs, tr.mask, learn)
        total += loss
        upstream[i] = dl / len(batch)
    _, cache = agent.actor.forward_cached(obs)
    grads, _ = agent.actor.backward(cache, upstream)
    agent.actor.set_params(agent.opt_actor.step(
        agent.actor.params(), neural.flatten_grads(grads), learn.actor_lr))
    return total / len(batch)


def update_targets(agent: AgentNets, learn: LearnParams):
    neural.soft_update(agent.q1_target, agent.q1, learn.tau_soft)
    neural.soft_update(agent.q2_target, agent.q2, learn.tau_soft)


# ---------------------------------------------------------------------------
# acting and episodes

def select_actions(agent: AgentNets, obs, masks, rng=None, greedy=False):
    probs = policy_distribution(agent.actor, obs, masks)
    if greedy:
        return tuple(int(np.argmax(row)) for row in probs)
    return tuple(int(rng.choice(len(row), p=row)) for row in probs)


def _mask_matrix(env: Env, agent_key):
    masks = env.action_mask(agent_key)
    return np.stack([masks[u] for u in env.agent_uavs(agent_key)])


@dataclass
class EpisodeStats:
    returns: dict
    steps: int
    collected: int
    duplicates: int
    critic_losses: list = field(default_factory=list)
    actor_losses: list = field(default_factory=list)


def run_episode(env: Env, agents: dict, buffers: dict | None, rng,
                learn: LearnParams | None = None, train: bool = True,
                greedy: bool = False, update_every: int = 1) -> EpisodeStats:
    """Roll one episode; when train=True, push transitions and update each agent."""
    learn = learn or env.scenario.learn
    env.reset(env.seed if not train else int(rng.integers(2 ** 31)))
    returns = {g: 0.0 for g in env.agents}
    stats = EpisodeStats(returns=returns, steps=0, collected=0, duplicates=0)
    pending = {}
    while not env.done:
        actions = {}
        for g in env.agents:
            obs = env.observe(g)
            mask = _mask_matrix(env, g)
            act = select_actions(agents[g], obs, mask, rng=rng, greedy=greedy)
            actions[g] = list(act)
            pending[g] = (obs, mask, act)
        _, rewards, done = env.step(actions)
        for g in env.agents:
            returns[g] += rewards[g]
            if buffers is not None:
                obs, mask, act = pending[g]
                buffers[g].push(Transition(
                    obs=obs, mask=mask, action=act, reward=rewards[g],
                    next_obs=env.observe(g), next_mask=_mask_matrix(env, g),
                    done=done))
        stats.steps += 1
        if train and buffers is not None and stats.steps % update_every == 0:
            for g in env.agents:
                if len(buffers[g]) >= learn.batch_size:
                    batch = buffers[g].sample(learn.batch_size, rng)
                    stats.critic_losses.append(critic_update(agents[g], batch, learn))
                    stats.actor_losses.append(actor_update(agents[g], batch, learn))
                    update_targets(agents[g], learn)
    stats.collected = sum(1 for t in env.scenario.tasks if t.collected_by is not None)
    stats.duplicates = env.duplicate_collections
    return stats


def make_agents(env: Env, hidden=(64, 64), seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    return {g: make_agent(env.obs_dim(g), len(env.agent_uavs(g)),
                          env.k + 1, hidden=hidden, rng=rng)
            for g in env.agents}


def make_buffers(env: Env) -> dict:
    cap = env.scenario.learn.replay_capacity
    return {g: ReplayBuffer(capacity=cap) for g in env.agents}


def train(env: Env, episodes: int, seed: int = 0, hidden=(64, 64),
          update_every: int = 1, log_fn=None):
    """Full training run; returns (agents, per-episode stats list)."""
    rng = np.random.default_rng(seed)
    agents = make_agents(env, hidden=hidden, seed=seed)
    buffers = make_buffers(env)
    history = []
    for ep in range(episodes):
        stats = run_episode(env, agents, buffers, rng, train=True,
                            update_every=update_every)
        history.append(stats)
        if log_fn:
            log_fn(ep, stats)
    return agents, history


def evaluate(env: Env, agents: dict, seed: int = 0, episodes: int = 1):
    """Greedy-policy rollouts; returns mean stats over episodes."""
    rng = np.random.default_rng(seed)
    out = []
    for ep in range(episodes):
        env.seed = seed + ep
        stats = run_episode(env, agents, None, rng, train=False, greedy=True)
        out.append(stats)
    return out
