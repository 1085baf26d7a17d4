"""Dueling deep Q-network in numpy.

The network is a ReLU trunk feeding a scalar value head and an advantage
head; Q-values are ``V + A - mean(A)``. Gradients are written out by hand
and checked against finite differences in the test suite.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from adaptmoea.env import N_ACTIONS, N_FEATURES
from adaptmoea.errors import DimensionError, PolicyLoadError

log = logging.getLogger(__name__)

TENSORS = ("W1", "b1", "W2", "b2", "Wv", "bv", "Wa", "ba")
FORMAT_VERSION = 1
FEATURE_SCHEMA = 1
MAGIC = "adaptmoea-policy"


@dataclass
class AgentConfig:
    gamma: float = 1.0
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.5  # share of all training steps spent annealing
    lr: float = 1e-3
    batch_size: int = 64
    buffer_capacity: int = 50_000
    target_sync: int = 100  # training steps between hard copies
    hidden: tuple[int, int] = (64, 64)
    warmup: int = 1000  # transitions stored before training starts
    double_q: bool = False

    def __post_init__(self):
        self.hidden = tuple(self.hidden)
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        for e in (self.eps_start, self.eps_end):
            if not 0.0 <= e <= 1.0:
                raise ValueError("epsilon must lie in [0, 1]")

    def epsilon(self, step: int, total_steps: int) -> float:
        span = max(1.0, self.eps_fraction * total_steps)
        frac = min(1.0, step / span)
        return self.eps_start + (self.eps_end - self.eps_start) * frac


# --- network ---------------------------------------------------------------


def init_params(rng, hidden=(64, 64), n_in: int = N_FEATURES, n_out: int = N_ACTIONS) -> dict:
    """He-initialized weights; biases start at zero."""
    h1, h2 = hidden

    def he(fan_in, fan_out):
        return rng.normal(0.0, math.sqrt(2.0 / fan_in), (fan_in, fan_out))

    return {
        "W1": he(n_in, h1), "b1": np.zeros(h1),
        "W2": he(h1, h2), "b2": np.zeros(h2),
        "Wv": he(h2, 1) * 0.1, "bv": np.zeros(1),
        "Wa": he(h2, n_out) * 0.1, "ba": np.zeros(n_out),
    }


def forward(params: dict, S, cache: bool = False):
    """Value, advantages and Q-values for a state or a batch of states.

    Returns:
        ``(V, A, Q)``; with ``cache=True`` a fourth element holds the
        activations needed by :func:`backward`.
    """
    S = np.asarray(S, dtype=float)
    single = S.ndim == 1
    S = np.atleast_2d(S)
    if not np.all(np.isfinite(S)):
        raise ValueError("state contains non-finite values")
    z1 = S @ params["W1"] + params["b1"]
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ params["W2"] + params["b2"]
    h2 = np.maximum(z2, 0.0)
    V = (h2 @ params["Wv"] + params["bv"])[:, 0]
    A = h2 @ params["Wa"] + params["ba"]
    Q = V[:, None] + A - A.mean(axis=1, keepdims=True)
    out = (V, A, Q)
    if single:
        out = (V[0], A[0], Q[0])
    if cache:
        return out + ((S, z1, h1, z2, h2),)
    return out


def backward(params: dict, mem, dQ: np.ndarray) -> dict:
    """Gradients of a scalar loss given ``dQ = dLoss/dQ`` for a batch."""
    S, z1, h1, z2, h2 = mem
    dV = dQ.sum(axis=1)
    dA = dQ - dQ.mean(axis=1, keepdims=True)
    g = {
        "Wv": h2.T @ dV[:, None], "bv": np.array([dV.sum()]),
        "Wa": h2.T @ dA, "ba": dA.sum(axis=0),
    }
    dh2 = dV[:, None] @ params["Wv"].T + dA @ params["Wa"].T
    dz2 = dh2 * (z2 > 0)
    g["W2"] = h1.T @ dz2
    g["b2"] = dz2.sum(axis=0)
    dz1 = (dz2 @ params["W2"].T) * (z1 > 0)
    g["W1"] = S.T @ dz1
    g["b1"] = dz1.sum(axis=0)
    return g


def td_loss(params: dict, S, actions, targets, grads: bool = True):
    """Mean squared TD error over a batch, with gradients."""
    actions = np.asarray(actions, dtype=int)
    targets = np.asarray(targets, dtype=float)
    _, _, Q, mem = forward(params, np.atleast_2d(S), cache=True)
    rows = np.arange(Q.shape[0])
    err = Q[rows, actions] - targets
    loss = float(np.mean(err**2))
    if not grads:
        return loss
    dQ = np.zeros_like(Q)
    dQ[rows, actions] = 2.0 * err / Q.shape[0]
    return loss, backward(params, mem, dQ)


def greedy(q) -> int:
    # np.argmax returns the first maximum, i.e. the lowest index on ties
    return int(np.argmax(q))


def act(params: dict, s, epsilon: float, rng) -> int:
    """Epsilon-greedy action choice."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return greedy(forward(params, s)[2])


def td_targets(batch, target_params: dict, gamma: float, online_params: dict | None = None):
    """Bootstrapped regression targets.

    ``y = r`` for terminal transitions, otherwise ``r + gamma * max Q'``. With
    ``online_params`` the maximizing action comes from the online network
    (double-Q style) while its value comes from the target network.
    """
    r = np.asarray(batch["reward"], dtype=float)
    done = np.asarray(batch["done"], dtype=bool)
    if gamma == 0.0:
        return r.copy()
    q_next = forward(target_params, np.atleast_2d(batch["next_state"]))[2]
    if online_params is None:
        boot = q_next.max(axis=1)
    else:
        pick = forward(online_params, np.atleast_2d(batch["next_state"]))[2].argmax(axis=1)
        boot = q_next[np.arange(q_next.shape[0]), pick]
    return np.where(done, r, r + gamma * boot)


def sync_target(params: dict, target_params: dict) -> None:
    """Hard copy of the online weights into the target network, in place."""
    for k in TENSORS:
        if params[k].shape != target_params[k].shape:
            raise DimensionError(f"{k}: shape {params[k].shape} vs {target_params[k].shape}")
    for k in TENSORS:
        target_params[k][...] = params[k]


def copy_params(params: dict) -> dict:
    return {k: v.copy() for k, v in params.items()}


class Adam:
    def __init__(self, params: dict, lr: float = 1e-3, b1: float = 0.9, b2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def update(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


class ReplayBuffer:
    """Fixed-capacity ring buffer; the oldest transition is overwritten first."""

    def __init__(self, capacity: int, n_features: int = N_FEATURES):
        self.capacity = capacity
        self.state = np.zeros((capacity, n_features))
        self.next_state = np.zeros((capacity, n_features))
        self.action = np.zeros(capacity, dtype=int)
        self.reward = np.zeros(capacity)
        self.done = np.zeros(capacity, dtype=bool)
        self.inserted = 0

    def __len__(self) -> int:
        return min(self.inserted, self.capacity)

    def add(self, s, a, r, s2, done) -> None:
        i = self.inserted % self.capacity
        self.state[i] = s
        self.action[i] = a
        self.reward[i] = r
        self.next_state[i] = s2
        self.done[i] = done
        self.inserted += 1

    def sample(self, n: int, rng) -> dict:
        idx = rng.choice(len(self), size=n, replace=False)
        return {
            "state": self.state[idx], "action": self.action[idx], "reward": self.reward[idx],
            "next_state": self.next_state[idx], "done": self.done[idx],
        }


class DuelingAgent:
    """Online network, frozen target copy, replay buffer and optimizer state."""

    def __init__(self, config: AgentConfig, rng):
        self.config = config
        self.params = init_params(rng, config.hidden)
        self.target = copy_params(self.params)
        self.opt = Adam(self.params, config.lr)
        self.buffer = ReplayBuffer(config.buffer_capacity)
        self.train_steps = 0

    def train_on_batch(self, batch: dict) -> float:
        online = self.params if self.config.double_q else None
        y = td_targets(batch, self.target, self.config.gamma, online)
        loss, grads = td_loss(self.params, batch["state"], batch["action"], y)
        self.opt.update(self.params, grads)
        return loss

    def train_step(self, rng) -> float | None:
        """One minibatch update; ``None`` while the buffer is too small."""
        if len(self.buffer) < self.config.batch_size:
            return None
        loss = self.train_on_batch(self.buffer.sample(self.config.batch_size, rng))
        self.train_steps += 1
        if self.train_steps % self.config.target_sync == 0:
            sync_target(self.params, self.target)
        return loss


class GreedyPolicy:
    """Deterministic policy from trained weights."""

    def __init__(self, params: dict):
        self.params = params

    def __call__(self, state) -> int:
        return greedy(forward(self.params, state)[2])


@dataclass
class CurveRow:
    episode: int
    ret: float
    epsilon: float
    loss_mean: float


def train_agent(env_factory, config: AgentConfig, episodes: int, rng, callback=None):
    """Train a dueling agent by interleaving environment steps and updates.

    Args:
        env_factory: ``f(episode_index) -> env`` with ``reset()``/``step(a)``
            and a ``config.generations`` horizon.
        episodes: number of training episodes.
        rng: numpy Generator driving initialization, exploration, sampling
            and the per-episode optimizer seeds.

    Returns:
        ``(params, curve)`` with the final online weights and one
        :class:`CurveRow` per episode.
    """
    if episodes < 1:
        raise ValueError("train for at least one episode")
    agent = DuelingAgent(config, rng)
    env = env_factory(0)
    total = episodes * env.config.generations
    step = 0
    curve = []
    for ep in range(episodes):
        if ep:
            env = env_factory(ep)
        s = env.reset(int(rng.integers(2**31)))
        ret, losses, done = 0.0, [], False
        eps = config.epsilon(step, total)
        while not done:
            eps = config.epsilon(step, total)
            a = act(agent.params, s, eps, rng)
            s2, r, done = env.step(a)
            agent.buffer.add(s, a, r, s2, done)
            ret += r
            s = s2
            step += 1
            if len(agent.buffer) >= max(config.warmup, config.batch_size):
                losses.append(agent.train_step(rng))
        loss_mean = float(np.mean(losses)) if losses else float("nan")
        row = CurveRow(ep, float(ret), float(eps), loss_mean)
        curve.append(row)
        if callback:
            callback(row)
    return agent.params, curve


def write_curve_csv(curve, path, header_comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(["episode", "return", "epsilon", "loss_mean"])
        for row in curve:
            w.writerow([row.episode, repr(float(row.ret)), repr(float(row.epsilon)),
                        repr(float(row.loss_mean))])


# --- persistence ---------------------------------------------------------------


def dumps_policy(params: dict) -> str:
    lines = [
        MAGIC,
        f"format_version {FORMAT_VERSION}",
        f"feature_schema {FEATURE_SCHEMA}",
        "activation relu",
        f"n_features {params['W1'].shape[0]}",
        f"n_actions {params['Wa'].shape[1]}",
    ]
    for k in TENSORS:
        t = np.asarray(params[k], dtype=float)
        lines.append(f"tensor {k} " + " ".join(str(d) for d in t.shape))
        rows = t if t.ndim == 2 else t[None, :]
        for row in rows:
            lines.append(" ".join(repr(float(v)) for v in row))
    lines.append("end")
    return "\n".join(lines) + "\n"


def save_policy(params: dict, path) -> None:
    Path(path).write_text(dumps_policy(params))


def loads_policy(text: str) -> dict:
    lines = text.splitlines()
    it = iter(enumerate(lines, 1))

    def nxt(what):
        try:
            return next(it)
        except StopIteration:
            raise PolicyLoadError(f"file ends early while reading {what}") from None

    def header(key):
        no, line = nxt(key)
        parts = line.split()
        if len(parts) != 2 or parts[0] != key:
            raise PolicyLoadError(f"line {no}: expected '{key} <value>', got {line!r}")
        return parts[1]

    no, line = nxt("magic")
    if line.strip() != MAGIC:
        raise PolicyLoadError("not a policy file (bad magic line)")
    if int(header("format_version")) != FORMAT_VERSION:
        raise PolicyLoadError(f"unsupported format version; this build reads {FORMAT_VERSION}")
    if int(header("feature_schema")) != FEATURE_SCHEMA:
        raise PolicyLoadError("policy was trained on a different state feature schema")
    if header("activation") != "relu":
        raise PolicyLoadError("only relu networks are supported")
    n_in = int(header("n_features"))
    n_out = int(header("n_actions"))
    if (n_in, n_out) != (N_FEATURES, N_ACTIONS):
        raise PolicyLoadError(f"network maps {n_in} -> {n_out}, expected {N_FEATURES} -> {N_ACTIONS}")
    params = {}
    for k in TENSORS:
        no, line = nxt(k)
        parts = line.split()
        if len(parts) < 3 or parts[:2] != ["tensor", k]:
            raise PolicyLoadError(f"line {no}: expected tensor {k}")
        shape = tuple(int(d) for d in parts[2:])
        n_rows = shape[0] if len(shape) == 2 else 1
        width = shape[-1]
        rows = []
        for _ in range(n_rows):
            no, line = nxt(k)
            try:
                vals = [float(v) for v in line.split()]
            except ValueError:
                raise PolicyLoadError(f"line {no}: non-numeric weight") from None
            if len(vals) != width:
                raise PolicyLoadError(f"line {no}: {k} row has {len(vals)} values, need {width}")
            rows.append(vals)
        params[k] = np.array(rows).reshape(shape)
    no, line = nxt("end marker")
    if line.strip() != "end":
        raise PolicyLoadError(f"line {no}: expected end marker")
    _check_shapes(params)
    return params


def _check_shapes(p: dict) -> None:
    h1 = p["W1"].shape[1]
    h2 = p["W2"].shape[1]
    want = {
        "W1": (N_FEATURES, h1), "b1": (h1,), "W2": (h1, h2), "b2": (h2,),
        "Wv": (h2, 1), "bv": (1,), "Wa": (h2, N_ACTIONS), "ba": (N_ACTIONS,),
    }
    for k, shape in want.items():
        if p[k].shape != shape:
            raise PolicyLoadError(f"{k} has shape {p[k].shape}, expected {shape}")


def load_policy(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise PolicyLoadError(f"cannot read policy {path}: {exc}") from exc
    return loads_policy(text)
