"""Versioned little-endian binary checkpoint of a trained agent.

Layout (all integers unsigned unless noted, all reals float64)::

    magic            8 bytes   b"EVODDPG\\0"
    version          u32       1
    env name         u32 length + UTF-8 bytes
    eval seed        i64
    hyperparams      6 x f64   gamma, polyak, actor_lr, critic_lr, random_eps, noise_eps
    action_l2        f64
    network count    u32       4: actor, critic, actor_target, critic_target
    per network:
        n_sizes      u32
        layer sizes  n_sizes x u32
        hidden act   u8        0 relu, 1 tanh
        output act   u8        0 identity, 1 tanh
        n_params     u64
        parameters   n_params x f64 (per layer: weights row-major, then biases)
    normalizer count u32       2: observation, goal
    per normalizer:
        size         u32
        count, clip_range, eps   3 x f64
        sum          size x f64
        sum_sq       size x f64

Optimizer moments and the replay buffer are not stored.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .agent import Agent, Hyperparams, Normalizer
from .nn import AdamState, Mlp, mlp_init

MAGIC = b"EVODDPG\0"
VERSION = 1
_HIDDEN = ("relu", "tanh")
_OUTPUT = ("identity", "tanh")
_NETS = ("actor", "critic", "actor_target", "critic_target")


@dataclass
class CheckpointMeta:
    env_name: str
    eval_seed: int
    version: int = VERSION


def _pack(fmt, *values):
    return struct.pack("<" + fmt, *values)


def _write_net(buf, net: Mlp):
    buf.write(_pack("I", len(net.layer_sizes)))
    buf.write(_pack(f"{len(net.layer_sizes)}I", *net.layer_sizes))
    buf.write(_pack("BB", _HIDDEN.index(net.hidden_activation), _OUTPUT.index(net.output_activation)))
    flat = net.get_flat()
    buf.write(_pack("Q", flat.size))
    buf.write(flat.astype("<f8").tobytes())


def _write_norm(buf, norm: Normalizer):
    buf.write(_pack("I", norm.size))
    buf.write(_pack("3d", norm.count, norm.clip_range, norm.eps))
    buf.write(norm.sum.astype("<f8").tobytes())
    buf.write(norm.sum_sq.astype("<f8").tobytes())


def checkpoint_bytes(agent: Agent, env_name: str, eval_seed: int) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(_pack("I", VERSION))
    name = env_name.encode("utf-8")
    buf.write(_pack("I", len(name)) + name)
    buf.write(_pack("q", int(eval_seed)))
    buf.write(_pack("6d", *agent.hp.as_vector()))
    buf.write(_pack("d", agent.action_l2))
    buf.write(_pack("I", len(_NETS)))
    for attr in _NETS:
        _write_net(buf, getattr(agent, attr))
    buf.write(_pack("I", 2))
    _write_norm(buf, agent.o_norm)
    _write_norm(buf, agent.g_norm)
    return buf.getvalue()


def save_checkpoint(path, agent: Agent, env_name: str, eval_seed: int) -> Path:
    path = Path(path)
    path.write_bytes(checkpoint_bytes(agent, env_name, eval_seed))
    return path


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise ValueError("checkpoint is truncated")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        fmt = "<" + fmt
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def doubles(self, n):
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(np.float64)


def _read_net(r: _Reader) -> Mlp:
    (n_sizes,) = r.unpack("I")
    sizes = list(r.unpack(f"{n_sizes}I"))
    hidden, output = r.unpack("BB")
    (n_params,) = r.unpack("Q")
    net = mlp_init(sizes, _HIDDEN[hidden], _OUTPUT[output], seed=0)
    if n_params != net.n_params:
        raise ValueError("checkpoint parameter count does not match its layer sizes")
    net.set_flat(r.doubles(n_params))
    net.version = 0
    return net


def _read_norm(r: _Reader) -> Normalizer:
    (size,) = r.unpack("I")
    count, clip_range, eps = r.unpack("3d")
    return Normalizer(size, clip_range, eps, count, r.doubles(size), r.doubles(size))


def load_checkpoint(path):
    """Return ``(agent, meta)`` rebuilt from a checkpoint file."""
    r = _Reader(Path(path).read_bytes())
    if r.take(len(MAGIC)) != MAGIC:
        raise ValueError(f"{path}: not an evoddpg checkpoint")
    (version,) = r.unpack("I")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    (name_len,) = r.unpack("I")
    env_name = r.take(name_len).decode("utf-8")
    (eval_seed,) = r.unpack("q")
    hp = Hyperparams.from_vector(r.unpack("6d"))
    (action_l2,) = r.unpack("d")
    (n_nets,) = r.unpack("I")
    nets = [_read_net(r) for _ in range(n_nets)]
    (n_norms,) = r.unpack("I")
    norms = [_read_norm(r) for _ in range(n_norms)]
    actor, critic = nets[0], nets[1]
    obs_dim, goal_dim = norms[0].size, norms[1].size
    agent = Agent(obs_dim, goal_dim, actor.layer_sizes[-1], hp,
                  hidden=tuple(actor.layer_sizes[1:-1]), action_l2=action_l2,
                  clip_range=norms[0].clip_range)
    for attr, net in zip(_NETS, nets):
        setattr(agent, attr, net)
    agent.o_norm, agent.g_norm = norms
    agent.actor_opt = AdamState.for_net(actor)
    agent.critic_opt = AdamState.for_net(critic)
    return agent, CheckpointMeta(env_name, eval_seed, version)
