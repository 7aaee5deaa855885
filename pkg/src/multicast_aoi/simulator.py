"""Monte Carlo engine for the multicast sawtooth age process.

One update round: the source samples n link delays, the stopping policy
decides when the round ends (duration Y) and which nodes got the update,
the wall clock advances by Y, and the next update starts immediately
(zero wait).  A delivered node's age drops at its own arrival instant;
between deliveries the age grows at slope one.  Per-node average age is
the accumulated sawtooth area divided by the observed span.

The engine advances whole blocks of rounds with vectorized numpy and is
deterministic given ``(seed, replication index)``.  Scalar building
blocks (:func:`run_round`, :func:`accumulate_delivery`) implement the
same semantics one step at a time and serve as the reference for tests.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .delay_models import DelayModel, RandomStream

__all__ = [
    "WaitForAll",
    "EarliestK",
    "PreSelectedK",
    "StoppingPolicy",
    "SimConfig",
    "NodeAgeState",
    "SimResult",
    "SimulationError",
    "accumulate_delivery",
    "run_round",
    "run_rounds",
    "simulate",
    "replicate",
]

_REGROUP_MODES = ("per_update", "fixed")
_CHUNK_ELEMENTS = 4_000_000
_MAX_BATCHES = 32


class SimulationError(RuntimeError):
    """A simulation could not produce well-defined statistics."""


@dataclass(frozen=True)
class WaitForAll:
    """Stop only when every node has acknowledged the update."""


@dataclass(frozen=True)
class EarliestK:
    """Stop at the k-th acknowledgement, whichever nodes answer first."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class PreSelectedK:
    """Wait on a designated group of k nodes.

    Non-group nodes still receive the update whenever their delay beats
    the group's slowest member.  ``regroup`` controls whether the group is
    redrawn for every update (``per_update``, the analyzed mode) or drawn
    once and kept (``fixed``).
    """

    k: int
    regroup: str = "per_update"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.regroup not in _REGROUP_MODES:
            raise ValueError(
                f"regroup must be one of {_REGROUP_MODES}, got {self.regroup!r}"
            )


StoppingPolicy = Union[WaitForAll, EarliestK, PreSelectedK]


def _policy_threshold(policy: StoppingPolicy, n: int) -> int:
    """Acknowledgement count the policy waits for; validates k <= n."""
    if isinstance(policy, WaitForAll):
        return n
    if policy.k > n:
        raise ValueError(f"policy waits for k={policy.k} acks but only n={n} nodes exist")
    return policy.k


@dataclass
class NodeAgeState:
    """Per-node sawtooth accounting between update deliveries."""

    last_delivery_wall: float = 0.0
    last_gen_timestamp: float = 0.0
    area: float = 0.0
    observed_span: float = 0.0


def accumulate_delivery(state: NodeAgeState, delivery_wall: float, gen_timestamp: float) -> None:
    """Credit one delivery to a node's sawtooth accounting.

    Adds the trapezoid between the previous delivery and this one: with
    gap ``g`` and starting age ``a0`` (the age right after the previous
    delivery), the area grows by ``a0*g + g**2/2``.  The generation
    timestamp may equal the stored one only for the time-zero initial
    update; anything older is rejected as time travel.
    """
    if delivery_wall < state.last_delivery_wall:
        raise ValueError(
            f"delivery_wall {delivery_wall} precedes previous delivery "
            f"{state.last_delivery_wall}"
        )
    if gen_timestamp < state.last_gen_timestamp:
        raise ValueError(
            f"gen_timestamp {gen_timestamp} is staler than the held update "
            f"{state.last_gen_timestamp}"
        )
    if delivery_wall < gen_timestamp:
        raise ValueError(
            f"delivery_wall {delivery_wall} precedes generation {gen_timestamp}"
        )
    g = delivery_wall - state.last_delivery_wall
    a0 = state.last_delivery_wall - state.last_gen_timestamp
    state.area += a0 * g + 0.5 * g * g
    state.observed_span += g
    state.last_delivery_wall = delivery_wall
    state.last_gen_timestamp = gen_timestamp


def run_rounds(
    policy: StoppingPolicy,
    delays: np.ndarray,
    group_stream: Optional[RandomStream] = None,
    groups: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Resolve many update rounds at once.

    ``delays`` has shape (rounds, n).  Returns ``(y, delivered)`` where
    ``y[j]`` is round j's duration and ``delivered[j]`` is the boolean
    delivery mask.  Ties are broken toward the lowest node index.  For a
    pre-selected policy, ``groups`` may fix the group (shape (k,) or
    (rounds, k)); otherwise per-update groups are drawn from
    ``group_stream``.
    """
    delays = np.asarray(delays, dtype=float)
    if delays.ndim != 2:
        raise ValueError(f"delays must be a (rounds, n) matrix, got shape {delays.shape}")
    if np.any(delays < 0):
        raise ValueError("delays must be nonnegative")
    rounds, n = delays.shape
    k = _policy_threshold(policy, n)

    if isinstance(policy, PreSelectedK) and k < n:
        if groups is None:
            if group_stream is None:
                raise ValueError("pre-selected policy needs a group_stream or explicit groups")
            base = np.tile(np.arange(n), (rounds, 1))
            groups = group_stream.generator.permuted(base, axis=1)[:, :k]
        else:
            groups = np.asarray(groups)
            if groups.ndim == 1:
                groups = np.broadcast_to(groups[None, :], (rounds, groups.shape[0]))
            if groups.shape != (rounds, k):
                raise ValueError(
                    f"groups must have shape ({rounds}, {k}), got {groups.shape}"
                )
        y = np.take_along_axis(delays, groups, axis=1).max(axis=1)
        delivered = delays <= y[:, None]
        return y, delivered

    if isinstance(policy, EarliestK) and k < n:
        # Stable sort: equal delays rank by lowest node index.
        order = np.argsort(delays, axis=1, kind="stable")
        y = np.take_along_axis(delays, order[:, k - 1 : k], axis=1)[:, 0]
        delivered = np.zeros_like(delays, dtype=bool)
        np.put_along_axis(delivered, order[:, :k], True, axis=1)
        return y, delivered

    # Wait-for-all, or any policy with k == n.
    y = delays.max(axis=1)
    delivered = np.ones_like(delays, dtype=bool)
    return y, delivered


def run_round(
    policy: StoppingPolicy,
    delays,
    group_stream: Optional[RandomStream] = None,
    group=None,
) -> tuple[float, frozenset]:
    """Resolve a single update round; returns ``(y, delivered node indices)``."""
    row = np.atleast_2d(np.asarray(delays, dtype=float))
    groups = None if group is None else np.asarray(group)
    y, delivered = run_rounds(policy, row, group_stream=group_stream, groups=groups)
    return float(y[0]), frozenset(int(i) for i in np.flatnonzero(delivered[0]))


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulation run."""

    n: int
    policy: StoppingPolicy
    model: DelayModel
    updates: int
    seed: int
    warmup: int = 1000
    replications: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.updates < 1:
            raise ValueError(f"updates must be >= 1, got {self.updates}")
        if self.warmup < 0:
            raise ValueError(f"warmup must be >= 0, got {self.warmup}")
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        _policy_threshold(self.policy, self.n)


@dataclass(frozen=True)
class SimResult:
    """Outcome of a simulation: per-node averages plus run bookkeeping.

    ``std_error`` comes from batch means for a single run and from the
    spread of replication grand means when aggregated.
    """

    per_node_avg_age: np.ndarray
    grand_mean: float
    std_error: float
    virtual_time: float
    rounds: int
    delivery_fraction: np.ndarray


def _accumulate_block(
    t_prev: np.ndarray,
    delays: np.ndarray,
    delivered: np.ndarray,
    last_wall: np.ndarray,
    last_gen: np.ndarray,
    area: np.ndarray,
    span: np.ndarray,
    count: np.ndarray,
) -> None:
    """Vectorized equivalent of accumulate_delivery over a block of rounds."""
    n = delays.shape[1]
    for i in range(n):
        idx = np.flatnonzero(delivered[:, i])
        if idx.size == 0:
            continue
        walls = t_prev[idx] + delays[idx, i]
        gens = t_prev[idx]
        g = np.diff(walls, prepend=last_wall[i])
        # Age right after each prior delivery; for in-block deliveries that
        # is simply the delivered update's own delay.
        a0 = np.concatenate(([last_wall[i] - last_gen[i]], delays[idx[:-1], i]))
        area[i] += float(np.sum(a0 * g + 0.5 * g * g))
        span[i] += float(walls[-1] - last_wall[i])
        count[i] += idx.size
        last_wall[i] = walls[-1]
        last_gen[i] = gens[-1]


def _write_trace_rows(writer, start_round, t_prev, y, delays, delivered, last_gen_before):
    cand = np.where(delivered, t_prev[:, None], -np.inf)
    gen_after = np.maximum.accumulate(cand, axis=0)
    gen_after = np.maximum(gen_after, last_gen_before[None, :])
    t_after = t_prev + y
    ages = t_after[:, None] - gen_after
    for r in range(delays.shape[0]):
        who = ";".join(str(i) for i in np.flatnonzero(delivered[r]))
        writer.writerow([start_round + r, repr(float(y[r])), who]
                        + [repr(float(a)) for a in ages[r]])


def _simulate_single(config: SimConfig, replication: int, trace_writer=None) -> SimResult:
    if config.updates < 100:
        raise ValueError(
            f"at least 100 measured updates are needed to report statistics, "
            f"got {config.updates}"
        )
    n = config.n
    policy = config.policy
    model = config.model
    delay_stream = RandomStream(config.seed, 2 * replication)
    group_stream = RandomStream(config.seed, 2 * replication + 1)

    fixed_group = None
    if (
        isinstance(policy, PreSelectedK)
        and policy.regroup == "fixed"
        and policy.k < n
    ):
        fixed_group = group_stream.generator.permuted(np.arange(n))[: policy.k]

    last_wall = np.zeros(n)
    last_gen = np.zeros(n)
    area = np.zeros(n)
    span = np.zeros(n)
    count = np.zeros(n, dtype=np.int64)
    t = 0.0
    round_index = 0
    chunk_rounds = max(1, _CHUNK_ELEMENTS // n)

    def consume(rounds: int) -> float:
        nonlocal t, round_index
        elapsed = 0.0
        done = 0
        while done < rounds:
            r = min(chunk_rounds, rounds - done)
            delays = model.sample(delay_stream, (r, n))
            y, delivered = run_rounds(
                policy, delays, group_stream=group_stream, groups=fixed_group
            )
            cs = np.cumsum(y)
            t_prev = t + np.concatenate(([0.0], cs[:-1]))
            if trace_writer is not None:
                gen_before = last_gen.copy()
            _accumulate_block(t_prev, delays, delivered, last_wall, last_gen, area, span, count)
            if trace_writer is not None:
                _write_trace_rows(trace_writer, round_index, t_prev, y, delays, delivered, gen_before)
            t += float(cs[-1])
            elapsed += float(cs[-1])
            round_index += r
            done += r
        return elapsed

    if config.warmup:
        consume(config.warmup)
        area[:] = 0.0
        span[:] = 0.0
        count[:] = 0

    batches = max(1, min(_MAX_BATCHES, config.updates // 50))
    base, extra = divmod(config.updates, batches)
    batch_means = []
    virtual_time = 0.0
    for b in range(batches):
        a0, s0 = float(area.sum()), float(span.sum())
        virtual_time += consume(base + (1 if b < extra else 0))
        da, ds = float(area.sum()) - a0, float(span.sum()) - s0
        if ds > 0.0:
            batch_means.append(da / ds)

    starved = np.flatnonzero((count == 0) | (span <= 0.0))
    if starved.size:
        raise SimulationError(
            f"nodes {starved.tolist()} received no update after warmup; "
            f"average age is undefined (try more rounds)"
        )

    per_node = area / span
    if len(batch_means) >= 2:
        std_error = float(np.std(batch_means, ddof=1) / math.sqrt(len(batch_means)))
    else:
        std_error = float("nan")
    return SimResult(
        per_node_avg_age=per_node,
        grand_mean=float(per_node.mean()),
        std_error=std_error,
        virtual_time=virtual_time,
        rounds=config.updates,
        delivery_fraction=count / config.updates,
    )


def simulate(config: SimConfig, trace_path=None) -> SimResult:
    """Run one simulation (replication index 0), deterministically per seed.

    ``trace_path`` enables a per-round debug CSV (round, duration,
    delivered indices, per-node age after the round); intended for small
    runs only.
    """
    if trace_path is None:
        return _simulate_single(config, 0)
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["round", "y", "delivered"] + [f"age_node_{i}" for i in range(config.n)])
        return _simulate_single(config, 0, trace_writer=writer)


def replicate(config: SimConfig) -> SimResult:
    """Aggregate ``config.replications`` independently seeded simulations.

    Replication r draws from its own stream pair, so results merge
    deterministically by replication index regardless of execution order.
    With a single replication this is exactly :func:`simulate`.
    """
    results = [_simulate_single(config, rep) for rep in range(config.replications)]
    if len(results) == 1:
        return results[0]
    per_node = np.mean([r.per_node_avg_age for r in results], axis=0)
    grand_means = [r.grand_mean for r in results]
    std_error = float(np.std(grand_means, ddof=1) / math.sqrt(len(grand_means)))
    return SimResult(
        per_node_avg_age=per_node,
        grand_mean=float(per_node.mean()),
        std_error=std_error,
        virtual_time=float(math.fsum(r.virtual_time for r in results)),
        rounds=sum(r.rounds for r in results),
        delivery_fraction=np.mean([r.delivery_fraction for r in results], axis=0),
    )
