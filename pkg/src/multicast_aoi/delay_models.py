"""Link-delay distributions, seeded sampling, and shifted-exponential order statistics.

The multicast model assumes every source-to-node link draws an i.i.d.
delay per update.  Two delay families are supported:

* :class:`ShiftedExponential` -- exponential of rate ``lam`` translated
  right by a constant ``shift`` (``shift = 0`` is the plain exponential).
  Order-statistic moments have closed forms in harmonic numbers.
* :class:`HyperExponential` -- a finite mixture of exponentials.  No
  closed-form order statistics are provided; estimates come from
  :func:`order_stat_mc_oracle`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Union

import numpy as np

__all__ = [
    "EULER_GAMMA",
    "RandomStream",
    "ShiftedExponential",
    "HyperExponential",
    "DelayModel",
    "sample_delay",
    "sample_delay_matrix",
    "model_mean",
    "model_variance",
    "harmonic",
    "harmonic2",
    "OrderStatMoments",
    "order_stat_moments",
    "partial_order_mean_sum",
    "McOrderStat",
    "order_stat_mc_oracle",
]

#: Euler-Mascheroni constant, used only inside explicitly approximate formulas.
EULER_GAMMA = 0.5772156649015329

_MAX_SEED = 2**64


@dataclass(frozen=True, eq=True)
class RandomStream:
    """A reproducible, independently seeded random source.

    The same ``(seed, stream_index)`` pair always yields the identical
    sample sequence; distinct stream indices yield statistically
    independent sequences.  Each instance owns its own generator state,
    so separate instances may be used concurrently.
    """

    seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < _MAX_SEED:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if int(self.stream_index) < 0:
            raise ValueError(f"stream_index must be >= 0, got {self.stream_index}")
        ss = np.random.SeedSequence(
            entropy=int(self.seed), spawn_key=(int(self.stream_index),)
        )
        object.__setattr__(self, "_generator", np.random.Generator(np.random.PCG64(ss)))

    @property
    def generator(self) -> np.random.Generator:
        return self._generator  # type: ignore[attr-defined]

    def open_closed_uniform(self, size=None):
        """Uniform draw on (0, 1], suitable for ``-log(u)`` transforms."""
        return 1.0 - self.generator.random(size)


@dataclass(frozen=True)
class ShiftedExponential:
    """Exponential(rate) delay translated right by ``shift`` >= 0.

    CDF: ``1 - exp(-rate * (x - shift))`` for ``x >= shift``.
    """

    rate: float
    shift: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise ValueError(f"rate must be finite and > 0, got {self.rate}")
        if not (math.isfinite(self.shift) and self.shift >= 0):
            raise ValueError(f"shift must be finite and >= 0, got {self.shift}")

    def mean(self) -> float:
        return self.shift + 1.0 / self.rate

    def variance(self) -> float:
        return 1.0 / (self.rate * self.rate)

    def min_delay(self) -> float:
        """Lower bound of the support."""
        return self.shift

    def sample(self, stream: RandomStream, size=None):
        # Inverse CDF on u in (0, 1]: shift - log(u)/rate; u is never 0 so
        # the draw is always finite and >= shift.
        u = stream.generator.random(size)
        return self.shift - np.log1p(-u) / self.rate

    def label(self) -> str:
        return f"shifted_exp(rate={self.rate:g},shift={self.shift:g})"


@dataclass(frozen=True)
class HyperExponential:
    """Mixture of exponentials: component i has rate ``rates[i]``, weight ``weights[i]``."""

    rates: tuple
    weights: tuple

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "weights", weights)
        if len(rates) != len(weights) or len(rates) < 1:
            raise ValueError("rates and weights must have equal length >= 1")
        if any(not (math.isfinite(r) and r > 0) for r in rates):
            raise ValueError(f"all rates must be finite and > 0, got {rates}")
        if any(not (math.isfinite(w) and w >= 0) for w in weights):
            raise ValueError(f"all weights must be finite and >= 0, got {weights}")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 within 1e-12, got {weights}")
        object.__setattr__(self, "_cum_weights", np.cumsum(weights))
        object.__setattr__(self, "_rates_arr", np.asarray(rates))

    def mean(self) -> float:
        return math.fsum(w / r for w, r in zip(self.weights, self.rates))

    def variance(self) -> float:
        second = math.fsum(2.0 * w / (r * r) for w, r in zip(self.weights, self.rates))
        m = self.mean()
        return second - m * m

    def min_delay(self) -> float:
        return 0.0

    def sample(self, stream: RandomStream, size=None):
        gen = stream.generator
        u_comp = gen.random(size)
        comp = np.searchsorted(self._cum_weights, u_comp, side="right")  # type: ignore[attr-defined]
        comp = np.minimum(comp, len(self.rates) - 1)
        u_val = gen.random(size)
        return -np.log1p(-u_val) / self._rates_arr[comp]  # type: ignore[attr-defined]

    def label(self) -> str:
        r = "|".join(f"{x:g}" for x in self.rates)
        w = "|".join(f"{x:g}" for x in self.weights)
        return f"hyperexp(rates={r},weights={w})"


DelayModel = Union[ShiftedExponential, HyperExponential]


def sample_delay(model: DelayModel, stream: RandomStream) -> float:
    """Draw one link delay."""
    return float(model.sample(stream))


def sample_delay_matrix(model: DelayModel, rounds: int, n: int, stream: RandomStream) -> np.ndarray:
    """Draw a ``(rounds, n)`` matrix of i.i.d. link delays."""
    if rounds < 1 or n < 1:
        raise ValueError(f"rounds and n must be >= 1, got {rounds}, {n}")
    return model.sample(stream, (rounds, n))


def model_mean(model: DelayModel) -> float:
    return model.mean()


def model_variance(model: DelayModel) -> float:
    return model.variance()


@lru_cache(maxsize=None)
def harmonic(n: int) -> float:
    """Partial sum ``H_n = sum_{j=1..n} 1/j``, exactly compensated; ``H_0 = 0``."""
    n = int(n)
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return math.fsum(1.0 / j for j in range(1, n + 1))


@lru_cache(maxsize=None)
def harmonic2(n: int) -> float:
    """Second-order partial sum ``sum_{j=1..n} 1/j^2`` (limit pi^2/6); zero at n=0."""
    n = int(n)
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return math.fsum(1.0 / (j * j) for j in range(1, n + 1))


class OrderStatMoments(NamedTuple):
    """Closed-form moments of the k-th smallest of n i.i.d. shifted exponentials."""

    mean: float
    variance: float
    second_moment: float
    k: int
    n: int


def _check_kn(k: int, n: int) -> None:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= n, got k={k}, n={n}")


def order_stat_moments(rate: float, shift: float, k: int, n: int) -> OrderStatMoments:
    """Mean, variance, and second moment of the k-th order statistic.

    For i.i.d. ShiftedExponential(rate, shift) delays:

    * mean     = shift + (H_n - H_{n-k}) / rate
    * variance = (H2_n - H2_{n-k}) / rate^2
    * second moment = shift^2 + 2 shift (H_n - H_{n-k}) / rate
      + ((H_n - H_{n-k})^2 + H2_n - H2_{n-k}) / rate^2

    where H and H2 are the first- and second-order harmonic partial sums.
    """
    if not rate > 0:
        raise ValueError(f"rate must be > 0, got {rate}")
    if shift < 0:
        raise ValueError(f"shift must be >= 0, got {shift}")
    _check_kn(k, n)
    hd = harmonic(n) - harmonic(n - k)
    h2d = harmonic2(n) - harmonic2(n - k)
    mean = shift + hd / rate
    variance = h2d / (rate * rate)
    second = (
        shift * shift
        + 2.0 * shift * hd / rate
        + (hd * hd + h2d) / (rate * rate)
    )
    return OrderStatMoments(mean=mean, variance=variance, second_moment=second, k=k, n=n)


def partial_order_mean_sum(rate: float, shift: float, k: int, n: int) -> float:
    """Sum of the k smallest order-statistic means, in closed form.

    ``sum_{i=1..k} E[X_{i:n}] = k (shift + 1/rate) - ((n-k)/rate) (H_n - H_{n-k})``,
    a consequence of the series identity ``sum_{i=1..k} H_i = (k+1)(H_{k+1} - 1)``.
    """
    if not rate > 0:
        raise ValueError(f"rate must be > 0, got {rate}")
    if shift < 0:
        raise ValueError(f"shift must be >= 0, got {shift}")
    _check_kn(k, n)
    return k * (shift + 1.0 / rate) - ((n - k) / rate) * (harmonic(n) - harmonic(n - k))


class McOrderStat(NamedTuple):
    """Monte Carlo estimate of one order statistic's moments.

    ``stderr`` is the standard error of ``mean``; ``variance_stderr`` is the
    standard error of ``variance`` (from the fourth central moment), so both
    estimates carry a usable confidence band.
    """

    mean: float
    variance: float
    stderr: float
    variance_stderr: float


def order_stat_mc_oracle(
    model: DelayModel, k: int, n: int, samples: int, stream: RandomStream
) -> McOrderStat:
    """Brute-force estimate of the k-th order statistic's moments.

    Draws ``samples`` batches of n i.i.d. delays, extracts the k-th
    smallest of each batch, and returns its empirical mean and variance
    with standard errors.  Works for any delay model; this is the
    independent check for the closed forms.
    """
    _check_kn(k, n)
    if samples < 1_000:
        raise ValueError(f"samples must be >= 1000, got {samples}")
    draws = model.sample(stream, (samples, n))
    if n == 1:
        kth = draws[:, 0]
    else:
        kth = np.partition(draws, k - 1, axis=1)[:, k - 1]
    m = float(samples)
    mean = float(kth.mean())
    variance = float(kth.var(ddof=1))
    stderr = math.sqrt(variance / m)
    central4 = float(np.mean((kth - mean) ** 4))
    var_of_var = (central4 - variance * variance * (m - 3.0) / (m - 1.0)) / m
    return McOrderStat(
        mean=mean,
        variance=variance,
        stderr=stderr,
        variance_stderr=math.sqrt(max(var_of_var, 0.0)),
    )
