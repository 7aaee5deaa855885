"""Closed-form average-age formulas for the three stopping schemes.

Every operation returns an :class:`AgeResult` whose ``breakdown`` sums to
``total``, so each additive term of the underlying formula stays auditable.
Exact formulas use true harmonic partial sums; the logarithmic substitute
``H_n ~ log n + gamma`` appears only inside operations flagged
``kind="approximate"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .delay_models import harmonic, harmonic2, order_stat_moments, partial_order_mean_sum

__all__ = [
    "AgeResult",
    "age_wait_for_all_general",
    "age_wait_for_all",
    "age_earliest_k",
    "age_earliest_k_approx",
    "age_preselected_k",
    "age_preselected_k_process",
    "age_preselected_k_approx",
    "optimal_alpha",
    "optimal_k_closed_form",
    "optimal_k_exact",
]

_SCHEMES = ("wait_for_all", "earliest_k", "preselected_k")
_KINDS = ("exact", "approximate")


@dataclass(frozen=True)
class AgeResult:
    """An average-age value with its additive breakdown and provenance.

    ``total`` always equals the sum of ``breakdown`` values; ``kind`` says
    whether the number came from an exact formula or a large-n
    approximation; ``params`` records the inputs that produced it.
    """

    total: float
    breakdown: Mapping[str, float]
    kind: str
    scheme: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"scheme must be one of {_SCHEMES}, got {self.scheme!r}")
        total = math.fsum(self.breakdown.values())
        if not math.isclose(self.total, total, rel_tol=1e-10, abs_tol=1e-12):
            raise ValueError(
                f"total {self.total} does not match breakdown sum {total}"
            )
        if not self.total > 0:
            raise ValueError(f"average age must be positive, got {self.total}")
        shift = self.params.get("shift")
        if shift is not None and shift > 0 and self.total < shift:
            raise ValueError(
                f"average age {self.total} below the delay lower bound {shift}"
            )


def _result(scheme: str, kind: str, params: dict, breakdown: dict) -> AgeResult:
    return AgeResult(
        total=math.fsum(breakdown.values()),
        breakdown=breakdown,
        kind=kind,
        scheme=scheme,
        params=params,
    )


def _check_rate_shift(rate: float, shift: float) -> None:
    if not (math.isfinite(rate) and rate > 0):
        raise ValueError(f"rate must be finite and > 0, got {rate}")
    if not (math.isfinite(shift) and shift >= 0):
        raise ValueError(f"shift must be finite and >= 0, got {shift}")


def _check_kn(k: int, n: int) -> None:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= n, got k={k}, n={n}")


def age_wait_for_all_general(
    mean_delay: float, interval_mean: float, interval_second_moment: float
) -> AgeResult:
    """Average age when the sender waits for every node, for ANY delay law.

    ``mean_delay`` is E[X] of one link; ``interval_mean`` and
    ``interval_second_moment`` are the first two moments of the round
    duration (the maximum of the n delays).  The age is
    ``E[X] + E[Y^2] / (2 E[Y])``, valid for any delay distribution under
    the zero-wait protocol with instantaneous acknowledgements.
    """
    if not mean_delay > 0:
        raise ValueError(f"mean_delay must be > 0, got {mean_delay}")
    if not interval_mean > 0:
        raise ValueError(f"interval_mean must be > 0, got {interval_mean}")
    if interval_second_moment < interval_mean * interval_mean * (1.0 - 1e-12):
        raise ValueError(
            "interval_second_moment must be >= interval_mean**2 "
            f"(got {interval_second_moment} < {interval_mean ** 2})"
        )
    variance = max(interval_second_moment - interval_mean * interval_mean, 0.0)
    return _result(
        scheme="wait_for_all",
        kind="exact",
        params={
            "mean_delay": mean_delay,
            "interval_mean": interval_mean,
            "interval_second_moment": interval_second_moment,
        },
        breakdown={
            "delta1": mean_delay,
            "interval_term": interval_mean / 2.0,
            "variance_ratio_term": variance / (2.0 * interval_mean),
        },
    )


def age_wait_for_all(rate: float, shift: float, n: int) -> AgeResult:
    """Exact average age of the wait-for-all scheme on shifted-exponential links.

    Evaluates ``3c/2 + 1/rate + H_n/(2 rate) + H2_n/(2 rate^2 c + 2 rate H_n)``
    with true harmonic sums (c is the shift).
    """
    _check_rate_shift(rate, shift)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    hn = harmonic(n)
    h2n = harmonic2(n)
    return _result(
        scheme="wait_for_all",
        kind="exact",
        params={"lambda": rate, "shift": shift, "n": n},
        breakdown={
            "shift_term": 1.5 * shift,
            "rate_term": 1.0 / rate,
            "harmonic_term": hn / (2.0 * rate),
            "variance_ratio_term": h2n / (2.0 * rate * rate * shift + 2.0 * rate * hn),
        },
    )


def age_earliest_k(rate: float, shift: float, n: int, k: int) -> AgeResult:
    """Exact average age when the sender stops at the earliest k of n acks.

    Three additive terms: the mean delay of a successfully delivered
    update (average of the k smallest order-statistic means), the
    inter-delivery interval term ``(2n-k)/(2k) * E[X_{k:n}]``, and the
    variance ratio ``Var[X_{k:n}] / (2 E[X_{k:n}])``.
    """
    _check_rate_shift(rate, shift)
    _check_kn(k, n)
    delta1 = partial_order_mean_sum(rate, shift, k, n) / k
    kn = order_stat_moments(rate, shift, k, n)
    return _result(
        scheme="earliest_k",
        kind="exact",
        params={"lambda": rate, "shift": shift, "n": n, "k": k},
        breakdown={
            "delta1": delta1,
            "interval_term": (2.0 * n - k) / (2.0 * k) * kn.mean,
            "variance_ratio_term": kn.variance / (2.0 * kn.mean),
        },
    )


def age_earliest_k_approx(rate: float, shift: float, alpha: float) -> AgeResult:
    """Large-n approximation of the earliest-k age at threshold ratio ``alpha = k/n``.

    ``1/rate - log(1 - alpha)/(2 rate) + shift/alpha + shift/2``.  Tight
    only for alpha < 1; the logarithm diverges as alpha -> 1.
    """
    _check_rate_shift(rate, shift)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie strictly in (0, 1), got {alpha}")
    return _result(
        scheme="earliest_k",
        kind="approximate",
        params={"lambda": rate, "shift": shift, "alpha": alpha},
        breakdown={
            "rate_term": 1.0 / rate,
            "log_term": -math.log1p(-alpha) / (2.0 * rate),
            "shift_over_alpha_term": shift / alpha,
            "half_shift_term": shift / 2.0,
        },
    )


def age_preselected_k(rate: float, shift: float, n: int, k: int) -> AgeResult:
    """Exact average age when the sender waits on a pre-selected group of k nodes.

    The delivered-update delay mixes the group case (plain E[X]) with the
    bystander case (mean of the k smallest of k+1 delays); the interval
    term uses the group's maximum ``X_{k:k}`` scaled by
    ``(2n - k + nk) / (2(k + nk))``, which comes from the per-node delivery
    probability ``k/n + ((n-k)/n) * k/(k+1)``.
    """
    _check_rate_shift(rate, shift)
    _check_kn(k, n)
    mean_delay = shift + 1.0 / rate
    bystander_sum = partial_order_mean_sum(rate, shift, k, k + 1)
    delta1 = (k / n) * mean_delay + ((n - k) / (k * n)) * bystander_sum
    kk = order_stat_moments(rate, shift, k, k)
    coeff = (2.0 * n - k + n * k) / (2.0 * (k + n * k))
    return _result(
        scheme="preselected_k",
        kind="exact",
        params={"lambda": rate, "shift": shift, "n": n, "k": k},
        breakdown={
            "delta1": delta1,
            "interval_term": coeff * kk.mean,
            "variance_ratio_term": kk.variance / (2.0 * kk.mean),
        },
    )


def age_preselected_k_process(rate: float, shift: float, n: int, k: int) -> AgeResult:
    """Exact renewal analysis of the simulated pre-selected delivery process.

    :func:`age_preselected_k` treats the round duration as independent of
    one node's delivery outcome and mixes the delivered-delay cases with
    unconditional group-membership weights.  Neither holds for the actual
    process: a bystander is delivered exactly when the group maximum
    exceeds its own delay, which ties the round length to the outcome.
    Conditioning on the outcome, the round duration is distributed as

    * ``X_{k:k}``     when the node is in the group (always delivered),
    * ``X_{k+1:k+1}`` when a bystander beats the group maximum,
    * ``X_{k:k+1}``   when a bystander misses the update,

    and the failure count between deliveries is geometric with success
    probability ``k/n + ((n-k)/n) k/(k+1)``.  The resulting average age is
    what simulation converges to; it coincides with
    :func:`age_preselected_k` at k = n and exceeds it nowhere.
    """
    _check_rate_shift(rate, shift)
    _check_kn(k, n)
    p = k / n
    a = k / (k + 1.0)
    p_any = p + (1.0 - p) * a
    w_group = p / p_any
    w_bystander = (1.0 - p) * a / p_any
    delta1 = (
        w_group * (shift + 1.0 / rate)
        + w_bystander * partial_order_mean_sum(rate, shift, k, k + 1) / k
    )
    group_max = order_stat_moments(rate, shift, k, k)
    overall_max = order_stat_moments(rate, shift, k + 1, k + 1)
    runner_up = order_stat_moments(rate, shift, k, k + 1)
    mean_delivery_round = w_group * group_max.mean + w_bystander * overall_max.mean
    second_delivery_round = (
        w_group * group_max.second_moment + w_bystander * overall_max.second_moment
    )
    q = 1.0 - p_any
    mean_failures = q / p_any
    second_failures = q * (1.0 + q) / (p_any * p_any)
    mean_failure_sum = mean_failures * runner_up.mean
    second_failure_sum = (
        mean_failures * runner_up.variance + second_failures * runner_up.mean**2
    )
    mean_gap = mean_delivery_round + mean_failure_sum
    second_gap = (
        second_delivery_round
        + 2.0 * mean_delivery_round * mean_failure_sum
        + second_failure_sum
    )
    return _result(
        scheme="preselected_k",
        kind="exact",
        params={"lambda": rate, "shift": shift, "n": n, "k": k},
        breakdown={
            "delta1": delta1,
            "interval_term": mean_gap / 2.0,
            "variance_ratio_term": (second_gap - mean_gap * mean_gap) / (2.0 * mean_gap),
        },
    )


def age_preselected_k_approx(rate: float, shift: float, n: int, k: int) -> AgeResult:
    """Approximate pre-selected-k age that drops the variance-ratio term.

    ``shift + 1/rate + ((n-k)/(rate k n)) (H_{k+1} - 1)
    + ((2n - k + nk)/(2(k + nk))) (shift + H_k/rate)``.
    Loose for small n; quantify against :func:`age_preselected_k`.
    """
    _check_rate_shift(rate, shift)
    _check_kn(k, n)
    delta1 = (
        shift
        + 1.0 / rate
        + ((n - k) / (rate * k * n)) * (harmonic(k + 1) - 1.0)
    )
    coeff = (2.0 * n - k + n * k) / (2.0 * (k + n * k))
    return _result(
        scheme="preselected_k",
        kind="approximate",
        params={"lambda": rate, "shift": shift, "n": n, "k": k},
        breakdown={
            "delta1": delta1,
            "interval_term": coeff * (shift + harmonic(k) / rate),
        },
    )


def optimal_alpha(rate: float, shift: float) -> float:
    """Age-minimizing threshold ratio ``sqrt(r^2 c^2 + 2 r c) - r c`` in [0, 1).

    Depends only on the product ``rate * shift``.  Evaluated in the
    cancellation-free form ``2x / (sqrt(x^2 + 2x) + x)`` for x > 0.
    """
    _check_rate_shift(rate, shift)
    x = rate * shift
    if x == 0.0:
        return 0.0
    return 2.0 * x / (math.sqrt(x * x + 2.0 * x) + x)


def optimal_k_closed_form(rate: float, shift: float, n: int) -> int:
    """Nearest-integer threshold ``round(alpha* n)`` clamped to [1, n]."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    k = int(math.floor(optimal_alpha(rate, shift) * n + 0.5))
    return min(max(k, 1), n)


def optimal_k_exact(rate: float, shift: float, n: int) -> tuple[int, AgeResult]:
    """Exhaustive age-minimizing threshold over k = 1..n (smallest k on ties)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    best_k, best = 1, age_earliest_k(rate, shift, n, 1)
    for k in range(2, n + 1):
        candidate = age_earliest_k(rate, shift, n, k)
        if candidate.total < best.total:
            best_k, best = k, candidate
    return best_k, best
