"""Scenario sweeps and the simulation-vs-theory validation grid.

Each sweep point is an independent simulation seeded deterministically
from the sweep seed and the point's position, so tables are byte-stable
across runs and independent of execution order.  Rows are sorted by
(scheme, model, n, k) before emission.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .analytics import (
    age_earliest_k,
    age_earliest_k_approx,
    age_preselected_k_approx,
    age_preselected_k_process,
    age_wait_for_all,
    optimal_k_closed_form,
)
from .delay_models import DelayModel, HyperExponential, ShiftedExponential
from .simulator import EarliestK, PreSelectedK, SimConfig, WaitForAll, replicate

__all__ = [
    "DEFAULT_SEED",
    "SweepSpec",
    "SweepRow",
    "run_sweep",
    "run_fig4",
    "run_fig5",
    "run_fig6",
    "ValidationCell",
    "ValidationReport",
    "run_validation",
    "write_rows_csv",
    "rows_to_json",
    "CSV_COLUMNS",
]

DEFAULT_SEED = 123456789

_SWEEP_SCHEMES = ("wait_for_all", "earliest_k", "preselected_k")

CSV_COLUMNS = (
    "scheme",
    "model",
    "lambda",
    "shift",
    "n",
    "k",
    "sim_age",
    "sim_stderr",
    "exact_age",
    "approx_age",
    "kstar_flag",
)


@dataclass(frozen=True)
class SweepSpec:
    """One parameter sweep: vary k at fixed n, or vary n with k chosen optimally."""

    variable: str
    values: tuple
    schemes: tuple
    models: tuple
    rounds: int
    seed: int
    n: Optional[int] = None
    warmup: int = 1000
    replications: int = 1

    def __post_init__(self):
        if self.variable not in ("k", "n"):
            raise ValueError(f"variable must be 'k' or 'n', got {self.variable!r}")
        values = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if not values:
            raise ValueError("values must be nonempty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError(f"values must be strictly increasing, got {values}")
        if values[0] < 1:
            raise ValueError(f"values must be >= 1, got {values}")
        if self.variable == "k":
            if self.n is None:
                raise ValueError("a k-sweep needs a fixed n")
            if values[-1] > self.n:
                raise ValueError(f"k values must stay within [1, n={self.n}], got {values}")
        unknown = [s for s in self.schemes if s not in _SWEEP_SCHEMES]
        if unknown:
            raise ValueError(f"unknown schemes {unknown}; valid: {_SWEEP_SCHEMES}")
        if self.variable == "n" and any(
            not isinstance(m, ShiftedExponential) for m in self.models
        ):
            raise ValueError("an n-sweep picks k in closed form and needs shifted-exponential models")
        if self.rounds < 100:
            raise ValueError(f"rounds must be >= 100, got {self.rounds}")


@dataclass(frozen=True)
class SweepRow:
    """One sweep point: simulated age plus analytic columns when defined."""

    scheme: str
    model: str
    lam: Optional[float]
    shift: Optional[float]
    n: int
    k: int
    sim_age: float
    sim_stderr: float
    exact_age: Optional[float]
    approx_age: Optional[float]
    kstar_flag: bool


def _policy_for(scheme: str, k: int):
    if scheme == "wait_for_all":
        return WaitForAll()
    if scheme == "earliest_k":
        return EarliestK(k)
    return PreSelectedK(k)


def _exact_age(scheme: str, rate: float, shift: float, n: int, k: int) -> float:
    # The pre-selected column uses the renewal analysis of the simulated
    # process; the classical closed form for that scheme is biased at k < n.
    if scheme == "wait_for_all":
        return age_wait_for_all(rate, shift, n).total
    if scheme == "earliest_k":
        return age_earliest_k(rate, shift, n, k).total
    return age_preselected_k_process(rate, shift, n, k).total


def _approx_age(scheme: str, rate: float, shift: float, n: int, k: int) -> Optional[float]:
    if scheme == "earliest_k" and k < n:
        return age_earliest_k_approx(rate, shift, k / n).total
    if scheme == "preselected_k":
        return age_preselected_k_approx(rate, shift, n, k).total
    return None


def _point_seed(seed: int, index: int) -> int:
    return (seed + 1009 * (index + 1)) % 2**64


def run_sweep(spec: SweepSpec) -> list[SweepRow]:
    """Simulate every sweep point and attach analytic columns where defined."""
    points = []
    for model in spec.models:
        for scheme in spec.schemes:
            for value in spec.values:
                if spec.variable == "k":
                    n, k = spec.n, value
                else:
                    n = value
                    k = optimal_k_closed_form(model.rate, model.shift, n)
                points.append((model, scheme, n, k))

    rows = []
    for index, (model, scheme, n, k) in enumerate(points):
        config = SimConfig(
            n=n,
            policy=_policy_for(scheme, k),
            model=model,
            updates=spec.rounds,
            warmup=spec.warmup,
            seed=_point_seed(spec.seed, index),
            replications=spec.replications,
        )
        sim = replicate(config)
        if isinstance(model, ShiftedExponential):
            lam, shift = model.rate, model.shift
            exact = _exact_age(scheme, lam, shift, n, k)
            approx = _approx_age(scheme, lam, shift, n, k)
            kstar = k == optimal_k_closed_form(lam, shift, n)
        else:
            lam = shift = exact = approx = None
            kstar = False
        rows.append(
            SweepRow(
                scheme=scheme,
                model=model.label(),
                lam=lam,
                shift=shift,
                n=n,
                k=k,
                sim_age=sim.grand_mean,
                sim_stderr=sim.std_error,
                exact_age=exact,
                approx_age=approx,
                kstar_flag=kstar,
            )
        )
    rows.sort(key=lambda r: (r.scheme, r.model, r.n, r.k))
    return rows


def _k_values(n: int, step: int, extra: Sequence[int] = ()) -> tuple:
    values = set(range(1, n + 1, step)) | {1, n} | set(extra)
    return tuple(sorted(values))


def run_fig4(
    k_step: int = 5,
    rounds: int = 100_000,
    warmup: int = 1000,
    replications: int = 1,
    seed: int = DEFAULT_SEED,
) -> list[SweepRow]:
    """Earliest-k threshold sweep at n=100 for exponential vs hyper-exponential delay.

    Both models share mean 0.5: exponential rate 2, and a two-component
    mixture with rates (1, 6) and weights (0.4, 0.6).  Approximate ages
    are attached for the exponential rows.
    """
    spec = SweepSpec(
        variable="k",
        values=_k_values(100, k_step),
        schemes=("earliest_k",),
        models=(
            ShiftedExponential(2.0, 0.0),
            HyperExponential((1.0, 6.0), (0.4, 0.6)),
        ),
        rounds=rounds,
        seed=seed,
        n=100,
        warmup=warmup,
        replications=replications,
    )
    return run_sweep(spec)


def run_fig5(
    k_step: int = 5,
    rounds: int = 100_000,
    warmup: int = 1000,
    replications: int = 1,
    seed: int = DEFAULT_SEED,
    rates: Sequence[float] = (0.5, 1.0, 2.0),
    shift: float = 1.0,
) -> list[SweepRow]:
    """Earliest-k vs pre-selected-k sweep at n=100, shift 1, several rates.

    Each rate's sweep always includes its closed-form optimum k*, and
    that row carries ``kstar_flag``.
    """
    rows = []
    for index, rate in enumerate(rates):
        kstar = optimal_k_closed_form(rate, shift, 100)
        spec = SweepSpec(
            variable="k",
            values=_k_values(100, k_step, extra=(kstar,)),
            schemes=("earliest_k", "preselected_k"),
            models=(ShiftedExponential(rate, shift),),
            rounds=rounds,
            seed=(seed + 10**6 * index) % 2**64,
            n=100,
            warmup=warmup,
            replications=replications,
        )
        rows.extend(run_sweep(spec))
    rows.sort(key=lambda r: (r.scheme, r.model, r.n, r.k))
    return rows


def run_fig6(
    n_values: Sequence[int] = tuple(range(1, 201)),
    rounds: int = 1_000_000,
    warmup: int = 1000,
    replications: int = 4,
    seed: int = DEFAULT_SEED,
    rate: float = 1.0,
    shift: float = 1.0,
) -> list[SweepRow]:
    """Minimum average age versus network size, stopping at the closed-form k*."""
    spec = SweepSpec(
        variable="n",
        values=tuple(n_values),
        schemes=("earliest_k",),
        models=(ShiftedExponential(rate, shift),),
        rounds=rounds,
        seed=seed,
        warmup=warmup,
        replications=replications,
    )
    return run_sweep(spec)


@dataclass(frozen=True)
class ValidationCell:
    scheme: str
    lam: float
    shift: float
    n: int
    k: int
    sim_age: float
    sim_stderr: float
    exact_age: float
    z: float
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    cells: tuple
    z_threshold: float

    @property
    def passed(self) -> bool:
        return all(cell.passed for cell in self.cells)

    def lines(self) -> list[str]:
        out = []
        for c in self.cells:
            status = "pass" if c.passed else "FAIL"
            out.append(
                f"{status}  {c.scheme:<14} lambda={c.lam:g} shift={c.shift:g} "
                f"n={c.n:<3} k={c.k:<3} sim={c.sim_age:.6f} "
                f"exact={c.exact_age:.6f} z={c.z:.2f}"
            )
        n_fail = sum(not c.passed for c in self.cells)
        out.append(
            f"{len(self.cells)} cells, {n_fail} failures "
            f"(|z| threshold {self.z_threshold:g})"
        )
        return out


def run_validation(
    rounds: int = 100_000,
    seed: int = DEFAULT_SEED,
    warmup: int = 1000,
    z_threshold: float = 4.0,
    exact_age_fn: Optional[Callable[[str, float, float, int, int], float]] = None,
    ks: Optional[Sequence[int]] = None,
) -> ValidationReport:
    """Run the full oracle-agreement grid and score each cell by z.

    Grid: all three schemes, (rate, shift) in {(1,0),(1,1),(2,0),(2,1)},
    n in {1,2,5,10}, k in {1, ceil(n/2), n}.  A cell passes when the
    simulated grand mean lies within ``z_threshold`` standard errors of
    the exact formula.  ``exact_age_fn`` can replace the analytic side,
    which lets the harness itself be mutation-tested.
    """
    exact_fn = exact_age_fn or _exact_age
    cells = []
    index = 0
    for lam, shift in ((1.0, 0.0), (1.0, 1.0), (2.0, 0.0), (2.0, 1.0)):
        for n in (1, 2, 5, 10):
            k_list = tuple(sorted({1, math.ceil(n / 2), n})) if ks is None else tuple(
                sorted({k for k in ks if 1 <= k <= n})
            )
            for scheme in ("wait_for_all", "earliest_k", "preselected_k"):
                # wait_for_all ignores k; run it once per (lam, shift, n).
                k_cells = (n,) if scheme == "wait_for_all" else k_list
                for k in k_cells:
                    config = SimConfig(
                        n=n,
                        policy=_policy_for(scheme, k),
                        model=ShiftedExponential(lam, shift),
                        updates=rounds,
                        warmup=warmup,
                        seed=_point_seed(seed, index),
                    )
                    index += 1
                    sim = replicate(config)
                    exact = exact_fn(scheme, lam, shift, n, k)
                    if sim.std_error > 0 and math.isfinite(sim.std_error):
                        z = abs(sim.grand_mean - exact) / sim.std_error
                    else:
                        z = math.inf
                    cells.append(
                        ValidationCell(
                            scheme=scheme,
                            lam=lam,
                            shift=shift,
                            n=n,
                            k=k,
                            sim_age=sim.grand_mean,
                            sim_stderr=sim.std_error,
                            exact_age=exact,
                            z=z,
                            passed=z <= z_threshold,
                        )
                    )
    return ValidationReport(cells=tuple(cells), z_threshold=z_threshold)


def _cell_text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows_csv(rows: Sequence[SweepRow], target) -> None:
    """Write sweep rows to a path or text file object using the standard schema."""
    own = isinstance(target, (str, bytes)) or hasattr(target, "__fspath__")
    fh = open(target, "w", newline="") if own else target
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    r.scheme,
                    r.model,
                    _cell_text(r.lam),
                    _cell_text(r.shift),
                    r.n,
                    r.k,
                    _cell_text(r.sim_age),
                    _cell_text(r.sim_stderr),
                    _cell_text(r.exact_age),
                    _cell_text(r.approx_age),
                    _cell_text(r.kstar_flag),
                ]
            )
    finally:
        if own:
            fh.close()


def rows_to_csv_text(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    write_rows_csv(rows, buf)
    return buf.getvalue()


def rows_to_json(rows: Sequence[SweepRow]) -> str:
    """JSON mirror of the CSV table (missing values become null)."""
    payload = [
        {
            "scheme": r.scheme,
            "model": r.model,
            "lambda": r.lam,
            "shift": r.shift,
            "n": r.n,
            "k": r.k,
            "sim_age": r.sim_age,
            "sim_stderr": r.sim_stderr,
            "exact_age": r.exact_age,
            "approx_age": r.approx_age,
            "kstar_flag": r.kstar_flag,
        }
        for r in rows
    ]
    return json.dumps(payload, indent=2, sort_keys=True)
