"""Monte Carlo harness: error-rate estimation, phase-transition sweeps, and
escape/supermartingale diagnostics.

Every replicate gets its own seed derived from (master seed, stream tag,
q index, replicate index) through a SplitMix64 chain, so results are
bit-identical for any worker count or scheduling.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import multiprocessing
from dataclasses import dataclass

import numpy as np

from .broadcast import majority_estimator, simulate_broadcast
from .models import ModelParams, ParamError
from .urn import classify_regime, critical_q
from .walk import (
    StoppingConfig,
    beta_value,
    detect_stopping_times,
    m2_value,
    rho_value,
    run_walk,
    stopping_bounds,
    y_series,
    z_alpha,
    z_limit_value,
)

__all__ = [
    "ExperimentConfig",
    "RmajEstimate",
    "EscapeStats",
    "SupermartingaleBin",
    "SupermartingaleReport",
    "EventAStats",
    "derive_seed",
    "wilson_interval",
    "estimate_rmaj",
    "sweep",
    "sweep_rows",
    "write_sweep_csv",
    "escape_event_frequency",
    "supermartingale_diagnostic",
    "event_a_frequency",
    "diagnostics_rows",
    "write_diagnostics_csv",
]

_U64 = (1 << 64) - 1

# stream tags keep the per-function substreams disjoint
_STREAM_RMAJ = 0
_STREAM_ESCAPE = 1
_STREAM_SUPERMART = 2
_STREAM_EVENT_A = 3

_Z95 = 1.959963984540054


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _U64
    z = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _U64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _U64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, *indices: int) -> int:
    """SplitMix64 chain over (master, i0, i1, ...); stable across releases
    so external tooling can reproduce any single replicate."""
    x = master_seed & _U64
    for idx in indices:
        x = _splitmix64(x ^ (idx & _U64))
    return _splitmix64(x)


def wilson_interval(
    successes: int, total: int, z: float = _Z95
) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (default 95%)."""
    if total <= 0:
        raise ParamError("total must be positive")
    if not 0 <= successes <= total:
        raise ParamError("successes must lie in [0, total]")
    phat = successes / total
    z2 = z * z
    denom = 1.0 + z2 / total
    center = (phat + z2 / (2.0 * total)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / total + z2 / (4.0 * total * total)) / denom
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == total else min(1.0, center + half)
    return low, high


@dataclass(frozen=True)
class ExperimentConfig:
    """One harness run: a q-grid, a horizon, budgets and a master seed.

    ``trajectory_replicates`` is the (smaller) budget for diagnostics that
    must record full trajectories.  ``a_override``/``b_override`` replace
    the derived boundary constants; that is the only way to run boundary
    diagnostics at q = 0, where the derived upper constant diverges.
    """

    params: ModelParams
    q_grid: tuple[float, ...]
    n_vertices: int
    replicates: int
    seed: int
    gamma: float = 0.25
    c_tilde: float | None = None
    trajectory_replicates: int = 1000
    workers: int = 1
    a_override: float | None = None
    b_override: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "q_grid", tuple(float(q) for q in self.q_grid))
        if self.replicates < 1:
            raise ParamError("replicates must be >= 1")
        if self.n_vertices < 1:
            raise ParamError("n_vertices must be >= 1")
        for q in self.q_grid:
            if not 0.0 <= q <= 1.0:
                raise ParamError(f"q grid entry {q} outside [0, 1]")


@dataclass(frozen=True)
class RmajEstimate:
    """Estimated majority-error rate at one grid point.

    Ties are resolved by a fair coin inside each replicate, so
    ``errors_observed`` is a plain Bernoulli tally and the Wilson interval
    applies directly; ``ties`` is kept as a diagnostic.
    """

    q: float
    n_vertices: int
    replicates: int
    errors_observed: int
    ties: int
    estimate: float
    ci_low: float
    ci_high: float

    @property
    def half_ties(self) -> float:
        return 0.5 * self.ties


def _rmaj_chunk(task) -> tuple[int, int]:
    params, q, q_index, n_vertices, seed, lo, hi = task
    errors = 0
    ties = 0
    for r in range(lo, hi):
        rng = np.random.default_rng(derive_seed(seed, _STREAM_RMAJ, q_index, r))
        d1 = run_walk(params, q, n_vertices, rng).final.d1
        if d1 == 0:
            ties += 1
        if majority_estimator(d1, rng) != 1:
            errors += 1
    return errors, ties


def _chunk_ranges(total: int, workers: int) -> list[tuple[int, int]]:
    if workers <= 1:
        return [(0, total)]
    n_chunks = min(total, workers * 4)
    step = (total + n_chunks - 1) // n_chunks
    return [(lo, min(lo + step, total)) for lo in range(0, total, step)]


def _map_tasks(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with multiprocessing.Pool(workers) as pool:
        return pool.map(fn, tasks)


def estimate_rmaj(config: ExperimentConfig) -> list[RmajEstimate]:
    """Monte Carlo estimate of the majority-error rate per grid point."""
    out = []
    for qi, q in enumerate(config.q_grid):
        tasks = [
            (config.params, q, qi, config.n_vertices, config.seed, lo, hi)
            for lo, hi in _chunk_ranges(config.replicates, config.workers)
        ]
        parts = _map_tasks(_rmaj_chunk, tasks, config.workers)
        errors = sum(p[0] for p in parts)
        ties = sum(p[1] for p in parts)
        low, high = wilson_interval(errors, config.replicates)
        out.append(
            RmajEstimate(
                q=q,
                n_vertices=config.n_vertices,
                replicates=config.replicates,
                errors_observed=errors,
                ties=ties,
                estimate=errors / config.replicates,
                ci_low=low,
                ci_high=high,
            )
        )
    return out


SWEEP_COLUMNS = (
    "family",
    "alpha",
    "q",
    "N",
    "replicates",
    "estimate",
    "ci_low",
    "ci_high",
    "f_alpha",
    "regime",
)


def sweep_rows(config: ExperimentConfig) -> list[dict]:
    params = config.params
    f_alpha = critical_q(params)
    rows = []
    for est in estimate_rmaj(config):
        rows.append(
            {
                "family": params.label,
                "alpha": params.alpha,
                "q": est.q,
                "N": est.n_vertices,
                "replicates": est.replicates,
                "estimate": est.estimate,
                "ci_low": est.ci_low,
                "ci_high": est.ci_high,
                "f_alpha": f_alpha,
                "regime": classify_regime(params, est.q).value,
            }
        )
    return rows


def _write_csv(rows: list[dict], columns: tuple[str, ...], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row[k]) for k in columns})


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value


def write_sweep_csv(rows: list[dict], path) -> None:
    _write_csv(rows, SWEEP_COLUMNS, path)


def sweep(config: ExperimentConfig, out_csv=None) -> list[dict]:
    """Full sweep over the q grid; optionally written as CSV.

    Deterministic: same config and seed give byte-identical CSV for any
    worker count.
    """
    rows = sweep_rows(config)
    if out_csv is not None:
        write_sweep_csv(rows, out_csv)
    return rows


def _stopping_for(config: ExperimentConfig, q: float) -> StoppingConfig:
    params = config.params
    if q > 0.0:
        sc = stopping_bounds(params, q, config.gamma, config.c_tilde)
    else:
        if config.a_override is None:
            raise ParamError(
                "q=0 boundary diagnostics need an explicit a_override (A diverges)"
            )
        z_lim = z_limit_value(params)
        sc = StoppingConfig(
            gamma=config.gamma,
            c_tilde=config.c_tilde if config.c_tilde is not None else math.nan,
            m2=m2_value(params),
            beta=beta_value(params),
            rho=rho_value(params, 0.0),
            z_limit=z_lim,
            a_bound=math.inf,
            b_bound=math.nan,
            a_gt_b=False,
            drift_positive=2.0 * rho_value(params, 0.0) - z_lim > 0.0,
        )
    replacements = {}
    if config.a_override is not None:
        replacements["a_bound"] = float(config.a_override)
    if config.b_override is not None:
        replacements["b_bound"] = float(config.b_override)
    if replacements:
        sc = dataclasses.replace(sc, **replacements)
        a_gt_b = bool(
            math.isfinite(sc.a_bound)
            and math.isfinite(sc.b_bound)
            and sc.a_bound > sc.b_bound > 1.0
        )
        sc = dataclasses.replace(sc, a_gt_b=a_gt_b)
    return sc


@dataclass(frozen=True)
class EscapeStats:
    """Frequencies of the boundary-crossing events at one grid point."""

    q: float
    replicates: int
    a_bound: float
    b_bound: float
    applicable: bool  # a_bound > b_bound > 1 held
    n_high_leq_n: int
    n_low_leq_n: int
    n_escape: int

    @property
    def p_high_leq_n(self) -> float:
        return self.n_high_leq_n / self.replicates

    @property
    def p_low_leq_n(self) -> float:
        return self.n_low_leq_n / self.replicates

    @property
    def p_escape(self) -> float:
        return self.n_escape / self.replicates


def escape_event_frequency(config: ExperimentConfig) -> list[EscapeStats]:
    """Empirical frequencies of {tau_high <= N}, {tau_low <= N} and the
    escape event {tau_high <= N, tau_low > N}.

    When the boundary constants do not satisfy a_bound > b_bound > 1 the
    escape interpretation does not apply; the row is still produced but
    flagged via ``applicable=False``.
    """
    out = []
    n = config.n_vertices
    for qi, q in enumerate(config.q_grid):
        sc = _stopping_for(config, q)
        n_high = n_low = n_escape = 0
        for r in range(config.trajectory_replicates):
            rng = np.random.default_rng(
                derive_seed(config.seed, _STREAM_ESCAPE, qi, r)
            )
            traj = run_walk(config.params, q, n, rng, record_trajectory=True)
            tau_high, tau_low = detect_stopping_times(traj, sc, config.params)
            if tau_high <= n:
                n_high += 1
                if tau_low > n:
                    n_escape += 1
            if tau_low <= n:
                n_low += 1
        out.append(
            EscapeStats(
                q=q,
                replicates=config.trajectory_replicates,
                a_bound=sc.a_bound,
                b_bound=sc.b_bound,
                applicable=sc.a_gt_b,
                n_high_leq_n=n_high,
                n_low_leq_n=n_low,
                n_escape=n_escape,
            )
        )
    return out


@dataclass(frozen=True)
class SupermartingaleBin:
    n_lo: int
    n_hi: int
    count: int
    mean: float
    stderr: float
    flagged: bool


@dataclass(frozen=True)
class SupermartingaleReport:
    q: float
    in_regime: bool
    note: str
    trajectories: int
    windows: int
    increments: int
    bins: tuple[SupermartingaleBin, ...]

    @property
    def flagged_bins(self) -> int:
        return sum(1 for b in self.bins if b.flagged)


def supermartingale_diagnostic(config: ExperimentConfig) -> list[SupermartingaleReport]:
    """Binned conditional means of the Y increments inside escape windows.

    Collects ``Y(n+1) - Y(n)`` for ``n`` strictly between the detected
    crossing times, bins by ``n`` (powers of two), and flags any bin whose
    mean exceeds ``+3 * stderr``.  Outside the drift regime
    (``2*rho <= z_limit``) nothing is claimed and no bins are produced.
    """
    out = []
    n = config.n_vertices
    edges = [1]
    while edges[-1] < n:
        edges.append(edges[-1] * 2)
    for qi, q in enumerate(config.q_grid):
        sc = _stopping_for(config, q)
        if not sc.drift_positive:
            out.append(
                SupermartingaleReport(
                    q=q,
                    in_regime=False,
                    note="outside supermartingale regime (2*rho <= z_limit)",
                    trajectories=0,
                    windows=0,
                    increments=0,
                    bins=(),
                )
            )
            continue
        counts = np.zeros(len(edges), dtype=np.int64)
        sums = np.zeros(len(edges))
        sumsq = np.zeros(len(edges))
        windows = 0
        for r in range(config.trajectory_replicates):
            rng = np.random.default_rng(
                derive_seed(config.seed, _STREAM_SUPERMART, qi, r)
            )
            traj = run_walk(config.params, q, n, rng, record_trajectory=True)
            tau_high, tau_low = detect_stopping_times(traj, sc, config.params)
            if not tau_high < n:
                continue
            hi = min(tau_low, n)  # increments need n+1 <= N and n+1 <= tau_low
            if hi - tau_high < 2:
                continue
            windows += 1
            y = y_series(config.params, traj.ns, traj.d1s, traj.d2s)
            ks = np.arange(tau_high, hi - 1)  # n = tau_high+1 .. hi-1 (0-based k = n-1)
            dy = y[ks + 1] - y[ks]
            ok = np.isfinite(dy)
            ks, dy = ks[ok], dy[ok]
            idx = np.digitize(ks + 1, edges) - 1
            np.add.at(counts, idx, 1)
            np.add.at(sums, idx, dy)
            np.add.at(sumsq, idx, dy * dy)
        bins = []
        for i in range(len(edges)):
            if counts[i] == 0:
                continue
            c = int(counts[i])
            mean = sums[i] / c
            if c > 1:
                var = max(0.0, (sumsq[i] - c * mean * mean) / (c - 1))
                stderr = math.sqrt(var / c)
            else:
                stderr = math.nan
            flagged = bool(math.isfinite(stderr) and mean > 3.0 * stderr)
            bins.append(
                SupermartingaleBin(
                    n_lo=edges[i],
                    n_hi=edges[i + 1] if i + 1 < len(edges) else n,
                    count=c,
                    mean=mean,
                    stderr=stderr,
                    flagged=flagged,
                )
            )
        note = "" if bins else "no qualifying samples"
        out.append(
            SupermartingaleReport(
                q=q,
                in_regime=True,
                note=note,
                trajectories=config.trajectory_replicates,
                windows=windows,
                increments=int(counts.sum()),
                bins=tuple(bins),
            )
        )
    return out


@dataclass(frozen=True)
class EventAStats:
    """Frequency of the pair-count concentration event, given escape."""

    q: float
    replicates: int
    escapes: int
    in_event: int
    chebyshev_bound: float

    @property
    def frequency(self) -> float:
        return self.in_event / self.escapes if self.escapes else math.nan


def event_a_frequency(config: ExperimentConfig) -> list[EventAStats]:
    """P(pair-count window holds | escape) per grid point.

    The window compares the number of red-parent transitions against the
    count of red children: with ``a = b_bound * Z(N) / (4*|alpha|)``,
    membership means ``#(r,_)`` lies within
    ``(#(_,r) - N*q +- a*sqrt(N)) / (1 - 2q)``.  Undefined for alpha = 0,
    where the escape event alone already pins the sign of d1.
    """
    params = config.params
    if params.alpha == 0.0:
        raise ParamError("event undefined for alpha=0")
    n = config.n_vertices
    zn = z_alpha(params, n)
    out = []
    for qi, q in enumerate(config.q_grid):
        if q >= 0.5:
            raise ParamError("pair-count window needs q < 1/2")
        sc = _stopping_for(config, q)
        a_len = sc.b_bound * zn / (4.0 * abs(params.alpha))
        escapes = 0
        in_event = 0
        for r in range(config.trajectory_replicates):
            rng = np.random.default_rng(
                derive_seed(config.seed, _STREAM_EVENT_A, qi, r)
            )
            res = simulate_broadcast(
                params, q, n, rng, record_trajectory=True, method="fused"
            )
            tau_high, tau_low = detect_stopping_times(res, sc, params)
            if not (tau_high <= n < tau_low):
                continue
            escapes += 1
            rr, rb, br, bb = res.pair_counts
            red_parents = rr + rb
            red_children = rr + br
            lo = (red_children - n * q - a_len * math.sqrt(n)) / (1.0 - 2.0 * q)
            hi = (red_children - n * q + a_len * math.sqrt(n)) / (1.0 - 2.0 * q)
            if lo <= red_parents <= hi:
                in_event += 1
        out.append(
            EventAStats(
                q=q,
                replicates=config.trajectory_replicates,
                escapes=escapes,
                in_event=in_event,
                chebyshev_bound=1.0 - q / (a_len * a_len),
            )
        )
    return out


DIAGNOSTICS_COLUMNS = (
    "family",
    "alpha",
    "q",
    "N",
    "gamma",
    "c_tilde",
    "A",
    "B",
    "p_high_leq_N",
    "p_low_leq_N",
    "p_escape",
    "event_A_freq",
)


def diagnostics_rows(config: ExperimentConfig, include_event_a: bool | None = None) -> list[dict]:
    """Escape frequencies (plus the pair-count event when alpha != 0) per q."""
    params = config.params
    if include_event_a is None:
        include_event_a = params.alpha != 0.0 and all(q < 0.5 for q in config.q_grid)
    escape = escape_event_frequency(config)
    event = event_a_frequency(config) if include_event_a else None
    rows = []
    for i, es in enumerate(escape):
        sc = _stopping_for(config, es.q)
        rows.append(
            {
                "family": params.label,
                "alpha": params.alpha,
                "q": es.q,
                "N": config.n_vertices,
                "gamma": config.gamma,
                "c_tilde": sc.c_tilde,
                "A": es.a_bound,
                "B": es.b_bound,
                "p_high_leq_N": es.p_high_leq_n,
                "p_low_leq_N": es.p_low_leq_n,
                "p_escape": es.p_escape,
                "event_A_freq": event[i].frequency if event else math.nan,
            }
        )
    return rows


def write_diagnostics_csv(rows: list[dict], path) -> None:
    _write_csv(rows, DIAGNOSTICS_COLUMNS, path)
