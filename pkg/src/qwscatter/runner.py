"""Experiment orchestration: seeds, per-gamma cells, sweeps, reports.

A sweep runs one diagnostic cell per gamma.  Cells are pure functions of
(config, gamma, seed) and run concurrently when asked to; results merge in
gamma order, and every file the sweep writes is byte-identical across
runs and worker counts.  A failing cell is reported in place without
taking its siblings down.
"""

from __future__ import annotations

import concurrent.futures
import csv
import io
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import ExperimentConfig, SeedSpec, seed_to_text
from .diagnostics import (
    DefectSeries,
    GrowthFit,
    LemmaReport,
    cauchy_defect_series,
    divergence_terms,
    default_probe_grid,
    fit_growth,
    lemma_suite,
    partial_sums,
    write_series_csv,
)
from .lattice import (
    CoinSpec,
    PhaseProfile,
    StateVector,
    build_coin,
    norm,
    rewindow,
    single_site_state,
    state_from_amplitudes,
    support_bounds,
)
from .spectral import (
    FilterSpec,
    KGrid,
    apply_with_auto_grid,
    dump_eigensystem_csv,
    eigensystem,
    velocity_filter,
)

__all__ = [
    "make_coin",
    "make_seed",
    "defect_time_grid",
    "classify_cell",
    "CellOutcome",
    "ExperimentResult",
    "run_cell",
    "run_experiment",
]

_CHIRALITY_SPINORS = {
    "up": (1.0, 0.0),
    "down": (0.0, 1.0),
    "sym": (1.0 / math.sqrt(2.0), 1j / math.sqrt(2.0)),
}


def make_coin(cfg: ExperimentConfig) -> CoinSpec:
    return build_coin(cfg.a_mod, cfg.a_arg, cfg.b_arg, cfg.delta)


def _normalized(state: StateVector) -> StateVector:
    n = norm(state)
    if n == 0.0:
        raise ValueError("seed construction produced the zero state")
    return StateVector(state.x_min, state.amps / n)


def make_seed(spec: SeedSpec, coin: CoinSpec, eps: float, tail_tol: float = 1e-10) -> StateVector:
    """Build the unit-norm initial state a descriptor names.

    single-site and two-site seeds are exact; the filtered seed passes a
    Gaussian profile through the velocity filter on a wide grid, truncates
    the far tail (per-site cutoff 1e-13) and renormalizes.
    """
    if spec.kind == "single-site":
        up, lo = _CHIRALITY_SPINORS[spec.chirality]
        return _normalized(single_site_state(spec.site, up, lo))
    if spec.kind == "two-site":
        amps = np.zeros((3, 2), dtype=complex)
        amps[0, 0] = 1.0 / math.sqrt(2.0)
        amps[2, 1] = 1.0 / math.sqrt(2.0)
        return _normalized(state_from_amplitudes(spec.site - 1, amps))
    if spec.kind == "filtered":
        sigma = float(spec.width)
        radius = int(math.ceil(9.2 * sigma)) + 2  # gaussian < 1e-18 beyond
        xs = np.arange(-radius, radius + 1)
        profile = np.exp(-(xs.astype(float)) ** 2 / (2.0 * sigma * sigma))
        up, lo = _CHIRALITY_SPINORS[spec.chirality]
        amps = np.empty((xs.size, 2), dtype=complex)
        amps[:, 0] = profile * up
        amps[:, 1] = profile * lo
        raw = _normalized(state_from_amplitudes(spec.site - radius, amps))
        filt = FilterSpec(eps)
        filt.validate_for(coin)
        out = apply_with_auto_grid(
            lambda s, e, tt: velocity_filter(s, filt, e, tt),
            raw, coin, tail_tol, pad=max(1024, int(1.5 * raw.n_sites)))
        bounds = support_bounds(out, 1e-13)
        if bounds is None:
            raise ValueError("velocity filter removed the whole seed")
        out = rewindow(out, bounds[0], bounds[1], clip_tol=1e-9)
        return _normalized(out)
    raise ValueError(f"unknown seed kind {spec.kind!r}")


def defect_time_grid(t_max: int) -> list:
    """Doubling T values from 4 up to t_max (T, then the pair uses 2T).

    The wide span matters: the classifier compares the defect at the
    largest T against the smallest, and a factor-64 span separates a
    T^(1-gamma) tail from a genuinely settling one far more sharply than
    one octave would.
    """
    ts = []
    T = int(t_max)
    while T >= 4:
        ts.append(T)
        T //= 2
    return sorted(ts)


def classify_cell(fit: GrowthFit, defect: DefectSeries) -> str:
    """CONVERGENT / DIVERGENT / AMBIGUOUS for one gamma cell.

    CONVERGENT: the Cauchy defect at the largest probed T is below 10% of
    its value at the smallest probed T and decreases monotonically over
    the last three doublings (zero defect throughout also qualifies).
    DIVERGENT: the partial-sum growth fit has R^2 >= 0.98 with power
    exponent >= 0.05 or positive logarithmic slope.  The convergence test
    runs first: a converging series can still fit a slow growth law well,
    but a vanishing defect is direct evidence of a limit.
    """
    vals = defect.values
    if vals.size >= 2:
        first, last = float(vals[0]), float(vals[-1])
        if last <= 1e-14:
            return "CONVERGENT"
        tail = vals[-min(4, vals.size):]
        monotone = bool(np.all(np.diff(tail) < 0.0))
        if first > 0.0 and last < 0.1 * first and monotone:
            return "CONVERGENT"
    if fit.r2 >= 0.98:
        if fit.model == "power" and fit.exponent >= 0.05 and fit.amplitude > 0.0:
            return "DIVERGENT"
        if fit.model == "logarithmic" and fit.exponent > 0.0:
            return "DIVERGENT"
    return "AMBIGUOUS"


@dataclass
class CellOutcome:
    """Everything one gamma cell produced (or the error that stopped it)."""

    gamma: float
    classification: str = "ERROR"
    fit: GrowthFit | None = None
    defect: DefectSeries | None = None
    series: list = field(default_factory=list)
    report: LemmaReport | None = None
    defect_ratio: float = math.nan
    error: str | None = None


def run_cell(cfg: ExperimentConfig, gamma: float, phi: StateVector) -> CellOutcome:
    """All diagnostics for one gamma: divergence series and growth fit,
    Cauchy defect doublings, rate suite.  Pure function of its inputs."""
    coin = make_coin(cfg)
    profile = PhaseProfile(gamma, cfg.g)

    div = divergence_terms(phi, coin, profile, cfg.t_max)
    psum = partial_sums(div)
    fit = fit_growth(psum)
    defect = cauchy_defect_series(phi, coin, profile, defect_time_grid(cfg.t_max))
    filt = FilterSpec(cfg.eps)
    report = lemma_suite(
        phi, coin, profile, filt,
        t_grid=default_probe_grid(cfg.t_max),
        tail_tol=cfg.tail_tol,
    )

    series = [div, psum, defect] + report.series()
    for s in series:
        s.meta.update({"a_mod": coin.a_mod, "delta": coin.delta, "gamma": gamma})

    first, last = float(defect.values[0]), float(defect.values[-1])
    if last <= 1e-14:  # converged to roundoff; a ratio of noise means nothing
        ratio = 0.0
    elif first > 0.0:
        ratio = last / first
    else:
        ratio = math.inf
    return CellOutcome(
        gamma=gamma,
        classification=classify_cell(fit, defect),
        fit=fit,
        defect=defect,
        series=series,
        report=report,
        defect_ratio=ratio,
    )


def _run_cell_safe(args) -> CellOutcome:
    cfg, gamma, phi = args
    try:
        return run_cell(cfg, gamma, phi)
    except Exception as exc:  # isolate the cell, report in place
        return CellOutcome(gamma=gamma, error=f"{type(exc).__name__}: {exc}")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    seed_state: StateVector
    outcomes: list
    out_dir: str
    files: list


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


_RECORD_HEADER = [
    "version", "a_mod", "a_arg", "b_arg", "delta", "g", "gamma", "eps",
    "seed", "t_max", "k_grid", "diagnostic", "t", "value",
]


def _record_rows(cfg: ExperimentConfig, outcomes) -> list:
    """Flat provenance-stamped rows for records.csv, in gamma order."""
    stamp = [
        __version__, _fmt(cfg.a_mod), _fmt(cfg.a_arg), _fmt(cfg.b_arg),
        _fmt(cfg.delta), _fmt(cfg.g),
    ]
    tail = [
        _fmt(cfg.eps), seed_to_text(cfg.seed), str(cfg.t_max),
        str(cfg.k_grid) if cfg.k_grid is not None else "",
    ]
    rows = []

    def put(gamma, diagnostic, t, value):
        rows.append(stamp + [_fmt(gamma)] + tail + [diagnostic, _fmt(t), _fmt(value)])

    for oc in sorted(outcomes, key=lambda o: o.gamma):
        if oc.error is not None:
            put(oc.gamma, "error", None, oc.error)
            continue
        for s in oc.series:
            for ti, vi in zip(s.t, s.values):
                put(oc.gamma, s.name, int(ti), float(vi))
        put(oc.gamma, "classification", None, oc.classification)
        put(oc.gamma, "defect_ratio", None, oc.defect_ratio)
        f = oc.fit
        put(oc.gamma, "fit_model", None, f.model)
        put(oc.gamma, "fit_exponent", None, f.exponent)
        put(oc.gamma, "fit_amplitude", None, f.amplitude)
        put(oc.gamma, "fit_r2_power", None, f.r2_power)
        put(oc.gamma, "fit_r2_log", None, f.r2_log)
        r = oc.report
        for name in (
            "velocity_rate_const", "smoothed_rate_const", "resolvent_rate_lin",
            "resolvent_rate_quad", "term_floor_const", "envelope_const",
            "filter_leakage",
        ):
            put(oc.gamma, name, None, getattr(r, name))
        for flag, ok in r.flags.items():
            put(oc.gamma, "flag_" + flag, None, int(ok))
    return rows


_SUMMARY_HEADER = [
    "gamma", "classification", "model", "exponent", "r2", "defect_first",
    "defect_last", "defect_ratio", "velocity_rate_const", "flags_ok", "error",
]


def _summary_rows(outcomes) -> list:
    rows = []
    for oc in sorted(outcomes, key=lambda o: o.gamma):
        if oc.error is not None:
            rows.append([_fmt(oc.gamma), "ERROR", "", "", "", "", "", "", "", "", oc.error])
            continue
        flags_ok = int(all(oc.report.flags.values()))
        rows.append([
            _fmt(oc.gamma), oc.classification, oc.fit.model, _fmt(oc.fit.exponent),
            _fmt(oc.fit.r2), _fmt(float(oc.defect.values[0])),
            _fmt(float(oc.defect.values[-1])), _fmt(oc.defect_ratio),
            _fmt(oc.report.velocity_rate_const), str(flags_ok), "",
        ])
    return rows


def _summary_text(cfg: ExperimentConfig, outcomes) -> str:
    buf = io.StringIO()
    coin = make_coin(cfg)
    buf.write(f"quantum walk scattering sweep (suite {__version__})\n")
    buf.write(
        f"coin: a_mod={coin.a_mod:.6g} a_arg={coin.a_arg:.6g} "
        f"b_arg={coin.b_arg:.6g} delta={coin.delta:.6g}\n"
    )
    buf.write(
        f"phases: g={cfg.g:.6g}; seed: {seed_to_text(cfg.seed)}; "
        f"t_max={cfg.t_max}; eps={cfg.eps:.6g}\n\n"
    )
    head = f"{'gamma':>7}  {'class':<10}  {'model':<11}  {'exponent':>9}  {'r2':>7}  {'defect ratio':>12}"
    buf.write(head + "\n")
    buf.write("-" * len(head) + "\n")
    for oc in sorted(outcomes, key=lambda o: o.gamma):
        if oc.error is not None:
            buf.write(f"{oc.gamma:>7.3g}  {'ERROR':<10}  {oc.error}\n")
            continue
        buf.write(
            f"{oc.gamma:>7.3g}  {oc.classification:<10}  {oc.fit.model:<11}  "
            f"{oc.fit.exponent:>9.4f}  {oc.fit.r2:>7.4f}  {oc.defect_ratio:>12.5g}\n"
        )
    buf.write("\n")
    for oc in sorted(outcomes, key=lambda o: o.gamma):
        if oc.error is not None:
            continue
        r = oc.report
        bad = [k for k, v in r.flags.items() if not v]
        flag_text = "all bounds hold" if not bad else "FAILED: " + ", ".join(bad)
        buf.write(f"gamma={oc.gamma:g}: {flag_text}\n")
    return buf.getvalue()


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def run_experiment(cfg: ExperimentConfig, render_figures: bool = True) -> ExperimentResult:
    """Run the full sweep and write its report files under cfg.out.

    Files: records.csv (provenance-stamped flat log), summary.csv and
    summary.txt (one row per gamma), spectrum.csv (free-walk eigensystem),
    cell_gamma=*.csv (per-cell series), and figures when requested.
    """
    coin = make_coin(cfg)
    phi = make_seed(cfg.seed, coin, cfg.eps, cfg.tail_tol)

    jobs = [(cfg, gamma, phi) for gamma in cfg.gammas]
    threads = min(cfg.resolved_threads(), len(jobs))
    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_run_cell_safe, jobs))
    else:
        outcomes = [_run_cell_safe(job) for job in jobs]
    outcomes.sort(key=lambda o: o.gamma)

    os.makedirs(cfg.out, exist_ok=True)
    files = []

    def path_of(name):
        p = os.path.join(cfg.out, name)
        files.append(p)
        return p

    _write_csv(path_of("records.csv"), _RECORD_HEADER, _record_rows(cfg, outcomes))
    _write_csv(path_of("summary.csv"), _SUMMARY_HEADER, _summary_rows(outcomes))
    with open(path_of("summary.txt"), "w") as fh:
        fh.write(_summary_text(cfg, outcomes))

    grid = KGrid(cfg.k_grid if cfg.k_grid is not None else 1024)
    dump_eigensystem_csv(eigensystem(coin, grid), path_of("spectrum.csv"))

    for oc in outcomes:
        if oc.error is None:
            write_series_csv(path_of(f"cell_gamma={oc.gamma:g}.csv"), oc.series)

    if render_figures:
        from . import figures

        files.extend(figures.render_sweep(cfg, outcomes, cfg.out))

    return ExperimentResult(cfg, phi, outcomes, cfg.out, files)
