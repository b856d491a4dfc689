"""Command-line surface.

Subcommands: spectrum, evolve, defect, lemmas, sweep, weaklimit.  Every
report path writes delimited output plus rendered figures into --out.
Exit codes: 0 success, 1 validation failure, 2 numerical-guard failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    SeedSpec,
    default_config,
    parse_config,
    build_config,
)
from .diagnostics import (
    cauchy_defect_series,
    default_probe_grid,
    lemma_suite,
    weak_limit_data,
    write_series_csv,
)
from .lattice import PhaseProfile, WindowGuardError, evolve, with_margin
from .runner import defect_time_grid, make_coin, make_seed, run_experiment
from .spectral import (
    FilterAnnihilationError,
    FilterSpec,
    KGrid,
    TailToleranceError,
    dump_eigensystem_csv,
    eigensystem,
    u0_spectrum,
)

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; reserve 2 for numerical guards."""

    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p: _Parser) -> None:
    p.add_argument("--config", metavar="PATH", help="key = value config file")
    p.add_argument("--gamma", help="decay exponent(s), comma separated")
    p.add_argument("--a-mod", dest="a_mod", type=float, help="|a| of the coin")
    p.add_argument("--a-arg", dest="a_arg", type=float, help="arg(a)")
    p.add_argument("--b-arg", dest="b_arg", type=float, help="arg(b)")
    p.add_argument("--delta", type=float, help="determinant phase of the coin")
    p.add_argument("--g", type=float, help="perturbation amplitude in [0, 1]")
    p.add_argument("--tmax", dest="t_max", type=int, help="time horizon")
    p.add_argument("--eps", type=float, help="velocity-filter half width")
    p.add_argument("--seed-state", dest="seed_state", help="seed descriptor")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="parallel cells (default: cores)")


def _build_parser() -> _Parser:
    p = _Parser(prog="qwscatter", description=__doc__)
    p.add_argument("--version", action="version", version=f"qwscatter {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("spectrum", "dump the free-walk spectrum and band velocities"),
        ("evolve", "run one perturbed trajectory and dump site probabilities"),
        ("defect", "Cauchy defect series of the wave-operator approximants"),
        ("lemmas", "rate and envelope suite for one gamma"),
        ("sweep", "full gamma sweep with classification report"),
        ("weaklimit", "KS distance between x/t law and the velocity law"),
    ):
        sp = sub.add_parser(name, help=helptext)
        _add_common(sp)
    return p


def _load_config(args, base=None):
    cfg = base if base is not None else default_config()
    if args.config:
        with open(args.config) as fh:
            cfg = parse_config(fh.read(), base=cfg)
    overrides = {}
    if args.gamma is not None:
        try:
            overrides["gammas"] = tuple(float(s) for s in args.gamma.split(","))
        except ValueError:
            raise ConfigError([f"--gamma: expected comma-separated numbers, got {args.gamma!r}"])
    for key in ("a_mod", "a_arg", "b_arg", "delta", "g", "eps", "t_max", "out", "threads"):
        val = getattr(args, key)
        if val is not None:
            overrides[key] = val
    if args.seed_state is not None:
        overrides["seed"] = args.seed_state
    return build_config(cfg, **overrides)


def _one_gamma(cfg, command):
    if len(cfg.gammas) != 1:
        raise ConfigError([f"{command} needs exactly one gamma, got {len(cfg.gammas)}"])
    return cfg.gammas[0]


def _outdir(cfg) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


def _cmd_spectrum(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    coin = make_coin(cfg)
    grid = KGrid(cfg.k_grid if cfg.k_grid is not None else 1024)
    eig = eigensystem(coin, grid)
    csv_path = os.path.join(out, "spectrum.csv")
    dump_eigensystem_csv(eig, csv_path)
    arcs = u0_spectrum(coin)
    if arcs.kind == "arcs":
        desc = "; ".join(f"arc [{lo:.6f}, {hi:.6f}]" for lo, hi in arcs.arcs)
    elif arcs.kind == "full_circle":
        desc = "full unit circle"
    else:
        desc = "points " + ", ".join(f"{z:.6f}" for z in arcs.points)
    print(f"spectrum of the free walk: {desc}")
    from . import figures

    fig_path = figures.render_spectrum(eig, arcs, os.path.join(out, "fig_spectrum.png"))
    print(f"wrote {csv_path} and {fig_path}")
    return 0


def _cmd_evolve(args) -> int:
    cfg = _load_config(args)
    gamma = _one_gamma(cfg, "evolve")
    out = _outdir(cfg)
    coin = make_coin(cfg)
    profile = PhaseProfile(gamma, cfg.g)
    phi = make_seed(cfg.seed, coin, cfg.eps, cfg.tail_tol)

    state = with_margin(phi, cfg.t_max + 1)
    states = [state]
    for _ in range(cfg.t_max):
        state = evolve(state, coin, 1, profile)
        states.append(state)

    csv_path = os.path.join(out, "evolve.csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "prob"])
        for t, s in enumerate(states):
            probs = s.site_norms() ** 2
            for x, pr in zip(s.sites, probs):
                w.writerow([t, int(x), format(float(pr), ".17g")])
    from . import figures

    fig_path = figures.render_trajectory(
        list(range(len(states))), states, os.path.join(out, "fig_evolve.png")
    )
    print(f"wrote {csv_path} and {fig_path}")
    return 0


def _cmd_defect(args) -> int:
    cfg = _load_config(args)
    out = _outdir(cfg)
    coin = make_coin(cfg)
    phi = make_seed(cfg.seed, coin, cfg.eps, cfg.tail_tol)
    grid = defect_time_grid(cfg.t_max)
    cells = []
    for gamma in cfg.gammas:
        series = cauchy_defect_series(phi, coin, PhaseProfile(gamma, cfg.g), grid)
        series.meta.update({"a_mod": coin.a_mod, "delta": coin.delta})
        cells.append((gamma, series))
        pairs = ", ".join(f"d({T},{2 * T})={v:.3e}" for T, v in zip(series.t, series.values))
        print(f"gamma={gamma:g}: {pairs}")
    csv_path = os.path.join(out, "defect.csv")
    write_series_csv(csv_path, [s for _, s in cells])
    from . import figures

    fig_path = figures.render_defect(cells, os.path.join(out, "fig_defect.png"))
    print(f"wrote {csv_path} and {fig_path}")
    return 0


def _cmd_lemmas(args) -> int:
    cfg = _load_config(args)
    gamma = _one_gamma(cfg, "lemmas")
    out = _outdir(cfg)
    coin = make_coin(cfg)
    phi = make_seed(cfg.seed, coin, cfg.eps, cfg.tail_tol)
    report = lemma_suite(
        phi, coin, PhaseProfile(gamma, cfg.g), FilterSpec(cfg.eps),
        t_grid=default_probe_grid(cfg.t_max), tail_tol=cfg.tail_tol,
    )
    series = report.series()
    for s in series:
        s.meta.update({"a_mod": coin.a_mod, "delta": coin.delta})
    csv_path = os.path.join(out, "lemmas.csv")
    write_series_csv(csv_path, series)

    const_path = os.path.join(out, "lemmas_constants.csv")
    with open(const_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "value"])
        for name in (
            "velocity_rate_const", "smoothed_rate_const", "resolvent_rate_lin",
            "resolvent_rate_quad", "term_floor_const", "envelope_const",
            "filter_leakage",
        ):
            val = getattr(report, name)
            if val is not None:
                w.writerow([name, format(val, ".17g")])
        for flag, ok in report.flags.items():
            w.writerow(["flag_" + flag, int(ok)])
    for flag, ok in report.flags.items():
        print(f"{flag}: {'ok' if ok else 'FAILED'}")
    from . import figures

    fig_path = figures.render_rates(report, os.path.join(out, "fig_rates.png"))
    print(f"wrote {csv_path}, {const_path} and {fig_path}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    result = run_experiment(cfg)
    with open(os.path.join(cfg.out, "summary.txt")) as fh:
        print(fh.read(), end="")
    print(f"wrote {len(result.files)} files under {cfg.out}")
    if any(oc.error is not None for oc in result.outcomes):
        for oc in result.outcomes:
            if oc.error is not None:
                print(f"cell gamma={oc.gamma:g} failed: {oc.error}", file=sys.stderr)
        return 2
    return 0


def _cmd_weaklimit(args) -> int:
    base = replace(default_config(), seed=SeedSpec("single-site"), t_max=512)
    cfg = _load_config(args, base=base)
    out = _outdir(cfg)
    coin = make_coin(cfg)
    phi = make_seed(cfg.seed, coin, cfg.eps, cfg.tail_tol)
    data = weak_limit_data(phi, coin, cfg.t_max)
    print(f"KS distance at t={data.t}: {data.ks:.6f}")
    vmax = float(np.max(np.abs(data.emp_v[data.emp_mass > 1e-12])))
    print(f"largest |x|/t carrying mass: {vmax:.6f} (band edge {coin.a_mod:.6f})")

    csv_path = os.path.join(out, "weaklimit.csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["law", "velocity", "mass"])
        for v, m in zip(data.emp_v, data.emp_mass):
            w.writerow(["empirical", format(float(v), ".17g"), format(float(m), ".17g")])
        for v, m in zip(data.spec_v, data.spec_mass):
            w.writerow(["spectral", format(float(v), ".17g"), format(float(m), ".17g")])
    from . import figures

    fig_path = figures.render_weak_limit(data, os.path.join(out, "fig_weaklimit.png"))
    print(f"wrote {csv_path} and {fig_path}")
    return 0


_HANDLERS = {
    "spectrum": _cmd_spectrum,
    "evolve": _cmd_evolve,
    "defect": _cmd_defect,
    "lemmas": _cmd_lemmas,
    "sweep": _cmd_sweep,
    "weaklimit": _cmd_weaklimit,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"qwscatter: config error: {v}", file=sys.stderr)
        return 1
    except (WindowGuardError, TailToleranceError, FilterAnnihilationError) as exc:
        print(f"qwscatter: numerical guard: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"qwscatter: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"qwscatter: invalid input: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
