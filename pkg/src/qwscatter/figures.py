"""Matplotlib rendering for the CLI report paths.

Every function writes PNG files alongside the delimited output and
returns the paths written.  The Agg backend is forced so rendering works
headless; figures carry no timestamps, keeping repeated runs identical.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "render_spectrum",
    "render_trajectory",
    "render_defect",
    "render_rates",
    "render_weak_limit",
    "render_sweep",
]

_DPI = 130


def _style(ax, xlabel, ylabel, title=None):
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(True, which="both", alpha=0.25, linewidth=0.5)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def render_spectrum(eig, arcs, path) -> str:
    """Unit-circle spectrum with the allowed arcs, plus velocity curves."""
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9.2, 4.2))

    th = np.linspace(0.0, 2.0 * np.pi, 512)
    ax0.plot(np.cos(th), np.sin(th), color="0.85", linewidth=1.0)
    if arcs.kind == "arcs":
        for lo, hi in arcs.arcs:
            seg = np.linspace(lo, hi, 256)
            ax0.plot(np.cos(seg), np.sin(seg), color="C0", linewidth=2.5)
    elif arcs.kind == "full_circle":
        ax0.plot(np.cos(th), np.sin(th), color="C0", linewidth=2.5)
    else:
        pts = np.asarray(arcs.points)
        ax0.plot(pts.real, pts.imag, "o", color="C0", markersize=6)
    lam = eig.lam.ravel()
    ax0.plot(lam.real, lam.imag, ".", color="C3", markersize=1.5)
    ax0.set_aspect("equal")
    _style(ax0, "Re", "Im", "spectrum of the free walk")

    for j in range(2):
        ax1.plot(eig.grid.nodes, eig.v[:, j], linewidth=1.2, label=f"branch {j + 1}")
    ax1.axhline(eig.coin.a_mod, color="0.6", linewidth=0.8, linestyle="--")
    ax1.axhline(-eig.coin.a_mod, color="0.6", linewidth=0.8, linestyle="--")
    ax1.legend(fontsize=8)
    _style(ax1, "k", "group velocity", "band velocities")
    return _save(fig, path)


def render_trajectory(times, states, path) -> str:
    """Space-time carpet of site probabilities for one evolution."""
    x_min = min(s.x_min for s in states)
    x_max = max(s.x_max for s in states)
    width = x_max - x_min + 1
    carpet = np.zeros((len(states), width))
    for i, s in enumerate(states):
        off = s.x_min - x_min
        carpet[i, off:off + s.n_sites] = s.site_norms() ** 2
    fig, ax = plt.subplots(figsize=(7.0, 4.6))
    with np.errstate(divide="ignore"):
        img = np.log10(np.maximum(carpet, 1e-12))
    mesh = ax.pcolormesh(
        np.arange(x_min, x_max + 2) - 0.5,
        np.append(np.asarray(times), times[-1] + 1) - 0.5,
        img,
        cmap="magma",
        shading="flat",
    )
    fig.colorbar(mesh, ax=ax, label="log10 site probability")
    _style(ax, "x", "t", "perturbed walk trajectory")
    return _save(fig, path)


def _plot_series(ax, series, **kw):
    mask = series.values > 0.0
    ax.loglog(series.t[mask], series.values[mask], **kw)


def render_defect(cells, path) -> str:
    """Cauchy defect doublings per gamma (log-log)."""
    fig, ax = plt.subplots(figsize=(6.2, 4.4))
    for gamma, series in cells:
        _plot_series(ax, series, marker="o", markersize=3.5, label=f"gamma={gamma:g}")
    ax.legend(fontsize=8)
    _style(ax, "T", "|| W(2T) phi - W(T) phi ||", "wave-operator Cauchy defect")
    return _save(fig, path)


def render_rates(report, path) -> str:
    """t * rate(t) boundedness panels plus envelope margins."""
    n_panels = 2 if report.term is None else 3
    fig, axes = plt.subplots(1, n_panels, figsize=(4.4 * n_panels, 4.0))
    axes = np.atleast_1d(axes)

    t = report.t_grid
    axes[0].semilogx(t, t * report.velocity_rate, marker="o", markersize=3, label="velocity")
    if report.smoothed_rate is not None:
        axes[0].semilogx(t, t * report.smoothed_rate, marker="s", markersize=3, label="mollified")
    axes[0].legend(fontsize=8)
    _style(axes[0], "t", "t * rate", "position-velocity rates")

    if report.resolvent_rate is not None:
        for i, z in enumerate(report.z_grid):
            axes[1].semilogx(
                t, t * report.resolvent_rate[i], marker=".", markersize=4,
                label=f"Im z = {z.imag:g}",
            )
        axes[1].legend(fontsize=8)
        _style(axes[1], "t", "t * rate", "resolvent-smoothed rates")
    else:
        axes[1].semilogx(t, t * report.velocity_rate, marker="o", markersize=3)
        _style(axes[1], "t", "t * rate", "velocity rate")

    if report.term is not None:
        axes[2].semilogx(report.margin_t, report.term_floor_margin, label="term floor")
        axes[2].semilogx(report.margin_t, report.envelope_margin, label="decay envelope")
        axes[2].axhline(0.0, color="0.5", linewidth=0.8)
        axes[2].legend(fontsize=8)
        _style(axes[2], "t", "margin", "envelope margins (must stay >= 0)")
    return _save(fig, path)


def render_weak_limit(data, path) -> str:
    """Empirical x/t CDF at time t against the spectral velocity CDF."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))

    def cdf(v, m):
        order = np.argsort(v, kind="stable")
        return v[order], np.cumsum(m[order])

    ev, ec = cdf(data.emp_v, data.emp_mass)
    sv, sc = cdf(data.spec_v, data.spec_mass)
    ax.step(ev, ec, where="post", label=f"empirical x/t at t={data.t}")
    ax.step(sv, sc, where="post", label="spectral velocity law", linewidth=1.0)
    ax.legend(fontsize=8)
    ax.set_xlim(-1.05, 1.05)
    _style(ax, "velocity", "CDF", f"weak limit check (KS = {data.ks:.4f})")
    return _save(fig, path)


def render_sweep(cfg, outcomes, out_dir) -> list:
    """Figures for a full sweep: growth fits and defect doublings."""
    paths = []
    good = [oc for oc in outcomes if oc.error is None]
    if not good:
        return paths

    fig, ax = plt.subplots(figsize=(6.6, 4.6))
    for oc in good:
        psum = next(s for s in oc.series if s.name == "divergence_term_partial_sum")
        _plot_series(
            ax, psum, linewidth=1.2,
            label=f"gamma={oc.gamma:g} [{oc.classification}]",
        )
        if oc.fit.model == "power" and oc.fit.amplitude > 0.0:
            tt = psum.t[psum.t >= 8].astype(float)
            ax.loglog(tt, oc.fit.amplitude * tt**oc.fit.exponent, "--", color="0.4", linewidth=0.7)
    ax.legend(fontsize=7)
    _style(ax, "T", "partial sum P(T)", "divergence-term growth and fitted laws")
    paths.append(_save(fig, os.path.join(out_dir, "fig_divergence.png")))

    paths.append(
        render_defect(
            [(oc.gamma, oc.defect) for oc in good],
            os.path.join(out_dir, "fig_defect.png"),
        )
    )
    reports = [oc for oc in good if oc.report is not None]
    if reports:
        mid = reports[len(reports) // 2]
        paths.append(
            render_rates(mid.report, os.path.join(out_dir, f"fig_rates_gamma={mid.gamma:g}.png"))
        )
    return paths
