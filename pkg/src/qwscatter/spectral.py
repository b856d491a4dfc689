"""Fourier-space calculus for the free walk U0 = S C0.

The symbol U0(k) = diag(e^{ik}, e^{-ik}) C0 is diagonalized in closed form.
With tau(k) = |a| cos(k + arg a - delta/2), zeta(k) = |a| sin(k + arg a - delta/2)
and eta = sqrt(1 - tau^2), the two eigenvalue branches are

    lambda_j(k) = e^{i delta/2} (tau(k) + (-1)^(j-1) i eta(k)),   j = 1, 2,

which is the unique square root of the det/trace data: the product is
det U0(k) = e^{i delta} and the sum is the trace 2 tau e^{i delta/2}.
The group velocity i lambda_j'(k)/lambda_j(k) evaluates to (-1)^j zeta/eta.

For |a| = 1 the walk is diagonal and the branches are treated exactly:
lambda = a e^{ik} on the upper channel (velocity -1) and
a* e^{i delta} e^{-ik} on the lower one (velocity +1).  Functions of the
asymptotic velocity operator then act pointwise in position space, with
no grid error at all.

Everything here evaluates on a finite momentum grid of N nodes; a state
transformed through the grid must fit in an N-site window, and outputs
whose true support leaks past the window are rejected against a declared
tail tolerance rather than silently wrapped.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .lattice import CoinSpec, StateVector, rewindow

__all__ = [
    "TailToleranceError",
    "FilterAnnihilationError",
    "KGrid",
    "EigenSystem",
    "FilterSpec",
    "SpectrumArcs",
    "forward_dft",
    "inverse_dft",
    "eigensystem",
    "group_velocity",
    "symbol_matrices",
    "apply_v0",
    "apply_function_of_v0",
    "apply_resolvent_v0",
    "apply_with_auto_grid",
    "velocity_filter",
    "u0_spectrum",
    "spectrum_phase_samples",
    "dump_eigensystem_csv",
    "next_pow2",
]

_TWO_PI = 2.0 * math.pi


class TailToleranceError(RuntimeError):
    """A spectral output does not fit its window to the requested tolerance."""


class FilterAnnihilationError(RuntimeError):
    """The velocity filter removed essentially all of the state."""


def next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


@dataclass(frozen=True)
class KGrid:
    """Uniform momentum grid k_m = 2 pi m / N, m = 0 .. N-1."""

    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"N must be an integer >= 2, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N) * (_TWO_PI / self.N)


def forward_dft(state: StateVector, grid: KGrid) -> np.ndarray:
    """Samples of psi-hat(k) = sum_x psi(x) e^{-ikx} at the grid nodes.

    Exact for any state whose window fits in the grid (the transform of a
    finitely supported state is a trigonometric polynomial of degree below N).
    """
    if grid.N < state.n_sites:
        raise ValueError(
            f"grid too small: N={grid.N} < window width {state.n_sites}"
        )
    f = np.fft.fft(state.amps, n=grid.N, axis=0)
    phase = np.exp(-1j * grid.nodes * state.x_min)
    return f * phase[:, None]


def inverse_dft(khat: np.ndarray, grid: KGrid, x_min: int) -> StateVector:
    """Inverse of forward_dft onto the window [x_min, x_min + N - 1].

    For k-data that is not the transform of a state supported in the window
    this returns the N-periodization restricted to the window.
    """
    khat = np.asarray(khat, dtype=np.complex128)
    if khat.shape != (grid.N, 2):
        raise ValueError(f"khat must have shape ({grid.N}, 2), got {khat.shape}")
    twisted = khat * np.exp(1j * grid.nodes * x_min)[:, None]
    amps = np.fft.ifft(twisted, axis=0)
    return StateVector(x_min, amps)


@dataclass
class EigenSystem:
    """Branchwise eigendata of the free symbol on a momentum grid.

    lam, v: shape (N, 2); u: shape (N, 2, 2) indexed (node, branch,
    component).  Branch 0 carries tau + i eta (velocity -zeta/eta), branch 1
    its conjugate partner.  `diagonal` marks the |a| = 1 case, where branch 0
    is the pure upper channel (velocity -1) and branch 1 the lower (+1).
    """

    coin: CoinSpec
    grid: KGrid
    lam: np.ndarray
    u: np.ndarray
    v: np.ndarray
    tau: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray
    diagonal: bool


def eigensystem(coin: CoinSpec, grid: KGrid) -> EigenSystem:
    k = grid.nodes
    N = grid.N
    half = 0.5 * coin.delta
    u_arg = k + coin.a_arg - half
    tau = coin.a_mod * np.cos(u_arg)
    zeta = coin.a_mod * np.sin(u_arg)

    if coin.a_mod == 1.0:
        # decoupled channels; eta touches zero so the generic form degenerates
        eta = np.abs(np.sin(u_arg))
        lam = np.empty((N, 2), dtype=np.complex128)
        lam[:, 0] = coin.a * np.exp(1j * k)
        lam[:, 1] = np.conj(coin.a) * np.exp(1j * coin.delta) * np.exp(-1j * k)
        u = np.zeros((N, 2, 2), dtype=np.complex128)
        u[:, 0, 0] = 1.0
        u[:, 1, 1] = 1.0
        v = np.empty((N, 2))
        v[:, 0] = -1.0
        v[:, 1] = 1.0
        return EigenSystem(coin, grid, lam, u, v, tau, eta, zeta, True)

    eta = np.sqrt(1.0 - tau * tau)
    phase_half = np.exp(0.5j * coin.delta)
    lam = np.empty((N, 2), dtype=np.complex128)
    lam[:, 0] = phase_half * (tau + 1j * eta)
    lam[:, 1] = phase_half * (tau - 1j * eta)

    # normalized eigenvectors, smooth and 2pi-periodic in k for 0 <= |a| < 1
    # (eta - |zeta| >= eta^2 - zeta^2 = |b|^2 > 0 keeps the square roots alive)
    b_mod = coin.b_mod
    top = 1j * b_mod * np.exp(1j * (k + coin.b_arg - half))
    u = np.empty((N, 2, 2), dtype=np.complex128)
    pref0 = np.sqrt(eta + zeta) / (b_mod * np.sqrt(2.0 * eta))
    pref1 = np.sqrt(eta - zeta) / (b_mod * np.sqrt(2.0 * eta))
    u[:, 0, 0] = pref0 * top
    u[:, 0, 1] = pref0 * (zeta - eta)
    u[:, 1, 0] = pref1 * top
    u[:, 1, 1] = pref1 * (zeta + eta)

    v = np.empty((N, 2))
    v[:, 0] = -zeta / eta
    v[:, 1] = zeta / eta
    return EigenSystem(coin, grid, lam, u, v, tau, eta, zeta, False)


def group_velocity(eig: EigenSystem) -> np.ndarray:
    """Branch group velocities i lambda_j'(k)/lambda_j(k), shape (N, 2)."""
    return eig.v.copy()


def symbol_matrices(coin: CoinSpec, grid: KGrid) -> np.ndarray:
    """The symbol U0(k_m) = diag(e^{ik}, e^{-ik}) C0, shape (N, 2, 2)."""
    k = grid.nodes
    out = np.empty((grid.N, 2, 2), dtype=np.complex128)
    c = coin.matrix
    out[:, 0, :] = np.exp(1j * k)[:, None] * c[0]
    out[:, 1, :] = np.exp(-1j * k)[:, None] * c[1]
    return out


def _branch_coefficients(eig: EigenSystem, khat: np.ndarray) -> np.ndarray:
    # c_j(k) = <u_j(k), khat(k)>, conjugate-linear in u
    return np.einsum("njc,nc->nj", np.conj(eig.u), khat)


def _rebuild(eig: EigenSystem, coeffs: np.ndarray) -> np.ndarray:
    return np.einsum("nj,njc->nc", coeffs, eig.u)


def _tail_check(state: StateVector, tail_tol: float, what: str) -> None:
    norms = state.site_norms()
    guard = min(2, state.n_sites)
    worst = float(max(np.max(norms[:guard]), np.max(norms[-guard:])))
    if worst > tail_tol:
        raise TailToleranceError(
            f"{what}: window edge amplitude {worst:.3e} exceeds tail tolerance "
            f"{tail_tol:.3e}; enlarge the window/grid"
        )


def _apply_multiplier(
    state: StateVector,
    eig: EigenSystem,
    mult: np.ndarray,
    tail_tol: float,
    what: str,
) -> StateVector:
    """Branchwise multiplication operator m_j(k) through the grid.

    The input is embedded centrally in an N-site window; the output is the
    N-periodization truncated to that window, accepted only if its edge
    amplitudes sit below tail_tol.
    """
    N = eig.grid.N
    if state.n_sites > N:
        raise ValueError(f"state window {state.n_sites} exceeds grid N={N}")
    pad = N - state.n_sites
    lo = state.x_min - pad // 2
    work = rewindow(state, lo, lo + N - 1)
    khat = forward_dft(work, eig.grid)
    out_hat = _rebuild(eig, _branch_coefficients(eig, khat) * mult)
    out = inverse_dft(out_hat, eig.grid, work.x_min)
    _tail_check(out, tail_tol, what)
    return out


def _pointwise_branch_multiplier(state: StateVector, m0: complex, m1: complex) -> StateVector:
    amps = state.amps.copy()
    amps[:, 0] *= m0
    amps[:, 1] *= m1
    return StateVector(state.x_min, amps)


def apply_v0(state: StateVector, eig: EigenSystem, tail_tol: float = 1e-10) -> StateVector:
    """Asymptotic velocity operator V0: multiplication by v_j(k) branchwise.

    Bounded by |a|; for a diagonal coin it acts exactly in position space.
    """
    if eig.diagonal:
        return _pointwise_branch_multiplier(state, -1.0, 1.0)
    return _apply_multiplier(state, eig, eig.v, tail_tol, "apply_v0")


def apply_function_of_v0(
    func,
    state: StateVector,
    eig: EigenSystem,
    tail_tol: float = 1e-10,
) -> StateVector:
    """G(V0) for a scalar function G (must accept ndarray input)."""
    if eig.diagonal:
        m = func(np.array([-1.0, 1.0]))
        return _pointwise_branch_multiplier(state, complex(m[0]), complex(m[1]))
    return _apply_multiplier(state, eig, func(eig.v), tail_tol, "apply_function_of_v0")


def apply_resolvent_v0(
    z: complex,
    state: StateVector,
    eig: EigenSystem,
    tail_tol: float = 1e-10,
) -> StateVector:
    """(z - V0)^(-1); requires Im z != 0 (norm bounded by 1/|Im z|)."""
    z = complex(z)
    if z.imag == 0.0:
        raise ValueError("resolvent needs Im z != 0")
    if eig.diagonal:
        return _pointwise_branch_multiplier(state, 1.0 / (z + 1.0), 1.0 / (z - 1.0))
    return _apply_multiplier(state, eig, 1.0 / (z - eig.v), tail_tol, "apply_resolvent_v0")


def apply_with_auto_grid(op, state, coin, tail_tol: float = 1e-10, pad: int = 256,
                         max_nodes: int = 1 << 16):
    """Run a grid-based V0 operation, doubling the grid until its tails fit.

    op(state, eig, tail_tol) is retried on a doubled grid whenever the
    output fails its tail check.  Kernels of the smooth symbols in play
    decay subexponentially in position, so a few doublings always settle
    the window; max_nodes caps the search before the final error escapes.
    """
    N = next_pow2(state.n_sites + 2 * pad)
    while True:
        eig = eigensystem(coin, KGrid(N))
        try:
            return op(state, eig, tail_tol)
        except TailToleranceError:
            if 2 * N > max_nodes:
                raise
            N *= 2


def _smooth_step(u: np.ndarray) -> np.ndarray:
    """C-infinity monotone step: 0 for u <= 0, 1 for u >= 1."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        fa = np.where(u > 0.0, np.exp(-1.0 / np.where(u > 0.0, u, 1.0)), 0.0)
        fb = np.where(u < 1.0, np.exp(-1.0 / np.where(u < 1.0, 1.0 - u, 1.0)), 0.0)
    return fa / (fa + fb)


@dataclass(frozen=True)
class FilterSpec:
    """Velocity cutoff scale; must satisfy 0 < eps < |a|/6 for the coin used.

    mollifier(s) is 1 on |s| <= 2 eps and 0 on |s| >= 3 eps; pass_ramp(s) is
    0 on |s| <= 3 eps and 1 on |s| >= 4 eps, so the two have disjoint support
    and filtering annihilates the mollified operator exactly.
    """

    eps: float

    def __post_init__(self):
        if not (math.isfinite(self.eps) and self.eps > 0.0):
            raise ValueError(f"eps must be positive, got {self.eps!r}")

    def validate_for(self, coin: CoinSpec) -> None:
        if not self.eps < coin.a_mod / 6.0:
            raise ValueError(
                f"eps={self.eps} must be below |a|/6 = {coin.a_mod / 6.0}"
            )

    def mollifier(self, s) -> np.ndarray:
        u = (np.abs(s) - 2.0 * self.eps) / self.eps
        return 1.0 - _smooth_step(u)

    def pass_ramp(self, s) -> np.ndarray:
        u = (np.abs(s) - 3.0 * self.eps) / self.eps
        return _smooth_step(u)


def velocity_filter(
    state: StateVector,
    filt: FilterSpec,
    eig: EigenSystem,
    tail_tol: float = 1e-10,
) -> StateVector:
    """Remove slow-velocity content: branchwise pass_ramp(|v_j(k)|).

    The output psi satisfies G_eps(V0) psi = 0 up to grid accuracy, since the
    mollifier and the ramp have disjoint supports.  Raises if the filter
    leaves less than 1e-8 of the input norm.
    """
    filt.validate_for(eig.coin)
    in_norm = math.sqrt(float(np.sum(np.abs(state.amps) ** 2)))
    if eig.diagonal:
        # |v| = 1 >= 4 eps (eps < 1/6): the filter is the identity
        out = state.copy()
    else:
        out = _apply_multiplier(
            state, eig, filt.pass_ramp(np.abs(eig.v)), tail_tol, "velocity_filter"
        )
    out_norm = math.sqrt(float(np.sum(np.abs(out.amps) ** 2)))
    if out_norm < 1e-8 * in_norm:
        raise FilterAnnihilationError(
            f"filter with eps={filt.eps} annihilated the state "
            f"(norm ratio {out_norm / max(in_norm, 1e-300):.3e})"
        )
    return out


@dataclass(frozen=True)
class SpectrumArcs:
    """Spectrum of U0 on the unit circle.

    kind is one of "full_circle", "arcs", "points".  Arcs are (lo, hi) phase
    pairs with lo in [0, 2 pi) and hi possibly beyond 2 pi (wrap as needed);
    points are bare phases.
    """

    kind: str
    arcs: tuple = ()
    points: tuple = ()


def u0_spectrum(coin: CoinSpec, grid: KGrid | None = None) -> SpectrumArcs:
    """Closed-form spectrum: the full circle for |a| = 1, two symmetric arcs
    for 0 < |a| < 1 (half-gap arccos |a| around the phases delta/2 and
    delta/2 + pi), and two points +-i e^{i delta/2} for a = 0.

    The grid argument is accepted for interface symmetry; the arcs do not
    depend on it (see spectrum_phase_samples for grid samples).
    """
    half = 0.5 * coin.delta
    if coin.a_mod == 1.0:
        return SpectrumArcs("full_circle", arcs=((0.0, _TWO_PI),))
    if coin.a_mod == 0.0:
        p = sorted(((half + 0.5 * math.pi) % _TWO_PI, (half + 1.5 * math.pi) % _TWO_PI))
        return SpectrumArcs("points", points=tuple(p))
    gap = math.acos(coin.a_mod)
    a0 = (half + gap) % _TWO_PI
    a1 = (half + math.pi + gap) % _TWO_PI
    width = math.pi - 2.0 * gap
    return SpectrumArcs("arcs", arcs=((a0, a0 + width), (a1, a1 + width)))


def spectrum_phase_samples(coin: CoinSpec, grid: KGrid) -> np.ndarray:
    """Eigenvalue phases arg lambda_j(k_m) in [0, 2 pi), shape (N, 2)."""
    eig = eigensystem(coin, grid)
    return np.angle(eig.lam) % _TWO_PI


def dump_eigensystem_csv(eig: EigenSystem, path) -> None:
    """One row per (node, branch): k, branch, Re lambda, Im lambda, v."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "branch", "re_lambda", "im_lambda", "v"])
        k = eig.grid.nodes
        for m in range(eig.grid.N):
            for j in range(2):
                w.writerow(
                    [
                        format(k[m], ".17g"),
                        j + 1,
                        format(eig.lam[m, j].real, ".17g"),
                        format(eig.lam[m, j].imag, ".17g"),
                        format(eig.v[m, j], ".17g"),
                    ]
                )
