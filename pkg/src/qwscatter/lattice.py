"""Exact finite-window dynamics for one-dimensional two-state coined walks.

A state is a complex spinor field on a finite integer window.  The walk
moves at most one site per step, so a window sized for the planned number
of steps reproduces the infinite-lattice amplitudes bit for bit: sites the
light cone cannot reach stay exactly zero.  The window boundary is guarded,
never wrapped or reflected; a step that would push amplitude across the
edge raises WindowGuardError.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "WindowGuardError",
    "CoinSpec",
    "PhaseProfile",
    "StateVector",
    "EvolutionPlan",
    "build_coin",
    "hadamard_coin",
    "diagonal_coin",
    "phase_at",
    "coin_difference_norm",
    "zero_state",
    "single_site_state",
    "state_from_amplitudes",
    "rewindow",
    "with_margin",
    "combine",
    "norm",
    "norm_sq",
    "inner",
    "apply_shift",
    "apply_shift_inverse",
    "apply_coin",
    "evolve",
    "support_bounds",
]

_TWO_PI = 2.0 * math.pi


class WindowGuardError(RuntimeError):
    """An evolution step would move amplitude across the window boundary."""


@dataclass(frozen=True)
class CoinSpec:
    """Constant coin [[a, b], [-e^{i delta} b*, e^{i delta} a*]].

    Stored as |a|, arg a, arg b and delta with |b| = sqrt(1 - |a|^2)
    implied, so the matrix is unitary with determinant e^{i delta} by
    construction.  Use build_coin for validated construction.
    """

    a_mod: float
    a_arg: float
    b_arg: float
    delta: float

    @property
    def b_mod(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.a_mod * self.a_mod))

    @property
    def a(self) -> complex:
        return self.a_mod * complex(math.cos(self.a_arg), math.sin(self.a_arg))

    @property
    def b(self) -> complex:
        return self.b_mod * complex(math.cos(self.b_arg), math.sin(self.b_arg))

    @property
    def matrix(self) -> np.ndarray:
        a, b = self.a, self.b
        ph = complex(math.cos(self.delta), math.sin(self.delta))
        return np.array(
            [[a, b], [-ph * b.conjugate(), ph * a.conjugate()]],
            dtype=np.complex128,
        )


def build_coin(a_mod: float, a_arg: float, b_arg: float, delta: float) -> CoinSpec:
    """Validated coin constructor; angles are reduced modulo 2 pi.

    a_mod may overshoot [0, 1] by at most 1e-12 (clamped); anything
    else is rejected.
    """
    vals = (a_mod, a_arg, b_arg, delta)
    if not all(math.isfinite(v) for v in vals):
        raise ValueError(f"coin parameters must be finite, got {vals}")
    if a_mod < -1e-12 or a_mod > 1.0 + 1e-12:
        raise ValueError(f"|a| must lie in [0, 1] (slack 1e-12), got {a_mod!r}")
    a_mod = min(1.0, max(0.0, a_mod))
    return CoinSpec(a_mod, a_arg % _TWO_PI, b_arg % _TWO_PI, delta % _TWO_PI)


def hadamard_coin() -> CoinSpec:
    return build_coin(1.0 / math.sqrt(2.0), 0.0, 0.0, math.pi)


def diagonal_coin(a_arg: float = 0.0, delta: float = 0.0) -> CoinSpec:
    """Coin with |a| = 1: the walk decouples into two chirality channels."""
    return build_coin(1.0, a_arg, 0.0, delta)


@dataclass(frozen=True)
class PhaseProfile:
    """Site-dependent phase theta(x) = g (1 + |x|)^(-gamma).

    The perturbed coin is C(x) = e^{i theta(x)} C0, so gamma sets the decay
    of the perturbation and g its amplitude.
    """

    gamma: float
    g: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 0.0):
            raise ValueError(f"gamma must be positive and finite, got {self.gamma!r}")
        if not (math.isfinite(self.g) and 0.0 <= self.g <= 1.0):
            raise ValueError(f"g must lie in [0, 1], got {self.g!r}")

    def theta(self, x):
        return self.g * (1.0 + np.abs(x)) ** (-self.gamma)


def phase_at(profile: PhaseProfile, x: int) -> float:
    return float(profile.theta(x))


def coin_difference_norm(profile: PhaseProfile, x: int) -> float:
    """Operator norm of C(x) - C0, which is |e^{i theta(x)} - 1| = 2 sin(theta/2).

    theta(x) <= g <= 1 < pi, so the sine is nonnegative.
    """
    return 2.0 * math.sin(0.5 * phase_at(profile, x))


@dataclass
class StateVector:
    """Finitely supported element of l2(Z; C^2) on an explicit window.

    amps has shape (n_sites, 2), site-major, columns (upper, lower);
    site index n corresponds to position x_min + n.
    """

    x_min: int
    amps: np.ndarray

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amps, dtype=np.complex128)
        if amps.ndim != 2 or amps.shape[1] != 2 or amps.shape[0] < 1:
            raise ValueError(f"amps must have shape (n_sites, 2), got {amps.shape}")
        self.amps = amps
        self.x_min = int(self.x_min)

    @property
    def n_sites(self) -> int:
        return self.amps.shape[0]

    @property
    def x_max(self) -> int:
        return self.x_min + self.n_sites - 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.x_min, self.x_min + self.n_sites)

    @property
    def support_radius(self) -> int:
        """Smallest M with psi(x) = 0 for |x| >= M (0 for the zero state)."""
        b = support_bounds(self, 0.0)
        if b is None:
            return 0
        return max(abs(b[0]), abs(b[1])) + 1

    def site_norms(self) -> np.ndarray:
        return np.sqrt(np.abs(self.amps[:, 0]) ** 2 + np.abs(self.amps[:, 1]) ** 2)

    def copy(self) -> "StateVector":
        return StateVector(self.x_min, self.amps.copy())


def zero_state(x_lo: int, x_hi: int) -> StateVector:
    if x_hi < x_lo:
        raise ValueError(f"empty window [{x_lo}, {x_hi}]")
    return StateVector(x_lo, np.zeros((x_hi - x_lo + 1, 2), dtype=np.complex128))


def single_site_state(x: int, upper: complex, lower: complex) -> StateVector:
    return StateVector(x, np.array([[upper, lower]], dtype=np.complex128))


def state_from_amplitudes(x_min: int, amps) -> StateVector:
    return StateVector(x_min, np.array(amps, dtype=np.complex128))


def support_bounds(state: StateVector, tol: float = 0.0):
    """Smallest [lo, hi] holding every site whose spinor norm exceeds tol.

    Returns None when no site qualifies (the empty-support marker).
    """
    if tol < 0.0:
        raise ValueError("tol must be nonnegative")
    hot = np.flatnonzero(state.site_norms() > tol)
    if hot.size == 0:
        return None
    return (state.x_min + int(hot[0]), state.x_min + int(hot[-1]))


def rewindow(state: StateVector, x_lo: int, x_hi: int, clip_tol: float = 0.0) -> StateVector:
    """Copy the state onto the window [x_lo, x_hi].

    Amplitude norm falling outside the new window must not exceed clip_tol;
    with the default 0.0 the new window has to contain the support exactly.
    """
    if x_hi < x_lo:
        raise ValueError(f"empty window [{x_lo}, {x_hi}]")
    out = np.zeros((x_hi - x_lo + 1, 2), dtype=np.complex128)
    src_lo = max(state.x_min, x_lo)
    src_hi = min(state.x_max, x_hi)
    clipped = 0.0
    if src_hi >= src_lo:
        a = src_lo - state.x_min
        b = src_hi - state.x_min + 1
        out[src_lo - x_lo : src_hi - x_lo + 1] = state.amps[a:b]
        clipped = float(
            np.sum(np.abs(state.amps[:a]) ** 2) + np.sum(np.abs(state.amps[b:]) ** 2)
        )
    else:
        clipped = norm_sq(state)
    if math.sqrt(clipped) > clip_tol:
        raise WindowGuardError(
            f"rewindow to [{x_lo}, {x_hi}] clips amplitude of norm "
            f"{math.sqrt(clipped):.3e} > clip_tol {clip_tol:.3e}"
        )
    return StateVector(x_lo, out)


def with_margin(state: StateVector, margin: int) -> StateVector:
    """Copy of the state with `margin` zero sites added on each side."""
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    return rewindow(state, state.x_min - margin, state.x_max + margin)


def _aligned(a: StateVector, b: StateVector):
    lo = min(a.x_min, b.x_min)
    hi = max(a.x_max, b.x_max)
    return rewindow(a, lo, hi).amps, rewindow(b, lo, hi).amps, lo


def combine(ca: complex, a: StateVector, cb: complex, b: StateVector) -> StateVector:
    """ca * a + cb * b on the hull window of the two states."""
    A, B, lo = _aligned(a, b)
    return StateVector(lo, ca * A + cb * B)


def norm_sq(state: StateVector) -> float:
    # fixed summation order: ascending site, upper before lower (C order)
    return float(np.sum(np.abs(state.amps) ** 2))


def norm(state: StateVector) -> float:
    return math.sqrt(norm_sq(state))


def inner(a: StateVector, b: StateVector) -> complex:
    """l2 inner product, conjugate-linear in the first argument."""
    A, B, _ = _aligned(a, b)
    return complex(np.vdot(A, B))


def _shift_amps(arr: np.ndarray) -> np.ndarray:
    # upper moves left, lower moves right; boundary cells must be exactly zero
    if arr[0, 0] != 0.0:
        raise WindowGuardError(
            "upper component at the left window edge is nonzero; widen the window"
        )
    if arr[-1, 1] != 0.0:
        raise WindowGuardError(
            "lower component at the right window edge is nonzero; widen the window"
        )
    out = np.zeros_like(arr)
    out[:-1, 0] = arr[1:, 0]
    out[1:, 1] = arr[:-1, 1]
    return out


def _shift_inv_amps(arr: np.ndarray) -> np.ndarray:
    if arr[-1, 0] != 0.0:
        raise WindowGuardError(
            "upper component at the right window edge is nonzero; widen the window"
        )
    if arr[0, 1] != 0.0:
        raise WindowGuardError(
            "lower component at the left window edge is nonzero; widen the window"
        )
    out = np.zeros_like(arr)
    out[1:, 0] = arr[:-1, 0]
    out[:-1, 1] = arr[1:, 1]
    return out


def apply_shift(state: StateVector) -> StateVector:
    """(S psi)(x) = (psi_upper(x+1), psi_lower(x-1)) on the fixed window."""
    return StateVector(state.x_min, _shift_amps(state.amps))


def apply_shift_inverse(state: StateVector) -> StateVector:
    return StateVector(state.x_min, _shift_inv_amps(state.amps))


def _phase_column(state: StateVector, profile: PhaseProfile) -> np.ndarray:
    return np.exp(1j * profile.theta(state.sites))[:, None]


def apply_coin(
    state: StateVector,
    coin: CoinSpec,
    profile: PhaseProfile | None = None,
    inverse: bool = False,
) -> StateVector:
    """Apply C (or C^-1) sitewise; with a profile, C(x) = e^{i theta(x)} C0."""
    m = coin.matrix
    if inverse:
        out = state.amps @ m.conj()  # (M dagger).T == conj(M)
    else:
        out = state.amps @ m.T
    if profile is not None and profile.g != 0.0:
        ph = _phase_column(state, profile)
        out = out * (np.conj(ph) if inverse else ph)
    return StateVector(state.x_min, out)


def _preflight(state: StateVector, steps: int) -> None:
    b = support_bounds(state, 0.0)
    if b is None:
        return
    if b[0] - steps < state.x_min or b[1] + steps > state.x_max:
        raise WindowGuardError(
            f"window [{state.x_min}, {state.x_max}] cannot absorb {steps} steps "
            f"from support [{b[0]}, {b[1]}]; pad with with_margin first"
        )


def evolve(
    state: StateVector,
    coin: CoinSpec,
    t: int,
    profile: PhaseProfile | None = None,
) -> StateVector:
    """t steps of U = S C (t < 0 applies the inverse walk |t| times).

    The window must admit |t| steps; no padding happens here.  Without a
    profile this is the free walk U0.
    """
    t = int(t)
    if t == 0:
        return state.copy()
    steps = abs(t)
    _preflight(state, steps)
    m = coin.matrix
    phases = None
    if profile is not None and profile.g != 0.0:
        phases = _phase_column(state, profile)
    cur = state.amps
    if t > 0:
        mT = m.T
        for _ in range(steps):
            cur = cur @ mT
            if phases is not None:
                cur = cur * phases
            cur = _shift_amps(cur)
    else:
        mC = m.conj()
        cph = np.conj(phases) if phases is not None else None
        for _ in range(steps):
            cur = _shift_inv_amps(cur)
            cur = cur @ mC
            if cph is not None:
                cur = cur * cph
    return StateVector(state.x_min, cur)


@dataclass(frozen=True)
class EvolutionPlan:
    """Window sizing for a planned number of steps.

    round_trip doubles the margin, for Heisenberg-style conjugations
    (forward t, multiply, backward t) and wave-operator products.
    """

    t_max: int
    x_lo: int
    x_hi: int

    @classmethod
    def for_state(cls, state: StateVector, t_max: int, round_trip: bool = False) -> "EvolutionPlan":
        if t_max < 0:
            raise ValueError("t_max must be nonnegative")
        b = support_bounds(state, 0.0)
        lo, hi = (0, 0) if b is None else b
        steps = (2 if round_trip else 1) * t_max
        return cls(t_max, lo - steps - 1, hi + steps + 1)

    def prepare(self, state: StateVector) -> StateVector:
        return rewindow(state, min(self.x_lo, state.x_min), max(self.x_hi, state.x_max))

    def admits(self, state: StateVector, t: int) -> None:
        b = support_bounds(state, 0.0)
        if b is None:
            return
        steps = abs(int(t))
        if b[0] - steps < state.x_min or b[1] + steps > state.x_max:
            raise WindowGuardError(
                f"plan window [{self.x_lo}, {self.x_hi}] does not admit {t} steps"
            )
