"""System definition shared by all solvers.

Units: every rate is measured in units of a reference decay rate gamma0 and
time in units of 1/gamma0. Detunings are Delta_m = omega_m - omega_L (laser
frame).

Hamiltonian (laser frame)::

    H = sum_m Delta_m n_m + (V0/2) sum_m a_m^dag^2 a_m^2
        + xpm V0 sum_{m<n} n_m n_n
        + exch V0 (a_2^dag^2 a_1 a_3 + h.c.)          (three modes only)
        + Omega0 (a_p + a_p^dag)

with field decay gamma_m (jump operator sqrt(2 gamma_m) a_m) and thermal
occupancy n_th. ``xpm`` and ``exch`` are dimensionless prefactors; the
four-wave-mixing expansion of a Kerr medium gives xpm=2, exch=1.
"""

import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (BadModeCount, BadPumpIndex, NegativeThermalOccupancy,
                     NonPositiveDecay, NonPositiveScale, ConfigError)

HARMONIC_TOL = 1e-12


def _as_tuple(x, n=None):
    if np.isscalar(x):
        if n is None:
            return (float(x),)
        return tuple(float(x) for _ in range(n))
    return tuple(float(v) for v in x)


@dataclass(frozen=True)
class SystemParams:
    """Immutable parameter set. ``pump`` is 1-based."""

    delta: tuple
    gamma: tuple = None
    v0: float = 1.0
    omega0: float = 0.0
    pump: int = None
    n_th: float = 0.0
    xpm: float = 2.0
    exch: float = 1.0

    def __post_init__(self):
        delta = _as_tuple(self.delta)
        n = len(delta)
        gamma = _as_tuple(1.0 if self.gamma is None else self.gamma, n)
        pump = (n + 1) // 2 if self.pump is None else int(self.pump)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "pump", pump)
        for name in ("v0", "omega0", "n_th", "xpm", "exch"):
            object.__setattr__(self, name, float(getattr(self, name)))

    # derived quantities
    @property
    def n_modes(self):
        return len(self.delta)

    @property
    def p(self):
        """0-based index of the pumped mode."""
        return self.pump - 1

    @property
    def delta_arr(self):
        return np.array(self.delta)

    @property
    def gamma_arr(self):
        return np.array(self.gamma)

    @property
    def delta0(self):
        """Detuning of the pumped mode."""
        return self.delta[self.p]

    @property
    def delta_d(self):
        """Bare-cavity anharmonicity 2 Delta_2 - (Delta_1 + Delta_3)."""
        if self.n_modes != 3:
            return 0.0
        d1, d2, d3 = self.delta
        return 2.0 * d2 - (d1 + d3)

    @property
    def harmonic(self):
        return abs(self.delta_d) < HARMONIC_TOL

    @property
    def spacing(self):
        """Half the splitting of the outer modes, (omega_3 - omega_1)/2."""
        if self.n_modes != 3:
            return 0.0
        return 0.5 * (self.delta[2] - self.delta[0])

    @property
    def has_exchange(self):
        return self.n_modes == 3 and self.exch != 0.0

    def coefficients(self):
        return InteractionCoefficients.from_params(self)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return {
            "delta": list(self.delta), "gamma": list(self.gamma), "v0": self.v0,
            "omega0": self.omega0, "pump": self.pump, "n_th": self.n_th,
            "xpm": self.xpm, "exch": self.exch,
        }

    # constructors
    @classmethod
    def single_mode(cls, delta0, v0=1.0, omega0=0.0, gamma=1.0, n_th=0.0):
        return cls(delta=(delta0,), gamma=(gamma,), v0=v0, omega0=omega0, pump=1, n_th=n_th)

    @classmethod
    def three_mode(cls, delta0, v0=1.0, omega0=0.0, delta_d=0.0, spacing=1.0,
                   gamma=1.0, n_th=0.0, xpm=2.0, exch=1.0):
        """Three modes pumped in the middle.

        The outer modes sit at Delta_0 - delta_d/2 -+ spacing so that
        2 Delta_2 - (Delta_1 + Delta_3) = delta_d.
        """
        d1 = delta0 - 0.5 * delta_d - spacing
        d3 = delta0 - 0.5 * delta_d + spacing
        return cls(delta=(d1, delta0, d3), gamma=gamma, v0=v0, omega0=omega0,
                   pump=2, n_th=n_th, xpm=xpm, exch=exch)

    @classmethod
    def from_frequencies(cls, omega, omega_laser, **kw):
        return cls(delta=tuple(float(w) - float(omega_laser) for w in omega), **kw)

    def with_axis(self, name, value):
        """Return params with one sweep axis set.

        Axes: v0, omega0, delta0 (rigid shift so the pumped mode has the
        given detuning) and delta_d (outer modes moved together, keeping
        their splitting).
        """
        value = float(value)
        if name in ("v0", "omega0", "n_th"):
            return self.replace(**{name: value})
        if name == "delta0":
            shift = value - self.delta0
            return self.replace(delta=tuple(d + shift for d in self.delta))
        if name == "delta_d":
            if self.n_modes != 3:
                raise ConfigError("delta_d axis needs three modes")
            shift = -0.5 * (value - self.delta_d)
            d1, d2, d3 = self.delta
            return self.replace(delta=(d1 + shift, d2, d3 + shift))
        raise ConfigError(f"unknown sweep axis {name!r}")


@dataclass(frozen=True)
class InteractionCoefficients:
    """Drift coefficients obtained from i d(alpha_m)/dt = d<H>/d(alpha_m^*).

    spm:  coefficient of |alpha_m|^2 alpha_m
    xpm:  coefficient of |alpha_n|^2 alpha_m for each other mode n
    exch: (c1, c2, c3) with i dalpha_1/dt += c1 alpha_3^* alpha_2^2,
          i dalpha_2/dt += c2 alpha_2^* alpha_1 alpha_3,
          i dalpha_3/dt += c3 alpha_1^* alpha_2^2
    """

    spm: float
    xpm: float
    exch: tuple = field(default=(0.0, 0.0, 0.0))

    @classmethod
    def from_params(cls, params):
        v = params.v0
        if params.has_exchange:
            e = params.exch * v
            exch = (e, 2.0 * e, e)
        else:
            exch = (0.0, 0.0, 0.0)
        return cls(spm=v, xpm=params.xpm * v, exch=exch)


class Frame(str, Enum):
    laser = "laser"
    local_oscillator = "local_oscillator"


@dataclass(frozen=True)
class FrameSpec:
    frame: Frame = Frame.laser
    omega_lc: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "frame", Frame(self.frame))
        object.__setattr__(self, "omega_lc", float(self.omega_lc))


def frame_shift(mode, omega_lc):
    """Frequency offset added when going from local-oscillator to laser frame.

    Mode 1 (0-based 0) sits below the laser, mode 3 above it; the pumped
    mode is not shifted.
    """
    if mode == 0:
        return -omega_lc
    if mode == 2:
        return omega_lc
    return 0.0


def convert_grid(omega, mode, src, dst, omega_lc):
    """Map a frequency grid of one mode between frames."""
    src, dst = Frame(src), Frame(dst)
    omega = np.asarray(omega, dtype=float)
    if src == dst:
        return omega.copy()
    s = frame_shift(mode, omega_lc)
    return omega + s if dst == Frame.laser else omega - s


def validate(params):
    """Check invariants; return the (already normalized) params."""
    if not isinstance(params, SystemParams):
        raise ConfigError("expected SystemParams")
    n = params.n_modes
    if n < 1:
        raise BadModeCount("need at least one mode", n_modes=n)
    if len(params.gamma) != n:
        raise BadModeCount("gamma length does not match delta", n_gamma=len(params.gamma), n_modes=n)
    bad = [m + 1 for m, g in enumerate(params.gamma) if not g > 0.0]
    if bad:
        raise NonPositiveDecay(f"decay rates must be > 0 (modes {bad})", modes=str(bad))
    if not 1 <= params.pump <= n:
        raise BadPumpIndex(f"pump index {params.pump} outside 1..{n}", pump=params.pump)
    if not params.n_th >= 0.0:
        raise NegativeThermalOccupancy(f"n_th = {params.n_th} < 0", n_th=params.n_th)
    vals = list(params.delta) + [params.v0, params.omega0, params.xpm, params.exch]
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError("non-finite parameter")
    return params


def td_scale(params, n_scale):
    """Thermodynamic-limit scaling V0 -> V0/N, Omega0 -> Omega0 sqrt(N)."""
    n_scale = float(n_scale)
    if not n_scale > 0.0 or not math.isfinite(n_scale):
        raise NonPositiveScale(f"scale factor must be > 0, got {n_scale}", n_scale=n_scale)
    return params.replace(v0=params.v0 / n_scale, omega0=params.omega0 * math.sqrt(n_scale))


def co_rotating(params, nu):
    """Params seen from a frame where alpha_1 ~ e^{-i nu t}, alpha_3 ~ e^{+i nu t}.

    A limit cycle of that frequency becomes a fixed point of the drift with
    these shifted detunings.
    """
    if params.n_modes != 3:
        raise ConfigError("co-rotating frame needs three modes")
    d1, d2, d3 = params.delta
    return params.replace(delta=(d1 - nu, d2, d3 + nu))
