"""Dressed states of the driven atom and the squeezing parameters they fix.

All frequencies are angular (rad/s) and hbar = 1. The drive coupling
``Omega`` and cavity coupling ``g`` are taken real and positive.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDriveError, RegimeError, RegimeWarning

DEGENERACY_TOL = 1e-6
REGIME_TOL = 0.05


@dataclass(frozen=True)
class DriveParams:
    """Classical drive and cavity coupling.

    Either give ``Delta`` directly or both absolute frequencies
    ``omega0`` and ``omegaL`` (then ``Delta = omegaL - omega0``).
    """

    Omega: float
    g: float
    Delta: float | None = None
    omega0: float | None = None
    omegaL: float | None = None

    def __post_init__(self):
        if not self.Omega > 0:
            raise RegimeError(f"Omega must be real and positive, got {self.Omega}")
        if not self.g > 0:
            raise RegimeError(f"g must be real and positive, got {self.g}")
        if self.omega0 is not None and self.omegaL is not None:
            detuning = self.omegaL - self.omega0
            if self.Delta is None:
                object.__setattr__(self, "Delta", detuning)
            elif not math.isclose(self.Delta, detuning, rel_tol=1e-12, abs_tol=1e-12 * abs(self.omegaL)):
                raise RegimeError(f"Delta={self.Delta} disagrees with omegaL - omega0 = {detuning}")
        if self.Delta is None:
            raise RegimeError("need Delta or both omega0 and omegaL")
        if self.g / self.Omega > 0.1:
            warnings.warn(RegimeWarning(f"g/Omega = {self.g / self.Omega:.3g} is not small (> 0.1)"), stacklevel=3)

    def flipped(self) -> DriveParams:
        """Same drive with the detuning sign reversed (protocol step 2)."""
        return DriveParams(self.Omega, self.g, -self.Delta)


@dataclass(frozen=True)
class DressedStates:
    """Eigenbasis of ``H0 = -Delta |e><e| + Omega (|e><g| + |g><e|)``.

    ``plus_coeffs`` and ``minus_coeffs`` are the ``(g, e)`` components:
    ``|+> = sin(theta)|g> + cos(theta)|e>``, ``|-> = cos(theta)|g> - sin(theta)|e>``.
    """

    Delta: float
    Omega: float
    d: float
    theta: float
    energy_plus: float
    energy_minus: float

    @property
    def tan_theta(self) -> float:
        return math.tan(self.theta)

    @property
    def plus_coeffs(self) -> tuple[float, float]:
        return (math.sin(self.theta), math.cos(self.theta))

    @property
    def minus_coeffs(self) -> tuple[float, float]:
        return (math.cos(self.theta), -math.sin(self.theta))

    def basis_matrix(self) -> np.ndarray:
        """Columns are ``|+>, |->`` in the bare ``(|g>, |e>)`` basis."""
        return np.array([self.plus_coeffs, self.minus_coeffs]).T


@dataclass(frozen=True)
class DressedParams(DressedStates):
    """Dressed states plus the squeezing parameters of the effective interaction."""

    g: float = float("nan")
    mu: float = float("nan")
    r_mu: float = float("nan")
    Omega_b: float = float("nan")
    delta_sign: int = 0
    regime_ok: bool = False


@dataclass(frozen=True)
class ModeSetup:
    omega1: float
    omega2: float
    delta1: float
    delta2: float


def _d_minus_delta(Delta, Omega, d):
    # d - Delta without cancellation for large positive Delta
    return 4.0 * Omega**2 / (d + Delta) if Delta > 0 else d - Delta


def dressed_states(Delta, Omega) -> DressedStates:
    """Splitting ``d``, mixing angle and energies ``-(Delta -+ d)/2`` of ``|+->``."""
    if not Omega > 0:
        raise RegimeError(f"Omega must be real and positive, got {Omega}")
    d = math.hypot(Delta, 2.0 * Omega)
    theta = math.atan2(2.0 * abs(Omega), _d_minus_delta(Delta, Omega, d))
    return DressedStates(
        Delta=float(Delta),
        Omega=float(Omega),
        d=d,
        theta=theta,
        energy_plus=-(Delta - d) / 2.0,
        energy_minus=-(Delta + d) / 2.0,
    )


def squeeze_params(Delta, Omega, g, *, regime_tol=REGIME_TOL) -> DressedParams:
    """Full parameter set: ``mu``, ``r_mu = artanh(mu)`` and ``Omega_b``.

    ``mu = tan^2(theta)`` if ``|tan(theta)| < 1`` and ``tan^-2(theta)``
    otherwise; ``Omega_b = g sqrt((1 - mu) / (1 + mu))``. ``regime_ok`` is
    ``g / d < regime_tol``.

    Raises
    ------
    DegenerateDriveError
        If ``|tan(theta)|`` is within 1e-6 of 1 (this includes ``Delta = 0``).
    """
    if not g > 0:
        raise RegimeError(f"g must be real and positive, got {g}")
    ds = dressed_states(Delta, Omega)
    t = abs(2.0 * Omega / _d_minus_delta(Delta, Omega, ds.d))
    if abs(t - 1.0) < DEGENERACY_TOL:
        raise DegenerateDriveError(
            f"|tan(theta)| = {t:.9f} is degenerate with 1 (Delta = {Delta}): mu -> 1 and r_mu diverges"
        )
    mu = t**2 if t < 1 else t**-2
    return DressedParams(
        **ds.__dict__,
        g=float(g),
        mu=mu,
        r_mu=math.atanh(mu),
        Omega_b=g * math.sqrt((1.0 - mu) / (1.0 + mu)),
        delta_sign=1 if Delta > 0 else -1,
        regime_ok=g / ds.d < regime_tol,
    )


def mode_frequencies(omegaL, Delta, Omega) -> ModeSetup:
    """Cavity modes on the Rabi sidebands: ``delta1 = d``, ``delta2 = -d``."""
    d = dressed_states(Delta, Omega).d
    return ModeSetup(omega1=omegaL - d, omega2=omegaL + d, delta1=d, delta2=-d)


def drive_for_mu(mu_target, Omega, sign=1) -> float:
    """Detuning that produces ``mu_target``: ``sign * Omega (1 - mu) / sqrt(mu)``."""
    if not 0 < mu_target < 1:
        raise RegimeError(f"mu must lie in (0, 1), got {mu_target}")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if not Omega > 0:
        raise RegimeError("Omega must be positive")
    return sign * Omega * (1.0 - mu_target) / math.sqrt(mu_target)


def squeeze_params_for_mu(mu, Omega, g, sign=1, **kw) -> DressedParams:
    return squeeze_params(drive_for_mu(mu, Omega, sign), Omega, g, **kw)
