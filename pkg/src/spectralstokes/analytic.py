"""Closed-form oscillatory flow profiles for the validation geometries.

Channel and pipe profiles are expressed per frequency as complex fields; the
time-domain value is ``real(u_tilde * exp(1j*omega*t))``.  The channel uses
``Lambda**2 = +1j*W`` with hyperbolic cosines, the pipe ``Lambda**2 = -1j*W``
with Bessel functions; both branches reduce to the parabolic/Poiseuille
profile at ``omega = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import FluidProps
from .bessel import bessel_j


@dataclass
class ChannelCase:
    """Plane channel of half-height ``half_height`` driven by inlet traction."""

    half_height: float
    length: float
    traction: complex
    fluid: FluidProps

    def __post_init__(self):
        if self.half_height <= 0 or self.length <= 0:
            raise ValueError("channel dimensions must be positive")

    def womersley(self, omega: float) -> float:
        return omega * self.half_height**2 / self.fluid.kinematic_viscosity

    def omega_for(self, womersley: float) -> float:
        return womersley * self.fluid.kinematic_viscosity / self.half_height**2


@dataclass
class PipeCase:
    """Circular pipe of radius ``radius`` driven by inlet traction."""

    radius: float
    length: float
    traction: complex
    fluid: FluidProps

    def __post_init__(self):
        if self.radius <= 0 or self.length <= 0:
            raise ValueError("pipe dimensions must be positive")

    def womersley(self, omega: float) -> float:
        return omega * self.radius**2 / self.fluid.kinematic_viscosity

    def omega_for(self, womersley: float) -> float:
        return womersley * self.fluid.kinematic_viscosity / self.radius**2


def channel_velocity(case: ChannelCase, y, omega: float):
    """Complex streamwise velocity at height ``y`` (|y| <= H) for one frequency."""
    y = np.asarray(y, dtype=float)
    h, hh = case.traction, case.half_height
    mu, rho = case.fluid.viscosity, case.fluid.density
    if omega == 0.0:
        return (h / (2.0 * mu * case.length)) * (hh + y) * (hh - y) + 0j
    w = case.womersley(omega)
    lam = np.sqrt(1j * w)
    prof = 1.0 - np.cosh(lam * y / hh) / np.cosh(lam)
    return (-1j * h / (rho * case.length * omega)) * prof


def pipe_velocity(case: PipeCase, r, omega: float):
    """Complex streamwise velocity at radius ``r`` (0 <= r <= R) for one frequency."""
    r = np.asarray(r, dtype=float)
    h, rad = case.traction, case.radius
    mu, rho = case.fluid.viscosity, case.fluid.density
    if omega == 0.0:
        return (h / (4.0 * mu * case.length)) * (rad**2 - r**2) + 0j
    w = case.womersley(omega)
    lam = np.sqrt(-1j * w)
    j0_lam = bessel_j(0, lam)
    if abs(j0_lam) < 1e-300:
        raise ZeroDivisionError("J0(Lambda) vanished; profile undefined at this frequency")
    prof = 1.0 - bessel_j(0, lam * r / rad) / j0_lam
    return (-1j * h / (rho * case.length * omega)) * prof


def womersley_norms(case: PipeCase, omega: float, n_quad: int = 384):
    """L2 norm and the H2/H3 radial-derivative seminorms of the pipe profile.

    Radial Gauss quadrature of ``integral(2 pi r |z_k|^2 dr)`` with the
    Bessel-combination integrands of the oscillatory solution.
    """
    if omega <= 0.0:
        raise ValueError("womersley_norms requires omega > 0")
    w = case.womersley(omega)
    lam = np.sqrt(-1j * w)
    rad = case.radius
    j0_lam = bessel_j(0, lam)

    x, gw = np.polynomial.legendre.leggauss(n_quad)
    r = 0.5 * rad * (x + 1.0)
    gw = 0.5 * rad * gw

    arg = lam * r / rad
    j0 = bessel_j(0, arg)
    j1 = bessel_j(1, arg)
    j2 = bessel_j(2, arg)
    j3 = bessel_j(3, arg)

    z1 = 1.0 - j0 / j0_lam
    z2 = (j2 - j0) / (2.0 * j0_lam)
    z3 = (3.0 * j1 - j3) / (4.0 * j0_lam)

    def radial(z):
        return np.sqrt(np.sum(gw * 2.0 * np.pi * r * np.abs(z) ** 2))

    pref = abs(case.traction) / (case.fluid.density * omega)
    scale = abs(lam) / rad
    return (
        pref * radial(z1),
        pref * scale**2 * radial(z2),
        pref * scale**3 * radial(z3),
    )
