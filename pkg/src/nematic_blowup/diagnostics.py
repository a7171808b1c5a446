"""Energy functionals and dissipation checks evaluated on field snapshots.

The total energy keeps its pi prefactor,

    E = pi int (phi_t^2 + v^2 + phi_r^2 + k^2 sin^2(phi) / r^2) r dr,

while every other report is a bare r dr integral.  The gradient and
potential terms are evaluated cell by cell with phi linear across a cell,
using the exact cell average of sin(phi) along that segment.  With that
choice the cross term of the Bogomolnyi square telescopes to
2k (1 - cos phi(r_max)), so E - 4k pi and the sum-of-squares form agree to
rounding whenever the outer value sits on the profile's far end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NotAvailable, NotReady
from .evolution import FieldState
from .grid import RadialGrid, ddr, weighted_integral
from .profiles import ProfileConstants, ProfileParams, apply_A, eval_I, eval_w0

SECTOR_TOL = 1e-6


@dataclass(frozen=True)
class HEnergy:
    energy: float                 # int (h_t^2 + h_r^2 + h^2/r^2) r dr
    dissipation: float            # int (h_tr^2 + h_t^2/r^2 + h_t^2) r dr
    weighted_dissipation: float   # int h_tr^2 r^(2+delta) dr


@dataclass(frozen=True)
class EnergyReport:
    t: float
    E: float
    E_excess: float
    bogomolnyi_integrand_norm: float
    boundary_defect: float          # -2k pi (1 + cos phi(r_max)); zero in the profile sector
    in_sector: bool
    E0: float
    h_energy: HEnergy | None
    weighted: float
    exterior: float
    e_delta: float                  # instantaneous weighted null-derivative energy (nan without psi_t)
    e_delta_flux: float
    phit_sq: float                  # int phi_t^2 r dr
    vr_sq: float                    # int v_r^2 r dr
    phit_vr: float                  # int phi_t v_r r dr

    @property
    def bogomolnyi_residual(self) -> float:
        return abs(self.E_excess - np.pi * self.bogomolnyi_integrand_norm)

    def dissipation_rhs(self, c0_param: float = np.sqrt(1.5)) -> float:
        """Right side of the energy inequality, from the stored integrals."""
        return _rhs_from_parts(self.phit_sq, self.vr_sq, self.phit_vr, c0_param)


def _check_delta(delta):
    if not (np.isfinite(delta) and 0 < delta < 1):
        raise ConfigurationError(f"delta must lie in (0, 1), got {delta!r}")


def _check_c0(c0_param):
    if not 1.0 < c0_param ** 2 < 2.0:
        raise ConfigurationError(f"c0^2 must lie in (1, 2), got {c0_param ** 2!r}")


# --- cell-staggered energy ---------------------------------------------------

def _cells(grid: RadialGrid, phi):
    """Cell widths, midpoints, jumps and mean sin(phi) over [r_{c-1}, r_c], with r_{-1} = 0."""
    r = grid.nodes
    rl = np.concatenate(([0.0], r[:-1]))
    pl = np.concatenate(([0.0], phi[:-1]))
    h = r - rl
    rm = 0.5 * (r + rl)
    d = phi - pl
    # (cos pl - cos phi) / d, exact for phi linear in the cell
    s = np.sin(0.5 * (phi + pl)) * np.sinc(d / (2 * np.pi))
    return h, rm, d, s


def dirichlet_parts(grid: RadialGrid, phi, k: int):
    """(int phi_r^2 r dr, k^2 int sin^2 phi / r dr, int (phi_r - k sin phi / r)^2 r dr) cellwise."""
    h, rm, d, s = _cells(grid, np.asarray(phi, dtype=float))
    grad = float(np.sum(d * d * rm / h))
    pot = float(k * k * np.sum(s * s * h / rm))
    square = float(np.sum((d / h - k * s / rm) ** 2 * rm * h))
    return grad, pot, square


def _v_r(state: FieldState):
    if state.formulation == "h":
        return state.h_t() - state.phi_t
    return ddr(state.grid, state.v, None)


def _rhs_from_parts(a, b, c, c0_param):
    _check_c0(c0_param)
    c2 = c0_param ** 2
    square = c2 * a + b / c2 + 2 * c
    return -((2 - c2) * a + (1 - 1 / c2) * b + max(square, 0.0))


def dissipation_rhs(state: FieldState, c0_param: float = np.sqrt(1.5), grid=None):
    """(c0 form, exact form) of the rate of change of half the bare energy.

    c0 form:  -int (2 - c0^2) phi_t^2 + (1 - 1/c0^2) v_r^2 + (c0 phi_t + v_r/c0)^2
    exact:    -int 2 phi_t^2 + v_r^2 + 2 phi_t v_r
    """
    _check_c0(c0_param)
    grid = grid or state.grid
    vr = _v_r(state)
    pt = state.phi_t
    c2 = c0_param ** 2
    c0_form = -weighted_integral(grid, (2 - c2) * pt ** 2 + (1 - 1 / c2) * vr ** 2
                                 + (c0_param * pt + vr / c0_param) ** 2, 0, origin_value=0.0)
    exact = -weighted_integral(grid, 2 * pt ** 2 + vr ** 2 + 2 * pt * vr, 0, origin_value=0.0)
    return c0_form, exact


# --- h energies --------------------------------------------------------------

def h_energy_integrals(grid: RadialGrid, h, h_t, delta: float = 0.5) -> HEnergy:
    """Instantaneous h-energy, its dissipation density and the r^(2+delta) weighted h_tr^2."""
    _check_delta(delta)
    r = grid.nodes
    h = np.asarray(h, dtype=float)
    h_t = np.asarray(h_t, dtype=float)
    h_r = ddr(grid, h, 0.0)
    h_tr = ddr(grid, h_t, 0.0)
    energy = weighted_integral(grid, h_t ** 2 + h_r ** 2 + (h / r) ** 2)
    diss = weighted_integral(grid, h_tr ** 2 + (h_t / r) ** 2 + h_t ** 2)
    wdiss = weighted_integral(grid, h_tr ** 2, 1 + delta)
    return HEnergy(energy, diss, wdiss)


def h_energy_report(state: FieldState, grid=None, delta: float = 0.5) -> HEnergy:
    """h-energies of a state carrying h; h_t comes from the evolved h equation."""
    if state.h is None:
        raise NotAvailable("h energies need a state that carries h")
    grid = grid or state.grid
    return h_energy_integrals(grid, state.h, state.h_t(), delta)


# --- null-frame energy -------------------------------------------------------

def null_frame_field(state: FieldState, lam, lam_dot, consts: ProfileConstants, grid=None):
    """psi = A_lambda (u - w0) with u = phi - I_lambda."""
    grid = grid or state.grid
    p = ProfileParams(state.k, lam)
    r = grid.nodes
    w = state.phi - eval_I(p, r) - eval_w0(p, lam_dot, consts, r)
    return apply_A(p, w, grid, origin_value=0.0)


def e_delta_terms(grid: RadialGrid, psi, psi_t, lam, delta: float = 0.5):
    """(instantaneous functional, flux density) of the weighted outgoing null derivative L psi."""
    _check_delta(delta)
    r = grid.nodes
    psi = np.asarray(psi, dtype=float)
    lpsi = ddr(grid, psi, 0.0) + np.asarray(psi_t, dtype=float)
    x = (lam * r) ** delta
    q = 1.0 + r ** delta
    inst = weighted_integral(grid, x / (lam * q) * (lpsi ** 2 + (psi / r) ** 2))
    flux = weighted_integral(grid, x / (lam * q * q * r) * lpsi ** 2 + x / q * psi ** 2 / r ** 3)
    return inst, flux


# --- full report -------------------------------------------------------------

def energy_report(state: FieldState, lam, lam_dot, consts: ProfileConstants, delta: float = 0.5,
                  grid=None, cone_slope: float = 2.0, psi_t=None) -> EnergyReport:
    """All energy functionals at one output time.

    ``psi_t`` is the time derivative of :func:`null_frame_field`, formed by the
    caller from neighbouring outputs; without it the null-frame entries are nan.
    """
    _check_delta(delta)
    grid = grid or state.grid
    k = state.k
    r = grid.nodes
    phi, pt, v = state.phi, state.phi_t, state.v

    grad, pot, square = dirichlet_parts(grid, phi, k)
    kin = weighted_integral(grid, pt ** 2, 0, origin_value=0.0)
    vel = weighted_integral(grid, v ** 2)
    E = np.pi * (kin + vel + grad + pot)
    bog = kin + vel + square
    cos_end = np.cos(phi[-1])
    defect = -2.0 * k * np.pi * (1.0 + cos_end)

    p = ProfileParams(k, lam)
    u = phi - eval_I(p, r)
    u_r = ddr(grid, u, 0.0)
    E0 = weighted_integral(grid, pt ** 2 + u_r ** 2 + (k * u / r) ** 2 + v ** 2)

    phi_r = ddr(grid, phi, 0.0)
    h_en = None
    h_t_sq = 0.0
    if state.h is not None:
        h_t = state.h_t()
        h_en = h_energy_integrals(grid, state.h, h_t, delta)
        h_t_sq = h_t ** 2
    weighted = weighted_integral(grid, h_t_sq + pt ** 2 + phi_r ** 2, 1 + delta)

    mask = r >= cone_slope * state.t
    ext_density = (pt ** 2 + u_r ** 2 + (k * u / r) ** 2 + v ** 2) * mask
    # sharp cutoff: a node contributes its full quadrature weight or nothing
    exterior = float(np.dot(grid.weights(2), ext_density))

    if psi_t is None:
        e_inst = e_flux = float("nan")
    else:
        psi = null_frame_field(state, lam, lam_dot, consts, grid)
        e_inst, e_flux = e_delta_terms(grid, psi, psi_t, lam, delta)

    vr = _v_r(state)
    return EnergyReport(
        t=state.t, E=float(E), E_excess=float(E - 4 * k * np.pi), bogomolnyi_integrand_norm=float(bog),
        boundary_defect=float(defect), in_sector=bool(1.0 + cos_end < SECTOR_TOL),
        E0=float(E0), h_energy=h_en, weighted=float(weighted), exterior=exterior,
        e_delta=float(e_inst), e_delta_flux=float(e_flux),
        phit_sq=float(kin), vr_sq=weighted_integral(grid, vr ** 2, 0, origin_value=0.0),
        phit_vr=weighted_integral(grid, pt * vr, 0, origin_value=0.0),
    )


@dataclass(frozen=True)
class DissipationCheck:
    lhs: float            # d/dt of half the bare energy, centered
    rhs: float            # c0 form
    rhs_exact: float
    residual: float
    residual_exact: float


def dissipation_residual(history, c0_param: float = np.sqrt(1.5), rtol: float = 1e-9) -> DissipationCheck:
    """Compare the centered rate of E/(2 pi) with the dissipation integrals at the middle report."""
    if len(history) != 3:
        raise NotReady(f"need three consecutive reports, got {len(history)}")
    a, b, c = history
    d1, d2 = b.t - a.t, c.t - b.t
    if not (d1 > 0 and abs(d1 - d2) <= rtol * max(d1, d2)):
        raise NotReady(f"output spacing is not uniform ({d1!r} vs {d2!r})")
    lhs = (c.E - a.E) / (d1 + d2) / (2 * np.pi)
    rhs = b.dissipation_rhs(c0_param)
    exact = -(2 * b.phit_sq + b.vr_sq + 2 * b.phit_vr)
    return DissipationCheck(lhs, rhs, exact, abs(lhs - rhs), abs(lhs - exact))
