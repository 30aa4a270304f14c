"""Pseudo-spectral integrator for u_t + u_xxx - 6 u^2 u_x = eps * u^ell.

Ground truth for everything else in the package: the scattering round trips,
the flow consistency checks and the long-time asymptotics are all validated
against this integrator, so it shares no code with the inverse-scattering
path beyond the grid class.

Scheme: integrating-factor RK4 on a periodic domain.  The third derivative
is removed exactly in Fourier space (the linear factor exp(i k^3 dt) is
unimodular), the nonlinearity is evaluated pointwise in physical space and
its transform is masked by the 2/3 rule, which matters for the u^ell source
at ell = 10.  Real data is kept exactly real by working with rfft spectra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .grids import SpatialGrid, fft_workers
from .scattering import Potential


class StabilityError(RuntimeError):
    """Requested step violates the nonlinear CFL constraint."""


class BoundaryContaminationError(RuntimeError):
    """Solution mass reached the outer monitor band of the periodic domain."""


@dataclass(frozen=True)
class PerturbationSpec:
    """Forcing strength and power for the eps * u^ell source term.

    The smallness theory behind the perturbed flow needs ell > 9; that gate
    is enforced where the theory is used (flow stepping), not here, so the
    oracle can also integrate small-ell test problems.
    """

    epsilon: float = 0.0
    ell: int = 10

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.ell < 1 or self.ell != int(self.ell):
            raise ValueError("ell must be a positive integer")

    def require_theory_gate(self) -> None:
        if self.ell <= 9:
            raise ValueError(f"perturbed-flow theory requires ell > 9, got {self.ell}")


@dataclass
class PDEState:
    """Periodic solution snapshot with conserved-quantity diagnostics."""

    grid: SpatialGrid
    u: np.ndarray
    t: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.shape != (self.grid.n,):
            raise ValueError("state samples do not match grid")

    def conserved(self) -> dict:
        """Mass M = int u^2, energy H = int u_x^2 + u^4, momentum P = int u."""
        h = self.grid.spacing
        k = 2 * np.pi * sfft.rfftfreq(self.grid.n, d=h)
        ux = sfft.irfft(1j * k * sfft.rfft(self.u), n=self.grid.n)
        return {
            "M": float(h * np.sum(self.u**2)),
            "H": float(h * np.sum(ux**2 + self.u**4)),
            "P": float(h * np.sum(self.u)),
        }

    def boundary_level(self) -> float:
        m = max(1, self.grid.n // 20)
        au = np.abs(self.u)
        return float(max(au[:m].max(), au[-m:].max()))

    def as_potential(self) -> Potential:
        return Potential(self.grid, self.u.copy())


class MKdVIntegrator:
    """Integrating-factor RK4 stepper on a fixed periodic grid."""

    def __init__(self, grid: SpatialGrid, spec: PerturbationSpec = PerturbationSpec()):
        self.grid = grid
        self.spec = spec
        n = grid.n
        self.k = 2 * np.pi * sfft.rfftfreq(n, d=grid.spacing)
        self.kd = self.k.copy()
        self.kd[-1] = 0.0 if n % 2 == 0 else self.kd[-1]  # dead Nyquist for odd derivative
        # 2/3-rule mask for products formed in physical space
        self.dealias = (self.k <= (2.0 / 3.0) * self.k.max()).astype(float)

    def _nonlinear(self, uhat: np.ndarray) -> np.ndarray:
        w = fft_workers()
        u = sfft.irfft(uhat, n=self.grid.n, workers=w)
        ux = sfft.irfft(1j * self.kd * uhat, n=self.grid.n, workers=w)
        nl = 6.0 * u * u * ux
        if self.spec.epsilon != 0.0:
            nl = nl + self.spec.epsilon * u**self.spec.ell
        return self.dealias * sfft.rfft(nl, workers=w)

    def max_step(self, u: np.ndarray) -> float:
        """Nonlinear CFL bound dt <= 0.5 h / max|u|^2 (linear part is exact)."""
        peak = float(np.abs(u).max())
        if peak == 0.0:
            return math.inf
        return 0.5 * self.grid.spacing / peak**2

    def step(self, state: PDEState, dt: float) -> PDEState:
        if dt <= 0:
            raise ValueError("dt must be positive")
        if dt > self.max_step(state.u) * (1 + 1e-12):
            raise StabilityError(
                f"dt = {dt:.3e} exceeds nonlinear CFL bound {self.max_step(state.u):.3e}"
            )
        w = fft_workers()
        E = np.exp(0.5j * self.k**3 * dt)  # exact factor for -u_xxx over dt/2
        E2 = E * E
        uhat = sfft.rfft(state.u, workers=w)
        k1 = self._nonlinear(uhat)
        k2 = self._nonlinear(E * (uhat + 0.5 * dt * k1))
        k3 = self._nonlinear(E * uhat + 0.5 * dt * k2)
        k4 = self._nonlinear(E2 * uhat + dt * E * k3)
        new_hat = E2 * uhat + (dt / 6.0) * (E2 * k1 + 2.0 * E * (k2 + k3) + k4)
        u_new = sfft.irfft(new_hat, n=self.grid.n, workers=w)
        return PDEState(self.grid, u_new, state.t + dt)


def step(state: PDEState, dt: float, spec: PerturbationSpec = PerturbationSpec()) -> PDEState:
    """One IF-RK4 step; convenience wrapper building a throwaway integrator."""
    return MKdVIntegrator(state.grid, spec).step(state, dt)


def evolve(
    u0: Potential,
    t_final: float,
    spec: PerturbationSpec = PerturbationSpec(),
    snapshot_times=None,
    dt: float = 0.05,
    decay_threshold: float = 1e-8,
    boundary_tol: float | None = None,
    progress: bool = False,
) -> list[PDEState]:
    """Integrate from u0, returning snapshots at the requested times.

    Steps are chosen to land exactly on each snapshot time.  The outer 5% of
    the domain is monitored; crossing ``boundary_tol`` raises, since wrapped
    radiation would silently contaminate later comparisons.
    """
    u0.require_decay(decay_threshold)
    integ = MKdVIntegrator(u0.grid, spec)
    if snapshot_times is None:
        snapshot_times = [t_final]
    times = sorted(float(t) for t in snapshot_times)
    if times and times[-1] > t_final:
        raise ValueError("snapshot time beyond t_final")
    if not times or times[-1] < t_final:
        times.append(t_final)

    state = PDEState(u0.grid, u0.samples.copy(), 0.0)
    state.diagnostics = state.conserved()
    out = []
    if times[0] == 0.0:
        out.append(state)
        times = times[1:]
    for target in times:
        span = target - state.t
        nsteps = max(1, math.ceil(span / dt - 1e-12))
        step_dt = span / nsteps
        cfl = integ.max_step(state.u)
        if step_dt > cfl:
            nsteps = math.ceil(span / cfl)
            step_dt = span / nsteps
        for _ in range(nsteps):
            state = integ.step(state, step_dt)
        state.t = target  # kill accumulated roundoff in the time stamp
        state.diagnostics = state.conserved()
        state.diagnostics["boundary_level"] = state.boundary_level()
        state.diagnostics["dt"] = step_dt
        if boundary_tol is not None and state.diagnostics["boundary_level"] > boundary_tol:
            raise BoundaryContaminationError(
                f"boundary level {state.diagnostics['boundary_level']:.3e} > {boundary_tol:.0e} at t = {state.t}"
            )
        out.append(state)
        if progress:
            print(f"  pde t={state.t:g} max|u|={np.abs(state.u).max():.4e}")
    return out


def airy_propagator(grid: SpatialGrid, u: np.ndarray, t: float) -> np.ndarray:
    """Exact solution of u_t + u_xxx = 0 on the periodic grid (linear oracle)."""
    k = 2 * np.pi * sfft.rfftfreq(grid.n, d=grid.spacing)
    return sfft.irfft(np.exp(1j * k**3 * t) * sfft.rfft(u), n=grid.n)
