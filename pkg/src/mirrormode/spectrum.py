"""Resonance-fluorescence spectra and the absolute power calibration chain.

The two-time correlation comes from the quantum regression theorem on the
4x4 Liouvillian; the power spectral density is its direct (FFT-free) cosine
transform, symmetrized, scaled so the incoherent part integrates to
gamma_r (rho_11 - |<sm>|^2).  The coherent delta peak is reported as a
separate scalar, never binned.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConvergenceError, UnresolvedError, WindowError
from .hilbert import SIGMA_MINUS, SIGMA_PLUS
from .qubit import SystemParams, liouvillian, steady_state_analytic

HBAR = 1.054571817e-34  # J s
TWOPI = 2.0 * np.pi


@dataclass(frozen=True)
class Spectrum:
    """One-sided-transform PSD on a symmetric frequency grid (rad/s offsets)."""

    freqs: np.ndarray
    psd: np.ndarray
    coherent_flux: float = 0.0

    def __post_init__(self):
        if np.any(np.diff(self.freqs) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if self.psd.min() < -1e-10 * max(self.psd.max(), 1e-300):
            raise ValueError("PSD significantly negative after symmetrization")

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["f_hz_offset", "psd"])
            for f, p in zip(self.freqs, self.psd):
                w.writerow([f"{f / TWOPI:.12g}", f"{p:.12g}"])


@dataclass(frozen=True)
class CalibrationFit:
    """Unit-slope line fit P_meas = P + G."""

    gain_db: float
    intercept_sigma: float
    points: list
    residuals: np.ndarray


def two_time_correlation(p: SystemParams, tau_max: float,
                         n_points: int = 4001) -> tuple[np.ndarray, np.ndarray]:
    """<sigma_+(t + tau) sigma_-(t)> in steady state on a uniform tau grid.

    C(0) equals the excited-state population; C(infinity) the coherent part
    |<sigma_->|^2.
    """
    rho_ss = steady_state_analytic(p).rho
    liou = liouvillian(p)
    evals, vmat = np.linalg.eig(liou)
    vinv = np.linalg.inv(vmat)
    r0 = (SIGMA_MINUS @ rho_ss).reshape(-1)
    w = SIGMA_PLUS.T.reshape(-1)
    coef = (w @ vmat) * (vinv @ r0)
    taus = np.linspace(0.0, tau_max, n_points)
    corr = np.exp(np.outer(taus, evals)) @ coef
    return taus, corr


def psd(taus: np.ndarray, corr: np.ndarray, p: SystemParams,
        freqs: np.ndarray | None = None,
        decay_tol: float = 1e-6) -> Spectrum:
    """Incoherent emission PSD from a decayed correlation trace.

    P(w) = (gamma_r/pi) Re int_0^tau_max (C(s) - C_inf) e^{i w s} ds, then
    symmetrized; int P dw = gamma_r (rho_11 - |<sm>|^2).  The coherent flux
    gamma_r |<sm>|^2 is returned as the separate delta-peak weight.  Raises
    WindowError when the connected correlation has not decayed by tau_max.
    """
    sm_ss = complex(np.trace(SIGMA_MINUS @ steady_state_analytic(p).rho))
    c_inf = abs(sm_ss) ** 2
    connected = corr - c_inf
    c0 = abs(connected[0])
    if c0 > 0 and abs(connected[-1]) > decay_tol * c0:
        raise WindowError(
            f"correlation tail {abs(connected[-1]) / c0:.2e} of C(0); "
            "increase tau_max")
    if freqs is None:
        span = 4.0 * max(np.sqrt(p.omega**2 + p.delta**2), 5.0 * p.gamma_2)
        freqs = np.linspace(-span, span, 2001)
    wts = np.full(len(taus), taus[1] - taus[0])
    wts[0] = wts[-1] = 0.5 * (taus[1] - taus[0])
    kernel = np.exp(1j * np.outer(freqs, taus))
    vals = (p.gamma_r / np.pi) * (kernel @ (connected * wts)).real
    if p.delta == 0.0 and len(freqs) > 2 and np.allclose(freqs, -freqs[::-1]):
        # resonant drive: spectrum is even; average out quadrature noise
        asym = np.abs(vals - vals[::-1]).max()
        if asym > 1e-6 * max(vals.max(), 1e-300):
            raise WindowError(f"PSD asymmetry {asym:.2e} at zero detuning")
        vals = 0.5 * (vals + vals[::-1])
    vals = np.where(np.abs(vals) < 1e-12 * max(vals.max(), 1e-300), 0.0,
                    np.maximum(vals, 0.0))
    return Spectrum(freqs=freqs, psd=vals,
                    coherent_flux=float(p.gamma_r * c_inf))


def emission_spectrum(p: SystemParams, n_points: int = 4001,
                      freqs: np.ndarray | None = None) -> Spectrum:
    """Convenience: pick tau_max from the slowest Liouvillian decay, then psd()."""
    evals = np.linalg.eigvals(liouvillian(p))
    rates = -evals.real
    slow = rates[rates > 1e-6 * rates.max()].min()
    taus, corr = two_time_correlation(p, 30.0 / slow, n_points)
    return psd(taus, corr, p, freqs=freqs)


@dataclass(frozen=True)
class RabiFit:
    omega: float
    omega_sigma: float
    cost: float


def fit_rabi_from_psd(spec: Spectrum, p_init: SystemParams,
                      rel_bracket: float = 0.5,
                      error_limit: float = 0.25) -> RabiFit:
    """Least-squares Rabi frequency from a measured PSD.

    The model is this module's own regression-theorem PSD with all rates held
    at ``p_init``; only omega floats.  The 1-sigma error comes from the
    residual curvature; UnresolvedError fires when the fit cannot constrain
    omega (no sideband structure, error above ``error_limit`` relative).
    """
    om0 = max(p_init.omega, 0.2 * p_init.gamma_2)

    def model(om):
        return emission_spectrum(p_init.with_drive(p_init.delta, om),
                                 freqs=spec.freqs).psd

    def cost(om):
        return float(np.sum((model(om) - spec.psd) ** 2))

    res = minimize_scalar(cost, bounds=((1 - rel_bracket) * om0,
                                        (1 + rel_bracket) * om0),
                          method="bounded",
                          options=dict(xatol=om0 * 1e-6))
    if not res.success:
        raise ConvergenceError("Rabi fit failed", best=res.x)
    om_fit = float(res.x)
    # curvature-based 1-sigma: sigma^2 = 2 s^2 / C''(omega)
    h = max(1e-4 * om_fit, 1e-4 * p_init.gamma_2)
    c0, cp, cm = res.fun, cost(om_fit + h), cost(om_fit - h)
    curv = (cp + cm - 2.0 * c0) / (h * h)
    dof = max(len(spec.psd) - 1, 1)
    noise_var = c0 / dof
    if curv <= 0:
        raise UnresolvedError("flat residual landscape: sidebands unresolved")
    sigma = float(np.sqrt(2.0 * noise_var / curv))
    if sigma > error_limit * om_fit:
        raise UnresolvedError(
            f"omega error {sigma / om_fit:.1%} exceeds {error_limit:.0%}: "
            "sidebands merged")
    return RabiFit(omega=om_fit, omega_sigma=sigma, cost=float(res.fun))


def sideband_positions(spec: Spectrum) -> tuple[float, float]:
    """Frequencies of the local PSD maxima away from the carrier."""
    p = spec.psd
    interior = (p[1:-1] > p[:-2]) & (p[1:-1] > p[2:])
    peaks = np.where(interior)[0] + 1
    pos = [spec.freqs[i] for i in peaks if spec.freqs[i] > 0]
    neg = [spec.freqs[i] for i in peaks if spec.freqs[i] < 0]
    if not pos or not neg:
        raise UnresolvedError("no sidebands found")
    return float(max(neg, key=lambda f: spec.psd[np.searchsorted(spec.freqs, f)])), \
        float(max(pos, key=lambda f: spec.psd[np.searchsorted(spec.freqs, f)]))


def rabi_to_power(omega: float, omega01: float, gamma_r: float) -> float:
    """Drive power at the qubit in dBm: 10 log10(hbar w01 omega^2 / (4 gamma_r) / 1 mW)."""
    if omega <= 0 or omega01 <= 0 or gamma_r <= 0:
        raise ValueError("all rates must be positive")
    watts = HBAR * omega01 * omega * omega / (4.0 * gamma_r)
    return float(10.0 * np.log10(watts / 1e-3))


def fit_gain(points) -> CalibrationFit:
    """Unit-slope fit P_meas = P + G; two-standard-deviation error on G."""
    pts = [(float(a), float(b)) for a, b in points]
    if len(pts) < 2:
        raise ValueError("need at least two calibration points")
    diffs = np.array([b - a for a, b in pts])
    gain = float(diffs.mean())
    resid = diffs - gain
    sigma2 = float(2.0 * resid.std(ddof=1) / np.sqrt(len(pts))) if len(pts) > 2 \
        else float(abs(resid).max())
    return CalibrationFit(gain_db=gain, intercept_sigma=sigma2, points=pts,
                          residuals=resid)


def calibration_to_csv(path, points) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p_in_dbm", "p_meas_dbm"])
        for a, b in points:
            w.writerow([f"{a:.12g}", f"{b:.12g}"])
