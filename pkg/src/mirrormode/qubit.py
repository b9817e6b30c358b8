"""Driven-qubit dynamics at the end of a semi-infinite line.

Rotating frame of the drive, detuning ``delta = omega_p - omega_01``.  All
rates and frequencies are angular (rad/s); use :meth:`SystemParams.from_mhz`
to enter ordinary MHz values.  The impedance mismatch of the line enters as an
effective radiative rate and phase ``gamma_r e^{i phi}``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConvergenceError, DegenerateError, NoSolutionError, RankError
from .hilbert import IDENTITY_2, SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Z

TWOPI = 2.0 * np.pi

#: fraction of gamma_1 by which derived gamma_p/gamma_n may go negative.
#: Measured rate sets carry statistical zeros (e.g. gamma_2 slightly below
#: gamma_1/2); hard rejection would refuse the device's own numbers.
NEGATIVE_RATE_SLACK = 0.05


@dataclass(frozen=True)
class SystemParams:
    """Emitter, drive and line parameters (angular units).

    gamma_1 = gamma_r + gamma_n is the total relaxation rate and
    gamma_2 = gamma_1/2 + gamma_p the total decoherence rate; both derived
    rates are exposed as properties.
    """

    delta: float = 0.0
    omega: float = 0.0
    gamma_r: float = TWOPI * 1.110e6
    gamma_1: float = TWOPI * 1.110e6
    gamma_2: float = TWOPI * 0.555e6
    phi: float = 0.0
    omega01: float = TWOPI * 5.50703e9

    def __post_init__(self):
        vals = (self.delta, self.omega, self.gamma_r, self.gamma_1,
                self.gamma_2, self.phi, self.omega01)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("non-finite parameter")
        if self.gamma_r < 0 or self.gamma_1 < 0 or self.gamma_2 < 0:
            raise ValueError("decay rates must be nonnegative")
        if abs(self.phi) >= np.pi / 2:
            raise ValueError("|phi| must be below pi/2")
        slack = NEGATIVE_RATE_SLACK * max(self.gamma_1, 1e-300)
        if self.gamma_p < -slack or self.gamma_n < -slack:
            raise ValueError(
                "gamma_2 < gamma_1/2 or gamma_1 < gamma_r beyond statistical slack")

    @property
    def gamma_p(self) -> float:
        return self.gamma_2 - 0.5 * self.gamma_1

    @property
    def gamma_n(self) -> float:
        return self.gamma_1 - self.gamma_r

    @classmethod
    def from_mhz(cls, delta_mhz=0.0, omega_mhz=0.0, gamma_r_mhz=1.110,
                 gamma_1_mhz=1.110, gamma_2_mhz=0.555, phi=0.0,
                 omega01_ghz=5.50703, negate_phi=False) -> "SystemParams":
        """Build from ordinary-frequency inputs (multiplied by 2 pi on load).

        ``negate_phi`` converts a main-text-convention mismatch phase (the
        fitted -0.319) to the internal sign convention.
        """
        return cls(delta=TWOPI * 1e6 * delta_mhz,
                   omega=TWOPI * 1e6 * omega_mhz,
                   gamma_r=TWOPI * 1e6 * gamma_r_mhz,
                   gamma_1=TWOPI * 1e6 * gamma_1_mhz,
                   gamma_2=TWOPI * 1e6 * gamma_2_mhz,
                   phi=-phi if negate_phi else phi,
                   omega01=TWOPI * 1e9 * omega01_ghz)

    def with_drive(self, delta: float, omega: float) -> "SystemParams":
        return replace(self, delta=delta, omega=omega)


@dataclass(frozen=True)
class QubitState:
    """Steady (or any) qubit state with its scalar summaries."""

    rho: np.ndarray
    coherence: float
    population_excited: float
    purity: float

    @classmethod
    def from_rho(cls, rho: np.ndarray) -> "QubitState":
        rho = 0.5 * (rho + rho.conj().T)
        return cls(rho=rho,
                   coherence=float(abs(rho[0, 1])),
                   population_excited=float(rho[1, 1].real),
                   purity=float(np.trace(rho @ rho).real))


@dataclass(frozen=True)
class BoundaryModel:
    """Partial reflector (r1, t1) a distance phi0 before the qubit, attenuation beta."""

    r1: float
    t1: float
    beta: float
    phi0: float
    gamma_r0: float

    def __post_init__(self):
        if not (0 <= self.r1 < 1 and 0 < self.t1 <= 1 and 0 < self.beta <= 1):
            raise ValueError("boundary amplitudes out of range")


def hamiltonian(p: SystemParams) -> np.ndarray:
    """Rotating-frame Hamiltonian -(delta/2) sz + (omega/2) sx."""
    return -0.5 * p.delta * SIGMA_Z + 0.5 * p.omega * SIGMA_X


def _lift(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # row-major vec: vec(A rho B) = (A kron B^T) vec(rho)
    return np.kron(a, b.T)


def _dissipator(c: np.ndarray, rate: float) -> np.ndarray:
    cd = c.conj().T
    return rate * (_lift(c, cd)
                   - 0.5 * _lift(cd @ c, IDENTITY_2)
                   - 0.5 * _lift(IDENTITY_2, cd @ c))


def liouvillian(p: SystemParams) -> np.ndarray:
    """4x4 generator acting on row-major vec(rho).

    L = -i[H, .] + gamma_1 D[sm] + (gamma_p/2) D[sz].  A slightly negative
    gamma_p (statistical zero) is kept as-is: the generator stays trace- and
    Hermiticity-preserving.
    """
    h = hamiltonian(p)
    out = -1j * (_lift(h, IDENTITY_2) - _lift(IDENTITY_2, h))
    out += _dissipator(SIGMA_MINUS, p.gamma_1)
    out += _dissipator(SIGMA_Z, 0.5 * p.gamma_p)
    return out


def steady_state_analytic(p: SystemParams) -> QubitState:
    """Closed-form stationary state of the driven, damped qubit.

    <sigma_-> = omega gamma_1 (delta - i gamma_2) / (2 (omega^2 gamma_2
    + gamma_1 (delta^2 + gamma_2^2))) sits at rho[1, 0].
    """
    den = 2.0 * (p.omega**2 * p.gamma_2 + p.gamma_1 * (p.delta**2 + p.gamma_2**2))
    if den == 0.0:
        raise DegenerateError("steady state undefined: zero denominator")
    sm = p.omega * p.gamma_1 * (p.delta - 1j * p.gamma_2) / den
    r11 = p.omega**2 * p.gamma_2 / den
    rho = np.array([[1.0 - r11, np.conj(sm)], [sm, r11]], dtype=complex)
    return QubitState.from_rho(rho)


def steady_state_numeric(p: SystemParams, kernel_tol: float = 1e-9) -> QubitState:
    """Stationary state as the Liouvillian null vector (cross-check route)."""
    liou = liouvillian(p)
    u, s, vh = np.linalg.svd(liou)
    small = s < kernel_tol * max(s[0], 1e-300)
    if small.sum() != 1:
        raise RankError(f"kernel dimension {small.sum()} != 1")
    rho = vh[-1].conj().reshape(2, 2)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    return QubitState.from_rho(rho)


def reflection_coefficient(p: SystemParams) -> complex:
    """Coherent reflection r = 1 - i gamma_r e^{i phi} gamma_1 (delta - i gamma_2) / (...).

    Reduces to the weak-probe form 1 - i gamma_r e^{i phi}/(delta + i gamma_2)
    as omega -> 0.
    """
    den = p.omega**2 * p.gamma_2 + p.gamma_1 * (p.delta**2 + p.gamma_2**2)
    if den == 0.0:
        raise DegenerateError("reflection undefined: zero denominator")
    return 1.0 - 1j * p.gamma_r * np.exp(1j * p.phi) * p.gamma_1 \
        * (p.delta - 1j * p.gamma_2) / den


def weak_probe_reflection(p: SystemParams) -> complex:
    """Weak-probe limit of the reflection coefficient."""
    den = p.delta + 1j * p.gamma_2
    if den == 0.0:
        raise DegenerateError("weak-probe reflection undefined")
    return 1.0 - 1j * p.gamma_r * np.exp(1j * p.phi) / den


def critical_drive(p: SystemParams) -> tuple[float, float]:
    """(delta*, omega*) where the coherent reflection vanishes exactly.

    delta* = -gamma_2 tan(phi); omega* from the real part of r = 0.  Raises
    NoSolutionError when the mismatch is too severe for full cancellation.
    """
    t = np.tan(p.phi)
    delta_star = -p.gamma_2 * t
    inner = p.gamma_r / np.cos(p.phi) - p.gamma_2 * (t * t + 1.0)
    if inner < 0:
        raise NoSolutionError("gamma_r/cos(phi) < gamma_2 (tan^2 phi + 1)")
    omega_star = np.sqrt(p.gamma_1 * inner)
    return float(delta_star), float(omega_star)


def compensate_mismatch(r_meas: complex | np.ndarray, phi: float,
                        scale: float = 1.07) -> complex | np.ndarray:
    """Undo the line mismatch on a measured reflection: 1 - (1-r) e^{-i phi}/scale."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    return 1.0 - (1.0 - np.asarray(r_meas)) * np.exp(-1j * phi) / scale


def mismatch_from_boundary(b: BoundaryModel) -> tuple[float, float]:
    """Effective (gamma_r, phi) of the boundary model.

    gamma_r e^{i phi} = t1^2 beta^2 e^{2 i phi0} gamma_r0 /
    (r1 + t1^2 beta^2 e^{2 i phi0}); evaluated with complex arithmetic so the
    arctan branch is handled for free.
    """
    tb2 = b.t1**2 * b.beta**2
    den = b.r1 + tb2 * np.exp(2j * b.phi0)
    if abs(den) == 0.0:
        raise DegenerateError("boundary interference exactly destructive")
    eff = tb2 * np.exp(2j * b.phi0) * b.gamma_r0 / den
    return float(abs(eff)), float(np.angle(eff))


def mismatch_scale(b: BoundaryModel) -> float:
    """Default compensation scale gamma_r_eff / gamma_r0 for this boundary."""
    g, _ = mismatch_from_boundary(b)
    return g / b.gamma_r0


@dataclass(frozen=True)
class ReflectionFit:
    """Least-squares estimate of (phi, gamma_r, gamma_2, delta offset)."""

    params: SystemParams
    delta_offset: float
    residual_rms: float
    iterations: int
    residual_flag: bool


def _reflection_model(deltas, phi, gamma_r, gamma_2, delta_off, omega, gamma_1,
                      weak_probe):
    d = deltas - delta_off
    if weak_probe:
        return 1.0 - 1j * gamma_r * np.exp(1j * phi) / (d + 1j * gamma_2)
    den = omega**2 * gamma_2 + gamma_1 * (d**2 + gamma_2**2)
    return 1.0 - 1j * gamma_r * np.exp(1j * phi) * gamma_1 * (d - 1j * gamma_2) / den


def fit_reflection(deltas: np.ndarray, r_values: np.ndarray,
                   weak_probe: bool = True, p_init: SystemParams | None = None,
                   max_iter: int = 500, cost_tol: float = 1e-12,
                   flag_threshold: float = 0.02) -> ReflectionFit:
    """Damped least squares (Levenberg-Marquardt) on a reflection trace.

    Fits phi, gamma_r, gamma_2 and a detuning offset; omega and gamma_1 are
    held at ``p_init`` values when the full (strong-drive) model is requested.
    ``residual_flag`` is set when the relative rms misfit exceeds
    ``flag_threshold`` - the documented failure mode of fitting strong-drive
    data with the weak-probe model.
    """
    deltas = np.asarray(deltas, dtype=float)
    r_values = np.asarray(r_values, dtype=complex)
    if len(deltas) < 5:
        raise ValueError("need at least 5 points across the resonance")
    omega = p_init.omega if p_init is not None else 0.0
    gamma_1 = p_init.gamma_1 if p_init is not None else None

    # initial guesses from the trace geometry
    depth = np.abs(1.0 - r_values)
    i0 = int(np.argmax(depth))
    delta_off0 = deltas[i0]
    phi0 = float(np.angle(1.0 - r_values[i0]))
    half = depth.max() / np.sqrt(2.0)
    above = deltas[depth >= half]
    gamma_20 = max(0.5 * (above.max() - above.min()),
                   (deltas[1] - deltas[0]) if len(deltas) > 1 else 1.0)
    gamma_r0 = depth.max() * gamma_20
    if gamma_1 is None:
        gamma_1 = 2.0 * gamma_20

    theta = np.array([phi0, gamma_r0, gamma_20, delta_off0])
    scale = np.array([1.0, gamma_r0, gamma_20, max(abs(delta_off0), gamma_20)])

    def residuals(th):
        mdl = _reflection_model(deltas, th[0], th[1], th[2], th[3], omega,
                                gamma_1, weak_probe)
        dr = mdl - r_values
        return np.concatenate([dr.real, dr.imag])

    def cost(th):
        r = residuals(th)
        return float(r @ r)

    lam = 1e-3
    c = cost(theta)
    it = 0
    for it in range(1, max_iter + 1):
        r = residuals(theta)
        jac = np.empty((len(r), 4))
        for j in range(4):
            step = 1e-7 * scale[j]
            tp = theta.copy()
            tp[j] += step
            jac[:, j] = (residuals(tp) - r) / step
        jtj = jac.T @ jac
        g = jac.T @ r
        improved = False
        for _ in range(40):
            try:
                dth = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj) + 1e-30), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            c_new = cost(theta + dth)
            if c_new < c:
                theta = theta + dth
                rel = (c - c_new) / max(c, 1e-300)
                c = c_new
                lam = max(lam / 3.0, 1e-12)
                improved = True
                break
            lam *= 10
        if not improved or rel < cost_tol:
            break
    else:
        raise ConvergenceError("reflection fit stalled above tolerance",
                               best=theta, gradient_norm=float(np.linalg.norm(g)))

    phi_f, gamma_rf, gamma_2f, delta_off = theta
    rms = np.sqrt(c / len(deltas))
    typical = float(np.mean(np.abs(1.0 - r_values))) or 1.0
    fitted = SystemParams(delta=0.0, omega=omega, gamma_r=abs(gamma_rf),
                          gamma_1=gamma_1 if p_init is not None else 2.0 * abs(gamma_2f),
                          gamma_2=abs(gamma_2f), phi=phi_f)
    return ReflectionFit(params=fitted, delta_offset=float(delta_off),
                         residual_rms=float(rms), iterations=it,
                         residual_flag=bool(rms > flag_threshold * typical))


def dephasing_from_flux_noise(a_phi: float, f_ir: float, t_total: float,
                              slope: float) -> float:
    """Pure dephasing from 1/f flux noise: sqrt(A_phi |ln(2 pi f_ir t)|) dw/dPhi.

    ``a_phi`` is the noise PSD amplitude in Phi_0^2 (i.e. the square of the
    usual micro-Phi_0 amplitude), ``slope`` the qubit frequency sensitivity in
    rad/s per Phi_0.
    """
    if a_phi < 0 or f_ir <= 0 or t_total <= 0:
        raise ValueError("a_phi >= 0 and f_ir, t_total > 0 required")
    arg = TWOPI * f_ir * t_total
    if arg == 1.0:
        raise ValueError("2 pi f_ir t == 1 makes the log vanish identically")
    return float(np.sqrt(a_phi * abs(np.log(arg))) * slope)


def trace_to_csv(path, deltas, r_values):
    """Spectroscopy trace CSV: delta_hz, re_r, im_r."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta_hz", "re_r", "im_r"])
        for d, r in zip(deltas, r_values):
            w.writerow([f"{d / TWOPI:.12g}", f"{r.real:.12g}", f"{r.imag:.12g}"])


def trace_from_csv(path):
    """Read a spectroscopy trace; returns (deltas rad/s, complex r)."""
    import csv

    deltas, rs = [], []
    with open(path, newline="") as fh:
        rd = csv.DictReader(row for row in fh if not row.startswith("#"))
        for row in rd:
            deltas.append(TWOPI * float(row["delta_hz"]))
            rs.append(float(row["re_r"]) + 1j * float(row["im_r"]))
    return np.asarray(deltas), np.asarray(rs)
