"""Couette base flow and the linearized outer (Euler) correctors.

The leading-order interior flow is the rotating point-vortex Couette
profile ``u_e(r) = a r + b / r`` whose constants are tied to the wall
data through the Batchelor-Wood relation

    (a + b)^2 = alpha^2 + (eta^2 / 2 pi) * int varpi^2 dtheta.

Each higher-order corrector solves the Euler equations linearized around
that profile with a prescribed wall trace of the normal velocity.  Per
Fourier mode the solution is an explicit harmonic extension

    u = r^(n-1) (a_n sin n theta - b_n cos n theta),
    v = -r^(n-1) (a_n cos n theta + b_n sin n theta),

so correctors are stored as trace coefficients and evaluated with
analytic radial derivatives (finite differences would wreck the
r^2 lap(u) - u + 2 v_theta = 0 identity that downstream residual checks
rely on).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coords import theta_nodes
from .errors import InfeasibleParametersError


# --------------------------------------------------------------------------
# wall perturbation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TrigPolynomial:
    """Zero-mean trigonometric polynomial sum_m (c_m cos m th + s_m sin m th).

    Coefficient index m starts at 1; there is deliberately no constant
    term, matching the zero-mean requirement on the wall perturbation.
    """

    cos_coeffs: tuple = ()
    sin_coeffs: tuple = ()

    def __call__(self, theta):
        th = np.asarray(theta, dtype=float)
        out = np.zeros_like(th)
        for m, c in enumerate(self.cos_coeffs, start=1):
            out += c * np.cos(m * th)
        for m, c in enumerate(self.sin_coeffs, start=1):
            out += c * np.sin(m * th)
        return out

    def mean_square_integral(self, n_quad: int = 512) -> float:
        """Trapezoid value of int_0^{2pi} varpi^2 dtheta on a uniform grid."""
        th = theta_nodes(max(n_quad, 8))
        vals = self(th)
        return float(2.0 * np.pi * np.mean(vals * vals))

    @property
    def max_mode(self) -> int:
        return max(len(self.cos_coeffs), len(self.sin_coeffs))


def solve_batchelor_wood(alpha: float, eta: float, varpi, b: float,
                         n_quad: int = 512) -> float:
    """Rigid-rotation rate a pinned by the Batchelor-Wood relation.

    a = sqrt(alpha^2 + (eta^2 / 2 pi) int varpi^2) - b, requiring a + b > 0.
    """
    if alpha <= 0 or b <= 0:
        raise InfeasibleParametersError("need alpha > 0 and b > 0")
    if isinstance(varpi, TrigPolynomial):
        integral = varpi.mean_square_integral(n_quad)
    else:
        th = theta_nodes(max(n_quad, 8))
        vals = np.asarray(varpi(th), dtype=float)
        if abs(np.mean(vals)) > 1e-10 * max(1.0, np.max(np.abs(vals))):
            raise InfeasibleParametersError("varpi must have zero mean")
        integral = float(2.0 * np.pi * np.mean(vals * vals))
    wall_speed_sq = alpha * alpha + eta * eta * integral / (2.0 * np.pi)
    a = float(np.sqrt(wall_speed_sq)) - b
    if a + b <= 0:
        raise InfeasibleParametersError(f"a + b = {a + b} must be positive")
    return a


@dataclass(frozen=True)
class CouetteParams:
    """Base-flow constants; construction validates the Batchelor-Wood tie."""

    a: float
    b: float
    alpha: float
    eta: float
    varpi: TrigPolynomial = field(default_factory=TrigPolynomial)

    def __post_init__(self):
        if self.b <= 0:
            raise InfeasibleParametersError("point-vortex strength b must be positive")
        if self.a + self.b <= 0:
            raise InfeasibleParametersError("wall speed a + b must be positive")
        lhs = (self.a + self.b) ** 2
        rhs = self.alpha ** 2 + self.eta ** 2 * self.varpi.mean_square_integral() / (2 * np.pi)
        if abs(lhs - rhs) > 1e-10 * max(1.0, abs(rhs)):
            raise InfeasibleParametersError(
                f"(a+b)^2 = {lhs} violates the Batchelor-Wood value {rhs}")

    @classmethod
    def from_wall_data(cls, alpha: float, eta: float, varpi: TrigPolynomial,
                       b: float) -> "CouetteParams":
        a = solve_batchelor_wood(alpha, eta, varpi, b)
        return cls(a=a, b=b, alpha=alpha, eta=eta, varpi=varpi)

    @property
    def wall_speed(self) -> float:
        """u_e(1) = a + b."""
        return self.a + self.b

    def wall_velocity(self, theta) -> np.ndarray:
        return self.alpha + self.eta * self.varpi(theta)

    def batchelor_wood_residual(self) -> float:
        rhs = self.alpha ** 2 + self.eta ** 2 * self.varpi.mean_square_integral() / (2 * np.pi)
        return float(abs((self.a + self.b) ** 2 - rhs))


@dataclass(frozen=True)
class EulerBase:
    """Couette flow with wall-gauged pressure, p_e(1) = 0."""

    params: CouetteParams
    pressure_reference: float = 0.0

    def velocity(self, r):
        r = np.asarray(r, dtype=float)
        return self.params.a * r + self.params.b / r

    def velocity_dr(self, r):
        r = np.asarray(r, dtype=float)
        return self.params.a - self.params.b / r ** 2

    def pressure(self, r):
        """p_e(r) - p_e(1), antiderivative of (a r + b/r)^2 / r."""
        a, b = self.params.a, self.params.b
        r = np.asarray(r, dtype=float)
        return (a * a * (r * r - 1.0) / 2.0 + 2.0 * a * b * np.log(r)
                + b * b * (1.0 - 1.0 / r ** 2) / 2.0) + self.pressure_reference

    def pressure_dr(self, r):
        r = np.asarray(r, dtype=float)
        return self.velocity(r) ** 2 / r


def couette_eval(params: CouetteParams, r):
    """Swirl velocity and wall-gauged pressure difference of the base flow."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("radius must be positive")
    base = EulerBase(params)
    return base.velocity(r), base.pressure(r)


# --------------------------------------------------------------------------
# linearized Euler correctors
# --------------------------------------------------------------------------

def _trace_coefficients(trace: np.ndarray):
    """cos/sin coefficients of a zero-mean periodic wall trace.

    trace(theta) = sum_n a_n cos(n theta) + b_n sin(n theta), n = 1..N/2.
    """
    trace = np.asarray(trace, dtype=float)
    n_theta = trace.size
    modes = np.fft.rfft(trace) / n_theta
    scale = np.max(np.abs(trace)) if trace.size else 0.0
    if abs(modes[0].real) > 1e-10 * max(1.0, scale):
        raise InfeasibleParametersError(
            "wall trace has nonzero mean; no decaying harmonic extension exists")
    a_n = 2.0 * modes[1:].real
    b_n = -2.0 * modes[1:].imag
    if n_theta % 2 == 0:
        a_n[-1] *= 0.5  # unpaired Nyquist cosine
        b_n[-1] = 0.0
    return a_n, b_n


@dataclass
class EulerCorrector:
    """One order of the outer expansion, stored as wall-trace modal data.

    ``a_n, b_n`` are the cos/sin coefficients of the boundary trace this
    corrector cancels (v = -trace harmonic extension).  ``A_infty`` is the
    far-field constant absorbed from the matching boundary layer; it adds
    the rigid rotation ``a_mod * r`` to the swirl and a log-singular
    pressure shift, both handled in closed form.
    """

    order: int
    n_theta: int
    a_n: np.ndarray
    b_n: np.ndarray
    params: CouetteParams
    A_infty: float = 0.0
    a_mod: float = 0.0         # coefficient of the absorbed rigid rotation
    a_mod_quadrature: float = 0.0
    modified: bool = False

    # -- modal profile helpers ------------------------------------------------

    def _mode_numbers(self):
        return np.arange(1, self.a_n.size + 1, dtype=float)

    def _u_spectrum(self, r, deriv: int) -> np.ndarray:
        """rfft-layout spectrum of the swirl corrector (or its r-derivatives)."""
        r = np.asarray(r, dtype=float)
        n = self._mode_numbers()[:, None]
        if deriv == 0:
            prof = r[None, :] ** (n - 1)
        elif deriv == 1:
            prof = (n - 1) * r[None, :] ** (n - 2)
        elif deriv == 2:
            prof = (n - 1) * (n - 2) * np.where(n >= 3, r[None, :] ** (n - 3), 0.0)
        else:
            raise ValueError("deriv must be 0, 1 or 2")
        coeff = 0.5 * (-self.b_n - 1j * self.a_n)[:, None] * prof
        if self.n_theta % 2 == 0 and coeff.shape[0] == self.n_theta // 2:
            coeff[-1] *= 2.0  # irfft counts the unpaired Nyquist slot once
        spec = np.zeros((self.n_theta // 2 + 1, r.size), dtype=complex)
        spec[1:1 + coeff.shape[0]] = coeff
        return spec

    def _v_spectrum(self, r, deriv: int) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        n = self._mode_numbers()[:, None]
        if deriv == 0:
            prof = r[None, :] ** (n - 1)
        elif deriv == 1:
            prof = (n - 1) * r[None, :] ** (n - 2)
        elif deriv == 2:
            prof = (n - 1) * (n - 2) * np.where(n >= 3, r[None, :] ** (n - 3), 0.0)
        else:
            raise ValueError("deriv must be 0, 1 or 2")
        coeff = 0.5 * (-self.a_n + 1j * self.b_n)[:, None] * prof
        if self.n_theta % 2 == 0 and coeff.shape[0] == self.n_theta // 2:
            coeff[-1] *= 2.0
        spec = np.zeros((self.n_theta // 2 + 1, r.size), dtype=complex)
        spec[1:1 + coeff.shape[0]] = coeff
        return spec

    def _p_spectrum(self, r, deriv: int) -> np.ndarray:
        """Modal pressure P_n(r) = -((n-2)/n) a r^n - b r^(n-2)."""
        r = np.asarray(r, dtype=float)
        n = self._mode_numbers()[:, None]
        a, b = self.params.a, self.params.b
        if deriv == 0:
            prof = -((n - 2) / n) * a * r[None, :] ** n - b * r[None, :] ** (n - 2)
        elif deriv == 1:
            prof = -(n - 2) * (a * r[None, :] ** (n - 1) + b * r[None, :] ** (n - 3))
        else:
            raise ValueError("pressure needs deriv 0 or 1 only")
        coeff = 0.5 * (-self.b_n - 1j * self.a_n)[:, None] * prof
        if self.n_theta % 2 == 0 and coeff.shape[0] == self.n_theta // 2:
            coeff[-1] *= 2.0
        spec = np.zeros((self.n_theta // 2 + 1, r.size), dtype=complex)
        spec[1:1 + coeff.shape[0]] = coeff
        return spec

    def _synth(self, spec: np.ndarray, theta_deriv: int = 0) -> np.ndarray:
        if theta_deriv:
            k = np.arange(spec.shape[0], dtype=float)[:, None]
            spec = spec * (1j * k) ** theta_deriv
            if theta_deriv % 2 == 1 and self.n_theta % 2 == 0:
                spec[-1] = 0.0
        return np.fft.irfft(spec * self.n_theta, n=self.n_theta, axis=0)

    # -- public evaluation ------------------------------------------------

    def swirl(self, r, theta_deriv: int = 0, r_deriv: int = 0) -> np.ndarray:
        """Modified swirl corrector u + chi*A_infty + A(r) = u + a_mod * r."""
        out = self._synth(self._u_spectrum(r, r_deriv), theta_deriv)
        if self.modified and theta_deriv == 0:
            r = np.asarray(r, dtype=float)
            if r_deriv == 0:
                out += self.a_mod * r
            elif r_deriv == 1:
                out += self.a_mod
        return out

    def normal(self, r, theta_deriv: int = 0, r_deriv: int = 0) -> np.ndarray:
        """Normal-velocity corrector (unchanged by the modification)."""
        return self._synth(self._v_spectrum(r, r_deriv), theta_deriv)

    def pressure(self, r, theta_deriv: int = 0, r_deriv: int = 0) -> np.ndarray:
        """Linearized pressure (zero-mean in theta), with the modification shift.

        The modal pressure has no zero mode, so the wall gauge of the
        composite solution is carried entirely by the base pressure.
        """
        out = self._synth(self._p_spectrum(r, r_deriv), theta_deriv)
        if self.modified and theta_deriv == 0:
            r = np.asarray(r, dtype=float)
            a, b = self.params.a, self.params.b
            if r_deriv == 0:
                out += self.a_mod * (a * (r * r - 1.0) + 2.0 * b * np.log(r))
            elif r_deriv == 1:
                out += 2.0 * self.a_mod * (a * r + b / r)
        return out

    def wall_swirl_trace(self, theta) -> np.ndarray:
        """u at r = 1 (feeds the next layer's wall condition)."""
        return self.swirl(np.asarray([1.0]))[:, 0]

    def wall_trace_derivatives(self, kind: str, r_deriv: int,
                               theta_deriv: int = 0) -> np.ndarray:
        """d^k/dr^k traces at r = 1 needed by higher-order layer forcings."""
        fn = self.swirl if kind == "u" else self.normal
        return fn(np.asarray([1.0]), theta_deriv=theta_deriv, r_deriv=r_deriv)[:, 0]

    def identity_residual(self, r) -> np.ndarray:
        """r^2 lap(u) - u + 2 v_theta evaluated with analytic derivatives."""
        r = np.asarray(r, dtype=float)
        u = self.swirl(r)
        lap = (self.swirl(r, r_deriv=2) + self.swirl(r, r_deriv=1) / r
               + self.swirl(r, theta_deriv=2) / r ** 2)
        return r ** 2 * lap - u + 2.0 * self.normal(r, theta_deriv=1)


def solve_linearized_euler(order: int, boundary_trace: np.ndarray,
                           params: CouetteParams) -> EulerCorrector:
    """Corrector cancelling a layer's wall normal velocity.

    boundary_trace is v_p(theta, 0) sampled on the uniform theta grid; the
    corrector satisfies v(theta, 1) = -boundary_trace and carries the
    explicit per-mode harmonic extension.
    """
    trace = np.asarray(boundary_trace, dtype=float)
    a_n, b_n = _trace_coefficients(trace)
    return EulerCorrector(order=order, n_theta=trace.size, a_n=a_n, b_n=b_n,
                          params=params)


# --------------------------------------------------------------------------
# cutoff modification
# --------------------------------------------------------------------------

def _cumulative_simpson(y: np.ndarray, h: float) -> np.ndarray:
    """Cumulative integral on a uniform grid, parabolic (Simpson-type) rule."""
    n = y.size
    out = np.zeros(n)
    if n < 3:
        if n == 2:
            out[1] = 0.5 * h * (y[0] + y[1])
        return out
    # integral over [x_{i-1}, x_i] from the parabola through three nodes
    inc = np.zeros(n - 1)
    inc[0] = h * (5.0 * y[0] + 8.0 * y[1] - y[2]) / 12.0
    inc[1:] = h * (-y[:-2] + 8.0 * y[1:-1] + 5.0 * y[2:]) / 12.0
    out[1:] = np.cumsum(inc)
    return out


def modify_corrector(corrector: EulerCorrector, A_infty: float, chi,
                     n_quad: int = 4097) -> EulerCorrector:
    """Absorb a layer far-field constant into the outer corrector.

    Builds phi(r) = -A_infty (r chi'' + chi' - chi/r), solves
    r A'' + A' - A/r = phi with A(1) = 0 by variation of parameters
    (composite Simpson on [1/2, 1]; phi vanishes below 1/2), and returns
    the corrector with swirl u + chi*A_infty + A and the matching pressure
    shift.  The quadrature collapses analytically:

        F(r) = int_0^r phi/(2s) ds = -(A_infty/2) (chi'(r) + chi(r)/r)
        G(r) = int_0^r s phi/2 ds = -(A_infty/2) (r^2 chi'(r) - r chi(r))

    so A(r) = a_mod*r - A_infty*chi(r) with a_mod = G(1) - F(1) = A_infty
    exactly.  The Simpson value of a_mod is kept as a cross-check and the
    closed form is used for evaluation.
    """
    if not np.isfinite(A_infty):
        raise ValueError("A_infty must be finite")
    # Simpson construction on [1/2, 1]
    n_quad = int(n_quad) | 1
    rq = np.linspace(0.5, 1.0, n_quad)
    h = rq[1] - rq[0]
    phi = -A_infty * (rq * chi.second(rq) + chi.first(rq) - chi(rq) / rq)
    F1 = _cumulative_simpson(phi / (2.0 * rq), h)[-1]
    G1 = _cumulative_simpson(rq * phi / 2.0, h)[-1]
    a_mod_quad = float(G1 - F1)

    return EulerCorrector(order=corrector.order, n_theta=corrector.n_theta,
                          a_n=corrector.a_n, b_n=corrector.b_n,
                          params=corrector.params, A_infty=float(A_infty),
                          a_mod=float(A_infty), a_mod_quadrature=a_mod_quad,
                          modified=True)


def modifier_profile(corrector: EulerCorrector, chi, r) -> np.ndarray:
    """A_i(r) = a_mod*r - A_infty*chi(r); zero when the corrector is unmodified."""
    r = np.asarray(r, dtype=float)
    if not corrector.modified:
        return np.zeros_like(r)
    return corrector.a_mod * r - corrector.A_infty * chi(r)


def modifier_ode_residual(corrector: EulerCorrector, chi,
                          lo: float = 0.45, n: int = 20001) -> np.ndarray:
    """Residual of r A'' + A' - A/r = phi with A differentiated by FD.

    Fourth-order uniform stencils in extended precision: the cutoff bump
    has large high derivatives in the transition band (truncation noise),
    while the 1/h^2 roundoff of double-precision differences would floor
    the residual near 1e-8.
    """
    # nodes built in extended precision: casting float64 nodes would leave
    # O(1e-16) spacing jitter that the 1/h^2 stencil amplifies above 1e-8
    h = (np.longdouble(1.0) - np.longdouble(lo)) / np.longdouble(n - 1)
    r = np.longdouble(lo) + h * np.arange(n, dtype=np.longdouble)
    A = corrector.a_mod * r - np.longdouble(corrector.A_infty) * chi(r)
    if not corrector.modified:
        A = np.zeros_like(r)
    d1 = np.empty_like(A)
    d2 = np.empty_like(A)
    d1[2:-2] = (A[:-4] - 8 * A[1:-3] + 8 * A[3:-1] - A[4:]) / (12 * h)
    d2[2:-2] = (-A[:-4] + 16 * A[1:-3] - 30 * A[2:-2] + 16 * A[3:-1] - A[4:]) / (12 * h * h)
    from .coords import fd_weights
    for i in (0, 1, n - 2, n - 1):
        idx = np.arange(6) if i < 2 else np.arange(n - 6, n)
        d1[i] = fd_weights(r[i], r[idx], 1) @ A[idx]
        d2[i] = fd_weights(r[i], r[idx], 2) @ A[idx]
    phi = -np.longdouble(corrector.A_infty) * (r * chi.second(r) + chi.first(r) - chi(r) / r)
    return (r * d2 + d1 - A / r - phi).astype(float)
