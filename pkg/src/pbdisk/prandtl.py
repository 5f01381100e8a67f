"""Boundary-layer hierarchy on the scaled periodic strip (theta, Y).

Leading order solves the nonlinear steady layer equations

    (u_e(1) + u) u_theta + (v - v(theta, 0)) u_Y - u_YY = 0,
    u_theta + v_Y = 0,
    u(theta, 0) = wall mismatch,   u -> 0 as Y -> -infty,

by treating theta as a time-like direction: the total swirl u_e(1) + u
stays positive for small wall perturbations, so implicit (Crank-Nicolson)
stepping around the period is well posed, and repeating periods drives the
period map to its fixed point.  v is never an independent unknown; it is
reconstructed from continuity by Y-integration, which also pins its zero
theta-mean.

Higher orders solve the same transport operator linearized around the
leading layer with order-specific forcing assembled term by term; their
far-field condition is flatness (u_Y -> 0) and the limit constant A_infty
is read off the tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from .coords import LayerGrid, differentiate_field, theta_derivative, theta_mean
from .errors import ConvergenceError, TruncationError
from .euler import CouetteParams, EulerCorrector


# --------------------------------------------------------------------------
# data types
# --------------------------------------------------------------------------

@dataclass
class PrandtlLayer:
    """One order of the hierarchy: swirl u_p^(i), partner v_p^(i+1), p_p^(i+1)."""

    order: int
    grid: LayerGrid
    u_layer: np.ndarray
    v_layer: np.ndarray
    p_layer: Optional[np.ndarray] = None
    A_infty: float = 0.0
    A_infty_std: float = 0.0
    sweeps: int = 0
    residual: float = 0.0
    sweep_history: list = field(default_factory=list)

    def u_shifted(self) -> np.ndarray:
        """u - A_infty; decays at the far edge for every order."""
        return self.u_layer - self.A_infty

    def wall_normal_trace(self) -> np.ndarray:
        """v at Y = 0, the trace handed to the next Euler corrector."""
        return self.v_layer[:, -1]

    def tail_amplitude(self) -> float:
        scale = max(float(np.max(np.abs(self.u_shifted()))), 1e-300)
        return float(np.max(np.abs(self.u_shifted()[:, 0])) / scale)


@dataclass
class LayerForcing:
    """Forcing for one linearized order: momentum f and pressure integrand g."""

    order: int
    f_field: np.ndarray
    g_field: Optional[np.ndarray] = None

    def check_decay(self, tol: float = 2e-5) -> float:
        """Guard against a strip too short for the forcing to die out.

        The achievable tail is floored by the layer scheme's truncation
        error (second order in the strip spacing), not by the exponential
        decay itself, hence the default sits above that floor.
        """
        worst = 0.0
        for arr in (self.f_field, self.g_field):
            if arr is None:
                continue
            scale = max(float(np.max(np.abs(arr))), 1e-300)
            worst = max(worst, float(np.max(np.abs(arr[:, 0])) / scale))
        if worst > tol:
            raise TruncationError(
                f"forcing tail {worst:.2e} exceeds {tol:.0e}; enlarge |Y_min|")
        return worst


# --------------------------------------------------------------------------
# strip helpers
# --------------------------------------------------------------------------

def _banded_fd(Y: np.ndarray):
    """Diagonals of D1 (interior-centered) and D2 on a possibly nonuniform grid."""
    n = Y.size
    d1 = np.zeros((3, n))  # rows: super, diag, sub in solve_banded layout
    d2 = np.zeros((3, n))
    hm = Y[1:-1] - Y[:-2]
    hp = Y[2:] - Y[1:-1]
    # first derivative, interior
    d1[0, 2:] = hm / (hp * (hm + hp))                 # superdiag (col i+1)
    d1[1, 1:-1] = (hp - hm) / (hm * hp)               # diag
    d1[2, :-2] = -hp / (hm * (hm + hp))               # subdiag (col i-1)
    # second derivative, interior
    d2[0, 2:] = 2.0 / (hp * (hm + hp))
    d2[1, 1:-1] = -2.0 / (hm * hp)
    d2[2, :-2] = 2.0 / (hm * (hm + hp))
    return d1, d2


def cumulative_integral(values: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Cumulative integral along the last axis, parabolic (Simpson-type) rule.

    Each interval [x_j, x_{j+1}] integrates the parabola through nodes
    (j-1, j, j+1); the first interval uses the forward parabola (0, 1, 2).
    Exact for quadratics, one order better than trapezoid on smooth data.
    """
    f = np.asarray(values, dtype=float)
    n = x.size
    if f.shape[-1] != n:
        raise ValueError("length mismatch between values and nodes")
    inc = np.zeros(f.shape[:-1] + (n - 1,))
    f0, f1, f2 = f[..., :-2], f[..., 1:-1], f[..., 2:]
    h1 = (x[1:-1] - x[:-2])
    h2 = (x[2:] - x[1:-1])
    # Lagrange-basis integrals over [x_j, x_{j+1}]
    inc[..., 1:] = (-f0 * h2 ** 3 / (6.0 * h1 * (h1 + h2))
                    + f1 * h2 * (h2 + 3.0 * h1) / (6.0 * h1)
                    + f2 * h2 * (2.0 * h2 + 3.0 * h1) / (6.0 * (h1 + h2)))
    ha, hb = x[1] - x[0], x[2] - x[1]
    inc[..., 0] = (f[..., 0] * ha * (2.0 * ha + 3.0 * hb) / (6.0 * (ha + hb))
                   + f[..., 1] * ha * (ha + 3.0 * hb) / (6.0 * hb)
                   - f[..., 2] * ha ** 3 / (6.0 * hb * (ha + hb)))
    out = np.zeros_like(f)
    out[..., 1:] = np.cumsum(inc, axis=-1)
    return out


def reconstruct_normal_velocity(u: np.ndarray, grid: LayerGrid,
                                prev_v: Optional[np.ndarray] = None) -> np.ndarray:
    """v from continuity: v = -int_{Y_min}^Y u_theta dY' [- Y * prev_v]."""
    ut = theta_derivative(u)
    v = -cumulative_integral(ut, grid.Y_values)
    if prev_v is not None:
        v = v - grid.Y_values[None, :] * prev_v
    return v


# --------------------------------------------------------------------------
# theta-marching core
# --------------------------------------------------------------------------

def _march_periods(grid: LayerGrid, wall_speed: float,
                   wall_values: np.ndarray, *, nonlinear_base: Optional[np.ndarray],
                   reaction: Optional[np.ndarray], advect_v: Callable,
                   explicit: Optional[np.ndarray], far_neumann: bool,
                   tol: float, max_sweeps: int, initial: Optional[np.ndarray] = None):
    """Crank-Nicolson periodic marching to the period-map fixed point.

    Solves  A(theta, Y) u_theta = u_YY - V u_Y - R u + G  with A, V, R, G
    supplied per sweep.  ``nonlinear_base`` None means A = wall_speed + u
    (the leading-order self-advection); otherwise A = wall_speed + base.
    Returns (u, sweep deltas).
    """
    n_theta, n_Y = grid.shape
    Y = grid.Y_values
    dth = 2.0 * np.pi / n_theta
    d1, d2 = _banded_fd(Y)

    u = np.zeros((n_theta, n_Y)) if initial is None else initial.copy()
    u[:, -1] = wall_values
    history = []

    for sweep in range(max_sweeps):
        u_old = u.copy()
        v_lag = advect_v(u_old)
        for m in range(n_theta):
            mp = (m + 1) % n_theta
            if nonlinear_base is None:
                amp = wall_speed + 0.5 * (u[m] + u_old[mp])
            else:
                amp = wall_speed + 0.5 * (nonlinear_base[m] + nonlinear_base[mp])
            if np.min(amp) <= 0.0:
                raise ConvergenceError(
                    "total swirl changed sign during marching; eta too large",
                    history=history)
            # L^station = D2 - diag(V) D1 - diag(R)
            def station(idx):
                rows = d2.copy()
                rows[0, 1:] -= v_lag[idx][:-1] * d1[0, 1:]
                rows[1] -= v_lag[idx] * d1[1]
                rows[2, :-1] -= v_lag[idx][1:] * d1[2, :-1]
                if reaction is not None:
                    rows[1] -= reaction[idx]
                return rows

            Lm = station(m)
            Lp = station(mp)
            lhs = -0.5 * Lp
            lhs[1] += amp / dth
            rhs = (amp / dth) * u[m] + 0.5 * _banded_apply(Lm, u[m])
            if explicit is not None:
                rhs += 0.5 * (explicit[m] + explicit[mp])
            # boundary rows: wall Dirichlet; far edge Dirichlet-0 or flat.
            # solve_banded layout: ab[0, j] belongs to row j-1, ab[2, j] to
            # row j+1, so only same-row entries may be overwritten here.
            lhs[1, -1] = 1.0
            lhs[2, -2] = 0.0           # row n-1, column n-2
            rhs[-1] = wall_values[mp]
            if far_neumann:
                h = Y[1] - Y[0]
                lhs[1, 0] = -1.0 / h
                lhs[0, 1] = 1.0 / h    # row 0, column 1
            else:
                lhs[1, 0] = 1.0
                lhs[0, 1] = 0.0
            rhs[0] = 0.0
            u[mp] = solve_banded((1, 1), lhs, rhs, check_finite=False)
        delta = float(np.max(np.abs(u - u_old)))
        history.append(delta)
        scale = max(float(np.max(np.abs(u))), 1e-30)
        if delta <= tol * scale:
            return u, history
        # the map contracts geometrically; the slowest strip mode gives a
        # rate around exp(-2 pi (pi/|Y_min|)^2 / wall_speed) per sweep
        if len(history) > 60 and history[-1] > 0.55 * history[-60]:
            raise ConvergenceError(
                f"period map stagnated at delta = {delta:.3e}", history=history)
    raise ConvergenceError(
        f"no period-map fixed point within {max_sweeps} sweeps", history=history)


def _banded_apply(rows: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Apply a (1,1)-banded operator stored in solve_banded layout."""
    out = rows[1] * vec
    out[:-1] += rows[0, 1:] * vec[1:]
    out[1:] += rows[2, :-1] * vec[:-1]
    return out


# --------------------------------------------------------------------------
# leading order
# --------------------------------------------------------------------------

def _spectral_momentum_residual(u, grid, wall_speed, *, base, reaction,
                                advect, explicit, d1, d2):
    """Steady residual with spectral theta-derivative and the march's Y-stencils."""
    amp = wall_speed + (u if base is None else base)
    res = (amp * theta_derivative(u)
           + advect * _apply_banded_all(d1, u)
           - _apply_banded_all(d2, u))
    if reaction is not None:
        res += reaction * u
    if explicit is not None:
        res -= explicit
    return res


def _apply_banded_all(rows: np.ndarray, field: np.ndarray) -> np.ndarray:
    """Apply a (1,1)-banded Y-operator to every theta row of a field."""
    out = rows[1][None, :] * field
    out[:, :-1] += rows[0, 1:][None, :] * field[:, 1:]
    out[:, 1:] += rows[2, :-1][None, :] * field[:, :-1]
    return out


def solve_prandtl_leading(params: CouetteParams, grid: LayerGrid,
                          tol: float = 1e-10, max_sweeps: int = 1000,
                          defect_rounds: int = 2) -> PrandtlLayer:
    """Nonlinear leading-order layer driven by the wall mismatch alpha + eta*varpi - u_e(1).

    The Crank-Nicolson period march supplies the base solve; a few defect
    corrections against the spectral-in-theta residual then remove the
    O(dtheta^2) stepping error, which otherwise leaves a slowly decaying
    rectified ramp in the zero mode of the tail.
    """
    theta = grid.theta
    wall = params.wall_velocity(theta) - params.wall_speed
    d1, d2 = _banded_fd(grid.Y_values)

    def advect_v(u_iter):
        v = reconstruct_normal_velocity(u_iter, grid)
        return v - v[:, -1][:, None]  # v - v(theta, 0)

    u, history = _march_periods(
        grid, params.wall_speed, wall, nonlinear_base=None, reaction=None,
        advect_v=advect_v, explicit=None, far_neumann=False,
        tol=tol, max_sweeps=max_sweeps)

    for _ in range(defect_rounds):
        V = advect_v(u)
        resid = _spectral_momentum_residual(
            u, grid, params.wall_speed, base=u, reaction=None, advect=V,
            explicit=None, d1=d1, d2=d2)
        resid[:, 0] = 0.0
        resid[:, -1] = 0.0
        delta, dh = _march_periods(
            grid, params.wall_speed, np.zeros_like(wall), nonlinear_base=u,
            reaction=theta_derivative(u), advect_v=lambda _: V,
            explicit=-resid, far_neumann=False, tol=tol,
            max_sweeps=max_sweeps)
        u = u + delta
        history.extend(dh)

    v = reconstruct_normal_velocity(u, grid)
    layer = PrandtlLayer(order=0, grid=grid, u_layer=u, v_layer=v,
                         A_infty=0.0, sweeps=len(history),
                         residual=history[-1] if history else 0.0,
                         sweep_history=history)
    layer.p_layer = integrate_layer_pressure(
        0, leading_pressure_integrand(params, layer), grid)
    return layer


def leading_pressure_integrand(params: CouetteParams, layer: PrandtlLayer) -> np.ndarray:
    """dp/dY source at leading order: (u^0)^2 + 2 u_e(1) u^0."""
    u0 = layer.u_layer
    return u0 * u0 + 2.0 * params.wall_speed * u0


def integrate_layer_pressure(order: int, integrand: np.ndarray,
                             grid: LayerGrid, tail_tol: float = 2e-5) -> np.ndarray:
    """p(theta, Y) = int_{Y_min}^Y integrand dY', anchored to zero at the far edge."""
    g = np.asarray(integrand, dtype=float)
    scale = max(float(np.max(np.abs(g))), 1e-300)
    tail = float(np.max(np.abs(g[:, 0])) / scale)
    if tail > tail_tol:
        raise TruncationError(
            f"pressure integrand tail {tail:.2e} above {tail_tol:.0e}; enlarge |Y_min|")
    return cumulative_integral(g, grid.Y_values)


# --------------------------------------------------------------------------
# linearized higher orders
# --------------------------------------------------------------------------

def estimate_far_field_constant(u: np.ndarray, grid: LayerGrid,
                                fraction: float = 0.1):
    """Mean of the theta-averaged profile over the flattest tail decile."""
    profile = theta_mean(u)
    n_tail = max(int(round(fraction * grid.n_Y)), 2)
    tail = profile[:n_tail]
    return float(np.mean(tail)), float(np.std(tail))


def solve_prandtl_linearized(order: int, params: CouetteParams,
                             leading: PrandtlLayer, forcing: LayerForcing,
                             wall_values: np.ndarray, prev_layer: PrandtlLayer,
                             tol: float = 1e-10, max_sweeps: int = 1000,
                             a_var_tol: float = 1e-6) -> PrandtlLayer:
    """One linearized order of the hierarchy around the leading layer.

    Far-field condition is flatness (u_Y -> 0); the limit constant A_infty
    is estimated from the tail and its spread is reported.  Continuity for
    the partner normal velocity carries the extra Y * v_prev transport
    term beyond leading order.
    """
    grid = leading.grid
    if forcing.f_field.shape != grid.shape:
        raise ValueError("forcing grid mismatch")
    forcing.check_decay()
    Y = grid.Y_values[None, :]
    u0 = leading.u_layer
    du0_Y = differentiate_field(u0, grid, "Y")
    du0_th = theta_derivative(u0)
    v1_shift = leading.v_layer - leading.v_layer[:, -1][:, None]
    reaction = du0_th  # (u^{(i)}) * dtheta u^0 enters implicitly

    def advect_v(u_iter):
        return v1_shift

    def explicit_of(u_iter):
        v_next = reconstruct_normal_velocity(u_iter, grid, prev_v=prev_layer.v_layer)
        v_next_shift = v_next - v_next[:, -1][:, None]
        return forcing.f_field - v_next_shift * du0_Y

    # lag the partner-velocity feedback one sweep: wrap _march_periods with
    # successive explicit updates until the combined fixed point settles
    u = np.zeros(grid.shape)
    history = []
    for outer in range(max_sweeps):
        explicit = explicit_of(u)
        u_new, inner_hist = _march_periods(
            grid, params.wall_speed, np.asarray(wall_values, dtype=float),
            nonlinear_base=u0, reaction=reaction, advect_v=advect_v,
            explicit=explicit, far_neumann=True, tol=tol,
            max_sweeps=max_sweeps, initial=u)
        delta = float(np.max(np.abs(u_new - u)))
        history.extend(inner_hist)
        u = u_new
        scale = max(float(np.max(np.abs(u))), 1e-30)
        if delta <= tol * scale:
            break
    else:
        raise ConvergenceError("linearized layer feedback did not settle",
                               history=history)

    v = reconstruct_normal_velocity(u, grid, prev_v=prev_layer.v_layer)
    A_inf, A_std = estimate_far_field_constant(u, grid)
    amp = max(float(np.max(np.abs(u))), 1e-30)
    if A_std > a_var_tol * amp:
        raise TruncationError(
            f"far-field constant varies by {A_std:.2e} over the tail decile "
            f"(amplitude {amp:.2e}); enlarge |Y_min|")
    return PrandtlLayer(order=order, grid=grid, u_layer=u, v_layer=v,
                        A_infty=A_inf, A_infty_std=A_std, sweeps=len(history),
                        residual=history[-1] if history else 0.0,
                        sweep_history=history)


# --------------------------------------------------------------------------
# forcing assembly (orders 1 and 2)
# --------------------------------------------------------------------------

def _factorial(k: int) -> float:
    return float(math.factorial(k))


def _couette_wall_derivatives(params: CouetteParams, k: int) -> float:
    """d^k/dr^k of u_e = a r + b / r at r = 1."""
    a, b = params.a, params.b
    if k == 0:
        return a + b
    sign = -1.0 if k % 2 else 1.0
    return a * (k == 1) + sign * _factorial(k) * b


def _couette_rdr_wall_derivatives(params: CouetteParams, k: int) -> float:
    """d^k/dr^k of (r d_r u_e) = a r - b / r at r = 1."""
    a, b = params.a, params.b
    if k == 0:
        return a - b
    sign = -1.0 if k % 2 else 1.0
    return a * (k == 1) - sign * _factorial(k) * b


def build_first_order_forcing(params: CouetteParams, leading: PrandtlLayer,
                              corrector: EulerCorrector) -> LayerForcing:
    """Momentum forcing for the first linearized layer."""
    grid = leading.grid
    theta = grid.theta
    Y = grid.Y_values[None, :]
    u0 = leading.u_layer
    v1 = leading.v_layer
    p1 = leading.p_layer
    ue1 = params.wall_speed
    due1 = _couette_wall_derivatives(params, 1)  # u_e'(1) = a - b

    du0_Y = differentiate_field(u0, grid, "Y")
    du0_YY = differentiate_field(u0, grid, "Y", order=2)
    du0_th = theta_derivative(u0)
    dp1_th = theta_derivative(p1)

    ue1_trace_th = corrector.wall_trace_derivatives("u", 0, theta_deriv=1)[:, None]
    ve1_trace = corrector.wall_trace_derivatives("v", 0)[:, None]
    dve1_trace = corrector.wall_trace_derivatives("v", 1)[:, None]

    f1 = (-dp1_th + Y * du0_YY + du0_Y
          - u0 * (ue1_trace_th + ve1_trace + v1)
          - due1 * Y * du0_th
          - (dve1_trace + ve1_trace) * Y * du0_Y
          - (due1 + Y * du0_Y + ue1) * v1)
    return LayerForcing(order=1, f_field=f1)


def build_first_order_pressure_integrand(params: CouetteParams,
                                         leading: PrandtlLayer,
                                         layer1: PrandtlLayer,
                                         corrector: EulerCorrector) -> np.ndarray:
    """Integrand g_1 of dp_p^(2)/dY, assembled after the first layer solve."""
    grid = leading.grid
    Y = grid.Y_values[None, :]
    u0 = leading.u_layer
    v1 = leading.v_layer
    p1 = leading.p_layer
    ut1 = layer1.u_shifted()
    ue1 = params.wall_speed
    due1 = _couette_wall_derivatives(params, 1)

    dp1_Y = differentiate_field(p1, grid, "Y")
    dv1_Y = differentiate_field(v1, grid, "Y")
    dv1_YY = differentiate_field(v1, grid, "Y", order=2)
    dv1_th = theta_derivative(v1)

    ue1_trace = corrector.wall_trace_derivatives("u", 0)[:, None]
    ve1_trace = corrector.wall_trace_derivatives("v", 0)[:, None]
    dve1_trace_th = corrector.wall_trace_derivatives("v", 0, theta_deriv=1)[:, None]

    g1 = (-Y * dp1_Y + dv1_YY - ue1 * dv1_th
          - u0 * (dve1_trace_th + dv1_th)
          - dv1_Y * (ve1_trace + v1)
          - 2.0 * (Y * due1 * u0 + ue1 * ut1
                   + (ue1_trace + layer1.A_infty) * u0 + u0 * ut1))
    return g1


class _WallTraces:
    """d_r^k wall traces of the tilde outer fields for orders 0..2.

    Order 0 is the base flow (swirl u_e, no normal velocity); higher
    orders come from the supplied correctors, which already carry any
    absorbed far-field constant through their modification.
    """

    def __init__(self, params: CouetteParams, correctors: dict, n_theta: int):
        self.params = params
        self.cors = correctors
        self.n = n_theta

    def u(self, i: int, k: int, th: int = 0) -> np.ndarray:
        if i == 0:
            val = 0.0 if th else _couette_wall_derivatives(self.params, k)
            return np.full(self.n, val)
        return self.cors[i].wall_trace_derivatives("u", k, theta_deriv=th)

    def v(self, i: int, k: int, th: int = 0) -> np.ndarray:
        if i == 0:
            return np.zeros(self.n)
        return self.cors[i].wall_trace_derivatives("v", k, theta_deriv=th)

    def rdru(self, j: int, k: int) -> np.ndarray:
        """d_r^k of (r d_r u) at r = 1, via r u^(k+1) + k u^(k)."""
        if j == 0:
            return np.full(self.n, _couette_rdr_wall_derivatives(self.params, k))
        return (self.cors[j].wall_trace_derivatives("u", k + 1)
                + k * self.cors[j].wall_trace_derivatives("u", k))


def _strip_tables(layers):
    """theta/Y derivative tables of tilde swirls u~^(j) and partners v^(i).

    uf[j] belongs to layer j; vf[i] is v_p^(i), i.e. the partner of layer
    i-1, with vf[0] identically zero.
    """
    grid = layers[0].grid
    zeros = np.zeros(grid.shape)
    uf = {}
    vf = {0: {"v": zeros, "v_th": zeros, "v_Y": zeros}}
    for layer in layers:
        ut = layer.u_shifted()
        uf[layer.order] = {
            "u": ut,
            "u_th": theta_derivative(ut),
            "u_Y": differentiate_field(ut, grid, "Y"),
        }
        vf[layer.order + 1] = {
            "v": layer.v_layer,
            "v_th": theta_derivative(layer.v_layer),
            "v_Y": differentiate_field(layer.v_layer, grid, "Y"),
        }
    return uf, vf


def build_second_order_forcing(params: CouetteParams, layer0: PrandtlLayer,
                               layer1: PrandtlLayer, corrector1: EulerCorrector,
                               corrector2: EulerCorrector) -> LayerForcing:
    """Momentum forcing f_2 for the second linearized layer.

    Conventions: tilde u_p^(0) = u_p^(0), tilde u_e^(0) = u_e; the order-1
    outer trace is the modified corrector; order 2 enters unmodified here
    (its constant is absorbed only after this layer is solved).  The sums
    over expansion indices are written out term by term; pieces that
    vanish identically (v_e^(0) = 0, v_p^(0) = 0) or that belong to the
    left side of the order-2 system are dropped.
    """
    grid = layer0.grid
    Y = grid.Y_values[None, :]
    tr = _WallTraces(params, {1: corrector1, 2: corrector2}, grid.n_theta)
    uf, vf = _strip_tables([layer0, layer1])
    col = lambda arr: arr[:, None]

    u1 = layer1.u_layer
    p2 = layer1.p_layer
    du1_Y = differentiate_field(u1, grid, "Y")
    du1_YY = differentiate_field(u1, grid, "Y", order=2)
    du0_th = uf[0]["u_th"]

    f2 = (-theta_derivative(p2) + Y * du1_YY + du1_Y
          + theta_derivative(layer0.u_layer, order=2) - layer0.u_layer
          - uf[1]["u"] * theta_derivative(u1)
          - vf[2]["v"] * du1_Y
          # sum_{i+j=2} v^(i) Y dY u^(j): (1,1) and (2,0) survive
          - vf[1]["v"] * Y * uf[1]["u_Y"]
          - vf[2]["v"] * Y * uf[0]["u_Y"])

    # swirl advection by outer traces: sum over k, i+j = 2-k, (k,j) != (0,2)
    f2 -= (col(tr.u(1, 0)) * uf[1]["u_th"] + uf[1]["u"] * col(tr.u(1, 0, th=1))      # k=0 (1,1)
           + col(tr.u(2, 0)) * uf[0]["u_th"] + uf[0]["u"] * col(tr.u(2, 0, th=1))    # k=0 (2,0)
           + col(tr.u(0, 1)) * Y * uf[1]["u_th"]                                     # k=1 (0,1)
           + col(tr.u(1, 1)) * Y * uf[0]["u_th"] + uf[0]["u"] * col(tr.u(1, 1, th=1)) * Y  # k=1 (1,0)
           + col(tr.u(0, 2)) / 2.0 * Y ** 2 * uf[0]["u_th"])                         # k=2 (0,0)
    # ...minus the piece re-added with the raw order-2 trace
    f2 += col(tr.u(2, 0)) * du0_th

    # normal-velocity advection of the swirls: k <= 1, i+j = 2-k
    f2 -= (col(tr.v(1, 0)) * Y * uf[1]["u_Y"]          # k=0 (1,1)
           + col(tr.v(2, 0)) * Y * uf[0]["u_Y"]        # k=0 (2,0)
           + col(tr.v(1, 1)) * Y ** 2 * uf[0]["u_Y"])  # k=1 (1,0); v_e^(0) terms vanish
    f2 -= (vf[1]["v"] * col(tr.rdru(1, 0))             # k=0 (i,j)=(1,1)
           + vf[2]["v"] * col(tr.rdru(0, 0))           # k=0 (2,0)
           + vf[1]["v"] * col(tr.rdru(0, 1)) * Y)      # k=1 (1,0)

    # extra normal advection from i+j = 3-k, excluding the left-side pairs
    f2 -= (col(tr.v(2, 0)) * uf[1]["u_Y"]                  # k=0 (2,1)
           + col(tr.v(1, 1)) * Y * uf[1]["u_Y"]            # k=1 (1,1)
           + col(tr.v(2, 1)) * Y * uf[0]["u_Y"]            # k=1 (2,0)
           + col(tr.v(1, 2)) / 2.0 * Y ** 2 * uf[0]["u_Y"])  # k=2 (1,0)
    return LayerForcing(order=2, f_field=f2)


def build_second_order_pressure_integrand(params: CouetteParams,
                                          layer0: PrandtlLayer,
                                          layer1: PrandtlLayer,
                                          layer2: PrandtlLayer,
                                          corrector1: EulerCorrector,
                                          corrector2_mod: EulerCorrector) -> np.ndarray:
    """Integrand g_2 of dp_p^(3)/dY.

    Here the order-2 outer trace carries the absorbed constant (modified
    corrector) and tilde u_p^(2) = u_p^(2) - A_2infty.
    """
    grid = layer0.grid
    Y = grid.Y_values[None, :]
    tr = _WallTraces(params, {1: corrector1, 2: corrector2_mod}, grid.n_theta)
    uf, vf = _strip_tables([layer0, layer1, layer2])
    col = lambda arr: arr[:, None]

    v1, v2 = layer0.v_layer, layer1.v_layer
    p2 = layer1.p_layer

    g2 = (differentiate_field(v2, grid, "Y", order=2)
          + Y * differentiate_field(v1, grid, "Y", order=2)
          + differentiate_field(v1, grid, "Y")
          - 2.0 * theta_derivative(layer0.u_layer)
          - Y * differentiate_field(p2, grid, "Y")
          # sum_{i+j=3} v^(i) dY v^(j): (1,2) and (2,1) survive
          - vf[1]["v"] * vf[2]["v_Y"] - vf[2]["v"] * vf[1]["v_Y"])

    # sum_{i+j=2} of layer products and first-derivative outer traces
    for i, j in ((0, 2), (1, 1), (2, 0)):
        g2 -= (uf[i]["u"] * vf[j]["v_th"] + vf[i]["v"] * Y * vf[j]["v_Y"]
               - uf[i]["u"] * uf[j]["u"]
               + col(tr.v(i, 0)) * Y * vf[j]["v_Y"]
               + vf[i]["v"] * col(tr.v(j, 1)))

    # sum_{k<=1, i+j=2-k} outer-swirl advection of v and dtheta-v traces
    for k, i, j in ((0, 0, 2), (0, 1, 1), (0, 2, 0), (1, 0, 1), (1, 1, 0)):
        fct = 1.0 if k < 2 else 2.0
        g2 -= (col(tr.u(i, k)) / fct * Y ** k * vf[j]["v_th"]
               + col(tr.v(j, k, th=1)) / fct * Y ** k * uf[i]["u_th"])

    # sum_{k<=2, i+j=2-k} symmetric swirl-trace pairs from the -u^2 term
    for k, i, j in ((0, 0, 2), (0, 1, 1), (0, 2, 0), (1, 0, 1), (1, 1, 0), (2, 0, 0)):
        fct = 2.0 if k == 2 else 1.0
        g2 -= (col(tr.u(i, k)) / fct * Y ** k * uf[j]["u"]
               + col(tr.u(j, k)) / fct * Y ** k * uf[i]["u"])
    return g2


# --------------------------------------------------------------------------
# decay diagnostics
# --------------------------------------------------------------------------

def layer_decay_report(layer: PrandtlLayer, max_weight: int = 3,
                       max_deriv: int = 2) -> dict:
    """Weighted Sobolev-type tails: sum_{j+k<=m} integral |d^j_th d^k_Y (u,v)|^2 <Y>^2l."""
    grid = layer.grid
    Y = grid.Y_values
    wY = np.zeros_like(Y)
    dY = np.diff(Y)
    wY[:-1] += 0.5 * dY
    wY[1:] += 0.5 * dY
    dtheta = 2.0 * np.pi / grid.n_theta
    bracket = 1.0 + Y * Y

    fields = {(0, 0): (layer.u_shifted(), layer.v_layer)}
    for j in range(max_deriv + 1):
        for k in range(max_deriv + 1 - j):
            if (j, k) == (0, 0):
                continue
            u = layer.u_shifted()
            v = layer.v_layer
            if j:
                u = theta_derivative(u, order=j)
                v = theta_derivative(v, order=j)
            for _ in range(k):
                u = differentiate_field(u, grid, "Y")
                v = differentiate_field(v, grid, "Y")
            fields[(j, k)] = (u, v)

    report = {}
    for m in range(max_deriv + 1):
        for l in range(max_weight + 1):
            total = 0.0
            for (j, k), (u, v) in fields.items():
                if j + k > m:
                    continue
                dens = (u * u + v * v) * bracket[None, :] ** l
                total += float(dtheta * np.sum(wY * np.sum(dens, axis=0)))
            report[(m, l)] = total
    return report
