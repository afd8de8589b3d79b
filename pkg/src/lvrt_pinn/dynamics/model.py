"""Hybrid DAE model of a grid-following converter.

The equations are written once against an array namespace ``xp`` (``numpy``
or ``torch``) so the simulator and the physics-informed loss evaluate the same
expressions. Public scalar entry points (``algebraic_eval``, ``rhs``) use numpy
and enforce the V_meas validity floor; the loss path clamps instead.
"""

import logging
from dataclasses import dataclass, fields
from typing import Any

import numpy as np

from lvrt_pinn.dynamics.params import ConverterParams
from lvrt_pinn.errors import EquilibriumNotFoundError, ModelValidityError

logger = logging.getLogger(__name__)

V_MEAS_FLOOR = 1e-6

STATE_NAMES = ("theta_pll", "i_d", "i_q", "V_meas")
ALGEBRAIC_NAMES = (
    "v_d",
    "v_q",
    "omega_pll",
    "P_VSC",
    "V_PCC",
    "Q_VSC",
    "v_gd",
    "v_gq",
    "P_total",
    "Q_total",
)
OUTPUT_NAMES = STATE_NAMES + ALGEBRAIC_NAMES


@dataclass(frozen=True)
class ConverterState:
    """Differential states plus the latched LVRT factor.

    Attributes:
        theta_pll: PLL angle [rad]
        i_d: d-axis current [pu]
        i_q: q-axis current [pu]
        V_meas: filtered voltage magnitude [pu]
        f_latched: running minimum of the LVRT characteristic [-]
    """

    theta_pll: float
    i_d: float
    i_q: float
    V_meas: float
    f_latched: float = 1.0

    def continuous(self) -> np.ndarray:
        return np.array([self.theta_pll, self.i_d, self.i_q, self.V_meas], dtype=float)

    @classmethod
    def from_continuous(cls, x: np.ndarray, f_latched: float = 1.0) -> "ConverterState":
        return cls(float(x[0]), float(x[1]), float(x[2]), float(x[3]), float(f_latched))


@dataclass(frozen=True)
class AlgebraicVars:
    """Algebraic quantities derived from a state and the external voltage."""

    v_d: float
    v_q: float
    omega_pll: float
    v_gd: float
    v_gq: float
    P_VSC: float
    Q_VSC: float
    V_PCC: float
    P_total: float
    Q_total: float
    i_Q: float
    f_inst: float
    f: float
    i_d_ref: float
    i_q_ref: float
    I_d_max: float
    I_q_max: float

    @classmethod
    def from_mapping(cls, values: dict[str, Any]) -> "AlgebraicVars":
        return cls(**{f.name: float(values[f.name]) for f in fields(cls)})


def lvrt_factor(xp, v_meas, p: ConverterParams):
    """Instantaneous three-piece LVRT characteristic f_inst(V_meas).

    f_inst is 1 at or above V_int, a droop from c down to 0 between V_min and
    V_int, and 0 below V_min.
    """
    ramp = p.c * (v_meas - p.V_min) / (p.V_int - p.V_min)
    f = xp.where(v_meas >= p.V_int, xp.ones_like(v_meas), ramp)
    return xp.where(v_meas < p.V_min, xp.zeros_like(v_meas), f)


def reactive_injection(xp, v_meas, p: ConverterParams):
    """Voltage-support current i_Q (zero above V_Q, droop below)."""
    droop = -(p.K_RCI * (p.V_Q - v_meas) + p.I_Q0)
    return xp.where(v_meas > p.V_Q, xp.zeros_like(v_meas), droop)


def _circle(xp, limit: float, other):
    # sqrt(I_nom^2 - other^2), floored so the derivative stays finite
    return xp.sqrt(xp.clip(limit * limit - other * other, 1e-300, None))


def evaluate_algebraic(xp, theta, i_d, i_q, v_meas, f_latched, v_t, p: ConverterParams) -> dict:
    """Evaluate every algebraic relation of the model.

    The external network is an infinite bus at V_t behind the coupling
    impedance, so the network-frame voltage is (v_x, v_y) = (V_t, 0).

    Returns:
        Mapping from AlgebraicVars field names to arrays of the input shape
    """
    v_x = v_t
    v_y = xp.zeros_like(v_t)
    cos_t = xp.cos(theta)
    sin_t = xp.sin(theta)
    v_d = v_x * cos_t + v_y * sin_t
    v_q = -v_x * sin_t + v_y * cos_t
    omega = p.K_pomega * v_q + 1.0

    # Inverse of the coupling impedance relations
    v_gd = v_d + omega * p.L_c * i_q - p.R_c * i_d
    v_gq = v_q - omega * p.L_c * i_d - p.R_c * i_q

    i_inj = reactive_injection(xp, v_meas, p)
    f_inst = lvrt_factor(xp, v_meas, p)
    f = xp.minimum(f_inst, f_latched)

    above = v_meas >= p.v_limit
    nominal = xp.full_like(v_meas, p.I_nom)
    i_d_max = xp.where(above, nominal, _circle(xp, p.I_nom, i_q))
    i_q_max = xp.where(above, _circle(xp, p.I_nom, i_d), nominal)

    i_d_ref = xp.minimum(p.P_ext / v_meas * f, i_d_max)
    i_q_ref_raw = (-p.Q_ext / v_meas + i_inj) * f
    i_q_ref = xp.minimum(xp.maximum(i_q_ref_raw, -i_q_max), i_q_max)

    return {
        "v_d": v_d,
        "v_q": v_q,
        "omega_pll": omega,
        "v_gd": v_gd,
        "v_gq": v_gq,
        "P_VSC": v_d * i_d + v_q * i_q,
        "Q_VSC": v_q * i_d - v_d * i_q,
        "V_PCC": xp.sqrt(v_x * v_x + v_y * v_y),
        "P_total": v_gd * i_d + v_gq * i_q,
        "Q_total": v_gq * i_d - v_gd * i_q,
        "i_Q": i_inj,
        "f_inst": f_inst,
        "f": f,
        "i_d_ref": i_d_ref,
        "i_q_ref": i_q_ref,
        "I_d_max": i_d_max,
        "I_q_max": i_q_max,
    }


def evaluate_derivatives(xp, theta, i_d, i_q, v_meas, f_latched, v_t, p: ConverterParams):
    """Time derivatives of (theta_pll, i_d, i_q, V_meas) and the algebraic mapping.

    The PLL uses the deviation form (omega_pll - 1) * omega_ref so that the
    pre-fault operating point is an equilibrium.
    """
    alg = evaluate_algebraic(xp, theta, i_d, i_q, v_meas, f_latched, v_t, p)
    d_theta = (alg["omega_pll"] - 1.0) * p.omega_ref
    d_id = (alg["i_d_ref"] - i_d) / p.T_p
    d_iq = (alg["i_q_ref"] - i_q) / p.T_q
    d_vm = (xp.sqrt(alg["v_d"] ** 2 + alg["v_q"] ** 2) - v_meas) / p.T_m
    return (d_theta, d_id, d_iq, d_vm), alg


def check_validity(v_meas: np.ndarray, operation: str) -> None:
    """Raise when V_meas falls below the division floor."""
    if np.any(np.asarray(v_meas) < V_MEAS_FLOOR):
        raise ModelValidityError(
            f"V_meas fell below {V_MEAS_FLOOR} pu; the model left its validity region",
            operation=operation,
        )


def algebraic_eval(state: ConverterState, V_t: float, params: ConverterParams) -> AlgebraicVars:
    """Evaluate the algebraic variables for one state and external voltage.

    Raises:
        ModelValidityError: If V_meas is below the division floor
    """
    if V_t < 0:
        raise ValueError(f"V_t must be >= 0, got {V_t}")
    check_validity(state.V_meas, "dynamics.algebraic_eval")
    values = evaluate_algebraic(
        np,
        np.float64(state.theta_pll),
        np.float64(state.i_d),
        np.float64(state.i_q),
        np.float64(state.V_meas),
        np.float64(state.f_latched),
        np.float64(V_t),
        params,
    )
    return AlgebraicVars.from_mapping(values)


def rhs(state: ConverterState, V_t: float, params: ConverterParams) -> np.ndarray:
    """Derivative of the four continuous states at one point.

    Returns:
        Array ``[dtheta_pll/dt, di_d/dt, di_q/dt, dV_meas/dt]``
    """
    check_validity(state.V_meas, "dynamics.rhs")
    derivs, _ = evaluate_derivatives(
        np,
        np.float64(state.theta_pll),
        np.float64(state.i_d),
        np.float64(state.i_q),
        np.float64(state.V_meas),
        np.float64(state.f_latched),
        np.float64(V_t),
        params,
    )
    return np.array([float(d) for d in derivs])


def _residual(x: np.ndarray, V_t: float, params: ConverterParams) -> np.ndarray:
    return rhs(ConverterState.from_continuous(x, 1.0), V_t, params)


def find_equilibrium(
    params: ConverterParams,
    V_t: float = 1.0,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> ConverterState:
    """Solve rhs(x) = 0 with a damped Newton iteration.

    Starts from the zero-impedance operating point (theta = 0, V_meas = V_t,
    currents at their references) and uses a central-difference Jacobian with
    backtracking on the residual norm.

    Args:
        params: Converter parameters
        V_t: External voltage at the operating point, must exceed V_int
        tol: Residual infinity-norm tolerance
        max_iter: Newton iteration budget

    Returns:
        Equilibrium state with f_latched = 1

    Raises:
        ValueError: If V_t does not exceed V_int
        EquilibriumNotFoundError: If the iteration does not converge
    """
    if V_t <= params.V_int:
        raise ValueError(f"Equilibrium requires V_t > V_int ({params.V_int}), got {V_t}")

    i_inj = 0.0 if V_t > params.V_Q else -(params.K_RCI * (params.V_Q - V_t) + params.I_Q0)
    x = np.array([0.0, params.P_ext / V_t, -params.Q_ext / V_t + i_inj, V_t])
    r = _residual(x, V_t, params)

    for iteration in range(max_iter + 1):
        norm = float(np.max(np.abs(r)))
        if norm < tol:
            logger.debug(f"Equilibrium found after {iteration} Newton iterations (|r|={norm:.2e})")
            return ConverterState.from_continuous(x, 1.0)

        jac = np.empty((4, 4))
        for j in range(4):
            h = 1e-7 * max(1.0, abs(x[j]))
            step = np.zeros(4)
            step[j] = h
            forward_r = _residual(x + step, V_t, params)
            backward_r = _residual(x - step, V_t, params)
            jac[:, j] = (forward_r - backward_r) / (2 * h)
        try:
            dx = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(jac, -r, rcond=None)[0]

        alpha = 1.0
        while alpha > 1e-6:
            candidate = x + alpha * dx
            if candidate[3] > V_MEAS_FLOOR:
                r_new = _residual(candidate, V_t, params)
                if np.max(np.abs(r_new)) < norm:
                    break
            alpha *= 0.5
        else:
            break
        x, r = candidate, r_new

    raise EquilibriumNotFoundError(
        f"Newton iteration did not converge in {max_iter} iterations "
        f"(residual={float(np.max(np.abs(r))):.3e})",
        operation="dynamics.find_equilibrium",
    )
