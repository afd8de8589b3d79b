"""Dense bounded-variable primal simplex.

Rows become equalities through one slack per row (``<=`` slack in [0, inf),
``>=`` slack in (-inf, 0], ``=`` slack fixed at 0). Nonbasic variables sit at
a bound, or at 0 when free. Phase 1 minimises the sum of artificial variables
added only for rows whose slack cannot absorb the initial residual.

Pricing is Dantzig's largest reduced cost; after a run of degenerate pivots
the phase switches to Bland's lowest-index rule, which cannot cycle. Ties
always go to the lowest variable index.
"""

import logging

import numpy as np

from lvrt_pinn.errors import SimplexError
from lvrt_pinn.milp.problem import LpSolution, MilpProblem

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-7
OPTIMALITY_TOL = 1e-7
PIVOT_TOL = 1e-9
DEGENERATE_STEP = 1e-12
DEGENERATE_RUN = 50
REFACTOR_EVERY = 100


class _BoundedSimplex:
    def __init__(
        self, a: np.ndarray, senses: list[str], b: np.ndarray, lower: np.ndarray, upper: np.ndarray
    ):
        m, n = a.shape
        self.m, self.n = m, n
        self.b = b.astype(float)
        slack_lo = np.array([-np.inf if s == ">=" else 0.0 for s in senses])
        slack_hi = np.array([0.0 if s in ("=", ">=") else np.inf for s in senses])
        self.A = np.hstack([a, np.eye(m)])
        self.lo = np.concatenate([lower, slack_lo])
        self.hi = np.concatenate([upper, slack_hi])

        # Nonbasic structurals start at a finite bound, or 0 when free
        x = np.where(np.isfinite(lower), lower, np.where(np.isfinite(upper), upper, 0.0))
        self.x = np.concatenate([x, np.zeros(m)])
        residual = self.b - a @ x

        basis = np.arange(n, n + m)
        artificial_rows = [
            i
            for i in range(m)
            if not (
                self.lo[n + i] - FEASIBILITY_TOL <= residual[i] <= self.hi[n + i] + FEASIBILITY_TOL
            )
        ]
        n_art = len(artificial_rows)
        if n_art:
            art = np.zeros((m, n_art))
            for k, i in enumerate(artificial_rows):
                art[i, k] = 1.0 if residual[i] >= 0 else -1.0
                basis[i] = n + m + k
            self.A = np.hstack([self.A, art])
            self.lo = np.concatenate([self.lo, np.zeros(n_art)])
            self.hi = np.concatenate([self.hi, np.full(n_art, np.inf)])
            self.x = np.concatenate([self.x, np.zeros(n_art)])
        self.n_art = n_art
        self.basis = basis.astype(int)
        self.is_basic = np.zeros(self.A.shape[1], dtype=bool)
        self.is_basic[self.basis] = True
        self.iterations = 0
        self._refactor()

    @property
    def n_total(self) -> int:
        return self.A.shape[1]

    def _refactor(self) -> None:
        try:
            self.Binv = np.linalg.inv(self.A[:, self.basis]) if self.m else np.zeros((0, 0))
        except np.linalg.LinAlgError as e:
            raise SimplexError(
                "Singular basis during refactorization", operation="milp.simplex_solve"
            ) from e
        self._since_refactor = 0
        self._update_basic_values()

    def _update_basic_values(self) -> None:
        nonbasic = ~self.is_basic
        rhs = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.Binv @ rhs

    def run(self, cost: np.ndarray, max_iterations: int) -> str:
        bland = False
        degenerate = 0
        while True:
            if self.iterations >= max_iterations:
                raise SimplexError(
                    f"Pivot limit {max_iterations} reached", operation="milp.simplex_solve"
                )
            if self._since_refactor >= REFACTOR_EVERY:
                self._refactor()
            else:
                self._update_basic_values()

            y = cost[self.basis] @ self.Binv
            d = cost - y @ self.A
            room_up = self.hi - self.x > FEASIBILITY_TOL * 1e-3
            room_down = self.x - self.lo > FEASIBILITY_TOL * 1e-3
            inc = ~self.is_basic & (d < -OPTIMALITY_TOL) & room_up
            dec = ~self.is_basic & (d > OPTIMALITY_TOL) & room_down
            eligible = inc | dec
            if not eligible.any():
                return "optimal"
            candidates = np.flatnonzero(eligible)
            q = int(candidates[0]) if bland else int(candidates[np.argmax(np.abs(d[candidates]))])
            direction = 1.0 if inc[q] else -1.0

            alpha = self.Binv @ self.A[:, q]
            g = direction * alpha
            x_b = self.x[self.basis]
            lo_b = self.lo[self.basis]
            hi_b = self.hi[self.basis]
            limits = np.full(self.m, np.inf)
            down = g > PIVOT_TOL
            up = g < -PIVOT_TOL
            limits[down] = (x_b[down] - lo_b[down]) / g[down]
            limits[up] = (hi_b[up] - x_b[up]) / (-g[up])
            limits = np.maximum(limits, 0.0)
            theta_rows = float(limits.min()) if self.m else np.inf

            flip = self.hi[q] - self.x[q] if direction > 0 else self.x[q] - self.lo[q]
            theta = min(theta_rows, flip)
            if np.isinf(theta):
                return "unbounded"

            self.iterations += 1
            if flip <= theta_rows:
                self.x[q] = self.hi[q] if direction > 0 else self.lo[q]
                degenerate = 0
                continue

            ties = np.flatnonzero(limits <= theta_rows + DEGENERATE_STEP)
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                best = np.abs(g[ties])
                strongest = ties[best >= best.max() - PIVOT_TOL]
                r = int(strongest[np.argmin(self.basis[strongest])])

            leaving = int(self.basis[r])
            self.x[leaving] = self.lo[leaving] if g[r] > 0 else self.hi[leaving]
            self.x[q] += direction * theta
            self.basis[r] = q
            self.is_basic[leaving] = False
            self.is_basic[q] = True

            pivot_row = self.Binv[r] / alpha[r]
            self.Binv -= np.outer(alpha, pivot_row)
            self.Binv[r] = pivot_row
            self._since_refactor += 1

            if theta < DEGENERATE_STEP:
                degenerate += 1
                if degenerate > DEGENERATE_RUN and not bland:
                    logger.debug(f"Switching to Bland's rule after {degenerate} degenerate pivots")
                    bland = True
            else:
                degenerate = 0

    def duals(self, cost: np.ndarray) -> np.ndarray:
        return cost[self.basis] @ self.Binv


def solve_arrays(
    c: np.ndarray,
    a: np.ndarray,
    senses: list[str],
    b: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    maximize: bool = True,
    max_iterations: int | None = None,
) -> LpSolution:
    """Solve ``opt c·x s.t. a x (senses) b, lower <= x <= upper``.

    Returns:
        LpSolution with status optimal, infeasible or unbounded

    Raises:
        SimplexError: On the pivot limit or a failed feasibility post-check
    """
    m, n = a.shape
    if np.any(lower > upper):
        return LpSolution("infeasible")
    max_iterations = max_iterations or 50 * (m + n) + 1000
    solver = _BoundedSimplex(a, senses, b, lower, upper)

    if solver.n_art:
        phase1 = np.zeros(solver.n_total)
        phase1[n + m :] = 1.0
        solver.run(phase1, max_iterations)
        solver._refactor()
        infeasibility = float(solver.x[n + m :].sum())
        if infeasibility > FEASIBILITY_TOL * (1.0 + float(np.max(np.abs(b), initial=0.0))):
            logger.debug(f"Phase 1 ended with infeasibility {infeasibility:.3e}")
            return LpSolution("infeasible", iterations=solver.iterations)
        # Artificials stay in the problem pinned at zero
        solver.hi[n + m :] = 0.0
        solver.x[n + m :] = np.where(solver.is_basic[n + m :], solver.x[n + m :], 0.0)

    sign = -1.0 if maximize else 1.0
    cost = np.zeros(solver.n_total)
    cost[:n] = sign * c
    status = solver.run(cost, max_iterations)
    if status == "unbounded":
        return LpSolution("unbounded", iterations=solver.iterations)

    solver._refactor()
    x = solver.x[:n].copy()
    violation = _violation(a, senses, b, lower, upper, x)
    if violation > FEASIBILITY_TOL:
        raise SimplexError(
            f"Optimal basis violates constraints by {violation:.3e}", operation="milp.simplex_solve"
        )
    duals = sign * solver.duals(cost)
    return LpSolution(
        "optimal",
        objective=float(c @ x),
        values=x,
        duals=duals,
        iterations=solver.iterations,
    )


def _violation(a, senses, b, lower, upper, x) -> float:
    worst = float(max(np.max(lower - x, initial=0.0), np.max(x - upper, initial=0.0)))
    if len(b):
        gap = (a @ x - b) / (1.0 + np.abs(b))
        le = np.array([s == "<=" for s in senses])
        ge = np.array([s == ">=" for s in senses])
        eq = ~(le | ge)
        worst = max(
            worst,
            float(np.max(gap[le], initial=0.0)),
            float(np.max(-gap[ge], initial=0.0)),
            float(np.max(np.abs(gap[eq]), initial=0.0)),
        )
    return worst


def simplex_solve(problem: MilpProblem, max_iterations: int | None = None) -> LpSolution:
    """Solve the LP with binaries treated as continuous [0, 1] variables."""
    a, senses, b = problem.dense()
    lower, upper = problem.bounds_arrays()
    solution = solve_arrays(
        problem.objective_vector(), a, senses, b, lower, upper, problem.maximize, max_iterations
    )
    logger.debug(
        f"LP {problem.n_vars}x{problem.n_rows}: {solution.status} after {solution.iterations} pivots"
    )
    return solution


def solve_lp(problem: MilpProblem) -> LpSolution:
    """Relax the binaries of a MILP and solve the resulting LP."""
    return simplex_solve(problem.relaxed())
