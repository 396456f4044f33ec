"""Single-shooting nonlinear MPC with an optional proximity tube.

The decision variable is the stacked control sequence ``u_0 .. u_{N-1}``;
predicted outputs ``y_1 .. y_N`` are recovered by forward simulation of the
plant model. Input bounds are enforced by projection. State bounds, the
proximity balls around a reference trajectory and the terminal ball are
handled as inequality constraints ``g(u) <= 0`` inside an augmented
Lagrangian loop, whose subproblems are solved by projected gradient with an
Armijo backtracking line search. Gradients come from an adjoint sweep.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from .dynamics import BoxSet, PlantModel

logger = logging.getLogger(__name__)

#: Projected-gradient size accepted as stationary once the line search stalls.
STAGNATION_TOL = 1e-6
EPS = np.finfo(float).eps
INNER_SOLVERS = ("lbfgsb", "projected_gradient")
LBFGSB_SCALE = 100.0


class Norm(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    INFINITY = "infinity"

    @classmethod
    def parse(cls, value) -> "Norm":
        if isinstance(value, Norm):
            return value
        aliases = {"l2": cls.EUCLIDEAN, "2": cls.EUCLIDEAN, "linf": cls.INFINITY, "inf": cls.INFINITY}
        key = str(value).strip().lower()
        if key in aliases:
            return aliases[key]
        return cls(key)


def vector_norm(v: np.ndarray, norm: Norm) -> float:
    if norm is Norm.INFINITY:
        return float(np.max(np.abs(v)))
    return float(math.sqrt(float(np.dot(v, v))))


class SolveStatus(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    INFEASIBLE_RELAXED = "infeasible_relaxed"


@dataclass(frozen=True)
class ProximityBall:
    """Ball of ``radius`` in the given norm, centred on a reference point.

    ``margin`` shrinks the radius the solver enforces by a relative amount, so
    that optimal points sitting on the boundary still satisfy the strict
    inequality ``||y - y_ref|| < radius``.
    """

    radius: float = 0.01
    norm: Norm = Norm.EUCLIDEAN
    margin: float = 1e-3

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"proximity radius must be positive, got {self.radius}")
        if not 0.0 <= self.margin < 1.0:
            raise ValueError(f"proximity margin must lie in [0, 1), got {self.margin}")
        object.__setattr__(self, "norm", Norm.parse(self.norm))

    @property
    def enforced_radius(self) -> float:
        return self.radius * (1.0 - self.margin)


def check_proximity(y, ytilde, ball: ProximityBall) -> tuple[bool, float]:
    """Return ``(inside, residual)`` for ``y`` against the ball around ``ytilde``.

    ``inside`` uses the strict comparison ``residual < radius``.
    """
    y = np.asarray(y, dtype=float)
    ytilde = np.asarray(ytilde, dtype=float)
    if y.shape != ytilde.shape:
        raise ValueError(f"dimension mismatch: {y.shape} vs {ytilde.shape}")
    r = vector_norm(y - ytilde, ball.norm)
    return r < ball.radius, r


def _is_positive_definite(M: np.ndarray) -> bool:
    if M.ndim != 2 or M.shape[0] != M.shape[1] or not np.allclose(M, M.T):
        return False
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return False
    return True


def _is_psd(M: np.ndarray, tol: float = 1e-10) -> bool:
    if M.ndim != 2 or M.shape[0] != M.shape[1] or not np.allclose(M, M.T):
        return False
    return bool(np.min(np.linalg.eigvalsh(M)) >= -tol)


@dataclass(frozen=True)
class MpcConfig:
    """Weights, horizon and constraint sets of the tracking MPC problem.

    The stage cost is ``(y - setpoint)' Q (y - setpoint) + u' R u`` and the
    terminal cost is ``e' P e + c' e`` with ``e = y_N - setpoint``. With
    ``terminal_weight=None`` use :func:`with_riccati_terminal` to fill in P
    and c. ``terminal_set_radius=0`` disables the terminal ball.
    """

    horizon: int
    Q: np.ndarray
    R: np.ndarray
    setpoint: np.ndarray
    state_box: BoxSet
    input_box: BoxSet
    terminal_weight: np.ndarray | None = None
    terminal_set_radius: float = 0.0
    terminal_linear: np.ndarray | None = None
    proximity: ProximityBall | None = None
    # solver tolerances
    tol_stationarity: float = 1e-8
    tol_feas: float = 1e-6
    max_outer: int = 30
    max_inner: int = 500
    inner_solver: str = "lbfgsb"
    # tightening of the upper state bounds, so solver tolerance cannot overflow
    state_margin: float = 1e-5

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be a positive integer, got {self.horizon}")
        object.__setattr__(self, "horizon", int(self.horizon))
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        sp = np.asarray(self.setpoint, dtype=float).reshape(-1)
        n, m = self.state_box.dim, self.input_box.dim
        if Q.shape != (n, n) or not _is_positive_definite(Q):
            raise ValueError("Q must be a symmetric positive-definite n x n matrix")
        if R.shape != (m, m) or not _is_positive_definite(R):
            raise ValueError("R must be a symmetric positive-definite m x m matrix")
        if sp.size != n or not self.state_box.contains(sp):
            raise ValueError(f"setpoint {sp} must lie inside the state box")
        P = self.terminal_weight
        if P is not None:
            P = np.atleast_2d(np.asarray(P, dtype=float))
            if P.shape != (n, n) or not _is_psd(P):
                raise ValueError("terminal weight must be a symmetric PSD n x n matrix")
        c = self.terminal_linear
        if c is not None:
            c = np.asarray(c, dtype=float).reshape(-1)
            if c.size != n or not np.all(np.isfinite(c)):
                raise ValueError("terminal_linear must be a finite vector of length n")
        object.__setattr__(self, "terminal_linear", c)
        if self.inner_solver not in INNER_SOLVERS:
            raise ValueError(f"inner_solver must be one of {INNER_SOLVERS}, got {self.inner_solver!r}")
        if not (self.terminal_set_radius >= 0 and math.isfinite(self.terminal_set_radius)):
            raise ValueError("terminal_set_radius must be a non-negative number")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "setpoint", sp)
        object.__setattr__(self, "terminal_weight", P)

    @property
    def P(self) -> np.ndarray:
        if self.terminal_weight is None:
            return np.zeros_like(self.Q)
        return self.terminal_weight

    @property
    def c(self) -> np.ndarray:
        if self.terminal_linear is None:
            return np.zeros(self.Q.shape[0])
        return self.terminal_linear

    def without_proximity(self) -> "MpcConfig":
        return replace(self, proximity=None)


def riccati_terminal_weight(model: PlantModel, setpoint, Q, R) -> np.ndarray:
    """Solve the discrete algebraic Riccati equation at the setpoint linearization."""
    sp = np.asarray(setpoint, dtype=float)
    u_eq = _equilibrium_input(model, sp)
    A, B = model.jacobians(sp, u_eq)
    return scipy.linalg.solve_discrete_are(A, B, np.atleast_2d(Q), np.atleast_2d(R))


def affine_terminal_cost(model: PlantModel, setpoint, Q, R) -> tuple[np.ndarray, np.ndarray]:
    """Terminal ``(P, c)`` from the infinite-horizon LQ problem at the setpoint.

    The input penalty acts on the absolute input, so holding the setpoint
    costs ``u_eq' R u_eq`` every step. A purely quadratic terminal weight
    ignores that, and the optimizer then cuts the last few moves, leaving a
    planned tail that the plant never follows. The linear term ``c`` is the
    gradient at the setpoint of the relative value function of the affine LQ
    problem, which removes that incentive.
    """
    sp = np.asarray(setpoint, dtype=float)
    Q, R = np.atleast_2d(Q), np.atleast_2d(R)
    u_eq = _equilibrium_input(model, sp)
    A, B = model.jacobians(sp, u_eq)
    P = scipy.linalg.solve_discrete_are(A, B, Q, R)
    K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    n = A.shape[0]
    p = -np.linalg.solve((np.eye(n) - (A - B @ K)).T, K.T @ R @ u_eq)
    return P, 2.0 * p


def _equilibrium_input(model: PlantModel, setpoint: np.ndarray) -> np.ndarray:
    if hasattr(model, "equilibrium"):
        return model.equilibrium(float(setpoint[-1]))[1]
    # generic fallback: least-squares input that best holds the setpoint
    _, B = model.jacobians(setpoint, np.zeros(model.m))
    drift = model.step(setpoint, np.zeros(model.m)) - setpoint
    u, *_ = np.linalg.lstsq(B, -drift, rcond=None)
    return model.input_box.project(u)


def with_riccati_terminal(cfg: MpcConfig, model: PlantModel) -> MpcConfig:
    """Return ``cfg`` with the terminal ``(P, c)`` of :func:`affine_terminal_cost` (if P is unset)."""
    if cfg.terminal_weight is not None:
        return cfg
    P, c = affine_terminal_cost(model, cfg.setpoint, cfg.Q, cfg.R)
    return replace(cfg, terminal_weight=P, terminal_linear=c)


@dataclass
class SolveResult:
    controls: np.ndarray  # (N, m), u_0 .. u_{N-1}
    predicted_outputs: np.ndarray  # (N, n), y_1 .. y_N
    cost: float
    status: SolveStatus
    constraint_violation: float
    outer_iterations: int = 0
    inner_iterations: int = 0
    violation_trace: list[float] = field(default_factory=list)

    def shifted_controls(self) -> np.ndarray:
        """Receding-horizon warm start: drop ``u_0``, repeat the last entry."""
        return np.vstack([self.controls[1:], self.controls[-1:]])


def rollout(model: PlantModel, x0, controls) -> np.ndarray:
    """Simulate ``controls`` from ``x0``; returns states ``x_1 .. x_N`` as (N, n)."""
    U = np.asarray(controls, dtype=float)
    if U.ndim == 1:
        U = U.reshape(-1, model.m)
    if U.shape[0] < 1:
        raise ValueError("rollout needs at least one control")
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.size != model.n or not np.all(np.isfinite(x)):
        raise ValueError(f"invalid initial state {x0!r}")
    if not np.all(np.isfinite(U)):
        raise ValueError("controls contain non-finite entries")
    out = np.empty((U.shape[0], model.n))
    for j in range(U.shape[0]):
        x = model.step(x, U[j])
        out[j] = x
    return out


def evaluate_cost(cfg: MpcConfig, predicted, controls, y0=None) -> float:
    """Tracking cost of a trajectory.

    ``predicted`` holds ``y_1 .. y_N`` and ``controls`` holds ``u_0 .. u_{N-1}``.
    Every predicted output carries the Q tracking penalty and the last one also
    carries the terminal cost. If the measured output ``y0`` is given, its
    (constant) Q penalty is added as well.
    """
    Y = np.atleast_2d(np.asarray(predicted, dtype=float))
    U = np.asarray(controls, dtype=float)
    if U.ndim == 1:
        U = U.reshape(Y.shape[0], -1) if Y.shape[0] else U
    N = cfg.horizon
    n, m = cfg.Q.shape[0], cfg.R.shape[0]
    if Y.shape != (N, n) or U.shape != (N, m):
        raise ValueError(
            f"expected predicted ({N}, {n}) and controls ({N}, {m}), got {Y.shape} and {U.shape}"
        )
    E = Y - cfg.setpoint
    cost = float(np.einsum("ij,jk,ik->", E, cfg.Q, E) + np.einsum("ij,jk,ik->", U, cfg.R, U))
    cost += float(E[-1] @ cfg.P @ E[-1] + cfg.c @ E[-1])
    if y0 is not None:
        e0 = np.asarray(y0, dtype=float) - cfg.setpoint
        cost += float(e0 @ cfg.Q @ e0)
    return cost


def cost_gradient(cfg: MpcConfig, model: PlantModel, x0, controls) -> np.ndarray:
    """Gradient of ``evaluate_cost(rollout(x0, controls))`` w.r.t. the stacked controls."""
    U = np.asarray(controls, dtype=float).reshape(cfg.horizon, model.m)
    X = rollout(model, x0, U)
    _, grad = _Problem(cfg, model, np.asarray(x0, dtype=float), None).objective(
        U, X, with_constraints=False
    )
    return grad.reshape(-1)


class _Problem:
    """Constraint bookkeeping and adjoint gradients for one solve."""

    def __init__(self, cfg: MpcConfig, model: PlantModel, x0: np.ndarray, reference):
        self.cfg = cfg
        self.model = model
        self.x0 = x0
        N = cfg.horizon
        self.N = N
        self.QQ = cfg.Q + cfg.Q.T
        self.RR = cfg.R + cfg.R.T
        self.PP = cfg.P + cfg.P.T
        self.lo = cfg.state_box.lower
        self.hi = cfg.state_box.upper - cfg.state_margin

        # proximity centres for stages 1 .. N-1; the last stage is left to the
        # terminal ingredients because its reference point is produced by this solve
        self.centers = None
        if cfg.proximity is not None and reference is not None:
            ref = np.asarray(reference, dtype=float)
            if ref.ndim != 2 or ref.shape[0] != N:
                raise ValueError(f"reference must have {N} rows, got shape {ref.shape}")
            if N > 1:
                self.centers = ref[: N - 1]
        self.ball = cfg.proximity
        self.r_term = cfg.terminal_set_radius

        # multiplier layout: box (N, 2n), proximity (N-1, k), terminal scalar
        n = model.n
        self.lam_box = np.zeros((N, 2 * n))
        k = 0
        if self.centers is not None:
            k = 1 if self.ball.norm is Norm.EUCLIDEAN else 2 * n
        self.lam_prox = np.zeros((max(N - 1, 0), k))
        self.lam_term = 0.0
        self.rho = 100.0

    # -- constraints ---------------------------------------------------------

    def constraints(self, X: np.ndarray):
        """Constraint values in output units; every entry must be <= 0.

        Balls use ``(|d|^2 - r^2) / (2 r)``, which is smooth and has unit slope
        on the boundary.
        """
        g_box = np.hstack([X - self.hi, self.lo - X])
        g_prox = None
        if self.centers is not None:
            D = X[: self.N - 1] - self.centers
            e = self.ball.enforced_radius
            if self.ball.norm is Norm.EUCLIDEAN:
                g_prox = ((np.sum(D * D, axis=1) - e * e) / (2.0 * e))[:, None]
            else:
                g_prox = np.hstack([D - e, -D - e])
        g_term = None
        if self.r_term > 0:
            d = X[-1] - self.cfg.setpoint
            g_term = (float(d @ d) - self.r_term**2) / (2.0 * self.r_term)
        return g_box, g_prox, g_term

    def violation(self, X: np.ndarray) -> float:
        """Largest constraint excess in output units (norm distance beyond radius)."""
        v = float(max(np.max(X - self.hi), np.max(self.lo - X), 0.0))
        if self.centers is not None:
            D = X[: self.N - 1] - self.centers
            for d in D:
                v = max(v, vector_norm(d, self.ball.norm) - self.ball.enforced_radius)
        if self.r_term > 0:
            v = max(v, float(np.linalg.norm(X[-1] - self.cfg.setpoint)) - self.r_term)
        return max(v, 0.0)

    # -- objective -----------------------------------------------------------

    def objective(self, U: np.ndarray, X: np.ndarray, with_constraints: bool = True, grad: bool = True):
        cfg = self.cfg
        E = X - cfg.setpoint
        val = float(np.einsum("ij,jk,ik->", E, cfg.Q, E) + np.einsum("ij,jk,ik->", U, cfg.R, U))
        val += float(E[-1] @ cfg.P @ E[-1] + cfg.c @ E[-1])
        # dL/dy_j for j = 1..N
        dY = E @ self.QQ.T if grad else None
        if grad:
            dY[-1] += self.PP @ E[-1] + cfg.c

        if with_constraints:
            rho = self.rho
            g_box, g_prox, g_term = self.constraints(X)
            val += self._al_term(g_box, self.lam_box)
            if grad:
                mu = np.maximum(0.0, self.lam_box + rho * g_box)
                n = self.model.n
                dY += mu[:, :n] - mu[:, n:]
            if g_prox is not None:
                val += self._al_term(g_prox, self.lam_prox)
                if grad:
                    mu = np.maximum(0.0, self.lam_prox + rho * g_prox)
                    D = X[: self.N - 1] - self.centers
                    e = self.ball.enforced_radius
                    if self.ball.norm is Norm.EUCLIDEAN:
                        dY[: self.N - 1] += mu * (D / e)
                    else:
                        n = self.model.n
                        dY[: self.N - 1] += mu[:, :n] - mu[:, n:]
            if g_term is not None:
                val += self._al_term(np.array([g_term]), np.array([self.lam_term]))
                if grad:
                    mu = max(0.0, self.lam_term + rho * g_term)
                    dY[-1] += mu * (X[-1] - cfg.setpoint) / self.r_term

        if not grad:
            return val, None
        return val, self._adjoint(U, X, dY)

    def _al_term(self, g: np.ndarray, lam: np.ndarray) -> float:
        rho = self.rho
        shifted = np.maximum(0.0, g + lam / rho)
        return float(0.5 * rho * np.sum(shifted * shifted) - np.sum(lam * lam) / (2.0 * rho))

    def _adjoint(self, U: np.ndarray, X: np.ndarray, dY: np.ndarray) -> np.ndarray:
        N = self.N
        G = U @ self.RR.T
        p = dY[-1].copy()
        for j in range(N - 1, -1, -1):
            x_prev = self.x0 if j == 0 else X[j - 1]
            A, B = self.model.jacobians(x_prev, U[j])
            G[j] += B.T @ p
            if j > 0:
                p = A.T @ p + dY[j - 1]
        return G

    def update_multipliers(self, X: np.ndarray):
        g_box, g_prox, g_term = self.constraints(X)
        self.lam_box = np.maximum(0.0, self.lam_box + self.rho * g_box)
        if g_prox is not None:
            self.lam_prox = np.maximum(0.0, self.lam_prox + self.rho * g_prox)
        if g_term is not None:
            self.lam_term = max(0.0, self.lam_term + self.rho * g_term)

    # -- inner solver --------------------------------------------------------

    def minimize(self, U: np.ndarray, max_iter: int, tol: float):
        if self.cfg.inner_solver == "lbfgsb":
            return self.minimize_lbfgsb(U, max_iter, tol)
        return self.minimize_pg(U, max_iter, tol)

    def minimize_lbfgsb(self, U: np.ndarray, max_iter: int, tol: float):
        """Bound-constrained quasi-Newton (L-BFGS-B) on the current AL function.

        The controls are rescaled by ``LBFGSB_SCALE`` so that the first trial
        step, which has unit length, is a small move relative to the thin
        proximity tube.
        """
        shape = U.shape
        sc = LBFGSB_SCALE
        lo = np.tile(self.cfg.input_box.lower, shape[0]) * sc
        hi = np.tile(self.cfg.input_box.upper, shape[0]) * sc

        def fun(z):
            Uz = z.reshape(shape) / sc
            f, g = self.objective(Uz, rollout(self.model, self.x0, Uz))
            return f, g.reshape(-1) / sc

        res = scipy.optimize.minimize(
            fun,
            U.reshape(-1) * sc,
            jac=True,
            method="L-BFGS-B",
            bounds=scipy.optimize.Bounds(lo, hi),
            options={"maxiter": max_iter, "gtol": tol / sc, "ftol": 4 * EPS, "maxcor": 20, "maxls": 50},
        )
        U = self.cfg.input_box.project(res.x.reshape(shape) / sc)
        X = rollout(self.model, self.x0, U)
        _, g = self.objective(U, X)
        pg = float(np.max(np.abs(self.cfg.input_box.project(U - g) - U)))
        return U, X, int(res.nit), pg <= tol or (pg <= STAGNATION_TOL and res.nit < max_iter)

    def minimize_pg(self, U: np.ndarray, max_iter: int, tol: float):
        """Projected gradient with Armijo backtracking on the current AL function.

        The first trial step is 1.0; later trials use the Barzilai-Borwein
        step length from the previous move. Returns ``(U, X, iterations,
        stationary)``.
        """
        box = self.cfg.input_box
        lo = box.lower
        hi = box.upper
        X = rollout(self.model, self.x0, U)
        f, g = self.objective(U, X)
        t0 = 1.0
        stalls = 0
        for it in range(1, max_iter + 1):
            pg = np.clip(U - g, lo, hi) - U
            if np.max(np.abs(pg)) <= tol:
                return U, X, it - 1, True
            t = t0
            while True:
                U_new = np.clip(U - t * g, lo, hi)
                X_new = rollout(self.model, self.x0, U_new)
                f_new, _ = self.objective(U_new, X_new, grad=False)
                if f_new <= f + 1e-4 * float(np.sum(g * (U_new - U))):
                    break
                t *= 0.5
                if t < t0 * 1e-15:
                    # no decrease left at floating-point resolution
                    return U, X, it, bool(np.max(np.abs(pg)) <= STAGNATION_TOL)
            f_new, g_new = self.objective(U_new, X_new)
            # decrease below the resolution of f means we are at the noise floor
            stalls = stalls + 1 if f - f_new <= 4 * EPS * abs(f) else 0
            if stalls >= 3:
                pg = np.clip(U_new - g_new, lo, hi) - U_new
                return U_new, X_new, it, bool(np.max(np.abs(pg)) <= STAGNATION_TOL)
            s = U_new - U
            y = g_new - g
            sy = float(np.sum(s * y))
            t0 = float(np.sum(s * s)) / sy if sy > 0 else 1.0
            t0 = min(max(t0, 1e-12), 1e12)
            U, X, f, g = U_new, X_new, f_new, g_new
        pg = np.clip(U - g, lo, hi) - U
        return U, X, max_iter, bool(np.max(np.abs(pg)) <= tol)


def solve(
    cfg: MpcConfig,
    model: PlantModel,
    x0,
    reference=None,
    warm_start: SolveResult | np.ndarray | None = None,
) -> SolveResult:
    """Solve the finite-horizon problem from ``x0``.

    Parameters
    ----------
    cfg : MpcConfig
        Problem data. The proximity tube is active only when both
        ``cfg.proximity`` and ``reference`` are given.
    model : PlantModel
        Prediction model.
    x0 : array_like
        Current (measured) state.
    reference : array_like, optional
        ``(N, n)`` reference points for stages ``1..N``. The final row is not
        constrained: it is the point this very solve will publish.
    warm_start : SolveResult or array_like, optional
        A previous result (shifted by one stage) or an explicit initial
        control sequence.

    Returns
    -------
    SolveResult
        Never raises on non-convergence; inspect ``status`` and
        ``constraint_violation`` instead.
    """
    N, m = cfg.horizon, model.m
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != model.n or not np.all(np.isfinite(x0)):
        raise ValueError(f"invalid initial state {x0}")
    if not cfg.state_box.contains(x0, tol=1e-12):
        raise ValueError(f"initial state {x0} lies outside the state box")

    if isinstance(warm_start, SolveResult):
        U = warm_start.shifted_controls()
    elif warm_start is not None:
        U = np.asarray(warm_start, dtype=float).reshape(N, m)
    else:
        U = np.tile(_equilibrium_input(model, cfg.setpoint), (N, 1))
    U = cfg.input_box.project(U.reshape(N, m))

    prob = _Problem(cfg, model, x0, reference)
    U, X, inner, stationary = prob.minimize(U, cfg.max_inner, cfg.tol_stationarity)
    viol = prob.violation(X)
    trace = [viol]
    outer = 1
    best = (viol, U, X, stationary)
    while viol > cfg.tol_feas and outer < cfg.max_outer:
        outer += 1
        lam_state = (prob.lam_box.copy(), prob.lam_prox.copy(), prob.lam_term)
        prob.update_multipliers(X)
        U_new, X_new, it, stat_new = prob.minimize(U, cfg.max_inner, cfg.tol_stationarity)
        inner += it
        viol_new = prob.violation(X_new)
        if viol_new > viol:
            # safeguard: reject the iterate, tighten the penalty and retry
            prob.lam_box, prob.lam_prox, prob.lam_term = lam_state
            prob.rho *= 10.0
            continue
        if viol_new > 0.25 * viol:
            prob.rho *= 10.0
        U, X, viol, stationary = U_new, X_new, viol_new, stat_new
        trace.append(viol)
        best = (viol, U, X, stationary)

    viol, U, X, stationary = best
    if viol > cfg.tol_feas:
        status = SolveStatus.INFEASIBLE_RELAXED
    elif stationary:
        status = SolveStatus.CONVERGED
    else:
        status = SolveStatus.MAX_ITERATIONS
    # same code path as rollout() so predictions and controls agree exactly
    X = rollout(model, x0, U)
    cost = evaluate_cost(cfg, X, U, y0=x0)
    return SolveResult(
        controls=U,
        predicted_outputs=X,
        cost=cost,
        status=status,
        constraint_violation=viol,
        outer_iterations=outer,
        inner_iterations=inner,
        violation_trace=trace,
    )
