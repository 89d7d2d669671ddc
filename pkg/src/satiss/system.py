"""Discrete transport-dispersion generator, saturated closed loop, time stepping.

The reference instance is the linearized Korteweg-de Vries generator
A z = -z' - z''' on (0, L) with z(0) = z(L) = 0 and z_x(L) = 0, feedback
u = -sigma(B* z + d) with B the identity.  The semi-discrete loop

    dz/dt = A z - sigma(z + d(t))

is integrated by an IMEX scheme: Crank-Nicolson on the stiff linear part
(the third derivative forces dt = O(h^3) on any explicit scheme) and an
explicit midpoint rule on the globally Lipschitz feedback term.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import DissipativityGateFailed, GridMismatchError, ParameterError
from .saturation import SaturationMap, _sat_values
from .spaces import Grid, StateVector

#: gate threshold is this factor times the spectral norm of the operator;
#: eigen-solver noise scales with ||A||.
DISSIPATIVITY_TOLERANCE_FACTOR = 1e-8


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """Dense matrix realization of a linear operator on grid functions."""

    grid: Grid
    matrix: np.ndarray
    max_symmetric_eigenvalue: float = field(init=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        n = self.grid.n_interior
        if m.shape != (n, n):
            raise GridMismatchError(
                "operator is %r but the grid has %d interior nodes" % (m.shape, n))
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        sym = 0.5 * (m + m.T)
        lam = float(np.linalg.eigvalsh(sym)[-1])
        object.__setattr__(self, "max_symmetric_eigenvalue", lam)

    def apply(self, z: StateVector) -> StateVector:
        if z.grid != self.grid:
            raise GridMismatchError("operator and state live on different grids")
        return StateVector(self.grid, self.matrix @ z.values)


def identity_operator(grid: Grid) -> LinearOperator:
    return LinearOperator(grid, np.eye(grid.n_interior))


def dissipativity_tolerance(op: LinearOperator) -> float:
    return DISSIPATIVITY_TOLERANCE_FACTOR * float(np.linalg.norm(op.matrix, 2))


def build_kdv_operator(grid: Grid) -> LinearOperator:
    """Assemble A z = -z' - z''' with the wall conditions encoded in the stencil.

    First derivative: backward (upwind) difference (z_j - z_{j-1}) / h.
    Third derivative: five-point centered stencil
    (-z_{j-2} + 2 z_{j-1} - 2 z_{j+1} + z_{j+2}) / (2 h^3).
    Node values left of the domain and at both walls are zero (Dirichlet);
    the right condition z_x(L) = 0 enters through the reflected ghost
    z_{n+2} := z_n, which folds one entry onto the last diagonal element.

    The upwind part has positive-definite symmetric part and the centered
    part is antisymmetric up to the (negative-semidefinite) ghost fold, so
    the assembled operator must pass the dissipativity gate; failure means
    the stencil/grid combination lost that structure and is rejected.
    """
    n = grid.n_interior
    if n < 5:
        raise ParameterError("the dispersion stencil needs at least 5 interior nodes")
    h = grid.spacing_h
    c1 = 1.0 / h
    c3 = 1.0 / (2.0 * h**3)
    main = np.full(n, -c1)
    main[-1] += -c3  # reflected ghost z_{n+2} = z_n
    sub1 = np.full(n - 1, c1 - 2.0 * c3)
    sup1 = np.full(n - 1, 2.0 * c3)
    sub2 = np.full(n - 2, c3)
    sup2 = np.full(n - 2, -c3)
    m = (np.diag(main) + np.diag(sub1, -1) + np.diag(sup1, 1)
         + np.diag(sub2, -2) + np.diag(sup2, 2))
    op = LinearOperator(grid, m)
    tol = dissipativity_tolerance(op)
    if op.max_symmetric_eigenvalue > tol:
        raise DissipativityGateFailed(op.max_symmetric_eigenvalue, tol)
    return op


def linear_loop_operator(A: LinearOperator) -> LinearOperator:
    """Generator A - B B* of the unsaturated feedback loop (B = identity)."""
    return LinearOperator(A.grid, A.matrix - np.eye(A.grid.n_interior))


def check_dissipativity(A: LinearOperator, n_samples: int = 256, rng_seed: int = 0) -> float:
    """Largest Rayleigh quotient <A z, z> / ||z||^2 over random states and the eigen bound."""
    worst = A.max_symmetric_eigenvalue
    rng = np.random.default_rng(rng_seed)
    m = A.matrix
    for _ in range(n_samples):
        z = rng.standard_normal(A.grid.n_interior)
        worst = max(worst, float(z @ (m @ z)) / float(z @ z))
    return worst


class DisturbanceKind(enum.Enum):
    ZERO = "zero"
    COSINE_SCALED = "cosine_scaled"
    PIECEWISE_CONSTANT_TABLE = "piecewise_constant_table"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class DisturbanceSignal:
    """Disturbance d(t) entering the actuator, valued in grid functions.

    Table entries are interpolated linearly in t (clamped at the ends) so
    the half-step samples of the integrator see a continuous signal.
    """

    kind: DisturbanceKind
    amplitude: float = 0.0
    frequency: float = 1.0
    table_times: np.ndarray = None
    table_values: np.ndarray = None
    func: object = None

    def values_at(self, t: float, grid: Grid) -> np.ndarray:
        n = grid.n_interior
        if self.kind is DisturbanceKind.ZERO:
            return np.zeros(n)
        if self.kind is DisturbanceKind.COSINE_SCALED:
            return np.full(n, self.amplitude * math.cos(self.frequency * t))
        if self.kind is DisturbanceKind.PIECEWISE_CONSTANT_TABLE:
            times = self.table_times
            vals = self.table_values
            if t <= times[0]:
                return np.array(vals[0], dtype=float)
            if t >= times[-1]:
                return np.array(vals[-1], dtype=float)
            i = int(np.searchsorted(times, t, side="right")) - 1
            w = (t - times[i]) / (times[i + 1] - times[i])
            return (1.0 - w) * vals[i] + w * vals[i + 1]
        out = np.asarray(self.func(t), dtype=float)
        if out.ndim == 0:
            return np.full(n, float(out))
        if out.shape != (n,):
            raise GridMismatchError("custom disturbance returned shape %r" % (out.shape,))
        return out

    def norm_at(self, t: float, grid: Grid) -> float:
        v = self.values_at(t, grid)
        return math.sqrt(grid.spacing_h * float(np.dot(v, v)))


def zero_disturbance() -> DisturbanceSignal:
    return DisturbanceSignal(DisturbanceKind.ZERO)


def cosine_disturbance(amplitude: float, frequency: float = 1.0) -> DisturbanceSignal:
    return DisturbanceSignal(DisturbanceKind.COSINE_SCALED,
                             amplitude=amplitude, frequency=frequency)


def table_disturbance(times, states) -> DisturbanceSignal:
    """Tabulated disturbance; ``states`` may be StateVectors or raw value rows."""
    t = np.array(times, dtype=float)
    rows = np.array([s.values if isinstance(s, StateVector) else s for s in states],
                    dtype=float)
    if t.ndim != 1 or len(t) != len(rows) or len(t) < 1:
        raise ParameterError("table needs matching, nonempty times and states")
    if np.any(np.diff(t) <= 0):
        raise ParameterError("table times must be strictly increasing")
    return DisturbanceSignal(DisturbanceKind.PIECEWISE_CONSTANT_TABLE,
                             table_times=t, table_values=rows)


def custom_disturbance(func) -> DisturbanceSignal:
    return DisturbanceSignal(DisturbanceKind.CUSTOM, func=func)


@dataclass(frozen=True, eq=False)
class SaturatedSystem:
    """Closed loop dz/dt = A z - B sigma(B* z + d); sigma = None means the
    unsaturated linear feedback u = -(B* z + d)."""

    A: LinearOperator
    B_is_identity: bool = True
    sigma: SaturationMap = None
    d: DisturbanceSignal = field(default_factory=zero_disturbance)

    def __post_init__(self):
        if not self.B_is_identity:
            raise ParameterError("only the identity control operator is implemented")

    @property
    def feedback_lipschitz(self) -> float:
        return self.sigma.lipschitz_k if self.sigma is not None else 1.0

    def feedback_values(self, values: np.ndarray, t: float) -> np.ndarray:
        """sigma(B* z + d(t)); the applied input is the negative of this."""
        arg = values + self.d.values_at(t, self.A.grid)
        if self.sigma is None:
            return arg
        return _sat_values(self.sigma.kind, arg, self.sigma.level, self.A.grid.spacing_h)

    def rhs_values(self, values: np.ndarray, t: float) -> np.ndarray:
        return self.A.matrix @ values - self.feedback_values(values, t)


def assemble_closed_loop(A: LinearOperator, sigma: SaturationMap,
                         d: DisturbanceSignal = None) -> SaturatedSystem:
    if d is None:
        d = zero_disturbance()
    return SaturatedSystem(A=A, sigma=sigma, d=d)


def with_disturbance(sys: SaturatedSystem, d: DisturbanceSignal) -> SaturatedSystem:
    return replace(sys, d=d)


class _ImexStepper:
    """One-step map: Crank-Nicolson on A, explicit midpoint on the feedback.

    (I - dt/2 A) z+ = (I + dt/2 A) z - dt sigma(B* zhat + d(t + dt/2)),
    zhat = z + dt/2 (A z - sigma(B* z + d(t))).

    The half-step system matrix is LU-factored once per (A, dt).
    """

    def __init__(self, sys: SaturatedSystem, dt: float):
        if not dt > 0:
            raise ParameterError("dt must be positive")
        if dt * sys.feedback_lipschitz >= 1.0:
            raise ParameterError(
                "dt * k = %g >= 1: explicit feedback term needs a smaller step"
                % (dt * sys.feedback_lipschitz))
        self.sys = sys
        self.dt = dt
        n = sys.A.grid.n_interior
        m = sparse.identity(n, format="csc") - (dt / 2.0) * sparse.csc_matrix(sys.A.matrix)
        try:
            self._solve = splu(m).solve
        except RuntimeError as exc:
            raise ParameterError("half-step system is singular: %s" % exc)

    def step_values(self, values: np.ndarray, t: float) -> np.ndarray:
        sys = self.sys
        dt = self.dt
        az = sys.A.matrix @ values
        zhat = values + 0.5 * dt * (az - sys.feedback_values(values, t))
        um = sys.feedback_values(zhat, t + 0.5 * dt)
        return self._solve(values + 0.5 * dt * az - dt * um)


_STEPPER_CACHE = {}


def _stepper_for(sys: SaturatedSystem, dt: float) -> _ImexStepper:
    key = (id(sys), float(dt))
    hit = _STEPPER_CACHE.get(key)
    if hit is not None and hit.sys is sys:
        return hit
    if len(_STEPPER_CACHE) > 16:
        _STEPPER_CACHE.clear()
    stepper = _ImexStepper(sys, dt)
    _STEPPER_CACHE[key] = stepper
    return stepper


def step(sys: SaturatedSystem, z: StateVector, t: float, dt: float) -> StateVector:
    """Advance one IMEX step from (z, t) to t + dt."""
    if z.grid != sys.A.grid:
        raise GridMismatchError("state and system live on different grids")
    return StateVector(z.grid, _stepper_for(sys, dt).step_values(z.values, t))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time series of states with per-step norm and Lyapunov observables."""

    grid: Grid
    times: np.ndarray
    states: np.ndarray  # row i is the state at times[i]
    observables: dict

    OBSERVABLE_COLUMNS = ("norm_l2", "norm_linf", "norm_graph",
                          "V", "V1", "V2", "norm_u", "norm_d")

    def __len__(self):
        return len(self.times)

    def state_at(self, i: int) -> StateVector:
        return StateVector(self.grid, self.states[i])

    def write_observables_csv(self, path):
        cols = self.OBSERVABLE_COLUMNS
        with open(path, "w") as fh:
            fh.write("t," + ",".join(cols) + "\n")
            for i, t in enumerate(self.times):
                row = [_fmt(t)] + [_fmt(self.observables[c][i]) for c in cols]
                fh.write(",".join(row) + "\n")

    def write_states_csv(self, path):
        n = self.grid.n_interior
        with open(path, "w") as fh:
            fh.write("t," + ",".join("z%d" % j for j in range(1, n + 1)) + "\n")
            for i, t in enumerate(self.times):
                fh.write(_fmt(t) + "," + ",".join(_fmt(v) for v in self.states[i]) + "\n")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def simulate(sys: SaturatedSystem, z0: StateVector, T: float, dt: float,
             observers: dict = None) -> Trajectory:
    """Integrate the closed loop over [0, T] and record observables per step.

    ``observers`` may supply callables ``{"V": f, "V1": g, "V2": h}`` mapping
    a StateVector to a float; without them V defaults to ||z||^2 (identity
    weight) and V1, V2 are recorded as NaN.
    """
    if not T > 0:
        raise ParameterError("horizon T must be positive")
    if not 0 < dt <= T:
        raise ParameterError("dt must lie in (0, T]")
    if z0.grid != sys.A.grid:
        raise GridMismatchError("initial state and system live on different grids")
    grid = sys.A.grid
    h = grid.spacing_h
    a_matrix = sys.A.matrix
    observers = observers or {}

    n_steps = max(1, int(math.ceil(T / dt - 1e-9)))
    last_dt = T - (n_steps - 1) * dt
    stepper = _ImexStepper(sys, dt)
    same_last = abs(last_dt - dt) <= 1e-12 * dt
    stepper_last = stepper if same_last else _ImexStepper(sys, last_dt)

    times = np.empty(n_steps + 1)
    states = np.empty((n_steps + 1, grid.n_interior))
    obs = {c: np.empty(n_steps + 1) for c in Trajectory.OBSERVABLE_COLUMNS}

    def record(i, t, values):
        times[i] = t
        states[i] = values
        nrm2 = h * float(np.dot(values, values))
        obs["norm_l2"][i] = math.sqrt(max(nrm2, 0.0))
        obs["norm_linf"][i] = float(np.max(np.abs(values)))
        image = a_matrix @ values
        obs["norm_graph"][i] = obs["norm_l2"][i] + math.sqrt(h * float(np.dot(image, image)))
        zi = StateVector(grid, values)
        obs["V"][i] = observers["V"](zi) if "V" in observers else nrm2
        obs["V1"][i] = observers["V1"](zi) if "V1" in observers else math.nan
        obs["V2"][i] = observers["V2"](zi) if "V2" in observers else math.nan
        u = sys.feedback_values(values, t)
        obs["norm_u"][i] = math.sqrt(h * float(np.dot(u, u)))
        obs["norm_d"][i] = sys.d.norm_at(t, grid)

    z = np.array(z0.values, dtype=float)
    t = 0.0
    record(0, t, z)
    for i in range(n_steps):
        if i < n_steps - 1:
            z = stepper.step_values(z, t)
            t = (i + 1) * dt
        else:
            z = stepper_last.step_values(z, t)
            t = T
        record(i + 1, t, z)
    states.setflags(write=False)
    times.setflags(write=False)
    return Trajectory(grid=grid, times=times, states=states, observables=obs)
