"""Active constraint stack, its per-stage polynomial expansion and the normal matrix Sigma.

The decision vector is Y = [u_0, x_1, u_1, x_2, ..., u_{N-1}, x_N]; x_0 is
fixed. Stage k's block of constraints (active path constraints and the
continuity residual h_k = x_{k+1} - f(x_k, u_k)) is expanded in the local
variables (dx_k, du_k, dx_{k+1}), the terminal block in dx_N.
"""

from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import DynamicsDomainError
from app.core.ocp import ConstraintSet
from app.core.problem import OptimalControlProblem
from app.da import DaContext, PolyMap, TruncatedPoly, compose, constant, evaluate, get_context, jacobian, variable
from app.dynamics.propagator import expand_stage
from app.newton.block_tridiag import BlockTriDiagonal


@dataclass(frozen=True)
class ActiveConstraintStack:
    """Indices of the active path constraints per stage and of the active terminal constraints."""

    path: Tuple[Tuple[int, ...], ...]
    terminal: Tuple[int, ...]
    nx: int

    @property
    def horizon(self) -> int:
        return len(self.path)

    @property
    def size(self) -> int:
        return sum(len(active) + self.nx for active in self.path) + len(self.terminal)

    def stage_rows(self, k: int) -> int:
        return len(self.path[k]) + self.nx


def build_active_set(
    constraints: ConstraintSet,
    states: Sequence[np.ndarray],
    controls: Sequence[np.ndarray],
    target: Sequence[float],
    tol_active: float,
) -> ActiveConstraintStack:
    """Equalities always; inequality i when g_i >= -tol_active."""
    nx = len(states[0])
    path_mask = constraints.path_equality_mask
    path = []
    for x, u in zip(states[:-1], controls):
        values = constraints.path(x, u)
        path.append(tuple(i for i, g in enumerate(values) if path_mask[i] or g >= -tol_active))
    terminal_mask = constraints.terminal_equality_mask
    terminal_values = constraints.terminal(states[-1], target)
    terminal = tuple(i for i, g in enumerate(terminal_values) if terminal_mask[i] or g >= -tol_active)
    return ActiveConstraintStack(tuple(path), terminal, nx)


def _as_poly(context: DaContext, value) -> TruncatedPoly:
    return value if isinstance(value, TruncatedPoly) else constant(context, float(value))


def _split(delta_y: np.ndarray, horizon: int, nx: int, nu: int) -> Tuple[np.ndarray, np.ndarray]:
    """(N+1, nx) state displacements with dx_0 = 0, and (N, nu) control displacements."""
    blocks = np.asarray(delta_y, dtype=float).reshape(horizon, nu + nx)
    dxs = np.vstack([np.zeros(nx), blocks[:, nu:]])
    return dxs, blocks[:, :nu]


def merge_decision(states: Sequence[np.ndarray], controls: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([np.concatenate([u, x]) for u, x in zip(controls, states[1:])])


def apply_decision(
    states: Sequence[np.ndarray],
    controls: Sequence[np.ndarray],
    delta_y: np.ndarray,
) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    nx, nu = len(states[0]), len(controls[0])
    dxs, dus = _split(delta_y, len(controls), nx, nu)
    return [x + dx for x, dx in zip(states, dxs)], [u + du for u, du in zip(controls, dus)]


@dataclass
class GammaPolys:
    """Per-stage constraint maps plus the optional terminal map."""

    stages: List[PolyMap]
    terminal: Optional[PolyMap]
    nx: int
    nu: int

    @property
    def horizon(self) -> int:
        return len(self.stages)

    def residual(self) -> np.ndarray:
        """Constant parts d, stage blocks first, terminal block last."""
        pieces = [m.constant for m in self.stages]
        if self.terminal is not None:
            pieces.append(self.terminal.constant)
        return np.concatenate(pieces)

    def _local_points(self, delta_y: np.ndarray):
        dxs, dus = _split(delta_y, self.horizon, self.nx, self.nu)
        for k in range(self.horizon):
            yield k, np.concatenate([dxs[k], dus[k], dxs[k + 1]])
        if self.terminal is not None:
            yield self.horizon, dxs[-1]

    def evaluate(self, delta_y: np.ndarray) -> np.ndarray:
        """Surrogate constraint values at the displacement delta_y."""
        pieces = []
        for k, point in self._local_points(delta_y):
            poly = self.stages[k] if k < self.horizon else self.terminal
            pieces.append(np.atleast_1d(evaluate(poly, point)))
        return np.concatenate(pieces)

    def shift(self, delta_y: np.ndarray) -> "GammaPolys":
        """Re-center every map at delta_y by composition."""
        stages, terminal = [], None
        for k, point in self._local_points(delta_y):
            poly = self.stages[k] if k < self.horizon else self.terminal
            shifted = compose(poly, [variable(poly.context, i, float(p)) for i, p in enumerate(point)])
            if k < self.horizon:
                stages.append(shifted)
            else:
                terminal = shifted
        return GammaPolys(stages, terminal, self.nx, self.nu)


def expand_gamma(
    problem: OptimalControlProblem,
    states: Sequence[np.ndarray],
    controls: Sequence[np.ndarray],
    stack: ActiveConstraintStack,
) -> GammaPolys:
    """Fresh expansion of every active constraint block around (states, controls)."""
    nx, nu = problem.nx, problem.nu
    order = problem.order
    local = get_context(2 * nx + nu, order)
    lift = [variable(local, i) for i in range(nx + nu)]
    stages = []
    for k, (x, u) in enumerate(zip(states[:-1], controls)):
        try:
            stage_map = expand_stage(problem.model, problem.stage, x, u, problem.context)
        except DynamicsDomainError as e:
            raise e.at(stage=k)
        lifted = compose(stage_map, lift)
        xs = [variable(local, i, float(v)) for i, v in enumerate(x)]
        us = [variable(local, nx + j, float(v)) for j, v in enumerate(u)]
        path = problem.constraints.path(xs, us)
        rows = [_as_poly(local, path[i]) for i in stack.path[k]]
        rows += [
            variable(local, nx + nu + i, float(states[k + 1][i])) - lifted[i]
            for i in range(nx)
        ]
        stages.append(PolyMap(rows))

    terminal = None
    if stack.terminal:
        terminal_ctx = get_context(nx, order)
        xs = [variable(terminal_ctx, i, float(v)) for i, v in enumerate(states[-1])]
        values = problem.constraints.terminal(xs, problem.target)
        terminal = PolyMap([_as_poly(terminal_ctx, values[i]) for i in stack.terminal])
    return GammaPolys(stages, terminal, nx, nu)


class StageJacobian(NamedTuple):
    """Gradients of one stage block with respect to x_k, u_k and x_{k+1}."""

    wrt_state: np.ndarray
    wrt_control: np.ndarray
    wrt_next: np.ndarray


class GammaJacobian(NamedTuple):
    stages: List[StageJacobian]
    terminal: Optional[np.ndarray]

    @property
    def nx(self) -> int:
        return self.stages[0].wrt_state.shape[1]

    @property
    def nu(self) -> int:
        return self.stages[0].wrt_control.shape[1]


def jacobian_blocks(gamma: GammaPolys) -> GammaJacobian:
    nx, nu = gamma.nx, gamma.nu
    stages = []
    for poly in gamma.stages:
        jac = jacobian(poly)
        stages.append(StageJacobian(jac[:, :nx], jac[:, nx:nx + nu], jac[:, nx + nu:]))
    terminal = jacobian(gamma.terminal) if gamma.terminal is not None else None
    return GammaJacobian(stages, terminal)


def assemble_sigma(blocks: GammaJacobian) -> BlockTriDiagonal:
    """
    Sigma = Delta Delta^T built block by block from the gradients.

    Row block k holds stage k's constraints; the terminal block is appended
    when present. Delta is never formed.
    """
    diagonal, lower = [], []
    for k, block in enumerate(blocks.stages):
        d = block.wrt_control @ block.wrt_control.T + block.wrt_next @ block.wrt_next.T
        if k > 0:
            d = d + block.wrt_state @ block.wrt_state.T
            lower.append(block.wrt_state @ blocks.stages[k - 1].wrt_next.T)
        diagonal.append(d)
    if blocks.terminal is not None:
        diagonal.append(blocks.terminal @ blocks.terminal.T)
        lower.append(blocks.terminal @ blocks.stages[-1].wrt_next.T)
    return BlockTriDiagonal(diagonal, lower)


def apply_delta_transpose(blocks: GammaJacobian, w: np.ndarray) -> np.ndarray:
    """Delta^T w, in decision-vector order."""
    sizes = [b.wrt_control.shape[0] for b in blocks.stages]
    if blocks.terminal is not None:
        sizes.append(blocks.terminal.shape[0])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    pieces = [w[offsets[i]:offsets[i + 1]] for i in range(len(sizes))]
    horizon = len(blocks.stages)
    out = []
    for k, block in enumerate(blocks.stages):
        du = block.wrt_control.T @ pieces[k]
        dx_next = block.wrt_next.T @ pieces[k]
        if k + 1 < horizon:
            dx_next = dx_next + blocks.stages[k + 1].wrt_state.T @ pieces[k + 1]
        elif blocks.terminal is not None:
            dx_next = dx_next + blocks.terminal.T @ pieces[horizon]
        out.extend([du, dx_next])
    return np.concatenate(out)


def delta_matrix(blocks: GammaJacobian) -> np.ndarray:
    """Dense Delta, for diagnostics on small problems."""
    nx, nu = blocks.nx, blocks.nu
    horizon = len(blocks.stages)
    width = nu + nx
    rows = []
    for k, block in enumerate(blocks.stages):
        row = np.zeros((block.wrt_control.shape[0], horizon * width))
        row[:, k * width:k * width + nu] = block.wrt_control
        row[:, k * width + nu:(k + 1) * width] = block.wrt_next
        if k > 0:
            row[:, (k - 1) * width + nu:k * width] = block.wrt_state
        rows.append(row)
    if blocks.terminal is not None:
        row = np.zeros((blocks.terminal.shape[0], horizon * width))
        row[:, (horizon - 1) * width + nu:] = blocks.terminal
        rows.append(row)
    return np.vstack(rows)
