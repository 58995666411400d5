"""Interface-fitted moving space-time meshes and the Petrov-Galerkin system.

Trial space: continuous piecewise-linear in time times P1 on nodes transported
by the flow. Test space: piecewise-constant in time times the same P1 hats,
plus the initial block on Sigma_0. Inside a slab node trajectories are linear,
so the Eulerian time derivative of a trial function is

    d_t phi = tau'(t) psi_i - tau(t) w_mesh psi_i'.
"""
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional, Tuple

import numpy as np
import scipy.sparse as sparse
from scipy import linalg

from coefficient import PiecewiseCoefficient
from errors import DomainViolationError, InternalInconsistencyError, NumericalFailureError
from motion import MotionMap
from quadrature_utils import ElementRule, fitted_element_rule, free_nodes, interval_rule
from scheduler import run_ordered
from spatial_operator import SpatialOperator


logger = logging.getLogger(__name__)

MIN_ELEMENT = 1e-6
SUPPORT_TOL = 1e-9

ROW_SLAB = 0
ROW_INITIAL = 1
ROW_ELLIPTIC = 2

SourceFn = Callable[[np.ndarray, float, np.ndarray], np.ndarray]
InitialFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
FluxFn = Callable[[float], Tuple[float, float]]


def _zero_source(x, t, side):
    return np.zeros_like(np.asarray(x, dtype=float))


def _zero_initial(x, side):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ProblemData:
    """g1 as a per-branch source plus optional Neumann fluxes (left, right); g2 on Sigma_0."""
    source: SourceFn = _zero_source
    initial: InitialFn = _zero_initial
    flux: Optional[FluxFn] = None
    name: str = 'zero'


@dataclass(frozen=True)
class Problem:
    motion: MotionMap
    coeff: PiecewiseCoefficient
    op: SpatialOperator
    data: ProblemData = field(default_factory=ProblemData)
    exact: Optional[Any] = None
    name: str = ''

    @property
    def boundary(self) -> str:
        return self.op.boundary


@dataclass(frozen=True)
class AssemblyContext:
    q_x: int = 4
    q_t: int = 3
    jobs: int = 1
    weight_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.q_x < 2 or self.q_t < 2:
            raise DomainViolationError(f"quadrature orders must be >= 2, got ({self.q_x}, {self.q_t})")
        if self.jobs < 1:
            raise DomainViolationError(f"jobs must be >= 1, got {self.jobs}")


@dataclass(frozen=True, eq=False)
class SpaceTimeMesh:
    initial_nodes: np.ndarray
    times: np.ndarray
    levels: np.ndarray
    interface_index: int
    boundary: str
    motion: MotionMap

    @property
    def n_x(self) -> int:
        return self.initial_nodes.size - 1

    @property
    def n_t(self) -> int:
        return self.times.size - 1

    @property
    def dofs(self) -> np.ndarray:
        return free_nodes(self.initial_nodes.size, self.boundary)

    @property
    def n_dofs(self) -> int:
        return int(self.dofs.size)

    @property
    def dof_of_node(self) -> np.ndarray:
        out = np.full(self.initial_nodes.size, -1, dtype=int)
        out[self.dofs] = np.arange(self.n_dofs)
        return out

    @property
    def trial_dim(self) -> int:
        return (self.n_t + 1) * self.n_dofs

    @property
    def test_dim(self) -> int:
        return self.n_t * self.n_dofs + self.n_dofs

    @property
    def node_sides(self) -> np.ndarray:
        """Branch label per node; the interface node counts as side 1."""
        idx = np.arange(self.initial_nodes.size)
        return np.where(idx <= self.interface_index, 1, 2)

    def step(self, n: int) -> float:
        return float(self.times[n + 1] - self.times[n])

    def slab_of(self, t: float) -> int:
        if t < -1e-12 or t > self.times[-1] + 1e-12:
            raise DomainViolationError(f"time {t} outside the mesh horizon")
        n = int(np.searchsorted(self.times, t, side='right')) - 1
        return min(max(n, 0), self.n_t - 1)

    def nodes_at(self, t: float) -> Tuple[int, float, np.ndarray]:
        n = self.slab_of(t)
        theta = (t - self.times[n]) / self.step(n)
        return n, theta, (1.0 - theta) * self.levels[n] + theta * self.levels[n + 1]

    def mesh_velocity(self, n: int) -> np.ndarray:
        return (self.levels[n + 1] - self.levels[n]) / self.step(n)

    def info(self) -> dict:
        return {'n_x': self.n_x, 'n_t': self.n_t, 'trial_dim': self.trial_dim, 'boundary': self.boundary}


def build_mesh(n_x: int, n_t: int, motion: MotionMap, gamma0: Optional[float] = None,
               boundary: str = 'dirichlet') -> SpaceTimeMesh:
    if n_x < 2 or n_t < 1:
        raise DomainViolationError(f"need n_x >= 2 and n_t >= 1, got ({n_x}, {n_t})")
    gamma0 = motion.gamma0 if gamma0 is None else float(gamma0)
    if abs(gamma0 - motion.gamma0) > 1e-15:
        raise DomainViolationError(f"mesh interface {gamma0} differs from the motion's {motion.gamma0}")
    n_left = min(max(1, int(round(n_x * gamma0))), n_x - 1)
    initial = np.concatenate([np.linspace(0.0, gamma0, n_left + 1),
                              np.linspace(gamma0, 1.0, n_x - n_left + 1)[1:]])
    times = np.linspace(0.0, motion.horizon, n_t + 1)
    levels = np.empty((n_t + 1, n_x + 1))
    for n, t in enumerate(times):
        levels[n] = motion.forward_map(initial, t)
        levels[n, n_left] = motion.interface_position(t)
        levels[n, 0], levels[n, -1] = 0.0, 1.0
    lengths = np.diff(levels, axis=1)
    if np.min(lengths) < MIN_ELEMENT:
        raise NumericalFailureError(f"degenerate element of length {np.min(lengths):.3e} under the motion")
    mesh = SpaceTimeMesh(initial_nodes=initial, times=times, levels=levels, interface_index=n_left,
                         boundary=boundary, motion=motion)
    logger.debug("[MESH] %dx%d mesh, interface node %d, min element %.3e", n_x, n_t, n_left, np.min(lengths))
    return mesh


@dataclass(frozen=True)
class MeshPoints:
    """Quadrature points of the trial mesh at one time, split at gamma(t)."""
    slab: int
    theta: float
    t: float
    rule: ElementRule
    h: np.ndarray
    mesh_velocity: np.ndarray

    @property
    def left(self) -> np.ndarray:
        return self.rule.elem

    @property
    def right(self) -> np.ndarray:
        return self.rule.elem + 1


def mesh_points(mesh: SpaceTimeMesh, t: float, order: int, slab: Optional[int] = None) -> MeshPoints:
    n = mesh.slab_of(t) if slab is None else slab
    theta = (t - mesh.times[n]) / mesh.step(n)
    nodes = (1.0 - theta) * mesh.levels[n] + theta * mesh.levels[n + 1]
    rule = fitted_element_rule(nodes, float(mesh.motion.interface_position(t)), order)
    e = rule.elem
    wn = mesh.mesh_velocity(n)
    return MeshPoints(slab=n, theta=theta, t=t, rule=rule, h=np.diff(nodes)[e],
                      mesh_velocity=(1.0 - rule.lam) * wn[e] + rule.lam * wn[e + 1])


def full_levels(mesh: SpaceTimeMesh, coefficients: np.ndarray) -> np.ndarray:
    """(n_t+1, n_x+1) nodal values with zeros on Dirichlet nodes."""
    out = np.zeros((mesh.n_t + 1, mesh.n_x + 1))
    out[:, mesh.dofs] = np.asarray(coefficients, dtype=float).reshape(mesh.n_t + 1, mesh.n_dofs)
    return out


def evaluate_trial(mesh: SpaceTimeMesh, nodal: np.ndarray, pts: MeshPoints) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(value, dx, Eulerian dt) of a trial function given by its full nodal levels."""
    n, theta, lam = pts.slab, pts.theta, pts.rule.lam
    vals = (1.0 - theta) * nodal[n] + theta * nodal[n + 1]
    rate = (nodal[n + 1] - nodal[n]) / mesh.step(n)
    value = vals[pts.left] * (1.0 - lam) + vals[pts.right] * lam
    dx = (vals[pts.right] - vals[pts.left]) / pts.h
    dt = rate[pts.left] * (1.0 - lam) + rate[pts.right] * lam - dx * pts.mesh_velocity
    return value, dx, dt


def interpolate(mesh: SpaceTimeMesh, value_fn: Callable[[np.ndarray, float, np.ndarray], np.ndarray]) -> np.ndarray:
    """Nodal interpolant of value_fn(x, t, side) as a trial coefficient vector."""
    dofs = mesh.dofs
    sides = mesh.node_sides[dofs]
    out = np.empty((mesh.n_t + 1, mesh.n_dofs))
    for n, t in enumerate(mesh.times):
        out[n] = value_fn(mesh.levels[n][dofs], float(t), sides)
    return out.ravel()


def _scatter(target: np.ndarray, rows: np.ndarray, cols: np.ndarray, vals: np.ndarray) -> None:
    keep = (rows >= 0) & (cols >= 0)
    np.add.at(target, (rows[keep], cols[keep]), vals[keep])


def _scatter_vec(target: np.ndarray, rows: np.ndarray, vals: np.ndarray) -> None:
    keep = rows >= 0
    np.add.at(target, rows[keep], vals[keep])


@dataclass
class _SlabBlocks:
    B: Optional[np.ndarray]
    f: Optional[np.ndarray]
    M_Y: np.ndarray
    M_X: np.ndarray


def _slab_blocks(n: int, mesh: SpaceTimeMesh, coeff: PiecewiseCoefficient, problem: Optional[Problem],
                 actx: AssemblyContext) -> _SlabBlocks:
    M = mesh.n_dofs
    dof = mesh.dof_of_node
    dt_n = mesh.step(n)
    rate = actx.weight_rate
    with_system = problem is not None
    B = np.zeros((M, 2 * M)) if with_system else None
    f = np.zeros(M) if with_system else None
    M_Y = np.zeros((M, M))
    M_X = np.zeros((2 * M, 2 * M))
    tq, wq = interval_rule(float(mesh.times[n]), float(mesh.times[n + 1]), actx.q_t)
    for t, wt in zip(tq, wq):
        t = float(t)
        pts = mesh_points(mesh, t, actx.q_x, slab=n)
        rule = pts.rule
        w = wt * rule.w
        lam = rule.lam
        alpha, _, _ = coeff.evaluate_side(rule.x, t, rule.side)
        hat_v = (1.0 - lam, lam)
        hat_d = (-1.0 / pts.h, 1.0 / pts.h)
        node = (pts.left, pts.right)
        tau = (1.0 - pts.theta, pts.theta)
        tau_t = (-1.0 / dt_n, 1.0 / dt_n)

        gram = np.zeros((M, M))
        for b in (0, 1):
            for b2 in (0, 1):
                _scatter(gram, dof[node[b]], dof[node[b2]],
                         rule.w * (hat_v[b] * hat_v[b2] + hat_d[b] * hat_d[b2]))
        M_Y += wt * gram

        trial = []
        for level in (0, 1):
            for a in (0, 1):
                col = np.where(dof[node[a]] >= 0, level * M + dof[node[a]], -1)
                phi = tau[level] * hat_v[a]
                phi_x = tau[level] * hat_d[a]
                phi_t = tau_t[level] * hat_v[a] - tau[level] * hat_d[a] * pts.mesh_velocity
                trial.append((col, phi, phi_x, phi_t))

        # primal part on the slab average (u_n + u_{n+1}) / 2, carried by the moving hats
        for i, (col, _, _, _) in enumerate(trial):
            a = i % 2
            for j, (col2, _, _, _) in enumerate(trial):
                a2 = j % 2
                _scatter(M_X, col, col2, 0.25 * w * (hat_v[a] * hat_v[a2] + hat_d[a] * hat_d[a2]))

        riesz = np.zeros((M, 2 * M))
        for col, phi, phi_x, phi_t in trial:
            for b in (0, 1):
                _scatter(riesz, dof[node[b]], col, rule.w * alpha * phi_t * hat_v[b])
        if np.any(riesz):
            factor = linalg.cho_factor(gram)
            M_X += wt * (riesz.T @ linalg.cho_solve(factor, riesz))

        if not with_system:
            continue
        op = problem.op
        k = op.diffusion_at(rule, t)
        weight = math.exp(rate * t)
        for col, phi, phi_x, phi_t in trial:
            u = weight * phi
            u_x = weight * phi_x
            u_t = weight * (phi_t + rate * phi)
            for b in (0, 1):
                psi = hat_v[b] / weight
                psi_x = hat_d[b] / weight
                vals = alpha * u_t * psi + op.pointwise(k, u, u_x, psi, psi_x, alpha)
                _scatter(B, dof[node[b]], col, w * vals)
        g = problem.data.source(rule.x, t, rule.side)
        for b in (0, 1):
            _scatter_vec(f, dof[node[b]], w * g * hat_v[b] / weight)
        if problem.data.flux is not None:
            left, right = problem.data.flux(t)
            if dof[0] >= 0:
                f[dof[0]] += wt * left / weight
            if dof[-1] >= 0:
                f[dof[-1]] += wt * right / weight
    return _SlabBlocks(B=B, f=f, M_Y=M_Y, M_X=M_X)


@dataclass
class _InitialBlocks:
    row_kind: np.ndarray
    B: Optional[np.ndarray]
    f: Optional[np.ndarray]
    M_Y: np.ndarray
    M_X: np.ndarray


def sigma0_rows(mesh: SpaceTimeMesh, coeff: PiecewiseCoefficient) -> np.ndarray:
    """True for dofs whose hat meets Sigma_0 on a set of positive length."""
    nodes = mesh.levels[0]
    gamma0 = float(mesh.motion.gamma0)
    intervals = []
    if coeff.branch1_active:
        intervals.append((0.0, gamma0))
    if coeff.branch2_active:
        intervals.append((gamma0, 1.0))
    meets = np.zeros(mesh.n_dofs, dtype=bool)
    for j, i in enumerate(mesh.dofs):
        lo = nodes[max(i - 1, 0)]
        hi = nodes[min(i + 1, mesh.n_x)]
        overlap = sum(max(0.0, min(hi, b) - max(lo, a)) for a, b in intervals)
        meets[j] = overlap > SUPPORT_TOL
    return meets


def _initial_trace_norm(mass: np.ndarray, elliptic_form: np.ndarray, gram: np.ndarray,
                        meets: np.ndarray) -> np.ndarray:
    """Level-0 block of M_X: the norm the initial rows induce on u(0).

    Sigma_0 rows give the L2(Sigma_0) mass. Elliptic rows give
    ||a(0; u(0), .)||_{V',h} over the inactive hats, so u(0) there is measured
    only through the equation that fixes it. The principal V-Gram block would
    charge the jump to zero at the interface node and c_B,h would decay with h.
    """
    M = meets.size
    out = np.zeros((M, M))
    out[np.ix_(meets, meets)] = mass[np.ix_(meets, meets)]
    elliptic = ~meets
    if np.any(elliptic):
        rows = elliptic_form[elliptic]
        factor = linalg.cho_factor(gram[np.ix_(elliptic, elliptic)])
        induced = rows.T @ linalg.cho_solve(factor, rows)
        out += 0.5 * (induced + induced.T)
    return out


def _initial_blocks(mesh: SpaceTimeMesh, coeff: PiecewiseCoefficient, problem: Optional[Problem],
                    actx: AssemblyContext, op: Optional[SpatialOperator] = None) -> _InitialBlocks:
    M = mesh.n_dofs
    dof = mesh.dof_of_node
    pts = mesh_points(mesh, 0.0, actx.q_x, slab=0)
    rule = pts.rule
    lam = rule.lam
    hat_v = (1.0 - lam, lam)
    hat_d = (-1.0 / pts.h, 1.0 / pts.h)
    node = (pts.left, pts.right)
    active = coeff.active_mask(rule.side)
    alpha, _, _ = coeff.evaluate_side(rule.x, 0.0, rule.side)
    mass = np.zeros((M, M))
    gram = np.zeros((M, M))
    for a in (0, 1):
        for b in (0, 1):
            _scatter(mass, dof[node[b]], dof[node[a]], rule.w * np.where(active, hat_v[a] * hat_v[b], 0.0))
            _scatter(gram, dof[node[b]], dof[node[a]], rule.w * (hat_v[a] * hat_v[b] + hat_d[a] * hat_d[b]))
    meets = sigma0_rows(mesh, coeff)
    elliptic = ~meets
    row_kind = np.where(meets, ROW_INITIAL, ROW_ELLIPTIC)
    M_Y = np.zeros((M, M))
    M_Y[np.ix_(meets, meets)] = mass[np.ix_(meets, meets)]
    M_Y[np.ix_(elliptic, elliptic)] = gram[np.ix_(elliptic, elliptic)]

    op = problem.op if problem is not None else op
    if op is None:
        # without an operator the V inner product stands in for a(0; ., .)
        form = gram
    else:
        k = op.diffusion_at(rule, 0.0)
        form = np.zeros((M, M))
        for a in (0, 1):
            for b in (0, 1):
                vals = op.pointwise(k, hat_v[a], hat_d[a], hat_v[b], hat_d[b], alpha)
                _scatter(form, dof[node[b]], dof[node[a]], rule.w * vals)
    M_X = _initial_trace_norm(mass, form, gram, meets)
    if problem is None:
        return _InitialBlocks(row_kind=row_kind, B=None, f=None, M_Y=M_Y, M_X=M_X)

    B = np.where(meets[:, None], mass, form)
    initial_load = np.zeros(M)
    source_load = np.zeros(M)
    g2 = problem.data.initial(rule.x, rule.side)
    g1 = problem.data.source(rule.x, 0.0, rule.side)
    for b in (0, 1):
        _scatter_vec(initial_load, dof[node[b]], rule.w * np.where(active, g2, 0.0) * hat_v[b])
        _scatter_vec(source_load, dof[node[b]], rule.w * g1 * hat_v[b])
    if problem.data.flux is not None:
        left, right = problem.data.flux(0.0)
        if dof[0] >= 0:
            source_load[dof[0]] += left
        if dof[-1] >= 0:
            source_load[dof[-1]] += right
    f = np.where(meets, initial_load, source_load)
    return _InitialBlocks(row_kind=row_kind, B=B, f=f, M_Y=M_Y, M_X=M_X)


@dataclass(eq=False)
class DiscreteSystem:
    mesh: SpaceTimeMesh
    problem: Optional[Problem]
    B: Optional[sparse.csr_matrix]
    f: Optional[np.ndarray]
    M_X: sparse.csr_matrix
    M_Y: sparse.csr_matrix
    row_kind: np.ndarray
    weight_rate: float = 0.0

    @property
    def slab_rows(self) -> np.ndarray:
        return np.flatnonzero(self.row_kind == ROW_SLAB)

    @property
    def initial_rows(self) -> np.ndarray:
        return np.flatnonzero(self.row_kind == ROW_INITIAL)

    @property
    def elliptic_rows(self) -> np.ndarray:
        return np.flatnonzero(self.row_kind == ROW_ELLIPTIC)


def _collect(mesh: SpaceTimeMesh, slabs: List[_SlabBlocks], initial: _InitialBlocks, with_system: bool):
    M = mesh.n_dofs
    N = mesh.n_t
    shape_x = (mesh.trial_dim, mesh.trial_dim)
    shape_y = (mesh.test_dim, mesh.test_dim)

    def triplets(blocks, offsets):
        rows, cols, vals = [], [], []
        for block, (r0, c0) in zip(blocks, offsets):
            r, c = np.nonzero(block)
            rows.append(r + r0)
            cols.append(c + c0)
            vals.append(block[r, c])
        return np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))

    offsets = [(n * M, n * M) for n in range(N)]
    # u(0) is measured by the norm the initial rows induce
    mx = sparse.coo_matrix(triplets([s.M_X for s in slabs] + [initial.M_X], offsets + [(0, 0)]),
                           shape=shape_x).tocsr()
    my = sparse.coo_matrix(triplets([s.M_Y for s in slabs] + [initial.M_Y], offsets + [(N * M, N * M)]),
                           shape=shape_y).tocsr()
    if not with_system:
        return None, None, mx, my
    b = sparse.coo_matrix(triplets([s.B for s in slabs] + [initial.B], offsets + [(N * M, 0)]),
                          shape=(mesh.test_dim, mesh.trial_dim)).tocsr()
    f = np.concatenate([s.f for s in slabs] + [initial.f])
    return b, f, mx, my


def _assemble(mesh: SpaceTimeMesh, coeff: PiecewiseCoefficient, problem: Optional[Problem],
              actx: AssemblyContext, op: Optional[SpatialOperator] = None) -> DiscreteSystem:
    if mesh.n_dofs == 0:
        raise DomainViolationError("mesh carries no degrees of freedom")
    slabs = run_ordered(lambda n: _slab_blocks(n, mesh, coeff, problem, actx), range(mesh.n_t),
                        jobs=actx.jobs, kind='slab')
    initial = _initial_blocks(mesh, coeff, problem, actx, op)
    b, f, mx, my = _collect(mesh, slabs, initial, problem is not None)
    row_kind = np.concatenate([np.full(mesh.n_t * mesh.n_dofs, ROW_SLAB), initial.row_kind])
    for name, mat in (('M_X', mx), ('M_Y', my)):
        asym = abs(mat - mat.T).max() if mat.nnz else 0.0
        scale = max(abs(mat).max(), 1.0) if mat.nnz else 1.0
        if asym > 1e-13 * scale:
            raise InternalInconsistencyError(f"{name} is not symmetric (asymmetry {asym:.3e})")
    return DiscreteSystem(mesh=mesh, problem=problem, B=b, f=f, M_X=mx, M_Y=my,
                          row_kind=row_kind, weight_rate=actx.weight_rate)


def assemble_system(mesh: SpaceTimeMesh, problem: Problem, actx: Optional[AssemblyContext] = None) -> DiscreteSystem:
    """B_h, f_h and the norm matrices of the space-time problem.

    With `weight_rate` = r the trial functions are multiplied by exp(r t) and
    the slab test functions by exp(-r t).
    """
    actx = actx or AssemblyContext()
    if problem.op.boundary != mesh.boundary:
        raise DomainViolationError(f"operator space '{problem.op.boundary}' differs from mesh '{mesh.boundary}'")
    system = _assemble(mesh, problem.coeff, problem, actx)
    logger.info("[ASSEMBLY] %s %dx%d: dim=%d nnz(B)=%d", problem.name or 'problem', mesh.n_x, mesh.n_t,
                mesh.trial_dim, system.B.nnz)
    return system


def norm_matrices(mesh: SpaceTimeMesh, coeff: PiecewiseCoefficient, motion: Optional[MotionMap] = None,
                  actx: Optional[AssemblyContext] = None,
                  op: Optional[SpatialOperator] = None) -> Tuple[sparse.csr_matrix, sparse.csr_matrix]:
    """(M_X, M_Y): the discrete X norm and the Y norm.

    M_X sums three parts:

    * the L2(J,V) part taken on the slab averages (u_n + u_{n+1}) / 2;
    * the discrete L2(J,V') part of alpha d_t u;
    * u(0) in the norm induced by the initial rows (L2(Sigma_0) plus, for a
      degenerate alpha, the V' norm of a(0; u(0), .) over the inactive hats).

    With the exact L2(J,V) part the alternating mode u_n = (-1)^n e of a top
    spatial eigenvector carries almost no residual and c_B,h decays like h
    when n_x = n_t. The averaged part keeps c_B,h level-independent. Pass the
    problem's `op` to reproduce the M_X of `assemble_system` for a
    degenerate alpha; without it the V inner product stands in for a(0).
    """
    if motion is not None and motion != mesh.motion:
        raise DomainViolationError("norm matrices need the mesh's own motion")
    system = _assemble(mesh, coeff, None, actx or AssemblyContext(), op=op)
    return system.M_X, system.M_Y


def dump_system(system: DiscreteSystem, directory: str) -> List[str]:
    """Write B_h, M_X, M_Y and the node table as plain-text triplets."""
    from report_utils import write_node_table, write_triplets

    os.makedirs(directory, exist_ok=True)
    paths = []
    for name, mat in (('B', system.B), ('M_X', system.M_X), ('M_Y', system.M_Y)):
        if mat is None:
            continue
        path = os.path.join(directory, f"{name}.txt")
        write_triplets(path, mat)
        paths.append(path)
    path = os.path.join(directory, 'mesh.txt')
    write_node_table(path, system.mesh.times, system.mesh.levels)
    paths.append(path)
    return paths
