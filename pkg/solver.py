"""Solves the space-time system and runs the stability, a priori and convergence diagnostics."""
import logging
import math
import os
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sparse
from scipy import linalg
from scipy.sparse.linalg import splu

from calculus import TimeDependentField
from discretization import (AssemblyContext, DiscreteSystem, MeshPoints, Problem, ProblemData, SpaceTimeMesh,
                            assemble_system, build_mesh, evaluate_trial, full_levels, mesh_points)
from errors import DiscreteInstabilityError, DomainViolationError, NumericalFailureError
from quadrature_utils import interval_rule
from scheduler import run_ordered
from spatial_operator import shifted_operator


logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
DEFAULT_DENSE_CAP = 2000
ERROR_ORDERS = (5, 4)


def dense_cap() -> int:
    try:
        return int(os.environ.get('EIP_DENSE_CAP', DEFAULT_DENSE_CAP))
    except ValueError:
        return DEFAULT_DENSE_CAP


@dataclass(eq=False)
class SolutionField:
    """u_h = exp(r t) * sum U_{m,i} phi_{m,i}, r the system's weight rate."""
    mesh: SpaceTimeMesh
    coefficients: np.ndarray
    weight_rate: float = 0.0

    @property
    def nodal(self) -> np.ndarray:
        return full_levels(self.mesh, self.coefficients)

    def level_values(self, n: int) -> np.ndarray:
        return self.nodal[n] * math.exp(self.weight_rate * float(self.mesh.times[n]))

    def sample(self, pts: MeshPoints) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        value, dx, dt = evaluate_trial(self.mesh, self.nodal, pts)
        if self.weight_rate == 0.0:
            return value, dx, dt
        weight = math.exp(self.weight_rate * pts.t)
        return weight * value, weight * dx, weight * (dt + self.weight_rate * value)

    def _at(self, x, t: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        mesh = self.mesh
        n, theta, nodes = mesh.nodes_at(t)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        e = np.clip(np.searchsorted(nodes, x, side='right') - 1, 0, mesh.n_x - 1)
        h = nodes[e + 1] - nodes[e]
        lam = (x - nodes[e]) / h
        nodal = self.nodal
        vals = (1.0 - theta) * nodal[n] + theta * nodal[n + 1]
        rate = (nodal[n + 1] - nodal[n]) / mesh.step(n)
        wn = mesh.mesh_velocity(n)
        value = vals[e] * (1.0 - lam) + vals[e + 1] * lam
        dx = (vals[e + 1] - vals[e]) / h
        dt = rate[e] * (1.0 - lam) + rate[e + 1] * lam - dx * ((1.0 - lam) * wn[e] + lam * wn[e + 1])
        weight = math.exp(self.weight_rate * t)
        return weight * value, weight * dx, weight * (dt + self.weight_rate * value)

    def evaluate(self, x, t: float):
        value = self._at(x, t)[0]
        return float(value[0]) if np.ndim(x) == 0 else value

    def as_field(self) -> TimeDependentField:
        return TimeDependentField(value=lambda x, t: self._at(x, t)[0],
                                  dt_value=lambda x, t: self._at(x, t)[2],
                                  dx_value=lambda x, t: self._at(x, t)[1],
                                  smooth=False, name='discrete_solution')


def solve(system: DiscreteSystem, max_refine: int = 3, rtol: float = RESIDUAL_TOL) -> SolutionField:
    if system.B is None or system.f is None:
        raise NumericalFailureError("system has no matrix or right-hand side")
    mesh = system.mesh
    if system.B.shape[0] != system.B.shape[1]:
        raise NumericalFailureError(f"system is not square: {system.B.shape}")
    f = system.f
    norm_f = float(np.linalg.norm(f))
    if norm_f == 0.0:
        logger.info("[SOLVE] zero data; solution is zero")
        return SolutionField(mesh, np.zeros(mesh.trial_dim), system.weight_rate)
    try:
        lu = splu(system.B.tocsc())
    except RuntimeError as exc:
        logger.error("[SOLVE] factorization failed: %s", exc)
        raise DiscreteInstabilityError("singular space-time system", mesh.info()) from exc
    u = lu.solve(f)
    if not np.all(np.isfinite(u)):
        raise DiscreteInstabilityError("non-finite solution", mesh.info())
    rel = float(np.linalg.norm(f - system.B @ u)) / norm_f
    for _ in range(max_refine):
        if rel <= rtol:
            break
        u = u + lu.solve(f - system.B @ u)
        rel = float(np.linalg.norm(f - system.B @ u)) / norm_f
    if rel > rtol:
        raise NumericalFailureError(f"relative residual {rel:.3e} above {rtol:.1e} after refinement")
    logger.info("[SOLVE] %dx%d solved, relative residual %.3e", mesh.n_x, mesh.n_t, rel)
    return SolutionField(mesh, u, system.weight_rate)


# -- inf-sup -----------------------------------------------------------------

def _dense(matrix) -> np.ndarray:
    return matrix.toarray() if sparse.issparse(matrix) else np.asarray(matrix, dtype=float)


def pencil_inf_sup(B, M_X, M_Y, cap: Optional[int] = None, tol: float = 1e-8, max_iter: int = 500) -> float:
    """sqrt of the smallest eigenvalue of B^T M_Y^{-1} B against M_X."""
    cap = dense_cap() if cap is None else cap
    n = B.shape[1]
    if n <= cap:
        b = _dense(B)
        z = linalg.cho_solve(linalg.cho_factor(_dense(M_Y)), b)
        s = b.T @ z
        s = 0.5 * (s + s.T)
        mu = float(linalg.eigh(s, _dense(M_X), eigvals_only=True, subset_by_index=[0, 0])[0])
    else:
        mu = _inverse_iteration(sparse.csc_matrix(B), sparse.csr_matrix(M_X), sparse.csr_matrix(M_Y), tol, max_iter)
    return math.sqrt(max(mu, 0.0))


def _inverse_iteration(B, M_X, M_Y, tol: float, max_iter: int) -> float:
    try:
        lu = splu(B)
    except RuntimeError as exc:
        raise DiscreteInstabilityError("singular space-time system in inverse iteration") from exc
    rng = np.random.default_rng(0)
    v = np.ones(B.shape[1]) + 0.1 * rng.standard_normal(B.shape[1])
    v /= math.sqrt(v @ (M_X @ v))
    mu_prev = math.inf
    for it in range(max_iter):
        x = lu.solve(M_Y @ lu.solve(M_X @ v, trans='T'))
        mu = 1.0 / float(v @ (M_X @ x))
        v = x / math.sqrt(x @ (M_X @ x))
        if abs(mu - mu_prev) <= tol * abs(mu):
            logger.debug("[INFSUP] inverse iteration converged in %d steps", it + 1)
            return mu
        mu_prev = mu
    raise NumericalFailureError(f"inverse iteration did not converge in {max_iter} steps")


def svd_inf_sup(B, M_X, M_Y) -> float:
    """sigma_min(L_Y^{-1} B L_X^{-T}) with M = L L^T."""
    l_x = linalg.cholesky(_dense(M_X), lower=True)
    l_y = linalg.cholesky(_dense(M_Y), lower=True)
    c = linalg.solve_triangular(l_y, _dense(B), lower=True)
    c = linalg.solve_triangular(l_x, c.T, lower=True).T
    return float(linalg.svdvals(c)[-1])


def discrete_inf_sup(system: DiscreteSystem, cap: Optional[int] = None) -> float:
    if system.B is None:
        raise NumericalFailureError("system has no matrix")
    value = pencil_inf_sup(system.B, system.M_X, system.M_Y, cap)
    if not value > 0.0:
        logger.error("[INFSUP] discrete inf-sup constant vanished on %s", system.mesh.info())
        raise DiscreteInstabilityError("discrete inf-sup constant is not positive", system.mesh.info())
    logger.info("[INFSUP] %dx%d c_Bh=%.10g", system.mesh.n_x, system.mesh.n_t, value)
    return value


def dense_svd_inf_sup(system: DiscreteSystem) -> float:
    return svd_inf_sup(system.B, system.M_X, system.M_Y)


# -- a priori estimate ----------------------------------------------------------

@dataclass(frozen=True)
class AprioriRecord:
    lhs: float
    rhs: float
    g1_norm: float
    g2_norm: float
    g1_initial_norm: float

    @property
    def satisfied(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + 1e-8)


def _block_dual_norm(M_Y: sparse.csr_matrix, f: np.ndarray, rows: np.ndarray) -> float:
    if rows.size == 0 or not np.any(f[rows]):
        return 0.0
    block = M_Y[rows][:, rows].tocsc()
    load = f[rows]
    return math.sqrt(max(float(load @ splu(block).solve(load)), 0.0))


def apriori_check(sol: SolutionField, system: DiscreteSystem, c_bh: float) -> AprioriRecord:
    """||u_h||_X against (||g1||_{L2(J,V'),h} + ||g2||_{L2(Sigma_0)} [+ ||g1(0)||_{V',h}]) / c_Bh."""
    if system.M_X is None or system.M_Y is None or system.f is None:
        raise NumericalFailureError("a priori check needs the norm matrices and the load")
    if not c_bh > 0.0:
        raise DiscreteInstabilityError("a priori check needs a positive inf-sup constant", system.mesh.info())
    u = sol.coefficients
    lhs = math.sqrt(max(float(u @ (system.M_X @ u)), 0.0))
    g1 = _block_dual_norm(system.M_Y, system.f, system.slab_rows)
    g2 = _block_dual_norm(system.M_Y, system.f, system.initial_rows)
    g1_0 = _block_dual_norm(system.M_Y, system.f, system.elliptic_rows)
    record = AprioriRecord(lhs=lhs, rhs=(g1 + g2 + g1_0) / c_bh, g1_norm=g1, g2_norm=g2, g1_initial_norm=g1_0)
    logger.debug("[STUDY] a priori lhs=%.6e rhs=%.6e", record.lhs, record.rhs)
    return record


# -- error norms and studies -------------------------------------------------------

@dataclass(frozen=True)
class ErrorNorms:
    l2_q: float
    l2_v: float
    continuity: float


def error_norms(sol: SolutionField, problem: Problem, orders: Tuple[int, int] = ERROR_ORDERS) -> ErrorNorms:
    """L2(Q), L2(J,V) and max_t ||sqrt(alpha)(u_h - u)(t)|| against the exact solution."""
    exact = problem.exact
    if exact is None:
        raise DomainViolationError(f"problem {problem.name or '?'} has no exact solution")
    mesh = sol.mesh
    q_x, q_t = orders
    l2 = 0.0
    h1 = 0.0
    cont = 0.0

    def pointwise(pts: MeshPoints):
        rule = pts.rule
        value, dx, _ = sol.sample(pts)
        err = value - exact.value(rule.x, pts.t, rule.side)
        err_x = dx - exact.dx_value(rule.x, pts.t, rule.side)
        alpha, _, _ = problem.coeff.evaluate_side(rule.x, pts.t, rule.side)
        return rule, err, err_x, alpha

    for n in range(mesh.n_t):
        tq, wq = interval_rule(float(mesh.times[n]), float(mesh.times[n + 1]), q_t)
        for t, wt in zip(tq, wq):
            rule, err, err_x, alpha = pointwise(mesh_points(mesh, float(t), q_x, slab=n))
            l2 += wt * float(np.dot(rule.w, err * err))
            h1 += wt * float(np.dot(rule.w, err * err + err_x * err_x))
            cont = max(cont, math.sqrt(float(np.dot(rule.w, alpha * err * err))))
    for n, t in enumerate(mesh.times):
        rule, err, _, alpha = pointwise(mesh_points(mesh, float(t), q_x, slab=min(n, mesh.n_t - 1)))
        cont = max(cont, math.sqrt(float(np.dot(rule.w, alpha * err * err))))
    return ErrorNorms(l2_q=math.sqrt(l2), l2_v=math.sqrt(h1), continuity=cont)


@dataclass(frozen=True)
class ConvergenceRow:
    n_x: int
    n_t: int
    h: float
    l2_q: float
    l2_v: float
    continuity: float
    rate_l2_q: Optional[float]
    rate_l2_v: Optional[float]
    rate_continuity: Optional[float]


@dataclass(frozen=True)
class ConvergenceTable:
    rows: List[ConvergenceRow]
    order_l2_q: Optional[float]
    order_l2_v: Optional[float]
    order_continuity: Optional[float]


def check_nested(levels: Sequence[Tuple[int, int]]) -> None:
    for (nx0, nt0), (nx1, nt1) in zip(levels, levels[1:]):
        if nx1 != 2 * nx0 or nt1 != 2 * nt0:
            raise DomainViolationError(f"levels are not nested by factor 2: {(nx0, nt0)} -> {(nx1, nt1)}")


def _rate(coarse: float, fine: float) -> Optional[float]:
    if coarse <= 0.0 or fine <= 0.0:
        return None
    return math.log(coarse / fine) / math.log(2.0)


def _fitted(h: np.ndarray, errors: np.ndarray) -> Optional[float]:
    if h.size < 2 or np.any(errors <= 0.0):
        return None
    return float(np.polyfit(np.log(h), np.log(errors), 1)[0])


def solve_level(problem: Problem, n_x: int, n_t: int, actx: Optional[AssemblyContext] = None):
    mesh = build_mesh(n_x, n_t, problem.motion, boundary=problem.boundary)
    system = assemble_system(mesh, problem, actx)
    return system, solve(system)


def convergence_study(problem: Problem, levels: Sequence[Tuple[int, int]],
                      actx: Optional[AssemblyContext] = None, jobs: int = 1) -> ConvergenceTable:
    levels = [(int(a), int(b)) for a, b in levels]
    check_nested(levels)

    def one(level):
        _, sol = solve_level(problem, level[0], level[1], actx)
        return error_norms(sol, problem)

    norms = run_ordered(one, levels, jobs=jobs, kind='level')
    rows = []
    for k, ((n_x, n_t), e) in enumerate(zip(levels, norms)):
        prev = norms[k - 1] if k else None
        rows.append(ConvergenceRow(
            n_x=n_x, n_t=n_t, h=1.0 / n_x, l2_q=e.l2_q, l2_v=e.l2_v, continuity=e.continuity,
            rate_l2_q=_rate(prev.l2_q, e.l2_q) if prev else None,
            rate_l2_v=_rate(prev.l2_v, e.l2_v) if prev else None,
            rate_continuity=_rate(prev.continuity, e.continuity) if prev else None))
        logger.info("[STUDY] %s %dx%d L2(Q)=%.4e L2(V)=%.4e", problem.name, n_x, n_t, e.l2_q, e.l2_v)
    h = np.array([r.h for r in rows])
    return ConvergenceTable(rows=rows,
                            order_l2_q=_fitted(h, np.array([r.l2_q for r in rows])),
                            order_l2_v=_fitted(h, np.array([r.l2_v for r in rows])),
                            order_continuity=_fitted(h, np.array([r.continuity for r in rows])))


@dataclass(frozen=True)
class StabilityRow:
    n_x: int
    n_t: int
    c_bh: float
    condition: Optional[float]
    apriori_lhs: float
    apriori_rhs: float
    apriori_satisfied: bool


@dataclass(frozen=True)
class StabilityReport:
    rows: List[StabilityRow]
    max_ratio: float

    @property
    def ratio(self) -> float:
        values = [r.c_bh for r in self.rows]
        return max(values) / min(values)

    @property
    def passed(self) -> bool:
        return (all(r.c_bh > 0.0 and r.apriori_satisfied for r in self.rows)
                and self.ratio <= self.max_ratio)


def stability_study(problem: Problem, levels: Sequence[Tuple[int, int]], actx: Optional[AssemblyContext] = None,
                    jobs: int = 1, max_ratio: float = 4.0, cap: Optional[int] = None) -> StabilityReport:
    cap = dense_cap() if cap is None else cap

    def one(level):
        system, sol = solve_level(problem, level[0], level[1], actx)
        c_bh = discrete_inf_sup(system, cap)
        condition = None
        if system.mesh.trial_dim <= cap:
            condition = float(np.linalg.cond(system.B.toarray()))
        record = apriori_check(sol, system, c_bh)
        return StabilityRow(n_x=level[0], n_t=level[1], c_bh=c_bh, condition=condition,
                            apriori_lhs=record.lhs, apriori_rhs=record.rhs, apriori_satisfied=record.satisfied)

    rows = run_ordered(one, [(int(a), int(b)) for a, b in levels], jobs=jobs, kind='level')
    report = StabilityReport(rows=rows, max_ratio=max_ratio)
    logger.info("[INFSUP] %s c_Bh ratio %.4g over %d levels", problem.name, report.ratio, len(rows))
    return report


# -- lambda0 shift ----------------------------------------------------------------

@dataclass(frozen=True)
class ShiftRecord:
    lambda0: float
    max_pointwise_gap: float


def shifted_problem(problem: Problem, lambda0: float) -> Problem:
    """A_hat = A + lambda0*alpha with g1_hat = g1 exp(-lambda0 t); g2 unchanged."""
    op_hat = shifted_operator(replace(problem.op, lambda0=lambda0), problem.coeff)
    data = problem.data
    source = data.source
    flux = data.flux

    def source_hat(x, t, side):
        return source(x, t, side) * math.exp(-lambda0 * t)

    flux_hat = None
    if flux is not None:
        def flux_hat(t):
            left, right = flux(t)
            scale = math.exp(-lambda0 * t)
            return left * scale, right * scale

    data_hat = ProblemData(source=source_hat, initial=data.initial, flux=flux_hat, name=f"{data.name}_shifted")
    return replace(problem, op=op_hat, data=data_hat, exact=None, name=f"{problem.name}_shifted")


def shift_equivalence(problem: Problem, lambda0: float, n_x: int = 16, n_t: int = 16,
                      actx: Optional[AssemblyContext] = None) -> ShiftRecord:
    """Compare u_h with exp(lambda0 t) * u_hat_h at every mesh node.

    u_h lives in the exponentially weighted trial space exp(lambda0 t) X_h and is
    tested with exp(-lambda0 t) Y_h, the discrete image of the substitution.
    """
    actx = actx or AssemblyContext()
    mesh = build_mesh(n_x, n_t, problem.motion, boundary=problem.boundary)
    original = solve(assemble_system(mesh, problem, replace(actx, weight_rate=lambda0)))
    shifted = solve(assemble_system(mesh, shifted_problem(problem, lambda0), replace(actx, weight_rate=0.0)))
    gap = 0.0
    for n, t in enumerate(mesh.times):
        u = original.level_values(n)
        u_hat = shifted.level_values(n) * math.exp(lambda0 * float(t))
        gap = max(gap, float(np.max(np.abs(u - u_hat))))
    logger.info("[STUDY] shift lambda0=%g gap=%.3e", lambda0, gap)
    return ShiftRecord(lambda0=lambda0, max_pointwise_gap=gap)


# -- discrete identities ----------------------------------------------------------

def energy_residual(sol: SolutionField, problem: Problem, orders: Tuple[int, int] = (6, 6)) -> float:
    """|LHS - RHS| of the integration-by-parts identity on [0, T] with u = z = u_h."""
    mesh = sol.mesh
    coeff = problem.coeff
    motion = problem.motion
    q_x, q_t = orders
    lhs = 0.0
    source = 0.0
    for n in range(mesh.n_t):
        tq, wq = interval_rule(float(mesh.times[n]), float(mesh.times[n + 1]), q_t)
        for t, wt in zip(tq, wq):
            t = float(t)
            pts = mesh_points(mesh, t, q_x, slab=n)
            rule = pts.rule
            u, u_x, u_t = sol.sample(pts)
            alpha, alpha_t, alpha_x = coeff.evaluate_side(rule.x, t, rule.side)
            v = np.asarray(motion.velocity(rule.x, t))
            v_x = np.asarray(motion.velocity_dx(rule.x, t))
            uu = u * u
            lhs += wt * float(np.dot(rule.w, alpha * (u_t * u + u_t * u)))
            flux_x = alpha_x * uu * v + alpha * (u_x * u + u_x * u) * v + alpha * uu * v_x
            source += wt * float(np.dot(rule.w, uu * alpha_t + flux_x))

    def weighted_mass(n: int) -> float:
        t = float(mesh.times[n])
        pts = mesh_points(mesh, t, q_x, slab=min(n, mesh.n_t - 1))
        u, _, _ = sol.sample(pts)
        alpha, _, _ = coeff.evaluate_side(pts.rule.x, t, pts.rule.side)
        return float(np.dot(pts.rule.w, alpha * u * u))

    residual = abs(lhs - (weighted_mass(mesh.n_t) - weighted_mass(0) - source))
    logger.debug("[STUDY] energy residual %.3e", residual)
    return residual


def inactive_dofs(mesh: SpaceTimeMesh, problem: Problem) -> np.ndarray:
    """Dofs whose hat lies inside the inactive branch at every level."""
    coeff = problem.coeff
    nodes = mesh.dofs
    i_gamma = mesh.interface_index
    mask = np.zeros(nodes.size, dtype=bool)
    if not coeff.branch2_active:
        mask |= nodes >= i_gamma + 1
    if not coeff.branch1_active:
        mask |= nodes <= i_gamma - 1
    return np.flatnonzero(mask)


def elliptic_residual(sol: SolutionField, system: DiscreteSystem, level: int, q_x: int = 6) -> float:
    """||a(t_n; u_h, .) - <g1(t_n), .>||_{V',h} over test hats inside the inactive branch."""
    problem = system.problem
    if problem is None:
        raise NumericalFailureError("elliptic residual needs the assembled problem")
    mesh = sol.mesh
    rows = inactive_dofs(mesh, problem)
    if rows.size == 0:
        return 0.0
    t = float(mesh.times[level])
    pts = mesh_points(mesh, t, q_x, slab=min(level, mesh.n_t - 1))
    rule = pts.rule
    u, u_x, _ = sol.sample(pts)
    op = problem.op
    k = op.diffusion_at(rule, t)
    alpha, _, _ = problem.coeff.evaluate_side(rule.x, t, rule.side)
    g = problem.data.source(rule.x, t, rule.side)
    dof = mesh.dof_of_node
    M = mesh.n_dofs
    residual = np.zeros(M)
    gram = np.zeros((M, M))
    hat_v = (1.0 - rule.lam, rule.lam)
    hat_d = (-1.0 / pts.h, 1.0 / pts.h)
    node = (pts.left, pts.right)
    for b in (0, 1):
        vals = op.pointwise(k, u, u_x, hat_v[b], hat_d[b], alpha) - g * hat_v[b]
        keep = dof[node[b]] >= 0
        np.add.at(residual, dof[node[b]][keep], (rule.w * vals)[keep])
        for b2 in (0, 1):
            keep2 = keep & (dof[node[b2]] >= 0)
            np.add.at(gram, (dof[node[b]][keep2], dof[node[b2]][keep2]),
                      (rule.w * (hat_v[b] * hat_v[b2] + hat_d[b] * hat_d[b2]))[keep2])
    if problem.data.flux is not None:
        left, right = problem.data.flux(t)
        if dof[0] >= 0:
            residual[dof[0]] -= left
        if dof[-1] >= 0:
            residual[dof[-1]] -= right
    r = residual[rows]
    block = gram[np.ix_(rows, rows)]
    return math.sqrt(max(float(r @ linalg.cho_solve(linalg.cho_factor(block), r)), 0.0))
