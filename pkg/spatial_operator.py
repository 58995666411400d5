"""The spatial operator family A(t): a(t; w, psi) = int k w' psi' + b w' psi + c w psi."""
import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import linalg

from calculus import NormContext, SpatialField
from coefficient import PiecewiseCoefficient, PiecewiseField, GlobalConstants
from errors import ConfigurationError, DomainViolationError
from motion import MotionMap
from quadrature_utils import ElementRule, p1_gram


logger = logging.getLogger(__name__)

BC_TOL = 1e-10
MARGIN_TOL = 1e-10


@dataclass(frozen=True)
class SpatialOperator:
    """A(t) with its coercivity, boundedness and shift constants (c_A, C_A, lambda0).

    `mass_shift` is the lambda0*alpha reaction carried by shifted operators.
    """
    diffusion: PiecewiseField
    advection: float = 0.0
    reaction: float = 0.0
    c_A: float = 1.0
    C_A: float = 1.0
    lambda0: float = 0.0
    boundary: str = 'dirichlet'
    mass_shift: float = 0.0

    def __post_init__(self) -> None:
        if self.boundary not in ('dirichlet', 'neumann'):
            raise ConfigurationError(f"unknown boundary choice '{self.boundary}'", key='boundary')
        if not 0.0 < self.c_A <= self.C_A:
            raise ConfigurationError(f"need 0 < c_A <= C_A, got ({self.c_A}, {self.C_A})", key='c_A')

    @property
    def is_symmetric(self) -> bool:
        return self.advection == 0.0

    def diffusion_at(self, rule: ElementRule, t: float) -> np.ndarray:
        k, _, _ = self.diffusion.evaluate_side(rule.x, t, rule.side)
        return k

    def integrand(self, rule: ElementRule, t: float, w: np.ndarray, w_x: np.ndarray,
                  psi: np.ndarray, psi_x: np.ndarray, alpha: Optional[np.ndarray] = None) -> np.ndarray:
        """Pointwise integrand of a(t; w, psi) at the points of `rule`."""
        return self.pointwise(self.diffusion_at(rule, t), w, w_x, psi, psi_x, alpha)

    def pointwise(self, k: np.ndarray, w: np.ndarray, w_x: np.ndarray, psi: np.ndarray,
                  psi_x: np.ndarray, alpha: Optional[np.ndarray] = None) -> np.ndarray:
        out = k * w_x * psi_x + self.advection * w_x * psi + self.reaction * w * psi
        if self.mass_shift != 0.0:
            if alpha is None:
                raise DomainViolationError("shifted operator needs the coefficient alpha")
            out = out + self.mass_shift * alpha * w * psi
        return out

    def min_diffusion(self) -> float:
        lowest = math.inf
        for side in (1, 2):
            value, _, _ = self.diffusion.closure_samples(side)
            lowest = min(lowest, float(np.min(value)))
        return lowest


def _check_boundary(op: SpatialOperator, *fields: SpatialField) -> None:
    if op.boundary != 'dirichlet':
        return
    ends = np.array([0.0, 1.0])
    for f in fields:
        if np.any(np.abs(f.value(ends)) > BC_TOL):
            raise DomainViolationError(f"field {f.name or '?'} violates the Dirichlet condition")


def apply_form(op: SpatialOperator, t: float, w: SpatialField, psi: SpatialField,
               ctx: NormContext, coeff: Optional[PiecewiseCoefficient] = None) -> float:
    _check_boundary(op, w, psi)
    motion = op.diffusion.motion
    rule = ctx.reference().rule(float(motion.interface_position(t)))
    alpha = None
    if op.mass_shift != 0.0:
        if coeff is None:
            raise DomainViolationError("shifted operator needs the coefficient alpha")
        alpha, _, _ = coeff.evaluate_side(rule.x, t, rule.side)
    values = op.integrand(rule, t, w.value(rule.x), w.dx_value(rule.x),
                          psi.value(rule.x), psi.dx_value(rule.x), alpha)
    return float(np.dot(rule.w, values))


def lambda1(C_alpha: float, C_emb: float, C_v: float, c_A: float, alpha0: float) -> float:
    """C_alpha^2 C_emb^2 (C_v + 1)^2 / (2 c_A alpha0)."""
    if min(C_alpha, C_emb, c_A, alpha0) <= 0.0 or C_v < 0.0:
        raise DomainViolationError("lambda1 needs positive constants")
    return C_alpha ** 2 * C_emb ** 2 * (C_v + 1.0) ** 2 / (2.0 * c_A * alpha0)


def lambda1_for(op: SpatialOperator, constants: GlobalConstants, C_emb: float = 1.0) -> float:
    return lambda1(constants.C_alpha, C_emb, constants.C_v, op.c_A, constants.alpha0)


def _v_norm_sq(rule: ElementRule, w: SpatialField) -> float:
    wv, wx = w.value(rule.x), w.dx_value(rule.x)
    return float(np.dot(rule.w, wv * wv + wx * wx))


def coercivity_margin(op: SpatialOperator, t: float, w: SpatialField, coeff: PiecewiseCoefficient,
                      ctx: NormContext, lambda_1: float) -> float:
    """a(t;w,w) + (lambda0 - lambda1)||sqrt(alpha) w||^2 - c_A ||w||_V^2."""
    rule = ctx.reference().rule(float(op.diffusion.motion.interface_position(t)))
    norm_sq = _v_norm_sq(rule, w)
    if norm_sq == 0.0:
        raise DomainViolationError("coercivity margin of the zero field")
    alpha, _, _ = coeff.evaluate_side(rule.x, t, rule.side)
    wv = w.value(rule.x)
    weighted = float(np.dot(rule.w, alpha * wv * wv))
    return apply_form(op, t, w, w, ctx, coeff) + (op.lambda0 - lambda_1) * weighted - op.c_A * norm_sq


def shifted_operator(op: SpatialOperator, coeff: PiecewiseCoefficient, C_emb: float = 1.0) -> SpatialOperator:
    """A_hat = lambda0*alpha + A with the triple (c_A, C_A + |lambda0| C_alpha C_emb^2, 0)."""
    if op.lambda0 == 0.0:
        return op
    c_alpha = coeff.global_constants().C_alpha
    return replace(op, mass_shift=op.mass_shift + op.lambda0,
                   C_A=op.C_A + abs(op.lambda0) * c_alpha * C_emb ** 2, lambda0=0.0)


def certify_poincare_constant(boundary: str = 'dirichlet', levels=(64, 128)) -> float:
    """c_A = mu/(mu+1) from the smallest eigenvalue mu of -d_xx on V.

    P1 eigenvalues on two meshes are Richardson-extrapolated (error O(h^2)).
    The Neumann space has mu = 0 and no positive c_A.
    """
    if boundary != 'dirichlet':
        raise DomainViolationError("a Poincare constant exists only for the Dirichlet space")
    mus = []
    for n in levels:
        nodes = np.linspace(0.0, 1.0, n + 1)
        stiff = p1_gram(nodes, mass_weight=0.0).toarray()[1:-1, 1:-1]
        mass = p1_gram(nodes, stiff_weight=0.0).toarray()[1:-1, 1:-1]
        mus.append(float(linalg.eigh(stiff, mass, eigvals_only=True, subset_by_index=[0, 0])[0]))
    ratio = (levels[1] / levels[0]) ** 2
    mu = (ratio * mus[1] - mus[0]) / (ratio - 1.0)
    logger.debug("[OPERATOR] poincare eigenvalue %.12g (raw %s)", mu, mus)
    return mu / (mu + 1.0)


@dataclass(frozen=True)
class ConstantCheck:
    max_ratio: float
    min_margin: float
    lambda_1: float


def random_discrete_field(rng: np.random.Generator, boundary: str, n_cells: int = 16) -> SpatialField:
    nodes = np.linspace(0.0, 1.0, n_cells + 1)
    values = rng.standard_normal(nodes.size)
    if boundary == 'dirichlet':
        values[0] = values[-1] = 0.0
    slopes = np.diff(values) / np.diff(nodes)

    def dx_value(x):
        idx = np.clip(np.searchsorted(nodes, x, side='right') - 1, 0, n_cells - 1)
        return slopes[idx]

    return SpatialField(value=lambda x: np.interp(x, nodes, values), dx_value=dx_value, name='random_p1')


def check_constants(op: SpatialOperator, coeff: PiecewiseCoefficient, rng: np.random.Generator,
                    ctx: NormContext, n_pairs: int = 100, n_times: int = 10,
                    lambda_1: Optional[float] = None) -> ConstantCheck:
    """Sampled Rayleigh quotients against C_A and coercivity margins against c_A.

    The random fields are P1 on a 16-cell grid, so the reference rule integrates
    them exactly between the kinks.
    """
    if op.min_diffusion() <= 0.0:
        raise ConfigurationError("diffusion must be positive", key='diffusion')
    if lambda_1 is None:
        lambda_1 = lambda1_for(op, coeff.global_constants())
    motion: MotionMap = op.diffusion.motion
    ctx = NormContext(h_ref=1.0 / 256, q_x=ctx.q_x, q_t=ctx.q_t, boundary=op.boundary)
    max_ratio = 0.0
    min_margin = math.inf
    for t in np.linspace(0.0, motion.horizon, n_times):
        t = float(t)
        rule = ctx.reference().rule(float(motion.interface_position(t)))
        for _ in range(n_pairs):
            w = random_discrete_field(rng, op.boundary)
            psi = random_discrete_field(rng, op.boundary)
            value = apply_form(op, t, w, psi, ctx, coeff)
            ratio = abs(value) / math.sqrt(_v_norm_sq(rule, w) * _v_norm_sq(rule, psi))
            max_ratio = max(max_ratio, ratio)
            min_margin = min(min_margin, coercivity_margin(op, t, w, coeff, ctx, lambda_1))
    tol = MARGIN_TOL * max(1.0, op.C_A)
    if max_ratio > op.C_A * (1.0 + 1e-12):
        raise ConfigurationError(f"boundedness violated: sampled ratio {max_ratio:.6g} > C_A={op.C_A}", key='C_A')
    if min_margin < -tol:
        raise ConfigurationError(f"coercivity violated: margin {min_margin:.3e}", key='c_A')
    logger.info("[OPERATOR] constants ok: ratio<=%.6g margin>=%.3e", max_ratio, min_margin)
    return ConstantCheck(max_ratio=max_ratio, min_margin=min_margin, lambda_1=lambda_1)
