"""Time-dependent fields, the weighted weak time derivative and its companions.

All space-time integrals are tensor Gauss rules: composite in time, and in
space the reference mesh split at the interface position of each time node.
"""
import logging
import math
import threading
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from coefficient import PiecewiseCoefficient
from errors import DomainViolationError, InternalInconsistencyError
from motion import MotionMap
from quadrature_utils import ElementRule, ReferenceSpace, composite_rule


logger = logging.getLogger(__name__)

SUPPORT_TOL = 1e-12
TRACE_SAMPLES = 200

FieldFn = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class TimeDependentField:
    """u(x, t) with its per-branch partial derivatives (numpy-vectorised in x).

    `density_order` is the order in eps at which the centred mollification
    converges in L2(J,V): 2 for fields smooth in time as V-valued functions, a
    lower bound of 1 for a kink in time, None when no order is claimed.
    """
    value: FieldFn
    dt_value: FieldFn
    dx_value: FieldFn
    smooth: bool = True
    name: str = ''
    density_order: Optional[float] = 2.0


@dataclass(frozen=True)
class SpatialField:
    value: Callable[[np.ndarray], np.ndarray]
    dx_value: Callable[[np.ndarray], np.ndarray]
    name: str = ''


@dataclass(frozen=True)
class TimeBump:
    """C-infinity bump exp(-1/(1-r^2)) supported in [start, end]."""
    start: float
    end: float

    def __post_init__(self) -> None:
        if not self.end > self.start:
            raise DomainViolationError(f"empty bump support [{self.start}, {self.end}]")

    def _r(self, t):
        return (2.0 * np.asarray(t, dtype=float) - (self.start + self.end)) / (self.end - self.start)

    def value(self, t):
        r = self._r(t)
        inside = np.abs(r) < 1.0
        safe = np.where(inside, 1.0 - r * r, 1.0)
        return np.where(inside, np.exp(-1.0 / safe), 0.0)

    def dt_value(self, t):
        r = self._r(t)
        inside = np.abs(r) < 1.0
        safe = np.where(inside, 1.0 - r * r, 1.0)
        phi = np.where(inside, np.exp(-1.0 / safe), 0.0)
        return phi * (-2.0 * r / safe ** 2) * (2.0 / (self.end - self.start))


@dataclass(frozen=True)
class NormContext:
    h_ref: float = 1.0 / 512
    q_x: int = 4
    q_t: int = 4
    time_panels: int = 32
    p: float = 2.0
    boundary: str = 'dirichlet'

    def __post_init__(self) -> None:
        if self.q_x < 2 or self.q_t < 2:
            raise DomainViolationError(f"quadrature orders must be >= 2, got ({self.q_x}, {self.q_t})")
        if not self.h_ref > 0.0:
            raise DomainViolationError(f"reference mesh size must be positive, got {self.h_ref}")
        if self.p < 2.0:
            raise DomainViolationError(f"exponent p must be >= 2, got {self.p}")
        if self.time_panels < 1:
            raise DomainViolationError(f"time panels must be >= 1, got {self.time_panels}")

    @property
    def n_ref(self) -> int:
        return max(2, int(round(1.0 / self.h_ref)))

    def reference(self) -> ReferenceSpace:
        return _reference_space(self.n_ref, self.boundary, self.q_x)


@lru_cache(maxsize=16)
def _reference_space(n_cells: int, boundary: str, order: int) -> ReferenceSpace:
    return ReferenceSpace(n_cells, boundary, order)


# -- mollification ---------------------------------------------------------

_kernel_lock = threading.Lock()
_kernel_constant: Optional[float] = None


def _unit_bump(s):
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    safe = np.where(inside, s * s - 1.0, -1.0)
    return np.where(inside, np.exp(s * s / safe), 0.0)


def mollifier_constant() -> float:
    """c with int rho_1 = 1, computed once by adaptive quadrature."""
    global _kernel_constant
    if _kernel_constant is None:
        with _kernel_lock:
            if _kernel_constant is None:
                mass, _ = integrate.quad(lambda s: float(_unit_bump(s)), -1.0, 1.0,
                                         epsabs=1e-15, epsrel=1e-14, limit=200)
                _kernel_constant = 1.0 / mass
    return _kernel_constant


def mollifier_kernel(eps: float, tau):
    if not eps > 0.0:
        raise DomainViolationError(f"mollifier width must be positive, got {eps}")
    value = mollifier_constant() / eps * _unit_bump(np.asarray(tau, dtype=float) / eps)
    return float(value) if np.ndim(value) == 0 else value


def kernel_shift(eps: float, t, horizon: float):
    value = eps * (horizon - 2.0 * np.asarray(t, dtype=float)) / horizon
    return float(value) if np.ndim(value) == 0 else value


@lru_cache(maxsize=4)
def _kernel_rule(panels: int = 16, order: int = 10) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of rho_1 on [-1, 1]; the weights sum to one exactly."""
    tau, w = composite_rule(-1.0, 1.0, panels, order)
    weights = mollifier_constant() * _unit_bump(tau) * w
    return tau, weights / weights.sum()


def _convolve(fn: FieldFn, eps: float, x, t: float, horizon: float, shift: bool):
    if not eps > 0.0:
        raise DomainViolationError(f"mollifier width must be positive, got {eps}")
    if eps >= horizon / 4.0:
        raise DomainViolationError(f"mollifier width {eps} too large for horizon {horizon}")
    center = t + kernel_shift(eps, t, horizon) if shift else t
    tau, weights = _kernel_rule()
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape)
    for tk, wk in zip(tau, weights):
        s = center - eps * tk
        if s < 0.0 or s > horizon:
            continue
        total = total + wk * fn(x, s)
    return total


def mollify(u: TimeDependentField, eps: float, x, t: float, horizon: float = 1.0, shift: bool = True):
    """u_eps(x, t) = int rho_eps(t + xi_eps(t) - s) u(x, s) ds."""
    value = _convolve(u.value, eps, x, t, horizon, shift)
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class DensityRow:
    eps: float
    error: float
    rate: Optional[float]


def density_study(u: TimeDependentField, eps_list: Sequence[float], ctx: NormContext,
                  horizon: float = 1.0, shift: bool = True) -> List[DensityRow]:
    """||u_eps - u||_{L2(J,V)} for a decreasing list of widths.

    With shift=False the classical centred kernel is measured on the interior
    window [2 eps_max, T - 2 eps_max].
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise DomainViolationError(f"eps list must be strictly decreasing, got {eps_list}")
    lo, hi = (0.0, horizon) if shift else (2.0 * eps_list[0], horizon - 2.0 * eps_list[0])
    tq, wt = composite_rule(lo, hi, ctx.time_panels, ctx.q_t)
    rule = ctx.reference().rule(None)
    rows: List[DensityRow] = []
    for eps in eps_list:
        total = 0.0
        for t, w in zip(tq, wt):
            diff = _convolve(u.value, eps, rule.x, t, horizon, shift) - u.value(rule.x, t)
            diff_x = _convolve(u.dx_value, eps, rule.x, t, horizon, shift) - u.dx_value(rule.x, t)
            total += w * float(np.dot(rule.w, diff * diff + diff_x * diff_x))
        error = math.sqrt(total)
        rate = None
        if rows and rows[-1].error > 0.0 and error > 0.0:
            rate = math.log(rows[-1].error / error) / math.log(rows[-1].eps / eps)
        rows.append(DensityRow(eps=eps, error=error, rate=rate))
        logger.debug("[DENSITY] %s eps=%.4g error=%.6e", u.name or 'field', eps, error)
    return rows


def fitted_density_order(rows: Sequence[DensityRow]) -> Optional[float]:
    """Least-squares slope of log(error) against log(eps); None if an error vanishes."""
    if len(rows) < 2 or any(r.error <= 0.0 for r in rows):
        return None
    return float(np.polyfit(np.log([r.eps for r in rows]), np.log([r.error for r in rows]), 1)[0])


# -- space-time integration --------------------------------------------------

@dataclass
class _Sample:
    """Everything an integrand may need at the quadrature points of one time node."""
    t: float
    rule: ElementRule
    alpha: np.ndarray
    alpha_t: np.ndarray
    alpha_x: np.ndarray
    v: np.ndarray
    v_x: np.ndarray
    cache: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return self.rule.x

    @property
    def w(self) -> np.ndarray:
        return self.rule.w

    def field(self, u: TimeDependentField) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        key = id(u)
        if key not in self.cache:
            self.cache[key] = (u.value(self.x, self.t), u.dt_value(self.x, self.t), u.dx_value(self.x, self.t))
        return self.cache[key]


def _sample(t: float, coeff: PiecewiseCoefficient, motion: MotionMap, ctx: NormContext) -> _Sample:
    rule = ctx.reference().rule(float(motion.interface_position(t)))
    alpha, alpha_t, alpha_x = coeff.evaluate_side(rule.x, t, rule.side)
    v = np.asarray(motion.velocity(rule.x, t))
    v_x = np.asarray(motion.velocity_dx(rule.x, t))
    return _Sample(t=t, rule=rule, alpha=alpha, alpha_t=alpha_t, alpha_x=alpha_x, v=v, v_x=v_x)


def _space_time(integrand: Callable[[_Sample], np.ndarray], a: float, b: float,
                coeff: PiecewiseCoefficient, motion: MotionMap, ctx: NormContext) -> float:
    tq, wt = composite_rule(a, b, ctx.time_panels, ctx.q_t)
    total = 0.0
    for t, w in zip(tq, wt):
        s = _sample(float(t), coeff, motion, ctx)
        total += w * float(np.dot(s.w, integrand(s)))
    return total


def _space(integrand: Callable[[_Sample], np.ndarray], t: float, coeff: PiecewiseCoefficient,
           motion: MotionMap, ctx: NormContext) -> float:
    s = _sample(t, coeff, motion, ctx)
    return float(np.dot(s.w, integrand(s)))


def _bump_support(phi, horizon: float) -> Tuple[float, float]:
    if isinstance(phi, TimeBump):
        if phi.start < SUPPORT_TOL or phi.end > horizon - SUPPORT_TOL:
            raise DomainViolationError(f"test function support [{phi.start}, {phi.end}] touches the ends of [0, {horizon}]")
        return phi.start, phi.end
    ends = np.abs(np.asarray(phi.value(np.array([0.0, horizon]))))
    if np.any(ends > SUPPORT_TOL):
        raise DomainViolationError("test function does not vanish at t=0 and t=T")
    return 0.0, horizon


def weighted_pairing(u: TimeDependentField, phi, w: SpatialField, coeff: PiecewiseCoefficient,
                     motion: MotionMap, ctx: NormContext) -> float:
    """<(alpha d_t u)(phi), w> as defined through the transport-corrected distribution."""
    a, b = _bump_support(phi, motion.horizon)

    def integrand(s: _Sample) -> np.ndarray:
        uv, _, ux = s.field(u)
        wv, wx = w.value(s.x), w.dx_value(s.x)
        ph, ph_t = phi.value(s.t), phi.dt_value(s.t)
        flux_x = (s.alpha_x * uv * wv * s.v + s.alpha * ux * wv * s.v
                  + s.alpha * uv * wx * s.v + s.alpha * uv * wv * s.v_x)
        return -(s.alpha * uv * wv * ph_t + uv * ph * wv * s.alpha_t + ph * flux_x)

    return _space_time(integrand, a, b, coeff, motion, ctx)


def material_pairing(u: TimeDependentField, phi, w: SpatialField, coeff: PiecewiseCoefficient,
                     motion: MotionMap, ctx: NormContext) -> float:
    a, b = _bump_support(phi, motion.horizon)

    def integrand(s: _Sample) -> np.ndarray:
        uv, _, _ = s.field(u)
        wv, wx = w.value(s.x), w.dx_value(s.x)
        ph, ph_t = phi.value(s.t), phi.dt_value(s.t)
        transported = wv * ph_t + ph * s.v * wx
        return -(s.alpha * uv * transported + uv * ph * wv * s.alpha_t
                 + ph * uv * wv * (s.alpha_x * s.v + s.alpha * s.v_x))

    return _space_time(integrand, a, b, coeff, motion, ctx)


def classical_pairing(u: TimeDependentField, phi, w: SpatialField, coeff: PiecewiseCoefficient,
                      motion: MotionMap, ctx: NormContext) -> float:
    """int int phi * alpha * d_t u * w for fields with a classical time derivative."""
    a, b = _bump_support(phi, motion.horizon)

    def integrand(s: _Sample) -> np.ndarray:
        _, ut, _ = s.field(u)
        return phi.value(s.t) * s.alpha * ut * w.value(s.x)

    return _space_time(integrand, a, b, coeff, motion, ctx)


def transport_correction(u: TimeDependentField, phi, w: SpatialField, coeff: PiecewiseCoefficient,
                         motion: MotionMap, ctx: NormContext) -> float:
    """int int phi * alpha * v * d_x u * w, the gap between material and weighted pairings."""
    a, b = _bump_support(phi, motion.horizon)

    def integrand(s: _Sample) -> np.ndarray:
        _, _, ux = s.field(u)
        return phi.value(s.t) * s.alpha * s.v * ux * w.value(s.x)

    return _space_time(integrand, a, b, coeff, motion, ctx)


def reynolds_pairing(u: TimeDependentField, phi, w: SpatialField, coeff: PiecewiseCoefficient,
                     motion: MotionMap, ctx: NormContext, step: float = 1e-5) -> float:
    """int phi [d/dt (alpha u, w) - int alpha d_x(u w v)] dt for piecewise-constant alpha."""
    if not coeff.is_piecewise_constant:
        raise DomainViolationError("the absolutely-continuous pairing needs a piecewise-constant coefficient")
    a, b = _bump_support(phi, motion.horizon)

    def mass(s: _Sample) -> np.ndarray:
        uv, _, _ = s.field(u)
        return s.alpha * uv * w.value(s.x)

    def correction(s: _Sample) -> np.ndarray:
        uv, _, ux = s.field(u)
        wv, wx = w.value(s.x), w.dx_value(s.x)
        return s.alpha * (ux * wv * s.v + uv * wx * s.v + uv * wv * s.v_x)

    tq, wt = composite_rule(a, b, ctx.time_panels, ctx.q_t)
    total = 0.0
    for t, wq in zip(tq, wt):
        t = float(t)
        rate = (_space(mass, t + step, coeff, motion, ctx) - _space(mass, t - step, coeff, motion, ctx)) / (2.0 * step)
        total += wq * float(phi.value(t)) * (rate - _space(correction, t, coeff, motion, ctx))
    return total


def ibp_residual(u: TimeDependentField, z: TimeDependentField, t1: float, t2: float,
                 coeff: PiecewiseCoefficient, motion: MotionMap, ctx: NormContext) -> float:
    """|LHS - RHS| of the integration-by-parts identity on [t1, t2] (symmetric in u, z)."""
    if t1 >= t2:
        raise DomainViolationError(f"need t1 < t2, got ({t1}, {t2})")
    if t1 < 0.0 or t2 > motion.horizon:
        raise DomainViolationError(f"[{t1}, {t2}] leaves [0, {motion.horizon}]")

    def lhs(s: _Sample) -> np.ndarray:
        uv, ut, _ = s.field(u)
        zv, zt, _ = s.field(z)
        return s.alpha * (ut * zv + zt * uv)

    def weighted_product(s: _Sample) -> np.ndarray:
        uv, _, _ = s.field(u)
        zv, _, _ = s.field(z)
        return s.alpha * (uv * zv)

    def source(s: _Sample) -> np.ndarray:
        uv, _, ux = s.field(u)
        zv, _, zx = s.field(z)
        uz = uv * zv
        uz_x = ux * zv + zx * uv
        flux_x = s.alpha_x * uz * s.v + s.alpha * uz_x * s.v + s.alpha * uz * s.v_x
        return uz * s.alpha_t + flux_x

    left = _space_time(lhs, t1, t2, coeff, motion, ctx)
    right = (_space(weighted_product, t2, coeff, motion, ctx) - _space(weighted_product, t1, coeff, motion, ctx)
             - _space_time(source, t1, t2, coeff, motion, ctx))
    return abs(left - right)


# -- norms and embedding ----------------------------------------------------

def embedding_constant(p: float, C_v: float, C_alpha: float, C_emb: float, T: float) -> float:
    """sqrt((C_v + 1 + 1/T) * C_alpha * C_emb^2 * T^((p-2)/p) + 1)."""
    if p < 2.0:
        raise DomainViolationError(f"exponent p must be >= 2, got {p}")
    if C_v < 0.0 or C_alpha <= 0.0 or C_emb <= 0.0 or T <= 0.0:
        raise DomainViolationError("embedding constants must be positive")
    return math.sqrt((C_v + 1.0 + 1.0 / T) * C_alpha * C_emb ** 2 * T ** ((p - 2.0) / p) + 1.0)


@dataclass(frozen=True)
class GraphNorm:
    primal: float
    dual: float

    @property
    def total(self) -> float:
        return self.primal + self.dual


def dual_norm(load: np.ndarray, ctx: NormContext) -> float:
    return math.sqrt(max(ctx.reference().dual_norm_sq(load), 0.0))


def graph_norm(u: TimeDependentField, coeff: PiecewiseCoefficient, motion: MotionMap, ctx: NormContext) -> GraphNorm:
    """||u||_{L^p(J,V)} and ||alpha d_t u||_{L^p'(J,V'),h}."""
    p = ctx.p
    p_dual = p / (p - 1.0)
    ref = ctx.reference()
    tq, wt = composite_rule(0.0, motion.horizon, ctx.time_panels, ctx.q_t)
    primal = 0.0
    dual = 0.0
    for t, w in zip(tq, wt):
        s = _sample(float(t), coeff, motion, ctx)
        uv, ut, ux = s.field(u)
        v_norm = math.sqrt(float(np.dot(s.w, uv * uv + ux * ux)))
        d_norm = math.sqrt(max(ref.dual_norm_sq(ref.load(s.rule, s.alpha * ut)), 0.0))
        primal += w * v_norm ** p
        dual += w * d_norm ** p_dual
    return GraphNorm(primal=primal ** (1.0 / p), dual=dual ** (1.0 / p_dual))


@dataclass(frozen=True)
class EmbeddingReport:
    max_trace_norm: float
    graph_norm: float
    ratio: float
    bound: float
    continuity_norm: float
    continuity_bound: float

    @property
    def satisfied(self) -> bool:
        return self.ratio <= self.bound and self.continuity_norm <= self.continuity_bound * (1.0 + 1e-12)


def embedding_ratio(u: TimeDependentField, coeff: PiecewiseCoefficient, motion: MotionMap,
                    ctx: NormContext) -> EmbeddingReport:
    ctx2 = replace(ctx, p=2.0)
    trace = 0.0
    weighted = 0.0
    for t in np.linspace(0.0, motion.horizon, TRACE_SAMPLES):
        s = _sample(float(t), coeff, motion, ctx2)
        uv, _, _ = s.field(u)
        active = coeff.active_mask(s.rule.side)
        trace = max(trace, math.sqrt(float(np.dot(s.w, np.where(active, uv * uv, 0.0)))))
        weighted = max(weighted, math.sqrt(float(np.dot(s.w, s.alpha * uv * uv))))
    graph = graph_norm(u, coeff, motion, ctx2).total
    constants = coeff.global_constants(motion)
    c_emb = embedding_constant(2.0, constants.C_v, constants.C_alpha, 1.0, motion.horizon)
    if graph == 0.0:
        if trace > 0.0:
            raise InternalInconsistencyError(f"graph norm vanishes but the trace norm is {trace:.3e}")
        ratio = 0.0
    else:
        ratio = trace / graph
    report = EmbeddingReport(max_trace_norm=trace, graph_norm=graph, ratio=ratio,
                             bound=c_emb / math.sqrt(constants.alpha0),
                             continuity_norm=weighted, continuity_bound=c_emb * graph)
    logger.debug("[EMBED] %s ratio=%.6g bound=%.6g", u.name or 'field', report.ratio, report.bound)
    return report


@dataclass(frozen=True)
class NormEquivalence:
    plain: float
    weighted: float
    lower: float
    upper: float

    @property
    def satisfied(self) -> bool:
        return self.lower <= self.weighted * (1.0 + 1e-12) and self.weighted <= self.upper * (1.0 + 1e-12)


def sigma_norm_equivalence(u: TimeDependentField, t: float, coeff: PiecewiseCoefficient,
                           ctx: NormContext) -> NormEquivalence:
    """sqrt(alpha0)||u||_{L2(Sigma)} <= ||sqrt(alpha) u||_{L2(Sigma)} <= sqrt(C_alpha)||u||_{L2(Sigma)}."""
    motion = coeff.motion
    s = _sample(t, coeff, motion, ctx)
    uv, _, _ = s.field(u)
    active = coeff.active_mask(s.rule.side)
    plain = math.sqrt(float(np.dot(s.w, np.where(active, uv * uv, 0.0))))
    weighted = math.sqrt(float(np.dot(s.w, np.where(active, s.alpha * uv * uv, 0.0))))
    constants = coeff.global_constants(motion)
    return NormEquivalence(plain=plain, weighted=weighted,
                           lower=math.sqrt(constants.alpha0) * plain,
                           upper=math.sqrt(constants.C_alpha) * plain)


# -- random test data ---------------------------------------------------------

def random_spatial_field(rng: np.random.Generator, boundary: str = 'dirichlet', modes: int = 3) -> SpatialField:
    coeffs = rng.uniform(-1.0, 1.0, size=modes)
    k = np.arange(1, modes + 1) * np.pi
    if boundary == 'dirichlet':
        return SpatialField(value=lambda x: np.sin(np.multiply.outer(x, k)) @ coeffs,
                            dx_value=lambda x: (np.cos(np.multiply.outer(x, k)) * k) @ coeffs,
                            name='random_sine')
    shift = rng.uniform(-1.0, 1.0)
    return SpatialField(value=lambda x: shift + np.cos(np.multiply.outer(x, k)) @ coeffs,
                        dx_value=lambda x: (-np.sin(np.multiply.outer(x, k)) * k) @ coeffs,
                        name='random_cosine')


def random_bump(rng: np.random.Generator, horizon: float) -> TimeBump:
    start = rng.uniform(0.05, 0.35) * horizon
    end = rng.uniform(0.65, 0.95) * horizon
    return TimeBump(start=start, end=end)
