import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sparse
from scipy.sparse.linalg import splu

from errors import DomainViolationError, NumericalFailureError


logger = logging.getLogger(__name__)

# Interface/partition-point collisions closer than this are perturbed.
COLLISION_TOL = 1e-14
COLLISION_SHIFT = 1e-12


@lru_cache(maxsize=64)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    if order < 1:
        raise DomainViolationError(f"quadrature order must be >= 1, got {order}")
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def interval_rule(a: float, b: float, order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = gauss_legendre(order)
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * nodes, half * weights


def composite_rule(a: float, b: float, panels: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss rule with `panels` equal panels on [a, b]."""
    if b < a:
        raise DomainViolationError(f"empty interval [{a}, {b}]")
    if b == a:
        return np.zeros(0), np.zeros(0)
    edges = np.linspace(a, b, panels + 1)
    nodes, weights = gauss_legendre(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return x, w


@dataclass(frozen=True)
class ElementRule:
    """Quadrature points of a 1-D mesh, split at the interface.

    `elem` is the owning element, `lam` the barycentric coordinate of the
    point inside it and `side` the branch (1 left of the cut, 2 right).
    """
    x: np.ndarray
    w: np.ndarray
    elem: np.ndarray
    lam: np.ndarray
    side: np.ndarray


def _resolve_cut(nodes: np.ndarray, cut: float) -> float:
    interior = nodes[1:-1]
    if interior.size == 0:
        return cut
    k = int(np.argmin(np.abs(interior - cut)))
    if abs(interior[k] - cut) > COLLISION_TOL:
        return cut
    node = interior[k]
    left_len = node - nodes[k]
    right_len = nodes[k + 2] - node
    shifted = node + COLLISION_SHIFT if right_len >= left_len else node - COLLISION_SHIFT
    logger.debug("[QUAD] interface %.16g collides with node %.16g; split moved to %.16g", cut, node, shifted)
    return shifted


def fitted_element_rule(nodes: np.ndarray, cut: Optional[float], order: int) -> ElementRule:
    """Gauss rule of `order` points per element, each element split at `cut`."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or nodes.size < 2:
        raise DomainViolationError("mesh needs at least two nodes")
    if np.any(np.diff(nodes) <= 0.0):
        raise NumericalFailureError("mesh nodes are not strictly increasing")
    ref, ref_w = gauss_legendre(order)
    a = nodes[:-1]
    b = nodes[1:]
    n_el = a.size

    if cut is None:
        lo = [a]
        hi = [b]
        owner = [np.arange(n_el)]
        sides = [np.ones(n_el, dtype=int)]
    else:
        cut = _resolve_cut(nodes, float(cut))
        inside = (a < cut) & (cut < b)
        left_of = b <= cut
        plain = ~inside
        lo = [a[plain], a[inside], np.full(int(inside.sum()), cut)]
        hi = [b[plain], np.full(int(inside.sum()), cut), b[inside]]
        idx = np.arange(n_el)
        owner = [idx[plain], idx[inside], idx[inside]]
        sides = [np.where(left_of[plain], 1, 2), np.ones(int(inside.sum()), dtype=int),
                 np.full(int(inside.sum()), 2, dtype=int)]

    lo_all = np.concatenate(lo)
    hi_all = np.concatenate(hi)
    owner_all = np.concatenate(owner)
    side_all = np.concatenate(sides)
    # Keep points ordered by element so sums are reproducible.
    order_idx = np.lexsort((lo_all, owner_all))
    lo_all, hi_all = lo_all[order_idx], hi_all[order_idx]
    owner_all, side_all = owner_all[order_idx], side_all[order_idx]

    half = 0.5 * (hi_all - lo_all)
    mid = 0.5 * (hi_all + lo_all)
    x = (mid[:, None] + half[:, None] * ref[None, :]).ravel()
    w = (half[:, None] * ref_w[None, :]).ravel()
    elem = np.repeat(owner_all, order)
    side = np.repeat(side_all, order)
    lam = (x - a[elem]) / (b[elem] - a[elem])
    return ElementRule(x=x, w=w, elem=elem, lam=lam, side=side)


def p1_gram(nodes: np.ndarray, mass_weight: float = 1.0, stiff_weight: float = 1.0) -> sparse.csr_matrix:
    """Exact P1 Gram matrix mass_weight*M + stiff_weight*K on a 1-D mesh (all nodes)."""
    h = np.diff(np.asarray(nodes, dtype=float))
    n = h.size + 1
    i = np.arange(h.size)
    m_diag = np.zeros(n)
    m_diag[:-1] += h / 3.0
    m_diag[1:] += h / 3.0
    k_diag = np.zeros(n)
    k_diag[:-1] += 1.0 / h
    k_diag[1:] += 1.0 / h
    diag = mass_weight * m_diag + stiff_weight * k_diag
    off = mass_weight * h / 6.0 - stiff_weight / h
    rows = np.concatenate([np.arange(n), i, i + 1])
    cols = np.concatenate([np.arange(n), i + 1, i])
    vals = np.concatenate([diag, off, off])
    return sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def free_nodes(n_nodes: int, boundary: str) -> np.ndarray:
    """Node indices carrying degrees of freedom for the chosen V."""
    if boundary == 'dirichlet':
        return np.arange(1, n_nodes - 1)
    if boundary == 'neumann':
        return np.arange(n_nodes)
    raise DomainViolationError(f"unknown boundary choice '{boundary}'")


class ReferenceSpace:
    """P1 space on the fixed fine reference mesh used for discrete dual norms.

    ||z||^2_{V',h} = r^T G^{-1} r with r the load vector of z and G the H1 Gram.
    """

    def __init__(self, n_cells: int, boundary: str = 'dirichlet', order: int = 4) -> None:
        if n_cells < 2:
            raise DomainViolationError(f"reference mesh needs >= 2 cells, got {n_cells}")
        self.nodes = np.linspace(0.0, 1.0, n_cells + 1)
        self.boundary = boundary
        self.order = order
        self.dofs = free_nodes(self.nodes.size, boundary)
        gram = p1_gram(self.nodes)[self.dofs][:, self.dofs].tocsc()
        self.gram = gram
        self._lu = splu(gram)

    def rule(self, cut: Optional[float]) -> ElementRule:
        return fitted_element_rule(self.nodes, cut, self.order)

    def load(self, rule: ElementRule, values: np.ndarray, dx_values: Optional[np.ndarray] = None) -> np.ndarray:
        """Load vector of the functional psi -> int(values*psi + dx_values*psi')."""
        n = self.nodes.size
        full = np.bincount(rule.elem, weights=rule.w * values * (1.0 - rule.lam), minlength=n)
        full += np.bincount(rule.elem + 1, weights=rule.w * values * rule.lam, minlength=n)
        if dx_values is not None:
            h = np.diff(self.nodes)[rule.elem]
            full -= np.bincount(rule.elem, weights=rule.w * dx_values / h, minlength=n)
            full += np.bincount(rule.elem + 1, weights=rule.w * dx_values / h, minlength=n)
        return full[self.dofs]

    def dual_norm_sq(self, load: np.ndarray) -> float:
        if not np.any(load):
            return 0.0
        return float(load @ self._lu.solve(load))
