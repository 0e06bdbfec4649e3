"""Companion matrices, regime stability and joint-spectral-radius bounds."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import DimensionMismatch, EigenFailure
from .params import ParameterVector, RegimeParameters


@dataclass(frozen=True)
class JsrCertificate:
    lower: float
    upper: float
    tolerance_requested: float
    iterations: int
    products_explored: int
    converged: bool

    @property
    def certifies_stationarity(self) -> bool:
        return self.converged and self.upper < 1.0


def companion_matrix(regime: RegimeParameters, p: int | None = None) -> np.ndarray:
    """Stack ``A_1 .. A_p`` over shifted identity blocks into a dp x dp matrix."""
    if p is not None and p != regime.p:
        raise DimensionMismatch(f"regime has {regime.p} AR matrices, expected {p}")
    d, p = regime.d, regime.p
    out = np.zeros((d * p, d * p))
    out[:d, :] = regime.ar_stack
    if p > 1:
        out[d:, :-d] = np.eye(d * (p - 1))
    return out


def spectral_radius(matrix) -> float:
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"spectral radius needs a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise EigenFailure("matrix has non-finite entries")
    try:
        eig = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    return float(np.max(np.abs(eig))) if eig.size else 0.0


def regime_radii(params: ParameterVector) -> np.ndarray:
    return np.array([spectral_radius(companion_matrix(r)) for r in params.regimes])


def check_necessary(params: ParameterVector, margin: float = 0.0) -> tuple[bool, np.ndarray]:
    """Every regime's companion spectral radius below ``1 - margin``.

    Returns the verdict together with the per-regime radii.
    """
    radii = regime_radii(params)
    return bool(np.all(radii < 1.0 - margin)), radii


def _spectral_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, 2))


def _short_products(mats, budget: int = 4096, max_len: int = 12):
    """All products up to the longest length whose count stays within ``budget``."""
    levels = [[np.eye(mats[0].shape[0])]]
    while len(levels) <= max_len and len(levels[-1]) * len(mats) <= budget:
        levels.append([m @ q for q in levels[-1] for m in mats])
    return levels


def _ellipsoid_transform(levels, gamma: float):
    """Factor of ``P = sum_k sum_{|Q|=k} Q'Q / gamma^(2k)`` over the given products.

    ``x -> ||L' x||`` approximates an extremal norm of the set scaled by
    ``gamma``; returns ``(L', inv(L'))`` or ``None`` when the sum is unusable.
    """
    n = levels[0][0].shape[0]
    P = np.zeros((n, n))
    with np.errstate(over="ignore", invalid="ignore"):
        for k, level in enumerate(levels):
            P = P + sum(q.T @ q for q in level) / gamma ** (2 * k)
    if not np.all(np.isfinite(P)):
        return None
    P = 0.5 * (P + P.T) / np.max(np.abs(P))
    try:
        lt = np.linalg.cholesky(P).T
        lt_inv = np.linalg.inv(lt)
    except np.linalg.LinAlgError:
        return None
    if not (np.all(np.isfinite(lt_inv)) and np.linalg.cond(lt) < 1e8):
        return None
    return lt, lt_inv


def _gripenberg(mats, tolerance: float, budget: int, norm, lower: float):
    """One branch-and-bound pass; returns (lower, upper, iterations, explored, converged)."""
    explored = 0
    # (bound, insertion id, length, product)
    frontier = []
    for i, m in enumerate(mats):
        explored += 1
        lower = max(lower, spectral_radius(m))
        frontier.append((norm(m), i, 1, m))
    upper_bound = max(b for b, *_ in frontier)
    iterations = 0
    uid = len(frontier)
    while True:
        iterations += 1
        threshold = lower + tolerance
        survivors = [item for item in frontier if item[0] > threshold]
        if not survivors:
            return lower, min(upper_bound, threshold), iterations, explored, True
        upper_bound = min(upper_bound, max(threshold, max(item[0] for item in survivors)))
        if upper_bound - lower <= tolerance:
            return lower, upper_bound, iterations, explored, True
        if explored + len(survivors) * len(mats) > budget:
            return lower, upper_bound, iterations, explored, False
        heap = [(-b, k, length, prod) for b, k, length, prod in survivors]
        heapq.heapify(heap)
        next_frontier = []
        new_lower = lower
        while heap:
            negb, _, length, prod = heapq.heappop(heap)
            bound = -negb
            for m in mats:
                q = m @ prod
                explored += 1
                k = length + 1
                new_lower = max(new_lower, spectral_radius(q) ** (1.0 / k))
                next_frontier.append((min(bound, norm(q) ** (1.0 / k)), uid, k, q))
                uid += 1
        lower = new_lower
        frontier = next_frontier


def _in_absconv(vertices: np.ndarray, x: np.ndarray) -> bool:
    """Whether ``x`` lies in the symmetric convex hull of the columns of ``vertices``."""
    n, k = vertices.shape
    # variables (lam+, lam-) >= 0 with V (lam+ - lam-) = x; minimise their sum
    res = linprog(np.ones(2 * k), A_eq=np.hstack([vertices, -vertices]), b_eq=x,
                  bounds=(0, None), method="highs")
    return bool(res.status == 0 and res.fun <= 1.0 + 1e-9)


def _polytope_certifies(mats, gamma: float, max_vertices: int) -> bool:
    """Try to build a polytope P with ``A P / gamma`` inside P for every A.

    Starts from the unit vectors and the real dominant eigenvectors, and adds
    every image that falls outside the current symmetric hull. Success proves
    that the joint spectral radius is at most ``gamma``.
    """
    n = mats[0].shape[0]
    scaled = [m / gamma for m in mats]
    start = [np.eye(n)[:, i] for i in range(n)]
    for m in mats:
        w, v = np.linalg.eig(m)
        top = v[:, np.argmax(np.abs(w))]
        if np.max(np.abs(top.imag)) < 1e-12:
            start.append(top.real / np.linalg.norm(top.real))
    verts = [start[0]]
    for x in start[1:]:
        if not _in_absconv(np.column_stack(verts), x):
            verts.append(x)
    queue = list(verts)
    while queue:
        x = queue.pop(0)
        for a in scaled:
            y = a @ x
            if not _in_absconv(np.column_stack(verts), y):
                verts.append(y)
                queue.append(y)
                if len(verts) > max_vertices:
                    return False
    return True


def jsr_bounds(matrices, tolerance: float = 1e-2, max_products: int = 10**6,
               precondition: bool = True) -> JsrCertificate:
    """Bound the joint spectral radius by Gripenberg's branch-and-bound.

    Products are extended generation by generation. A product ``P`` of length
    ``k`` carries the bound ``min_j ||P_{1..j}||^{1/j}`` over its prefixes; it is
    dropped once that bound is no larger than ``lower + tolerance`` because any
    infinite product starting with it can then be cut into blocks that grow no
    faster than ``lower + tolerance``. Inside a generation the products are
    handled best-first by bound, but pruning uses the lower bound frozen at the
    start of the generation so the result does not depend on processing order.

    Any operator norm gives valid bounds, but the number of generations needed
    depends strongly on the norm. With ``precondition`` the search alternates
    between the spectral norm and the spectral norm after a similarity
    transform towards an extremal ellipsoidal norm, with budgets growing by a
    factor of four, and keeps the best bounds found. Between stages it also
    tries to close an invariant polytope for the set scaled by
    ``lower + tolerance/2``, which settles sets with several spectrum-maximising
    products where both norms converge slowly. Spectral radii, and so the lower
    bound, are always computed on the original products.

    For sets of at most six matrices the lower bound is also raised to the
    largest lower bound found for any subset, so adding a matrix never lowers
    it.
    """
    mats = [np.asarray(m, dtype=float) for m in matrices]
    if not mats:
        raise DimensionMismatch("need at least one matrix")
    n = mats[0].shape[0]
    for m in mats:
        if m.shape != (n, n):
            raise DimensionMismatch("all matrices must be square and of equal size")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if len(mats) > _MAX_SUBSET_SET:
        return _jsr_search(mats, tolerance, max_products, precondition)
    memo: dict = {}
    return _jsr_with_subsets(mats, tuple(range(len(mats))), tolerance, max_products,
                             precondition, memo)


# sets up to this size also take lower bounds from every subset (2^k searches)
_MAX_SUBSET_SET = 6


def _jsr_with_subsets(mats, idx, tolerance, max_products, precondition, memo):
    if idx in memo:
        return memo[idx]
    cert = _jsr_search([mats[i] for i in idx], tolerance, max_products, precondition)
    lower, explored = cert.lower, cert.products_explored
    if len(idx) > 1:
        for drop in range(len(idx)):
            sub = _jsr_with_subsets(mats, idx[:drop] + idx[drop + 1:], tolerance, max_products,
                                    precondition, memo)
            lower = max(lower, sub.lower)
    if lower > cert.lower:
        # a subset bound is valid for the whole set; the gap only narrows
        cert = JsrCertificate(lower=lower, upper=max(cert.upper, lower),
                              tolerance_requested=cert.tolerance_requested,
                              iterations=cert.iterations, products_explored=explored,
                              converged=cert.converged)
    memo[idx] = cert
    return cert


def _jsr_search(mats, tolerance, max_products, precondition) -> JsrCertificate:
    norms = [_spectral_norm]
    lower, upper, iterations, explored = 0.0, np.inf, 0, 0
    if precondition:
        levels = _short_products(mats, budget=min(4096, max_products // 4))
        for k, level in enumerate(levels[1:], start=1):
            explored += len(level)
            lower = max(lower, max(spectral_radius(q) for q in level) ** (1.0 / k))
        transform = _ellipsoid_transform(levels, lower + 0.5 * tolerance) if lower > 0 else None
        if transform is not None:
            lt, lt_inv = transform
            norms.append(lambda a: _spectral_norm(lt @ a @ lt_inv))

    budget = max_products if len(norms) == 1 else max(1000, max_products // 256)
    converged = False
    while not converged:
        for norm in norms:
            remaining = max_products - explored
            lo, up, it, ex, done = _gripenberg(mats, tolerance, min(budget, remaining), norm, lower)
            lower, upper = max(lower, lo), min(upper, up)
            iterations += it
            explored += ex
            # a finished pass has width tol up to rounding; the clamp below fixes the ulp
            if done or upper - lower <= tolerance:
                converged = True
                break
        if not converged and precondition and lower > 0:
            gamma = lower + 0.5 * tolerance
            if _polytope_certifies(mats, gamma, max_vertices=max(20, budget // 200)):
                # the LP acceptance slack inflates the certified bound by at most 1e-9
                upper = min(upper, gamma * (1.0 + 1e-9))
                converged = True
        if explored >= max_products or budget >= max_products:
            break
        budget *= 4
    upper = max(upper, lower)
    if converged:
        # lower + tolerance can round one ulp past the requested width
        while upper - lower > tolerance:
            upper = float(np.nextafter(upper, -np.inf))
    return JsrCertificate(
        lower=float(lower),
        upper=float(upper),
        tolerance_requested=float(tolerance),
        iterations=iterations,
        products_explored=explored,
        converged=converged,
    )


def check_sufficient(params: ParameterVector, tolerance: float = 1e-2,
                     max_products: int = 10**6) -> JsrCertificate:
    mats = [companion_matrix(r) for r in params.regimes]
    return jsr_bounds(mats, tolerance=tolerance, max_products=max_products)
