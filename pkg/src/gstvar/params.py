"""Parameter containers for the GSTVAR model and the flat parameter layout.

The flat layout is

    theta = (phi_1, ..., phi_M,
             vec(A_{1,1}), ..., vec(A_{1,p}), ..., vec(A_{M,1}), ..., vec(A_{M,p}),
             vech(Omega_1), ..., vech(Omega_M),
             alpha_1, ..., alpha_{M-1})

with ``vec`` the column-major stacking and ``vech`` the column-major stacking of
the lower triangle including the diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidParameters, NotPositiveDefinite

SYMMETRY_TOL = 1e-12
ALPHA_SUM_TOL = 1e-12


def vec(a: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=float).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape((d, d), order="F")


def vech_indices(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the column-major lower triangle of a d x d matrix."""
    rows, cols = [], []
    for j in range(d):
        for i in range(j, d):
            rows.append(i)
            cols.append(j)
    return np.array(rows, dtype=int), np.array(cols, dtype=int)


def vech(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    r, c = vech_indices(a.shape[0])
    return a[r, c].copy()


def unvech(v: np.ndarray, d: int) -> np.ndarray:
    r, c = vech_indices(d)
    out = np.zeros((d, d))
    out[r, c] = v
    out[c, r] = v
    return out


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModelOrder:
    d: int
    p: int
    M: int

    def __post_init__(self):
        for name in ("d", "p", "M"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidParameters(f"{name} must be a positive integer, got {value!r}")

    @property
    def regime_block_size(self) -> int:
        d, p = self.d, self.p
        return d + d * d * p + d * (d + 1) // 2

    @property
    def n_params(self) -> int:
        """Number of free parameters, ``M(d + d^2 p + d(d+1)/2) + M - 1``."""
        return self.M * self.regime_block_size + self.M - 1


@dataclass(frozen=True)
class RegimeParameters:
    """Intercept, AR matrices and error covariance of one regime."""

    phi0: np.ndarray
    ar_mats: tuple
    omega: np.ndarray

    def __post_init__(self):
        phi0 = _frozen(self.phi0).reshape(-1)
        d = phi0.shape[0]
        ar = tuple(_frozen(a) for a in self.ar_mats)
        omega = _frozen(self.omega)
        if len(ar) == 0:
            raise InvalidParameters("at least one AR matrix is required")
        for a in ar:
            if a.shape != (d, d):
                raise DimensionMismatch(f"AR matrix has shape {a.shape}, expected {(d, d)}")
        if omega.shape != (d, d):
            raise DimensionMismatch(f"omega has shape {omega.shape}, expected {(d, d)}")
        if not np.all(np.isfinite(phi0)) or not all(np.all(np.isfinite(a)) for a in ar):
            raise InvalidParameters("non-finite intercept or AR entries")
        if not np.all(np.isfinite(omega)) or np.max(np.abs(omega - omega.T)) > SYMMETRY_TOL:
            raise NotPositiveDefinite("omega must be finite and symmetric")
        try:
            np.linalg.cholesky(omega)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite("omega is not positive definite") from exc
        object.__setattr__(self, "phi0", phi0)
        object.__setattr__(self, "ar_mats", ar)
        object.__setattr__(self, "omega", omega)

    @property
    def d(self) -> int:
        return self.phi0.shape[0]

    @property
    def p(self) -> int:
        return len(self.ar_mats)

    @property
    def ar_stack(self) -> np.ndarray:
        """``[A_1 ... A_p]`` as a d x dp matrix."""
        return np.hstack(self.ar_mats)


@dataclass(frozen=True)
class ParameterVector:
    """Full GSTVAR parameter: regimes plus transition-weight parameters."""

    order: ModelOrder
    regimes: tuple
    alphas: np.ndarray
    identified: bool = field(default=False)

    def __post_init__(self):
        regimes = tuple(self.regimes)
        alphas = _frozen(self.alphas).reshape(-1)
        o = self.order
        if len(regimes) != o.M or alphas.shape[0] != o.M:
            raise DimensionMismatch("number of regimes/alphas does not match M")
        for r in regimes:
            if r.d != o.d or r.p != o.p:
                raise DimensionMismatch("regime dimensions do not match the model order")
        if np.any(alphas <= 0) or abs(alphas.sum() - 1.0) > ALPHA_SUM_TOL:
            raise InvalidParameters(f"alphas must be positive and sum to one, got {alphas}")
        if self.identified and np.any(np.diff(alphas) >= 0):
            raise InvalidParameters("identified parameters need strictly decreasing alphas")
        object.__setattr__(self, "regimes", regimes)
        object.__setattr__(self, "alphas", alphas)

    @classmethod
    def from_arrays(cls, phi0s, ar_mats, omegas, alphas, identified=False) -> "ParameterVector":
        """Build from per-regime arrays; ``ar_mats[m]`` is a list of p matrices."""
        regimes = tuple(
            RegimeParameters(np.asarray(f, float), tuple(a), np.asarray(w, float))
            for f, a, w in zip(phi0s, ar_mats, omegas)
        )
        d = regimes[0].d
        order = ModelOrder(d=d, p=regimes[0].p, M=len(regimes))
        alphas = np.asarray(alphas, dtype=float)
        if alphas.shape[0] == order.M - 1:
            alphas = np.append(alphas, 1.0 - alphas.sum())
        return cls(order, regimes, alphas, identified)

    def to_flat(self) -> np.ndarray:
        parts = [r.phi0 for r in self.regimes]
        parts += [vec(a) for r in self.regimes for a in r.ar_mats]
        parts += [vech(r.omega) for r in self.regimes]
        parts.append(self.alphas[:-1])
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, theta, order: ModelOrder, identified: bool = False) -> "ParameterVector":
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.shape[0] != order.n_params:
            raise DimensionMismatch(
                f"flat parameter has length {theta.shape[0]}, expected {order.n_params}"
            )
        d, p, M = order.d, order.p, order.M
        pos = 0
        phis = []
        for _ in range(M):
            phis.append(theta[pos:pos + d])
            pos += d
        ars = []
        for _ in range(M):
            mats = []
            for _ in range(p):
                mats.append(unvec(theta[pos:pos + d * d], d))
                pos += d * d
            ars.append(mats)
        nv = d * (d + 1) // 2
        omegas = []
        for _ in range(M):
            omegas.append(unvech(theta[pos:pos + nv], d))
            pos += nv
        head = theta[pos:pos + M - 1]
        alphas = np.append(head, 1.0 - head.sum())
        regimes = tuple(RegimeParameters(f, tuple(a), w) for f, a, w in zip(phis, ars, omegas))
        return cls(order, regimes, alphas, identified)

    def flat_blocks(self) -> dict:
        """Index arrays into :meth:`to_flat` for the intercept, AR, covariance and alpha blocks.

        Each block except ``alpha`` is a list with one index array per regime.
        """
        d, p, M = self.order.d, self.order.p, self.order.M
        nv = d * (d + 1) // 2
        pos = 0
        out = {"phi": [], "ar": [], "omega": []}
        for _ in range(M):
            out["phi"].append(np.arange(pos, pos + d))
            pos += d
        for _ in range(M):
            out["ar"].append(np.arange(pos, pos + d * d * p))
            pos += d * d * p
        for _ in range(M):
            out["omega"].append(np.arange(pos, pos + nv))
            pos += nv
        out["alpha"] = np.arange(pos, pos + M - 1)
        return out

    def permuted(self, perm) -> "ParameterVector":
        perm = list(perm)
        return ParameterVector(
            self.order,
            tuple(self.regimes[i] for i in perm),
            self.alphas[perm],
        )
