"""Problem instances: linear constraint system, loss oracles, regularizer.

An instance couples a constraint system ``A x + B y = c`` with a smooth loss
supplied as a gradient oracle, a regularizer ``g`` with a deterministic
argmin map, and the scalar parameters (beta, eta, sigma).  Instances are
immutable after construction and may be shared across threads; the gradient
map must be a pure function.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_triangular

from .linalg import NotSPD, as_matrix, as_vector, cholesky_spd, solve_spd

__all__ = [
    "ConstraintSystem",
    "StandardForm",
    "GradientOracle",
    "Regularizer",
    "AdmmConfig",
    "AdmmProblem",
    "DegenerateSystem",
    "Unsupported",
    "standardize",
    "elastic_net_argmin",
    "soft_threshold",
]

_PIVOT_THRESHOLD = 1e-10  # rank decisions in Gaussian elimination


class DegenerateSystem(Exception):
    """Elimination produced a row 0·x + 0·y = c with c != 0 (infeasible)."""


class Unsupported(Exception):
    """No closed-form argmin for this regularizer/constraint combination and
    no custom handle was supplied."""


@dataclass(frozen=True)
class ConstraintSystem:
    """The linear coupling A x + B y = c (A: m×n, B: m×l, c in R^m)."""

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", as_matrix(self.A))
        object.__setattr__(self, "B", as_matrix(self.B))
        object.__setattr__(self, "c", as_vector(self.c))
        m, n = self.A.shape
        if m < 1 or n < 1:
            raise ValueError("A must be at least 1x1")
        if self.B.shape[0] != m or self.c.shape[0] != m:
            raise ValueError("A, B, c row counts must agree")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def l(self) -> int:
        return self.B.shape[1]

    def residual(self, x, y) -> np.ndarray:
        return self.A @ x + self.B @ y - self.c

    def is_standard_form(self, tol: float = 0.0) -> bool:
        """True when the first m columns of A are exactly (or within ``tol``)
        the identity, i.e. A = [I_m | D]."""
        m, n = self.A.shape
        if m > n:
            return False
        lead = self.A[:, :m]
        if tol == 0.0:
            return bool(np.array_equal(lead, np.eye(m)))
        return bool(np.abs(lead - np.eye(m)).max() <= tol)


@dataclass(frozen=True)
class StandardForm:
    """Standardized system with A = [I_m | D] plus absorbed constraints.

    Rows whose A-part vanished under elimination become the extra equality
    constraints ``B_hat y = c_hat`` (the domain restriction of the modified
    regularizer).  ``x_permutation`` records the column reorder of x that
    elimination needed to place pivots first; it is the identity whenever the
    pivots occurred naturally.
    """

    system: ConstraintSystem
    B_hat: np.ndarray
    c_hat: np.ndarray
    x_permutation: np.ndarray

    @property
    def D(self) -> np.ndarray:
        m = self.system.m
        return self.system.A[:, m:]

    def constraint_residual(self, x, y) -> np.ndarray:
        """Residual of the standardized constraints at an (x, y) given in the
        *original* variable order (permutation applied internally)."""
        return self.system.residual(np.asarray(x, dtype=float)[self.x_permutation], y)

    def absorbed_residual(self, y) -> np.ndarray:
        if self.B_hat.size == 0:
            return np.zeros(0)
        return self.B_hat @ y - self.c_hat


@dataclass(frozen=True)
class GradientOracle:
    """A smooth loss given by its gradient map.

    ``nu`` is the Lipschitz constant of the gradient, ``mu`` the (optional)
    strong-convexity modulus; the neighboring-distance ``delta`` between two
    oracles is caller-supplied metadata, never inferred.
    """

    gradient: Callable[[np.ndarray], np.ndarray]
    nu: float
    mu: float = 0.0
    gradient_bound: Optional[float] = None

    def __post_init__(self):
        if not (0.0 <= self.mu <= self.nu):
            raise ValueError("need 0 <= mu <= nu")

    @staticmethod
    def quadratic(P, q) -> "QuadraticOracle":
        return QuadraticOracle(as_matrix(P), as_vector(q))


@dataclass(frozen=True)
class QuadraticOracle(GradientOracle):
    """f(x) = 1/2 x^T P x + q^T x with P symmetric PSD (exact nu, mu)."""

    P: np.ndarray = None
    q: np.ndarray = None

    def __init__(self, P, q):
        P = as_matrix(P)
        q = as_vector(q)
        eigs = np.linalg.eigvalsh(0.5 * (P + P.T))
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "gradient", lambda x: P @ x + q)
        object.__setattr__(self, "nu", max(float(eigs[-1]), 0.0))
        object.__setattr__(self, "mu", max(float(eigs[0]), 0.0))
        object.__setattr__(self, "gradient_bound", None)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ (self.P @ x) + self.q @ x)


def soft_threshold(v, tau: float):
    """Componentwise sign(v) * max(|v| - tau, 0)."""
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def elastic_net_argmin(w, c1: float, c2: float, beta: float) -> np.ndarray:
    """Argmin of c1||y||_1 + c2||y||_2^2 + <w, y> + (beta/2)||y||^2 written as
    a function of w = lambda - beta A x, in the B = -I, c = 0 configuration:
    y_j = soft_threshold(-w_j, c1) / (2 c2 + beta)."""
    if 2.0 * c2 + beta <= 0.0:
        raise ValueError("need beta + 2 c2 > 0")
    return soft_threshold(-as_vector(w), c1) / (2.0 * c2 + beta)


@dataclass(frozen=True)
class Regularizer:
    """g(y) with a deterministic canonical argmin map.

    kind is one of ``elastic_net`` (c1||y||_1 + c2||y||_2^2, closed form for
    B = -I, c = 0), ``quadratic`` (1/2 y^T P_g y + q_g^T y, SPD solve), or
    ``custom`` (caller-supplied handle, which must itself be deterministic).
    """

    kind: str
    c1: float = 0.0
    c2: float = 0.0
    P_g: Optional[np.ndarray] = None
    q_g: Optional[np.ndarray] = None
    handle: Optional[Callable] = None
    mu_g: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.kind == "elastic_net":
            if self.c1 < 0 or self.c2 < 0:
                raise ValueError("elastic net needs c1, c2 >= 0")
            object.__setattr__(self, "mu_g", 2.0 * self.c2)
        elif self.kind == "quadratic":
            P = as_matrix(self.P_g)
            q = as_vector(self.q_g) if self.q_g is not None else np.zeros(P.shape[0])
            object.__setattr__(self, "P_g", P)
            object.__setattr__(self, "q_g", q)
            eig_min = float(np.linalg.eigvalsh(0.5 * (P + P.T))[0])
            if eig_min < -1e-10:
                raise ValueError("P_g must be PSD")
            object.__setattr__(self, "mu_g", max(eig_min, 0.0))
        elif self.kind == "custom":
            if self.handle is None:
                raise ValueError("custom regularizer needs an argmin handle")
            if self.mu_g is None:
                object.__setattr__(self, "mu_g", 0.0)
        else:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")

    @staticmethod
    def elastic_net(c1: float, c2: float) -> "Regularizer":
        return Regularizer(kind="elastic_net", c1=c1, c2=c2)

    @staticmethod
    def quadratic(P_g, q_g=None) -> "Regularizer":
        return Regularizer(kind="quadratic", P_g=P_g, q_g=q_g)

    @staticmethod
    def custom(handle, mu_g: float = 0.0) -> "Regularizer":
        return Regularizer(kind="custom", handle=handle, mu_g=mu_g)

    def value(self, y) -> float:
        y = np.asarray(y, dtype=float)
        if self.kind == "elastic_net":
            return float(self.c1 * np.abs(y).sum() + self.c2 * (y @ y))
        if self.kind == "quadratic":
            return float(0.5 * y @ (self.P_g @ y) + self.q_g @ y)
        raise Unsupported("custom regularizers do not expose a value")

    def argmin(self, w, B, c, beta: float) -> np.ndarray:
        """Canonical minimizer of g(y) - <lambda, Ax+By-c> + (beta/2)||Ax+By-c||^2
        expressed through w = lambda - beta A x."""
        w = as_vector(w)
        if self.kind == "custom":
            return as_vector(self.handle(w, B, c, beta))
        if self.kind == "elastic_net":
            B = as_matrix(B)
            if not (
                B.shape[0] == B.shape[1]
                and np.array_equal(B, -np.eye(B.shape[0]))
                and not np.any(as_vector(c))
            ):
                raise Unsupported(
                    "elastic net argmin has a closed form only for B = -I, c = 0"
                )
            return elastic_net_argmin(w, self.c1, self.c2, beta)
        # quadratic: stationarity (P_g + beta B^T B) y = B^T w + beta B^T c - q_g
        B = as_matrix(B)
        c = as_vector(c)
        lhs = self.P_g + beta * B.T @ B
        rhs = B.T @ w + beta * B.T @ c - self.q_g
        try:
            return solve_spd(lhs, rhs)
        except NotSPD as exc:
            raise Unsupported(
                "quadratic argmin needs P_g + beta B^T B positive definite"
            ) from exc

    def to_json_dict(self) -> dict:
        if self.kind == "elastic_net":
            return {"kind": "elastic_net", "c1": self.c1, "c2": self.c2}
        if self.kind == "quadratic":
            return {
                "kind": "quadratic",
                "P_g": self.P_g.tolist(),
                "q_g": self.q_g.tolist(),
            }
        raise Unsupported("custom regularizers are not serializable")

    @staticmethod
    def from_json_dict(d: dict) -> "Regularizer":
        if d["kind"] == "elastic_net":
            return Regularizer.elastic_net(d["c1"], d["c2"])
        if d["kind"] == "quadratic":
            return Regularizer.quadratic(d["P_g"], d.get("q_g"))
        raise Unsupported(f"cannot deserialize regularizer kind {d['kind']!r}")


@dataclass(frozen=True)
class AdmmConfig:
    """Scalar iteration parameters (sigma = 0 means noiseless)."""

    beta: float
    eta: float
    sigma: float = 0.0
    iterations: int = 1

    def __post_init__(self):
        if self.beta <= 0 or self.eta <= 0:
            raise ValueError("beta and eta must be strictly positive")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


class AdmmProblem:
    """Constraint system + regularizer + config, with the x-update matrix
    (I + eta beta A^T A) factorized once and cached."""

    def __init__(self, system: ConstraintSystem, regularizer: Regularizer,
                 config: AdmmConfig):
        self.system = system
        self.regularizer = regularizer
        self.config = config
        eta, beta = config.eta, config.beta
        A = system.A
        self._chol = cholesky_spd(np.eye(system.n) + eta * beta * (A.T @ A))
        # Hoist the per-call closed-form dispatch check out of the hot loop.
        self._elastic_closed_form = (
            regularizer.kind == "elastic_net"
            and system.B.shape[0] == system.B.shape[1]
            and np.array_equal(system.B, -np.eye(system.B.shape[0]))
            and not np.any(system.c)
        )

    def solve_x_system(self, rhs) -> np.ndarray:
        """Applies (I + eta beta A^T A)^{-1} via the cached factor."""
        z = solve_triangular(
            self._chol, np.asarray(rhs, dtype=float),
            lower=True, check_finite=False,
        )
        return solve_triangular(
            self._chol, z, lower=True, trans="T", check_finite=False
        )

    def argmin_g(self, w) -> np.ndarray:
        if self._elastic_closed_form:
            return (
                soft_threshold(-np.asarray(w, dtype=float), self.regularizer.c1)
                / (2.0 * self.regularizer.c2 + self.config.beta)
            )
        return self.regularizer.argmin(
            w, self.system.B, self.system.c, self.config.beta
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "A": self.system.A.tolist(),
                "B": self.system.B.tolist(),
                "c": self.system.c.tolist(),
                "beta": self.config.beta,
                "eta": self.config.eta,
                "sigma": self.config.sigma,
                "regularizer": self.regularizer.to_json_dict(),
            }
        )

    @staticmethod
    def from_json(text: str) -> "AdmmProblem":
        d = json.loads(text)
        system = ConstraintSystem(d["A"], d["B"], d["c"])
        reg = Regularizer.from_json_dict(d["regularizer"])
        cfg = AdmmConfig(beta=d["beta"], eta=d["eta"], sigma=d.get("sigma", 0.0))
        return AdmmProblem(system, reg, cfg)


def standardize(cs: ConstraintSystem, g: Regularizer = None) -> StandardForm:
    """Gaussian elimination bringing A to [I_m' | D].

    Row operations are applied consistently to B and c.  Rows whose A-part is
    eliminated to zero move into the absorbed constraints (B_hat, c_hat); a
    zero row with zero B-part but nonzero c raises :class:`DegenerateSystem`.
    Partial pivoting with threshold 1e-10 decides rank; columns of x are
    permuted when a pivot cannot be found in the leading position.
    """
    A = cs.A.copy()
    B = cs.B.copy()
    c = cs.c.copy()
    m, n = A.shape

    perm = list(range(n))
    row = 0
    pivot_cols: list[int] = []
    for col in range(n):
        if row >= m:
            break
        sub = np.abs(A[row:, col])
        best = int(np.argmax(sub))
        if sub[best] <= _PIVOT_THRESHOLD:
            continue  # no pivot in this column; it joins D
        pr = row + best
        if pr != row:
            A[[row, pr]] = A[[pr, row]]
            B[[row, pr]] = B[[pr, row]]
            c[[row, pr]] = c[[pr, row]]
        scale = A[row, col]
        A[row] /= scale
        B[row] /= scale
        c[row] /= scale
        for r in range(m):
            if r != row and A[r, col] != 0.0:
                factor = A[r, col]
                A[r] -= factor * A[row]
                B[r] -= factor * B[row]
                c[r] -= factor * c[row]
        pivot_cols.append(col)
        row += 1

    rank = row
    # Classify the eliminated rows.
    absorbed_B = []
    absorbed_c = []
    for r in range(rank, m):
        if np.abs(A[r]).max(initial=0.0) > _PIVOT_THRESHOLD:
            raise AssertionError("elimination left a nonzero A row below rank")
        if np.abs(B[r]).max(initial=0.0) > _PIVOT_THRESHOLD:
            absorbed_B.append(B[r])
            absorbed_c.append(c[r])
        elif abs(c[r]) > _PIVOT_THRESHOLD:
            raise DegenerateSystem(
                f"row {r} reduced to 0 = {c[r]:.3e} with no y terms"
            )
        # else: trivially satisfied row, dropped

    # Reorder x columns so the pivot columns come first.
    non_pivot = [j for j in range(n) if j not in pivot_cols]
    order = pivot_cols + non_pivot
    A_std = A[:rank][:, order]
    # Clean exact identity in the leading block.
    A_std[:, :rank] = np.eye(rank)
    system = ConstraintSystem(A_std, B[:rank], c[:rank])
    B_hat = np.array(absorbed_B) if absorbed_B else np.zeros((0, cs.l))
    c_hat = np.array(absorbed_c) if absorbed_c else np.zeros(0)
    return StandardForm(
        system=system,
        B_hat=B_hat,
        c_hat=c_hat,
        x_permutation=np.array(order, dtype=int),
    )
