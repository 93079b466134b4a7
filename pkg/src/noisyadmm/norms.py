"""Customized norms on (x, lambda) pairs, the contraction factor, and the
admissible step-size interval for the strongly convex case.

The plain customized norm is ||x||^2 + (eta/beta) ||lambda - beta A x||^2;
one deterministic iteration is non-expansive in it for convex losses with
(1/eta)-Lipschitz gradients.  In the strongly convex case the x-block is
reweighted by

    kappa = (1 - 2 eta nu mu / (nu + mu)) + (1/eta) (2/(nu + mu) - eta)

and the iteration contracts by the factor L = max(R/P, S/Q) < 1 whenever eta
lies strictly inside the admissible interval.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .linalg import as_matrix, as_vector

__all__ = [
    "BadEta",
    "EmptyInterval",
    "EtaOutsideInterval",
    "CustomNormParams",
    "ScNormParams",
    "ContractionReport",
    "custom_norm_sq",
    "sc_norm_sq",
    "kappa_coefficient",
    "eta_interval",
    "eta_midpoint",
    "contraction_factor",
]

_MARGIN = 1e-12  # strictness margin for interval membership


class BadEta(Exception):
    """eta outside (0, 2/(nu+mu)), or the derived kappa is not positive."""


class EmptyInterval(Exception):
    """The admissible eta interval is empty for these parameters."""


class EtaOutsideInterval(Exception):
    """eta does not lie strictly inside the admissible interval."""


@dataclass(frozen=True)
class CustomNormParams:
    eta: float
    beta: float
    A: np.ndarray

    def __post_init__(self):
        if self.eta <= 0 or self.beta <= 0:
            raise ValueError("eta and beta must be strictly positive")
        object.__setattr__(self, "A", as_matrix(self.A))


@dataclass(frozen=True)
class ScNormParams:
    eta: float
    beta: float
    A: np.ndarray
    nu: float
    mu: float

    def __post_init__(self):
        if self.eta <= 0 or self.beta <= 0:
            raise ValueError("eta and beta must be strictly positive")
        if not (0 < self.mu <= self.nu):
            raise ValueError("need 0 < mu <= nu")
        object.__setattr__(self, "A", as_matrix(self.A))

    @property
    def kappa(self) -> float:
        return kappa_coefficient(self.eta, self.nu, self.mu)


def kappa_coefficient(eta: float, nu: float, mu: float) -> float:
    """(1 - 2 eta nu mu/(nu+mu)) + (1/eta)(2/(nu+mu) - eta); must be > 0 for
    the strongly convex norm to be a norm."""
    return (1.0 - 2.0 * eta * nu * mu / (nu + mu)) + (1.0 / eta) * (
        2.0 / (nu + mu) - eta
    )


def custom_norm_sq(x, lam, p: CustomNormParams) -> float:
    """||x||^2 + (eta/beta) ||lambda - beta A x||^2."""
    x = as_vector(x)
    lam = as_vector(lam)
    w = lam - p.beta * (p.A @ x)
    return float(x @ x + (p.eta / p.beta) * (w @ w))


def sc_norm_sq(x, lam, p: ScNormParams) -> float:
    """kappa ||x||^2 + (eta/beta) ||lambda - beta A x||^2.

    Raises :class:`BadEta` if eta is outside (0, 2/(nu+mu)) or kappa <= 0
    (e.g. nu = mu with eta = 1/nu gives kappa = 0 exactly).
    """
    if not (0 < p.eta < 2.0 / (p.nu + p.mu)):
        raise BadEta(f"eta={p.eta} outside (0, {2.0 / (p.nu + p.mu)})")
    k = p.kappa
    if k <= 0:
        raise BadEta(f"kappa={k} is not positive at eta={p.eta}")
    x = as_vector(x)
    lam = as_vector(lam)
    w = lam - p.beta * (p.A @ x)
    return float(k * (x @ x) + (p.eta / p.beta) * (w @ w))


def eta_interval(nu: float, mu: float, mu_g: float, beta: float,
                 op_ab: float) -> tuple[float, float]:
    """Admissible (eta_low, eta_high) for strict contraction.

    eta_low = max{ 4/(nu+mu+sqrt((nu+mu)^2+8 nu mu)),
                   2/(nu+mu) - 2 mu_g/(beta^2 ||A^T B||^2) },
    eta_high = 2/(nu+mu).  Raises :class:`EmptyInterval` when low >= high.
    """
    if not (0 < mu <= nu):
        raise ValueError("need 0 < mu <= nu")
    if mu_g <= 0 or beta <= 0 or op_ab <= 0:
        raise ValueError("need mu_g, beta, op_ab > 0")
    s = nu + mu
    low = max(
        4.0 / (s + math.sqrt(s * s + 8.0 * nu * mu)),
        2.0 / s - 2.0 * mu_g / (beta * beta * op_ab * op_ab),
    )
    high = 2.0 / s
    if low >= high:
        raise EmptyInterval(f"eta interval ({low}, {high}) is empty")
    return low, high


def eta_midpoint(nu: float, mu: float, mu_g: float, beta: float,
                 op_ab: float) -> float:
    low, high = eta_interval(nu, mu, mu_g, beta, op_ab)
    return 0.5 * (low + high)


@dataclass(frozen=True)
class ContractionReport:
    """The contraction certificate: P, Q, R, S, L = max(R/P, S/Q) in (0,1),
    the admissible interval, and the midpoint used by the experiments."""

    P: float
    Q: float
    R: float
    S: float
    factor: float
    eta: float
    eta_low: float
    eta_high: float
    eta_mid: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def contraction_factor(nu: float, mu: float, mu_g: float, beta: float,
                       op_ab: float, eta: float) -> ContractionReport:
    """P, Q, R, S and the factor L = max(R/P, S/Q) at a given eta.

    eta must lie strictly inside the admissible interval (margin 1e-12);
    otherwise :class:`EtaOutsideInterval` is raised.  Guarantees 0 < L < 1.
    """
    low, high = eta_interval(nu, mu, mu_g, beta, op_ab)
    if not (low + _MARGIN < eta < high - _MARGIN):
        raise EtaOutsideInterval(
            f"eta={eta} not strictly inside ({low}, {high})"
        )
    s = nu + mu
    slack = 2.0 / s - eta  # > 0 inside the interval
    R = (1.0 - 2.0 * eta * nu * mu / s) + slack / eta
    P = 1.0 - slack / eta
    S = eta / beta
    Q = eta / beta + (eta / 4.0) * slack
    factor = max(R / P, S / Q)
    if not (0.0 < factor < 1.0):
        # The interval derivation guarantees this; reaching here means the
        # parameters violated a precondition (e.g. kappa <= 0 from rounding).
        raise EtaOutsideInterval(
            f"contraction factor {factor} not in (0,1) at eta={eta}"
        )
    return ContractionReport(
        P=P, Q=Q, R=R, S=S, factor=factor, eta=eta,
        eta_low=low, eta_high=high, eta_mid=0.5 * (low + high),
    )
