"""Iteration core: the deterministic update, its noisy variant, the
two-iteration Markov operator K, the split mechanisms M1/M2, and the
oracle-gradient variant.

Update order of the main entry point is y, then the dual variable, then x:

    y_t      = G(lambda_t - beta A x_t)
    l_{t+1}  = lambda_t - beta (A x_t + B y_t - c)
    x_{t+1}  = (I + eta beta A^T A)^{-1} {x_t - eta [grad_f(x_t)
               + A^T (beta (B y_t - c) - l_{t+1})]}

The oracle variant (:func:`oracle_admm_iteration`) updates x, then y, then
the dual variable, and carries y in its state; the two orderings are kept as
distinct entry points on purpose.

All iteration functions are pure given (state, tape).  Distinct chains may
run concurrently with distinct tapes; a single tape must not be shared by
concurrent consumers.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .linalg import as_vector
from .problem import AdmmProblem, GradientOracle

__all__ = [
    "AdmmState",
    "OracleState",
    "NoiseTape",
    "IterationTranscript",
    "NotStandardForm",
    "NotStandardFormWarning",
    "admm_iteration",
    "noisy_iteration",
    "markov_K",
    "mechanism_m1",
    "mechanism_m2",
    "oracle_admm_iteration",
]


class NotStandardForm(Exception):
    """The mechanism requires A = [I_m | D]."""


class NotStandardFormWarning(UserWarning):
    """markov_K was invoked on a non-standard-form system; the computation is
    allowed for testing but the privacy claims do not apply."""


@dataclass(frozen=True)
class AdmmState:
    """The (x, lambda) pair passed between iterations; y is derived."""

    x: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", as_vector(self.x))
        object.__setattr__(self, "lam", as_vector(self.lam))


@dataclass(frozen=True)
class OracleState:
    """State of the oracle-gradient variant, which carries y explicitly."""

    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray


class NoiseTape:
    """Reproducible sequence of standard-normal vectors.

    Each tape owns one substream keyed by (master seed, *stream ids) through
    numpy's SeedSequence; Gaussians come from Box-Muller applied to the
    substream's uniforms, drawn sequentially.  Every draw is recorded;
    ``replay()`` returns a fresh tape that reproduces the same values.  A
    tape may also be built from explicit vectors (``NoiseTape.fixed``) for
    coupling tests.
    """

    def __init__(self, master_seed: int, stream: Tuple[int, ...] = ()):
        self.master_seed = int(master_seed)
        self.stream = tuple(int(s) for s in stream)
        self.draws: List[np.ndarray] = []
        self._fixed: Optional[List[np.ndarray]] = None
        self._gen = np.random.Generator(
            np.random.PCG64(
                np.random.SeedSequence((self.master_seed, *self.stream))
            )
        )

    @staticmethod
    def fixed(vectors: Sequence[np.ndarray]) -> "NoiseTape":
        tape = NoiseTape(0)
        tape._fixed = [as_vector(v) for v in vectors]
        return tape

    @property
    def counter(self) -> int:
        return len(self.draws)

    def draw(self, size: int) -> np.ndarray:
        index = len(self.draws)
        if self._fixed is not None:
            if index >= len(self._fixed):
                raise IndexError("fixed tape exhausted")
            value = self._fixed[index]
            if value.shape[0] != size:
                raise ValueError(
                    f"fixed draw {index} has size {value.shape[0]}, need {size}"
                )
        else:
            value = self._gaussian(size)
        self.draws.append(value)
        return value

    def _gaussian(self, size: int) -> np.ndarray:
        pairs = (size + 1) // 2
        u1 = self._gen.random(pairs)
        u2 = self._gen.random(pairs)
        radius = np.sqrt(-2.0 * np.log1p(-u1))  # 1-u1 in (0,1], log never -inf
        angle = 2.0 * np.pi * u2
        z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
        return z[:size]

    def replay(self) -> "NoiseTape":
        if self._fixed is not None:
            return NoiseTape.fixed(self._fixed)
        return NoiseTape(self.master_seed, self.stream)


@dataclass
class IterationTranscript:
    """Per-iteration (x, y, lambda, noise) records, exportable as CSV."""

    records: List[dict] = field(default_factory=list)

    def append(self, x, y, lam, noise):
        self.records.append(
            {
                "x": np.array(x, dtype=float),
                "y": np.array(y, dtype=float),
                "lam": np.array(lam, dtype=float),
                "noise": np.array(noise, dtype=float),
            }
        )

    def to_csv(self) -> str:
        if not self.records:
            return ""
        n = self.records[0]["x"].shape[0]
        m = self.records[0]["lam"].shape[0]
        out = io.StringIO()
        header = (
            ["iter"]
            + [f"x[{i}]" for i in range(n)]
            + [f"lambda[{i}]" for i in range(m)]
            + [f"noise[{i}]" for i in range(n)]
        )
        out.write(",".join(header) + "\n")
        for t, rec in enumerate(self.records):
            row = [str(t)]
            row += [repr(v) for v in rec["x"]]
            row += [repr(v) for v in rec["lam"]]
            row += [repr(v) for v in rec["noise"]]
            out.write(",".join(row) + "\n")
        return out.getvalue()


def admm_iteration(
    state: AdmmState,
    f: GradientOracle,
    problem: AdmmProblem,
    transcript: Optional[IterationTranscript] = None,
) -> AdmmState:
    """One deterministic iteration (y, dual, x order)."""
    A, B, c = problem.system.A, problem.system.B, problem.system.c
    beta, eta = problem.config.beta, problem.config.eta
    x_t, lam_t = state.x, state.lam

    y_t = problem.argmin_g(lam_t - beta * (A @ x_t))
    lam_next = lam_t - beta * (A @ x_t + B @ y_t - c)
    rhs = x_t - eta * (f.gradient(x_t) + A.T @ (beta * (B @ y_t - c) - lam_next))
    x_next = problem.solve_x_system(rhs)
    if transcript is not None:
        transcript.append(x_next, y_t, lam_next, np.zeros_like(x_next))
    return AdmmState(x_next, lam_next)


def noisy_iteration(
    state: AdmmState,
    f: GradientOracle,
    problem: AdmmProblem,
    sigma: float,
    tape: NoiseTape,
    transcript: Optional[IterationTranscript] = None,
) -> AdmmState:
    """Deterministic iteration, then N ~ Normal(0, sigma^2 I_n) added to x
    only; the dual variable is released without noise."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    clean = admm_iteration(state, f, problem)
    noise = sigma * tape.draw(problem.system.n)
    x_tilde = clean.x + noise
    if transcript is not None:
        # y is re-derivable; store the pre-update y for audit like the clean path
        transcript.append(x_tilde, np.zeros(problem.system.l), clean.lam, noise)
    return AdmmState(x_tilde, clean.lam)


def _check_standard(problem: AdmmProblem, *, hard: bool) -> None:
    if problem.system.is_standard_form():
        return
    if hard:
        raise NotStandardForm("A must have the form [I_m | D]")
    warnings.warn(
        "A lacks the [I_m | D] identity prefix; privacy claims do not apply",
        NotStandardFormWarning,
        stacklevel=3,
    )


def markov_K(
    state: AdmmState,
    f1: GradientOracle,
    f2: GradientOracle,
    problem: AdmmProblem,
    sigma: float,
    tape: NoiseTape,
) -> AdmmState:
    """Two noisy iterations bundled into one Markov operator (two tape draws
    of size n).  Warns if the system is not in standard form."""
    _check_standard(problem, hard=False)
    mid = noisy_iteration(state, f1, problem, sigma, tape)
    return noisy_iteration(mid, f2, problem, sigma, tape)


def mechanism_m1(
    state: AdmmState,
    f1: GradientOracle,
    problem: AdmmProblem,
    sigma: float,
    z_tail: np.ndarray,
    tape: NoiseTape,
) -> np.ndarray:
    """First half of the split operator: releases the masked dual combination.

    Runs one deterministic iteration, forms w_{t+1} = l_{t+1} - beta A x_{t+1},
    draws U ~ Normal(0, sigma^2 I_m), and returns
    w~ = w_{t+1} - beta D z - beta U, where z is the fixed tail (last n-m
    coordinates) of the x-noise.
    """
    _check_standard(problem, hard=True)
    m, n = problem.system.m, problem.system.n
    z_tail = as_vector(z_tail)
    if z_tail.shape[0] != n - m:
        raise ValueError(f"z tail must have length n-m = {n - m}")
    nxt = admm_iteration(state, f1, problem)
    w = nxt.lam - problem.config.beta * (problem.system.A @ nxt.x)
    D = problem.system.A[:, m:]
    U = sigma * tape.draw(m)
    return w - problem.config.beta * (D @ z_tail) - problem.config.beta * U


def mechanism_m2(
    state: AdmmState,
    f1: GradientOracle,
    f2: GradientOracle,
    problem: AdmmProblem,
    sigma: float,
    z_tail: np.ndarray,
    w_tilde: np.ndarray,
    tape: NoiseTape,
    transcript: Optional[IterationTranscript] = None,
) -> AdmmState:
    """Second half: reconstructs the head noise from w~ and finishes the pair.

    U = (1/beta)(w_{t+1} - w~) - D z; the masked iterate is
    x~_{t+1} = x_{t+1} + (U, z); then y_{t+1} = G(w~),
    l_{t+2} = w~ - beta (B y_{t+1} - c), the x-update runs with f2, and a
    fresh N_{t+2} ~ Normal(0, sigma^2 I_n) masks the result.  With tapes
    coupled to M1's U and markov_K's draws this reproduces K exactly.
    """
    _check_standard(problem, hard=True)
    A, B, c = problem.system.A, problem.system.B, problem.system.c
    beta, eta = problem.config.beta, problem.config.eta
    m, n = problem.system.m, problem.system.n
    z_tail = as_vector(z_tail)
    w_tilde = as_vector(w_tilde)

    nxt = admm_iteration(state, f1, problem)
    w = nxt.lam - beta * (A @ nxt.x)
    D = A[:, m:]
    U = (w - w_tilde) / beta - D @ z_tail
    x_masked = nxt.x + np.concatenate([U, z_tail])

    y_next = problem.argmin_g(w_tilde)
    lam_next = w_tilde - beta * (B @ y_next - c)
    rhs = x_masked - eta * (
        f2.gradient(x_masked) + A.T @ (beta * (B @ y_next - c) - lam_next)
    )
    x_next = problem.solve_x_system(rhs)
    noise = sigma * tape.draw(n)
    x_out = x_next + noise
    if transcript is not None:
        transcript.append(x_out, y_next, lam_next, noise)
    return AdmmState(x_out, lam_next)


def oracle_admm_iteration(
    state: OracleState,
    f: GradientOracle,
    problem: AdmmProblem,
    rho: float,
    tape: NoiseTape,
) -> OracleState:
    """One step of the oracle-gradient variant (x, then y, then dual).

    The oracle returns g_t = grad_f(x_t) + (I + eta beta A^T A) z_t with
    z_t ~ Normal(0, rho^2 I_n); because the x-update applies the inverse of
    the same matrix, this is the clean update plus Normal(0, eta^2 rho^2 I_n)
    noise (linked by N = -eta z_t).
    """
    if rho < 0:
        raise ValueError("rho must be >= 0")
    A, B, c = problem.system.A, problem.system.B, problem.system.c
    beta, eta = problem.config.beta, problem.config.eta
    x_t, y_t, lam_t = as_vector(state.x), as_vector(state.y), as_vector(state.lam)

    z = rho * tape.draw(problem.system.n)
    g_t = f.gradient(x_t) + (z + eta * beta * (A.T @ (A @ z)))
    rhs = x_t - eta * (g_t + A.T @ (beta * (B @ y_t - c) - lam_t))
    x_next = problem.solve_x_system(rhs)
    y_next = problem.argmin_g(lam_t - beta * (A @ x_next))
    lam_next = lam_t - beta * (A @ x_next + B @ y_next - c)
    return OracleState(x_next, y_next, lam_next)
