"""Two-qubit pure states in Schmidt form and the LOCC operations on them.

A pair is ``sqrt(lambda1)|00> + sqrt(lambda2)|11>`` with
``lambda1 >= lambda2`` and ``lambda1 + lambda2 = 1``.  Only the smaller
coefficient is free, so most functions here work from ``lambda2``.

Bell outcomes follow the naming used throughout the package::

    PSI± = (|00> ± |11>) / sqrt(2)
    PHI± = (|01> ± |10>) / sqrt(2)
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import DistillationNotReached, DomainError

SUM_TOL = 1e-12


class RandomStream(Protocol):
    def random(self) -> float: ...


@dataclass(frozen=True)
class PurePair:
    lambda1: float
    lambda2: float

    def __post_init__(self):
        if abs(self.lambda1 + self.lambda2 - 1.0) > SUM_TOL:
            raise DomainError(
                f"Schmidt coefficients must sum to 1, got {self.lambda1!r} + {self.lambda2!r}"
            )
        if not (self.lambda1 >= self.lambda2 >= 0.0):
            raise DomainError(
                f"need lambda1 >= lambda2 >= 0, got ({self.lambda1!r}, {self.lambda2!r})"
            )

    @classmethod
    def from_weights(cls, x: float, y: float) -> PurePair:
        """Normalize two non-negative unnormalized Schmidt weights, in any order."""
        if x == y:
            return PERFECT
        small = min(x, y)
        lam2 = small / (x + y)
        return cls(1.0 - lam2, lam2)

    @property
    def is_perfect(self) -> bool:
        return self.lambda2 == 0.5

    def __iter__(self):
        yield self.lambda1
        yield self.lambda2


PERFECT = PurePair(0.5, 0.5)


def make_pair(lambda2: float) -> PurePair:
    if not (0.0 <= lambda2 <= 0.5):
        raise DomainError(f"lambda2 must lie in [0, 1/2], got {lambda2!r}")
    return PurePair(1.0 - lambda2, float(lambda2))


def scp(pair: PurePair) -> float:
    """Singlet conversion probability ``2 * lambda2``."""
    return 2.0 * pair.lambda2


def concurrence(pair: PurePair) -> float:
    return 2.0 * math.sqrt(pair.lambda1 * pair.lambda2)


def alpha(pair: PurePair) -> float:
    """Factor by which one equal-pair swap scales the concurrence."""
    return math.sqrt(pair.lambda1 * pair.lambda2)


def swap_concurrence(pair: PurePair) -> float:
    """Concurrence ``2 lambda1 lambda2`` assigned to the link after swapping two copies of ``pair``.

    This is the probability-weighted concurrence of the PSI branches only;
    it equals ``alpha(pair) * concurrence(pair)``.  The concurrence of the
    PSI branch state itself is ``concurrence(branch.state)``.
    """
    return 2.0 * pair.lambda1 * pair.lambda2


def werner_fidelity(pair: PurePair) -> float:
    """Overlap of the pair with PSI+, ``(1 + C) / 2``."""
    return (1.0 + concurrence(pair)) / 2.0


@dataclass(frozen=True)
class ConversionOperators:
    m1: np.ndarray
    m2: np.ndarray


def conversion_operators(pair: PurePair) -> ConversionOperators:
    """Local filter ``{M1, M2}`` that turns ``pair`` into PSI+ on outcome M1.

    M1 succeeds with probability ``2 * lambda2`` when applied to the first
    qubit.
    """
    ratio = pair.lambda2 / pair.lambda1
    m1 = np.diag([math.sqrt(ratio), 1.0])
    m2 = np.diag([math.sqrt(1.0 - ratio), 0.0])
    return ConversionOperators(m1, m2)


def state_vector(pair: PurePair) -> np.ndarray:
    """Amplitudes over |00>, |01>, |10>, |11>."""
    return np.array([math.sqrt(pair.lambda1), 0.0, 0.0, math.sqrt(pair.lambda2)])


def attempt_conversion(pair: PurePair, rng: RandomStream) -> PurePair | None:
    """Filter the pair once; returns the perfect pair or ``None`` if it was lost."""
    if rng.random() < scp(pair):
        return PERFECT
    return None


class BellOutcome(enum.Enum):
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"

    @property
    def is_psi(self) -> bool:
        return self in (BellOutcome.PSI_PLUS, BellOutcome.PSI_MINUS)


@dataclass(frozen=True)
class SwapBranch:
    outcome: BellOutcome
    probability: float
    state: PurePair


@dataclass(frozen=True)
class SwapDistribution:
    branches: tuple[SwapBranch, ...]

    def __iter__(self):
        return iter(self.branches)


def _swap_weights(a: PurePair, b: PurePair):
    # PSI projection keeps |00>,|11> (weights a1 b1, a2 b2); PHI keeps |01>,|10>.
    psi = a.lambda1 * b.lambda1 + a.lambda2 * b.lambda2
    x = a.lambda1 * b.lambda2
    y = a.lambda2 * b.lambda1
    return psi, x, y


def swap(a: PurePair, b: PurePair) -> SwapDistribution:
    """Bell measurement on the inner qubits of two adjacent links.

    The PHI branches are maximally entangled only when ``a == b``; in general
    they carry Schmidt weights ``{a1 b2, a2 b1}``.
    """
    psi, x, y = _swap_weights(a, b)
    phi = x + y
    psi_state = PurePair.from_weights(a.lambda1 * b.lambda1, a.lambda2 * b.lambda2)
    phi_state = PurePair.from_weights(x, y)
    return SwapDistribution((
        SwapBranch(BellOutcome.PSI_PLUS, psi / 2.0, psi_state),
        SwapBranch(BellOutcome.PSI_MINUS, psi / 2.0, psi_state),
        SwapBranch(BellOutcome.PHI_PLUS, phi / 2.0, phi_state),
        SwapBranch(BellOutcome.PHI_MINUS, phi / 2.0, phi_state),
    ))


def sample_swap(a: PurePair, b: PurePair, u: float) -> tuple[BellOutcome, PurePair]:
    """Pick the swap branch selected by a uniform variate ``u`` in [0, 1).

    Branches are laid out on [0, 1) in the order PSI+, PSI-, PHI+, PHI-.
    """
    psi, x, y = _swap_weights(a, b)
    half = psi / 2.0
    if u < psi:
        outcome = BellOutcome.PSI_PLUS if u < half else BellOutcome.PSI_MINUS
        return outcome, PurePair.from_weights(a.lambda1 * b.lambda1, a.lambda2 * b.lambda2)
    outcome = BellOutcome.PHI_PLUS if u < psi + (x + y) / 2.0 else BellOutcome.PHI_MINUS
    return outcome, PurePair.from_weights(x, y)


def avg_scp_after_swap(d: SwapDistribution) -> float:
    return sum(br.probability * scp(br.state) for br in d)


def distill_step(f):
    """One round of the recurrence-style distillation map on Werner fidelity.

    Works on ``float`` and on ``fractions.Fraction`` (exact arithmetic).
    """
    if not (0.25 <= f <= 1):
        raise DomainError(f"Werner fidelity must lie in [1/4, 1], got {f!r}")
    g = 1 - f
    num = f * f + g * g / 9
    den = f * f + 2 * f * g / 3 + 5 * g * g / 9
    return num / den


def distill_trace(f0, target, max_iter: int = 64) -> list:
    """Fidelities ``F0, F1, ...`` up to the first one strictly above ``target``.

    Raises DistillationNotReached after ``max_iter`` steps.
    """
    if not f0 > 0.5:
        raise DomainError(f"distillation needs F0 > 1/2, got {f0!r}")
    if target > 1:
        raise DomainError(f"target fidelity must be <= 1, got {target!r}")
    trace = [f0]
    while not trace[-1] > target:
        if len(trace) - 1 >= max_iter:
            raise DistillationNotReached(trace[-1], len(trace) - 1, target)
        trace.append(distill_step(trace[-1]))
    return trace


def distill_until(f0, target, max_iter: int = 64) -> int:
    return len(distill_trace(f0, target, max_iter)) - 1
