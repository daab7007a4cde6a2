"""Jointly diagonal modal realization of the operator pair (A, B).

Both operators are represented by their eigenvalues on a shared basis, so
A^(1/2), B^(1/2) and A^(1/2)B^(1/2) act diagonally by sqrt(a_k), sqrt(b_k)
and sqrt(a_k b_k).  All constants in the decay envelopes are scalar, so the
modal case exercises every formula while keeping per-mode dynamics exactly
solvable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ModalOperatorPair:
    a_eigs: np.ndarray
    b_eigs: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a_eigs, dtype=float))
        b = np.atleast_1d(np.asarray(self.b_eigs, dtype=float))
        if a.shape != b.shape or a.size < 1:
            raise ValueError("eigenvalue arrays must be nonempty with equal length")
        if np.any(a <= 0.0) or np.any(b <= 0.0):
            raise ValueError("all eigenvalues must be positive")
        object.__setattr__(self, "a_eigs", a)
        object.__setattr__(self, "b_eigs", b)

    @property
    def n_modes(self) -> int:
        return int(self.a_eigs.size)

    @property
    def a0(self) -> float:
        """Tightest constant with ||B^(1/2)v||^2 <= a0 ||A^(1/2)v||^2."""
        return float(np.max(self.b_eigs / self.a_eigs))

    @property
    def a1(self) -> float:
        """Tightest constant with a1 ||v||^2 <= ||B^(1/2)v||^2."""
        return float(np.min(self.b_eigs))


@dataclass(frozen=True)
class CaseConstants:
    """Tightest modal constants for the two operator-domination conditions.

    In finite dimension both conditions always hold; note that with B
    bounded and A unbounded (e.g. B = identity) the first condition fails in
    the infinite-dimensional limit, so its constant grows with the mode
    count there.
    """

    a2_case1: float   # ||A^(1/2)v||^2 <= a2 ||B^(1/2)v||^2
    a2_case2: float   # ||A^(1/2)v||^2 <= a2 ||A^(1/2)B^(1/2)v||^2
    finite_dimensional: bool = True


def coercivity_constants(pair: ModalOperatorPair) -> tuple[float, float]:
    """(a0, a1) for the two-sided norm comparison on the modal space."""
    return pair.a0, pair.a1


def case_constants(pair: ModalOperatorPair) -> CaseConstants:
    a2_case1 = float(np.max(pair.a_eigs / pair.b_eigs))
    a2_case2 = float(np.max(1.0 / pair.b_eigs))
    return CaseConstants(a2_case1=a2_case1, a2_case2=a2_case2)


def laplacian_1d(n_modes: int, length: float = 1.0) -> np.ndarray:
    """Dirichlet Laplacian eigenvalues (k pi / L)^2, k = 1..n_modes."""
    if n_modes < 1:
        raise ValueError("need at least one mode")
    if length <= 0.0:
        raise ValueError("length must be positive")
    k = np.arange(1, n_modes + 1)
    return (k * np.pi / length) ** 2


def modal_pair(a_eigs, b_choice: str = "same", b_eigs=None) -> ModalOperatorPair:
    """Pair A from explicit eigenvalues with B = A, B = I, or explicit B."""
    a = np.atleast_1d(np.asarray(a_eigs, dtype=float))
    if b_choice == "same":
        b = a.copy()
    elif b_choice == "identity":
        b = np.ones_like(a)
    elif b_choice == "explicit":
        if b_eigs is None:
            raise ValueError("explicit b_choice needs b_eigs")
        b = np.atleast_1d(np.asarray(b_eigs, dtype=float))
    else:
        raise ValueError(f"unknown b_choice {b_choice!r}")
    return ModalOperatorPair(a_eigs=a, b_eigs=b)
