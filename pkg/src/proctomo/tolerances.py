"""Central numerical tolerance settings shared by all modules."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    """Default tolerances for structural checks on matrices.

    hermiticity : max allowed ||A - A^dag||_inf when validating Hermitian inputs
    structural  : tolerance on trace / partial-trace / POVM-resolution identities
    eigenvalue_floor : eigenvalues above this (negative) value count as nonnegative
    rank_cut    : eigenvalues above this count towards the numerical rank
    """

    hermiticity: float = 1e-12
    structural: float = 1e-10
    eigenvalue_floor: float = -1e-10
    rank_cut: float = 1e-9


DEFAULT = Tolerances()
