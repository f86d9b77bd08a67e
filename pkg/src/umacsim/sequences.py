"""Preamble and pilot dictionaries: Zadoff-Chu families for standard-sized
sets, normalized complex Gaussian columns for enlarged sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

ENERGY_RTOL = 1e-9


class DictionaryKind(str, Enum):
    ZADOFF_CHU = "zadoff_chu"
    GAUSSIAN = "gaussian"


class SequenceError(ValueError):
    pass


@dataclass(frozen=True)
class Dictionary:
    """Immutable set of equal-length columns with identical energy.

    `columns` has shape (length, size); column j is `columns[:, j]`.
    """

    columns: np.ndarray
    kind: DictionaryKind
    per_column_energy: float

    def __post_init__(self):
        self.columns.setflags(write=False)

    @property
    def length(self) -> int:
        return self.columns.shape[0]

    @property
    def size(self) -> int:
        return self.columns.shape[1]

    def column(self, index: int) -> np.ndarray:
        return self.columns[:, index]


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def zadoff_chu(root: int, length: int) -> np.ndarray:
    """Unit-modulus Zadoff-Chu sequence x[m] = exp(-j pi root m (m+1) / length).

    The length must be prime (139 or 839 in the standard short/long formats);
    the perfect-autocorrelation identities used in tests require primality.
    """
    if not _is_prime(length):
        raise SequenceError(f"length must be prime, got {length}")
    if not 1 <= root <= length - 1:
        raise SequenceError(f"root must be in [1, {length - 1}], got {root}")
    if math.gcd(root, length) != 1:
        raise SequenceError(f"root {root} not coprime with length {length}")
    m = np.arange(length)
    return np.exp(-1j * np.pi * root * m * (m + 1) / length)


def _gaussian_columns(
    size: int, length: int, target_energy: float, rng: np.random.Generator
) -> np.ndarray:
    cols = rng.standard_normal((length, size)) + 1j * rng.standard_normal((length, size))
    norms = np.linalg.norm(cols, axis=0)
    return cols * (math.sqrt(target_energy) / norms)


def build_preamble_dictionary(
    size: int,
    base_length: int,
    repetitions: int = 1,
    power_scale: float = 1.0,
    kind: DictionaryKind = DictionaryKind.ZADOFF_CHU,
    rng: np.random.Generator | None = None,
    sample_power: float = 1.0,
) -> Dictionary:
    """Preamble dictionary with columns of length base_length * repetitions.

    Zadoff-Chu columns enumerate (cyclic shift, root) pairs shift-major
    (index -> shift = index // (N-1), root = 1 + index % (N-1)), giving a
    deterministic index-to-sequence map; each base sequence is repeated
    `repetitions` times.  Gaussian columns are i.i.d. CN, normalized.
    Column energy is base_length * repetitions * power_scale * sample_power.
    """
    if size < 1:
        raise SequenceError(f"size must be >= 1, got {size}")
    if repetitions < 1:
        raise SequenceError(f"repetitions must be >= 1, got {repetitions}")
    length = base_length * repetitions
    target = length * power_scale * sample_power
    if kind is DictionaryKind.ZADOFF_CHU:
        max_size = (base_length - 1) * base_length   # roots x cyclic shifts
        if size > max_size:
            raise SequenceError(
                f"{size} sequences exceed the {max_size} root/shift combinations "
                f"of length {base_length}; use the Gaussian kind for enlarged sets"
            )
        cols = np.empty((length, size), dtype=complex)
        scale = math.sqrt(target / length)
        for idx in range(size):
            shift = idx // (base_length - 1)
            root = 1 + idx % (base_length - 1)
            base = np.roll(zadoff_chu(root, base_length), shift)
            cols[:, idx] = np.tile(base, repetitions) * scale
    else:
        if rng is None:
            raise SequenceError("Gaussian dictionaries need an rng")
        cols = _gaussian_columns(size, length, target, rng)
    return Dictionary(columns=cols, kind=kind, per_column_energy=target)


def build_pilot_dictionary(
    size: int,
    length: int,
    rng: np.random.Generator,
    sample_power: float = 1.0,
) -> Dictionary:
    """Gaussian pilot dictionary, per-column energy = length * sample_power."""
    if size < 1:
        raise SequenceError(f"size must be >= 1, got {size}")
    if length < 1:
        raise SequenceError(f"length must be >= 1, got {length}")
    target = length * sample_power
    cols = _gaussian_columns(size, length, target, rng)
    return Dictionary(columns=cols, kind=DictionaryKind.GAUSSIAN, per_column_energy=target)
