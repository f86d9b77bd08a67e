"""Sparse preamble detection (OMP), energy detection, LS channel estimation,
and the windowed subtraction primitive used by interference cancellation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import energy
from .sequences import Dictionary

# rcond for the least-squares re-projection; guards near-degenerate column sets.
LS_PIVOT_TOL = 1e-12


class DetectionError(ValueError):
    pass


@dataclass
class DetectionResult:
    indices: list[int]                 # in selection order, no repeats
    coefficients: np.ndarray           # LS amplitude per selected index
    residual_energy: float
    residual_history: list[float] = field(default_factory=list)


def _columns(dictionary) -> np.ndarray:
    if isinstance(dictionary, Dictionary):
        return dictionary.columns
    return np.asarray(dictionary)


def omp_detect(
    y: np.ndarray,
    dictionary,
    max_iters: int,
    residual_threshold: float = 0.0,
) -> DetectionResult:
    """Orthogonal matching pursuit on `y` against the dictionary columns.

    Greedy loop: pick the unselected column with the largest |<a_j, r>|,
    re-solve least squares on the selected set, update the residual.  Stops
    at `max_iters` selections or when the residual energy drops to
    `residual_threshold * energy(y)`.
    """
    a = _columns(dictionary)
    if a.ndim != 2:
        raise DetectionError("dictionary must be a 2-D column matrix")
    if len(y) != a.shape[0]:
        raise DetectionError(f"signal length {len(y)} != column length {a.shape[0]}")
    e_y = energy(y)
    stop_energy = residual_threshold * e_y
    max_iters = min(max_iters, a.shape[1])

    selected: list[int] = []
    residual = y.astype(complex).copy()
    coef = np.zeros(0, dtype=complex)
    res_energy = e_y
    history = [res_energy]
    for _ in range(max_iters):
        if res_energy <= stop_energy:
            break
        corr = np.abs(a.conj().T @ residual)
        corr[selected] = -1.0
        j = int(np.argmax(corr))
        selected.append(j)
        sub = a[:, selected]
        coef, *_ = np.linalg.lstsq(sub, y, rcond=LS_PIVOT_TOL)
        residual = y - sub @ coef
        new_energy = energy(residual)
        # LS projection cannot increase the residual; clamp float jitter.
        res_energy = min(res_energy, new_energy)
        history.append(res_energy)
    return DetectionResult(
        indices=selected,
        coefficients=np.asarray(coef, dtype=complex),
        residual_energy=res_energy,
        residual_history=history,
    )


def energy_detect(y_segment: np.ndarray, threshold_factor: float, noise_power: float) -> bool:
    """True iff the per-sample energy exceeds threshold_factor * noise_power."""
    if len(y_segment) == 0:
        raise DetectionError("cannot energy-detect an empty segment")
    return energy(y_segment) / len(y_segment) > threshold_factor * noise_power


def ls_channel_estimate(y_segment: np.ndarray, pilot: np.ndarray) -> complex:
    """Scalar least-squares gain estimate h_hat = <p, y> / ||p||^2."""
    if len(y_segment) != len(pilot):
        raise DetectionError(
            f"segment length {len(y_segment)} != pilot length {len(pilot)}"
        )
    e_p = energy(pilot)
    if e_p == 0.0:
        raise DetectionError("pilot has zero energy")
    return complex(np.vdot(pilot, y_segment) / e_p)


def subtract(y: np.ndarray, contribution: np.ndarray, offset: int = 0) -> np.ndarray:
    """Return y with `contribution` subtracted on [offset, offset + len)."""
    if offset < 0 or offset + len(contribution) > len(y):
        raise DetectionError(
            f"contribution of length {len(contribution)} at offset {offset} "
            f"does not fit in signal of length {len(y)}"
        )
    out = y.copy()
    out[offset : offset + len(contribution)] -= contribution
    return out
