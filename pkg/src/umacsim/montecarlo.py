"""PUPE estimation with Wilson confidence intervals and the minimum-SNR
bisection search that produces load-versus-SNR operating curves.

Determinism: every trial owns an rng seeded by
``SeedSequence(entropy=root_seed, spawn_key=(ka, probe, trial))`` where
`probe` counts SNR evaluations inside a search, so results are independent
of execution order and of the worker count (``UMAC_BENCH_THREADS``).
All aggregation sums integer counters.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelModel, complex_noise
from .codec import CodecModel, SlottedAlohaConfig, decode, encode
from .protocols import (
    ReceiverMode,
    TransmissionRecord,
    TwoStepConfig,
    encode_user,
    slotted_aloha_receive,
    twostep_receive,
)

Z_95 = 1.959963984540054


class MonteCarloError(ValueError):
    pass


@dataclass(frozen=True)
class PupeEstimate:
    pupe: float
    ci_low: float
    ci_high: float
    trials: int
    seed: int
    failures: int = 0          # messages missing from the decoded set
    total: int = 0             # trials * ka
    clashes: int = 0           # users that drew an already-drawn message

    def __post_init__(self):
        if not 0.0 <= self.ci_low <= self.pupe <= self.ci_high <= 1.0:
            raise MonteCarloError(
                f"interval ordering violated: {self.ci_low}, {self.pupe}, {self.ci_high}"
            )

    @property
    def std_error(self) -> float:
        if self.total == 0:
            return 0.0
        p = self.pupe
        return math.sqrt(max(p * (1.0 - p), 1.0 / self.total) / self.total)


@dataclass(frozen=True)
class PupeCurvePoint:
    scenario: str
    channel: str
    ka: int
    min_snr_db: float | None       # None <=> not found below snr_hi
    pupe: float
    ci_low: float
    ci_high: float
    trials: int
    seed: int
    notes: str = ""


def wilson_interval(failures: int, total: int, z: float = Z_95) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if total < 1:
        raise MonteCarloError("total must be >= 1")
    if not 0 <= failures <= total:
        raise MonteCarloError(f"failures {failures} outside [0, {total}]")
    p = failures / total
    denom = 1.0 + z * z / total
    center = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1.0 - p) / total + z * z / (4 * total * total)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def draw_message(rng: np.random.Generator, bits: int) -> int:
    """Uniform integer in [0, 2^bits), valid beyond 64-bit payloads."""
    value = 0
    for _ in range((bits + 31) // 32):
        value = (value << 32) | int(rng.integers(0, 1 << 32))
    return value & ((1 << bits) - 1)


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class TwoStepExperiment:
    """Two-step message-A trial (covers SB-IDMA through the config's rho)."""

    config: TwoStepConfig
    receiver: ReceiverMode = ReceiverMode.TIN
    noise_power: float = 1.0

    def run_trial(self, ka: int, snr_db: float, rng: np.random.Generator) -> tuple[int, int]:
        cfg = self.config
        power = self.noise_power * 10.0 ** (snr_db / 10.0)
        fading = cfg.channel_model is ChannelModel.RAYLEIGH
        users = []
        for _ in range(ka):
            msg = draw_message(rng, cfg.codec.payload_bits)
            if fading:
                gain = complex(
                    (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2.0)
                )
            else:
                gain = 1.0 + 0.0j
            users.append(encode_user(cfg, msg, rng, power=power, gain=gain))
        record = TransmissionRecord(config=cfg, power=power, users=users)

        y = complex_noise(cfg.frame_len, self.noise_power, rng)
        pre_len = cfg.preamble_region_len
        for u in users:
            y[:pre_len] += u.gain * u.preamble_signal
            for occ in u.occasions:
                off = cfg.occasion_offset(occ)
                y[off : off + len(u.copy_signal)] += u.gain * u.copy_signal

        outcome = twostep_receive(y, cfg, self.receiver, record, self.noise_power)
        messages = [u.message for u in users]
        failed = sum(m not in outcome.decoded_messages for m in messages)
        clashes = ka - len(set(messages))
        return failed, clashes


@dataclass(frozen=True)
class SlottedAlohaExperiment:
    config: SlottedAlohaConfig
    receiver: ReceiverMode = ReceiverMode.TIN
    noise_power: float = 1.0

    def run_trial(self, ka: int, snr_db: float, rng: np.random.Generator) -> tuple[int, int]:
        cfg = self.config
        power = self.noise_power * 10.0 ** (snr_db / 10.0)
        placements = []
        for _ in range(ka):
            msg = draw_message(rng, cfg.codec.payload_bits)
            slot = int(rng.integers(0, cfg.slots))
            placements.append((msg, slot))
        y = complex_noise(cfg.frame_len, self.noise_power, rng)
        for msg, slot in placements:
            y[slot * cfg.slot_len : (slot + 1) * cfg.slot_len] += encode(
                cfg.codec, msg, power=power
            )
        outcome = slotted_aloha_receive(
            y, cfg, self.receiver, placements, self.noise_power, power=power
        )
        messages = [m for m, _ in placements]
        failed = sum(m not in outcome.decoded_messages for m in messages)
        clashes = ka - len(set(messages))
        return failed, clashes


# ---------------------------------------------------------------------------
# estimation


def _trial_rng(seed: int, ka: int, probe: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(ka, probe, trial))
    )


def _trials_chunk(experiment, ka, snr_db, seed, probe, start, count):
    failed = 0
    clashes = 0
    for t in range(start, start + count):
        f, c = experiment.run_trial(ka, snr_db, _trial_rng(seed, ka, probe, t))
        failed += f
        clashes += c
    return failed, clashes


def _worker_count() -> int:
    raw = os.environ.get("UMAC_BENCH_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def estimate_pupe(
    experiment,
    ka: int,
    snr_db: float,
    trials: int,
    seed: int,
    probe: int = 0,
) -> PupeEstimate:
    """Monte-Carlo PUPE: per trial, ka users draw i.i.d. uniform messages and
    the contribution is the count of messages absent from the decoded set.
    A clashed message counts as decoded for every user that drew it."""
    if trials < 1:
        raise MonteCarloError(f"trials must be >= 1, got {trials}")
    if ka < 1:
        raise MonteCarloError(f"ka must be >= 1, got {ka}")
    workers = _worker_count()
    if workers == 1 or trials < 4 * workers:
        failed, clashes = _trials_chunk(experiment, ka, snr_db, seed, probe, 0, trials)
    else:
        chunk = -(-trials // workers)
        jobs = [
            (start, min(chunk, trials - start)) for start in range(0, trials, chunk)
        ]
        failed = 0
        clashes = 0
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_trials_chunk, experiment, ka, snr_db, seed, probe, s, c)
                for s, c in jobs
            ]
            for fut in futures:
                f, c = fut.result()
                failed += f
                clashes += c
    total = trials * ka
    lo, hi = wilson_interval(failed, total)
    return PupeEstimate(
        pupe=failed / total,
        ci_low=min(lo, failed / total),
        ci_high=max(hi, failed / total),
        trials=trials,
        seed=seed,
        failures=failed,
        total=total,
        clashes=clashes,
    )


# ---------------------------------------------------------------------------
# minimum-SNR search


@dataclass
class _ProbeCounter:
    value: int = 0

    def next(self) -> int:
        self.value += 1
        return self.value - 1


def min_snr_for_pupe(
    experiment,
    ka: int,
    target_eps: float,
    snr_lo: float,
    snr_hi: float,
    seed: int,
    tol_db: float = 0.1,
    trials_schedule: tuple[int, ...] = (200, 500, 1000),
    scenario: str = "scenario",
    channel: str = "awgn",
) -> PupeCurvePoint:
    """Bisection on SNR (dB) for the smallest SNR with PUPE <= target_eps.

    Assumes PUPE non-increasing in SNR; a detected violation (PUPE at snr_hi
    above PUPE at snr_lo by > 5 combined sigma) is flagged in `notes`, not
    hidden.  Early probes use coarse trial counts per `trials_schedule`; the
    feasibility decision at snr_hi uses the finest count.  Returns a point
    with min_snr_db None when even snr_hi misses the target.
    """
    if snr_lo >= snr_hi:
        raise MonteCarloError(f"need snr_lo < snr_hi, got {snr_lo} >= {snr_hi}")
    if not trials_schedule:
        raise MonteCarloError("trials_schedule must be non-empty")
    probes = _ProbeCounter()
    notes: list[str] = []

    def evaluate(snr_db: float, trials: int) -> PupeEstimate:
        return estimate_pupe(experiment, ka, snr_db, trials, seed, probe=probes.next())

    if target_eps >= 1.0:
        est = evaluate(snr_lo, trials_schedule[0])
        return PupeCurvePoint(
            scenario, channel, ka, snr_lo, est.pupe, est.ci_low, est.ci_high,
            est.trials, seed, notes="target >= 1; any snr qualifies",
        )

    est_lo = evaluate(snr_lo, trials_schedule[0])
    if est_lo.pupe <= target_eps:
        return PupeCurvePoint(
            scenario, channel, ka, snr_lo, est_lo.pupe, est_lo.ci_low, est_lo.ci_high,
            est_lo.trials, seed, notes="target already met at snr_lo",
        )
    est_hi = evaluate(snr_hi, trials_schedule[-1])
    combined_se = math.hypot(est_lo.std_error, est_hi.std_error)
    if est_hi.pupe > est_lo.pupe + 5.0 * combined_se:
        notes.append("warning: PUPE non-monotone in SNR (hi > lo by > 5 sigma)")
    if est_hi.pupe > target_eps:
        notes.append(f"not found <= {snr_hi:g} dB")
        return PupeCurvePoint(
            scenario, channel, ka, None, est_hi.pupe, est_hi.ci_low, est_hi.ci_high,
            est_hi.trials, seed, notes="; ".join(notes),
        )

    lo, hi = snr_lo, snr_hi
    best = est_hi
    depth = 0
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        trials = trials_schedule[min(depth, len(trials_schedule) - 1)]
        est = evaluate(mid, trials)
        if est.pupe <= target_eps:
            hi, best = mid, est
        else:
            lo = mid
        depth += 1
    return PupeCurvePoint(
        scenario, channel, ka, hi, best.pupe, best.ci_low, best.ci_high,
        best.trials, seed, notes="; ".join(notes),
    )


def run_sweep(
    experiment,
    ka_list,
    target_eps: float,
    snr_lo: float,
    snr_hi: float,
    seed: int,
    tol_db: float = 0.1,
    trials_schedule: tuple[int, ...] = (200, 500, 1000),
    scenario: str = "scenario",
    channel: str = "awgn",
    point_hook=None,
) -> list[PupeCurvePoint]:
    """One min-SNR search per ka.  Per-trial seeds already embed ka, so the
    output is independent of the order in which points are evaluated."""
    points = []
    for ka in ka_list:
        point = min_snr_for_pupe(
            experiment, ka, target_eps, snr_lo, snr_hi, seed,
            tol_db=tol_db, trials_schedule=trials_schedule,
            scenario=scenario, channel=channel,
        )
        points.append(point)
        if point_hook is not None:
            point_hook(point)
    return points
