"""End-to-end encoders and receivers: slotted Aloha, two-step random access
(message A), and the SB-IDMA repetition variant.

Receiver conventions
--------------------
The receivers are genie-aided where a surrogate codec needs it:

- Preamble detection runs OMP on the actual preamble-region samples.
- For every detected preamble with at least one (not yet cancelled)
  transmitter, a single decode attempt is made for the strongest such user.
  Users sharing a preamble are not separable within a round: the weaker
  ones wait for cancellation.
- With the oracle codec, success is decided by an effective SINR computed
  from ground truth: the user's data energy over noise plus the data energy
  of all uncancelled co-occasion users, plus (on fading channels) a
  channel-estimation mismatch term |h_hat - h|^2 E_data, where h_hat is the
  actual pilot-based LS estimate taken from the received samples.  The
  mismatch term is what makes shared pilots (same preamble, or small
  preamble sets) hurt and enlarged preamble sets help.
- TIN performs a single round; TIN-SIC subtracts the ground-truth
  contribution (ideal SIC) of every decoded user and repeats detection
  until a round decodes nobody new.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache

import numpy as np

from .channel import ChannelModel, energy
from .codec import CodecModel, CodecSpec, SlottedAlohaConfig, decode, encode
from .detection import energy_detect, ls_channel_estimate, omp_detect, subtract
from .sequences import Dictionary, DictionaryKind, build_preamble_dictionary, build_pilot_dictionary


class ProtocolError(ValueError):
    pass


class ReceiverMode(str, Enum):
    TIN = "tin"
    TIN_SIC = "tin_sic"


class Mapping(str, Enum):
    ONE_TO_ONE = "one_to_one"
    MANY_TO_ONE = "many_to_one"


class EnergyPolicy(str, Enum):
    SPLIT_ACROSS_COPIES = "split_across_copies"
    PER_COPY_FULL = "per_copy_full"


@dataclass(frozen=True)
class PreambleSpec:
    size: int
    base_length: int
    repetitions: int = 1
    kind: DictionaryKind = DictionaryKind.ZADOFF_CHU
    power_scale: float = 1.0
    seed: int = 0

    @property
    def length(self) -> int:
        return self.base_length * self.repetitions


@dataclass(frozen=True)
class TwoStepConfig:
    preamble: PreambleSpec
    n_occasions: int
    occasion_len: int
    codec: CodecSpec
    pilot_len: int = 0
    mapping: Mapping = Mapping.ONE_TO_ONE
    channel_model: ChannelModel = ChannelModel.AWGN
    pilot_seed: int = 1

    def __post_init__(self):
        if self.n_occasions < 1:
            raise ProtocolError(f"n_occasions must be >= 1, got {self.n_occasions}")
        if self.occasion_len != self.pilot_len + self.codec.complex_uses:
            raise ProtocolError(
                f"occasion_len {self.occasion_len} != pilot_len {self.pilot_len} "
                f"+ codeword uses {self.codec.complex_uses}"
            )
        if self.rho == 1:
            if self.mapping is Mapping.ONE_TO_ONE and self.preamble.size != self.n_occasions:
                raise ProtocolError(
                    "one-to-one mapping needs n_preambles == n_occasions "
                    f"({self.preamble.size} != {self.n_occasions})"
                )
            if self.mapping is Mapping.MANY_TO_ONE and self.preamble.size < self.n_occasions:
                raise ProtocolError("many-to-one mapping needs n_preambles >= n_occasions")

    @property
    def rho(self) -> int:
        return 1

    @property
    def preamble_region_len(self) -> int:
        return self.preamble.length

    @property
    def frame_len(self) -> int:
        return self.preamble_region_len + self.n_occasions * self.occasion_len

    def occasion_offset(self, occasion: int) -> int:
        return self.preamble_region_len + occasion * self.occasion_len

    @property
    def n_pilots(self) -> int:
        return max(1, -(-self.preamble.size // self.n_occasions))

    def map_preamble(self, preamble_index: int) -> tuple[tuple[int, ...], int]:
        """Preamble index -> (occasions, pilot index)."""
        occ = preamble_index % self.n_occasions
        pilot = preamble_index // self.n_occasions
        return (occ,), pilot


@dataclass(frozen=True)
class SbidmaConfig(TwoStepConfig):
    repetitions: int = 1                 # rho: copies of the packet per frame
    energy_policy: EnergyPolicy = EnergyPolicy.SPLIT_ACROSS_COPIES

    def __post_init__(self):
        if not 1 <= self.repetitions <= self.n_occasions:
            raise ProtocolError(
                f"rho must be in [1, {self.n_occasions}], got {self.repetitions}"
            )
        super().__post_init__()

    @property
    def rho(self) -> int:
        return self.repetitions

    @property
    def pattern_space_size(self) -> int:
        return math.comb(self.n_occasions, self.rho)

    @property
    def n_pilots(self) -> int:
        if self.rho == 1:
            return super().n_pilots
        return self.preamble.size

    def map_preamble(self, preamble_index: int) -> tuple[tuple[int, ...], int]:
        """rho = 1 reduces to the two-step map; otherwise the preamble index
        selects a rho-subset pattern (colex unranking) and a per-preamble
        pilot, so distinct preambles never share a pilot sequence."""
        if self.rho == 1:
            return super().map_preamble(preamble_index)
        pattern = pattern_from_index(
            preamble_index % self.pattern_space_size, self.n_occasions, self.rho
        )
        return pattern, preamble_index


def pattern_from_index(index: int, n: int, rho: int) -> tuple[int, ...]:
    """Colexicographic unranking of rho-subsets of {0..n-1}; index 0 -> {0..rho-1}."""
    total = math.comb(n, rho)
    if not 0 <= index < total:
        raise ProtocolError(f"pattern index {index} outside [0, {total})")
    out = []
    rem = index
    for r in range(rho, 0, -1):
        c = r - 1
        while math.comb(c + 1, r) <= rem:
            c += 1
        out.append(c)
        rem -= math.comb(c, r)
    return tuple(sorted(out))


def pattern_to_index(pattern: tuple[int, ...], n: int, rho: int) -> int:
    """Inverse of pattern_from_index."""
    if len(set(pattern)) != rho or any(not 0 <= c < n for c in pattern):
        raise ProtocolError(f"{pattern} is not a {rho}-subset of range({n})")
    return sum(math.comb(c, r) for r, c in enumerate(sorted(pattern), start=1))


# ---------------------------------------------------------------------------
# dictionaries


@lru_cache(maxsize=16)
def build_dictionaries(cfg: TwoStepConfig) -> tuple[Dictionary, Dictionary | None]:
    """Unit-sample-power preamble and pilot dictionaries for a config."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.preamble.seed))
    pre = build_preamble_dictionary(
        size=cfg.preamble.size,
        base_length=cfg.preamble.base_length,
        repetitions=cfg.preamble.repetitions,
        power_scale=cfg.preamble.power_scale,
        kind=cfg.preamble.kind,
        rng=rng,
        sample_power=1.0,
    )
    pilots = None
    if cfg.pilot_len > 0:
        prng = np.random.default_rng(np.random.SeedSequence(cfg.pilot_seed))
        pilots = build_pilot_dictionary(cfg.n_pilots, cfg.pilot_len, prng, sample_power=1.0)
    return pre, pilots


# ---------------------------------------------------------------------------
# ground truth


@dataclass
class UserTx:
    """Genie-side record of one user's transmission."""

    message: int
    preamble_index: int
    occasions: tuple[int, ...]
    pilot_index: int
    gain: complex                   # 1 for AWGN; CN(0,1) frame-constant otherwise
    preamble_signal: np.ndarray     # transmitted (gain not applied)
    copy_signal: np.ndarray         # pilot + codeword placed in each occasion
    codeword_energy: float          # per copy

    @property
    def copy_energy(self) -> float:
        return float(energy(self.copy_signal))


@dataclass
class TransmissionRecord:
    """Ground truth of one trial, for PUPE scoring and ideal SIC only."""

    config: TwoStepConfig
    power: float
    users: list[UserTx] = field(default_factory=list)

    def user_frame(self, user: UserTx) -> np.ndarray:
        """The user's full transmitted frame (before channel gain)."""
        frame = np.zeros(self.config.frame_len, dtype=complex)
        frame[: len(user.preamble_signal)] = user.preamble_signal
        for occ in user.occasions:
            off = self.config.occasion_offset(occ)
            frame[off : off + len(user.copy_signal)] = user.copy_signal
        return frame


@dataclass
class DecodeOutcome:
    decoded_messages: set[int]
    detected_preambles: set[int]
    sic_rounds: int
    round_decodes: list[int] = field(default_factory=list)


# ---------------------------------------------------------------------------
# encoding


def encode_user(
    cfg: TwoStepConfig,
    message: int,
    rng: np.random.Generator,
    power: float = 1.0,
    gain: complex = 1.0,
    preamble_index: int | None = None,
) -> UserTx:
    """Draw a preamble (uniform unless forced) and build the user's signals."""
    pre_dict, pilot_dict = build_dictionaries(cfg)
    if preamble_index is None:
        preamble_index = int(rng.integers(0, cfg.preamble.size))
    occasions, pilot_index = cfg.map_preamble(preamble_index)
    sqrt_p = math.sqrt(power)
    preamble = pre_dict.column(preamble_index) * sqrt_p

    copy_scale = sqrt_p
    if cfg.rho > 1 and getattr(cfg, "energy_policy", None) is EnergyPolicy.SPLIT_ACROSS_COPIES:
        copy_scale = sqrt_p / math.sqrt(cfg.rho)
    codeword = encode(cfg.codec, message, power=1.0) * copy_scale
    if cfg.pilot_len > 0:
        pilot = pilot_dict.column(pilot_index) * copy_scale
        copy_signal = np.concatenate([pilot, codeword])
    else:
        copy_signal = codeword
    return UserTx(
        message=message,
        preamble_index=preamble_index,
        occasions=occasions,
        pilot_index=pilot_index,
        gain=gain,
        preamble_signal=preamble,
        copy_signal=copy_signal,
        codeword_energy=float(energy(codeword)),
    )


def twostep_encode(
    cfg: TwoStepConfig,
    message: int,
    rng: np.random.Generator,
    power: float = 1.0,
    preamble_index: int | None = None,
) -> tuple[np.ndarray, UserTx]:
    """Full message-A frame: preamble region + packet in the mapped occasion(s)."""
    user = encode_user(cfg, message, rng, power=power, preamble_index=preamble_index)
    record = TransmissionRecord(config=cfg, power=power, users=[user])
    return record.user_frame(user), user


def sbidma_encode(
    cfg: SbidmaConfig,
    message: int,
    rng: np.random.Generator,
    power: float = 1.0,
    preamble_index: int | None = None,
) -> tuple[np.ndarray, UserTx]:
    """Packet repeated in all rho occasions of the preamble-indexed pattern."""
    if not isinstance(cfg, SbidmaConfig):
        raise ProtocolError("sbidma_encode needs an SbidmaConfig")
    return twostep_encode(cfg, message, rng, power=power, preamble_index=preamble_index)


# ---------------------------------------------------------------------------
# receiving


def _effective_sinr(
    cfg: TwoStepConfig,
    user: UserTx,
    active: list[UserTx],
    y: np.ndarray,
    noise_power: float,
) -> float:
    """Genie SINR with maximal-ratio combining across the user's copies.

    Per copy: |h|^2 E_cw / (sigma^2 n_occ + sum_v |h_v|^2 E_v + |h_hat - h|^2 E_cw)
    where v runs over uncancelled co-occasion users and the last term models
    the loss from imperfect pilot-based channel estimation (fading only).
    """
    fading = cfg.channel_model is ChannelModel.RAYLEIGH
    sig = abs(user.gain) ** 2 * user.codeword_energy
    noise = noise_power * cfg.occasion_len
    total = 0.0
    for occ in user.occasions:
        interference = 0.0
        for v in sorted(active, key=lambda u: (u.message, u.preamble_index)):
            if v is user:
                continue
            if occ in v.occasions:
                interference += abs(v.gain) ** 2 * v.copy_energy
        penalty = 0.0
        if fading and cfg.pilot_len > 0:
            off = cfg.occasion_offset(occ)
            pilot = user.copy_signal[: cfg.pilot_len]
            h_hat = ls_channel_estimate(y[off : off + cfg.pilot_len], pilot)
            penalty = abs(h_hat - user.gain) ** 2 * user.codeword_energy
        denom = noise + interference + penalty
        total += sig / denom if denom > 0 else math.inf
    return total


def twostep_receive(
    y: np.ndarray,
    cfg: TwoStepConfig,
    mode: ReceiverMode,
    genie: TransmissionRecord,
    noise_power: float,
    ka_hypothesis: int | None = None,
) -> DecodeOutcome:
    """OMP preamble detection, per-preamble decode attempts, optional ideal SIC.

    TIN stops after one round; TIN-SIC cancels the ground-truth contribution
    of every decoded user and repeats until no round decodes anybody new.
    """
    pre_dict, _ = build_dictionaries(cfg)
    pre_dict_scaled = pre_dict.columns * math.sqrt(genie.power)
    pre_len = cfg.preamble_region_len
    ka = ka_hypothesis if ka_hypothesis is not None else max(1, len(genie.users))
    max_iters = min(2 * ka, cfg.preamble.size)

    y_work = y.copy()
    cancelled: set[int] = set()         # ids of cancelled users
    decoded: set[int] = set()
    detected_all: set[int] = set()
    round_decodes: list[int] = []
    rounds = 0
    max_rounds = len(genie.users) + 1

    while rounds < max_rounds:
        rounds += 1
        y_pre = y_work[:pre_len]
        e_pre = energy(y_pre)
        if e_pre <= 0:
            break
        thr = min(1.0, 1.1 * noise_power * pre_len / e_pre)
        det = omp_detect(y_pre, pre_dict_scaled, max_iters=max_iters, residual_threshold=thr)
        detected_all.update(det.indices)

        newly: list[UserTx] = []
        for p in det.indices:
            cand = [
                u
                for u in genie.users
                if u.preamble_index == p and id(u) not in cancelled and u.message not in decoded
            ]
            if not cand:
                continue
            # One attempt per detected preamble, aimed at the strongest user.
            # Same-preamble users transmit the same pilot, so exactly tied
            # gains (AWGN equal power) are indistinguishable: no decode.
            strengths = sorted((abs(t.gain) ** 2 for t in cand), reverse=True)
            if len(cand) > 1 and strengths[0] == strengths[1]:
                continue
            u = max(cand, key=lambda t: abs(t.gain) ** 2)
            active = [v for v in genie.users if id(v) not in cancelled]
            if cfg.codec.model is CodecModel.ORACLE_THRESHOLD:
                sinr = _effective_sinr(cfg, u, active, y_work, noise_power)
                ok, msg = decode(cfg.codec, genie_sinr=sinr, true_message=u.message)
            else:
                ok, msg = _ml_attempt(cfg, u, y_work, genie.power)
            if ok and msg is not None and msg not in decoded:
                decoded.add(msg)
                match = next(
                    (
                        v
                        for v in cand
                        if v.message == msg
                    ),
                    None,
                )
                if match is not None:
                    newly.append(match)
        round_decodes.append(len(newly))
        if mode is ReceiverMode.TIN or not newly:
            break
        for u in newly:
            cancelled.add(id(u))
            y_work = subtract(y_work, u.gain * u.preamble_signal, 0)
            for occ in u.occasions:
                y_work = subtract(
                    y_work, u.gain * u.copy_signal, cfg.occasion_offset(occ)
                )
    return DecodeOutcome(
        decoded_messages=decoded,
        detected_preambles=detected_all,
        sic_rounds=rounds,
        round_decodes=round_decodes,
    )


def _ml_attempt(
    cfg: TwoStepConfig, user: UserTx, y: np.ndarray, power: float
) -> tuple[bool, int | None]:
    """Actual ML decode on the user's (first) occasion samples."""
    occ = user.occasions[0]
    off = cfg.occasion_offset(occ) + cfg.pilot_len
    seg = y[off : off + cfg.codec.complex_uses]
    if cfg.channel_model is ChannelModel.RAYLEIGH and cfg.pilot_len > 0:
        poff = cfg.occasion_offset(occ)
        gain = ls_channel_estimate(y[poff : poff + cfg.pilot_len], user.copy_signal[: cfg.pilot_len])
    else:
        gain = 1.0
    scale = math.sqrt(power)
    if cfg.rho > 1 and getattr(cfg, "energy_policy", None) is EnergyPolicy.SPLIT_ACROSS_COPIES:
        scale /= math.sqrt(cfg.rho)
    return decode(cfg.codec, observed=seg, gain=gain * scale, power=1.0)


def sbidma_receive(
    y: np.ndarray,
    cfg: SbidmaConfig,
    mode: ReceiverMode,
    genie: TransmissionRecord,
    noise_power: float,
    ka_hypothesis: int | None = None,
) -> DecodeOutcome:
    """Two-step receiver with maximal-ratio combining across the rho copies."""
    if not isinstance(cfg, SbidmaConfig):
        raise ProtocolError("sbidma_receive needs an SbidmaConfig")
    return twostep_receive(y, cfg, mode, genie, noise_power, ka_hypothesis)


# ---------------------------------------------------------------------------
# slotted Aloha


def slotted_aloha_receive(
    y: np.ndarray,
    cfg: SlottedAlohaConfig,
    mode: ReceiverMode,
    genie: list[tuple[int, int]],      # (message, slot) ground truth
    noise_power: float,
    power: float = 1.0,
    energy_threshold_factor: float = 1.0,
) -> DecodeOutcome:
    """Per-slot energy detection followed by single-user decode attempts.

    With the oracle codec, slots holding a single (uncancelled) user decode
    iff the genie SINR clears the codec threshold; collided slots fail under
    TIN, since equal-strategy users superposed in one slot are not
    separable.  The SIC variant cancels decoded codewords and retries.
    """
    slot_len = cfg.slot_len
    occupants: dict[int, list[tuple[int, int]]] = {}
    for msg, slot in genie:
        occupants.setdefault(slot, []).append((msg, slot))

    decoded: set[int] = set()
    cancelled: set[tuple[int, int]] = set()
    y_work = y.copy()
    rounds = 0
    round_decodes: list[int] = []
    max_rounds = len(genie) + 1
    while rounds < max_rounds:
        rounds += 1
        newly: list[tuple[int, int]] = []
        # The oracle codec can only ever output occupants' messages, so
        # empty slots are skipped; the ML codec scans every slot (a false
        # energy alarm then yields a spurious decode, which PUPE ignores).
        if cfg.codec.model is CodecModel.ORACLE_THRESHOLD:
            slot_iter = sorted(occupants)
        else:
            slot_iter = range(cfg.slots)
        for slot in slot_iter:
            seg = y_work[slot * slot_len : (slot + 1) * slot_len]
            if not energy_detect(seg, energy_threshold_factor, noise_power):
                continue
            occ = [t for t in occupants.get(slot, []) if t not in cancelled]
            if cfg.codec.model is CodecModel.ORACLE_THRESHOLD:
                if len(occ) != 1:
                    continue
                msg = occ[0][0]
                if msg in decoded:
                    continue
                sinr = power / noise_power if noise_power > 0 else math.inf
                ok, out = decode(cfg.codec, genie_sinr=sinr, true_message=msg)
            else:
                ok, out = decode(cfg.codec, observed=seg, gain=math.sqrt(power), power=1.0)
            if ok and out is not None and out not in decoded:
                decoded.add(out)
                hit = next((t for t in occ if t[0] == out), None)
                if hit is not None:
                    newly.append(hit)
        round_decodes.append(len(newly))
        if mode is ReceiverMode.TIN or not newly:
            break
        for msg, slot in newly:
            cancelled.add((msg, slot))
            cw = encode(cfg.codec, msg, power=power)
            y_work = subtract(y_work, cw, slot * slot_len)
    return DecodeOutcome(
        decoded_messages=decoded,
        detected_preambles=set(),
        sic_rounds=rounds,
        round_decodes=round_decodes,
    )
