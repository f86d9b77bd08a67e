"""Experiment runner: parses YAML scenario configs (shipped presets or user
files), executes minimum-SNR sweeps, writes schema-stable CSV, and prints a
summary table with Eb/N0.

CSV header (stable): scenario,channel,ka,min_snr_db,pupe,ci_low,ci_high,trials,seed,notes
An empty min_snr_db field means the target was not reached below snr_hi_db
(details in `notes`).  Interrupted sweeps resume from a per-ka checkpoint
file written next to the output.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, fields
from importlib import resources

import yaml

from .channel import ChannelModel
from .codec import CodecModel, CodecSpec, SlotSelection, SlottedAlohaConfig
from .montecarlo import (
    PupeCurvePoint,
    SlottedAlohaExperiment,
    TwoStepExperiment,
    run_sweep,
)
from .protocols import (
    EnergyPolicy,
    Mapping,
    PreambleSpec,
    ReceiverMode,
    SbidmaConfig,
    TwoStepConfig,
)
from .sequences import DictionaryKind

CSV_HEADER = "scenario,channel,ka,min_snr_db,pupe,ci_low,ci_high,trials,seed,notes"

SCENARIOS = ("slotted_aloha", "twostep", "sbidma")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment description; round-trips losslessly through YAML.

    For `slotted_aloha`, n_occasions is the slot count and the preamble,
    pilot, rho, and energy-policy keys are ignored (but must be present so
    every config names its full environment).
    """

    scenario: str
    channel: str
    n_preambles: int
    preamble_len: int               # base sequence length
    preamble_reps: int
    preamble_kind: str              # zadoff_chu | gaussian
    preamble_power_scale: float
    n_occasions: int
    occasion_len: int
    pilot_len: int
    payload_bits: int
    codeword_bits: int
    codec_model: str                # oracle_threshold | ml_random_gaussian
    codec_offset_db: float
    rho: int
    energy_policy: str              # split_across_copies | per_copy_full
    receiver_mode: str              # tin | tin_sic
    target_pupe: float
    ka_list: tuple[int, ...]
    snr_lo_db: float
    snr_hi_db: float
    tol_db: float
    trials_schedule: tuple[int, ...]
    seed: int
    reference_curve_path: str | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario: must be one of {SCENARIOS}, got {self.scenario!r}")
        for key, enum in (
            ("channel", ChannelModel),
            ("preamble_kind", DictionaryKind),
            ("codec_model", CodecModel),
            ("energy_policy", EnergyPolicy),
            ("receiver_mode", ReceiverMode),
        ):
            value = getattr(self, key)
            try:
                enum(value)
            except ValueError:
                raise ConfigError(
                    f"{key}: {value!r} is not one of {[e.value for e in enum]}"
                ) from None
        if not 0.0 < self.target_pupe <= 1.0:
            raise ConfigError(f"target_pupe: must be in (0, 1], got {self.target_pupe}")
        if self.snr_lo_db >= self.snr_hi_db:
            raise ConfigError(
                f"snr_lo_db/snr_hi_db: need lo < hi, got {self.snr_lo_db} >= {self.snr_hi_db}"
            )
        if not self.trials_schedule or any(t < 1 for t in self.trials_schedule):
            raise ConfigError("trials_schedule: needs at least one positive entry")
        if any(k < 1 for k in self.ka_list):
            raise ConfigError("ka_list: entries must be >= 1")
        # Frame arithmetic is validated by building the protocol config.
        try:
            build_experiment(self)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


_INT_TUPLES = {"ka_list", "trials_schedule"}
_FLOATS = {
    "preamble_power_scale", "codec_offset_db", "target_pupe",
    "snr_lo_db", "snr_hi_db", "tol_db",
}
_OPTIONAL = {"reference_curve_path"}


def _flatten(node, prefix, out):
    for key, value in node.items():
        if not isinstance(key, str):
            raise ConfigError(f"non-string key {key!r}")
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            _flatten(value, f"{path}.", out)
        else:
            leaf = key
            if leaf in out:
                raise ConfigError(f"{path}: duplicate key {leaf!r}")
            out[leaf] = (path, value)


def parse_config(text: str) -> ExperimentConfig:
    """Parse a YAML document (flat, or nested into sections) into a config.

    Unknown keys are rejected; every missing required key is listed.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config must be a key-value mapping")
    flat: dict[str, tuple[str, object]] = {}
    _flatten(doc, "", flat)

    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(flat) - known)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    missing = sorted(known - set(flat) - _OPTIONAL)
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")

    kwargs = {}
    for name in known:
        if name not in flat:
            continue
        path, value = flat[name]
        if name in _INT_TUPLES:
            if not isinstance(value, list) or not all(
                isinstance(v, int) and not isinstance(v, bool) for v in value
            ):
                raise ConfigError(f"{path}: expected a list of integers, got {value!r}")
            kwargs[name] = tuple(value)
        elif name in _FLOATS:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{path}: expected a number, got {value!r}")
            kwargs[name] = float(value)
        elif name in _OPTIONAL:
            if value is not None and not isinstance(value, str):
                raise ConfigError(f"{path}: expected a string path, got {value!r}")
            kwargs[name] = value
        else:
            field_type = ExperimentConfig.__dataclass_fields__[name].type
            if "int" in field_type:
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConfigError(f"{path}: expected an integer, got {value!r}")
                kwargs[name] = value
            else:
                if not isinstance(value, str):
                    raise ConfigError(f"{path}: expected a string, got {value!r}")
                kwargs[name] = value
    return ExperimentConfig(**kwargs)


def serialize_config(config: ExperimentConfig) -> str:
    data = asdict(config)
    data["ka_list"] = list(config.ka_list)
    data["trials_schedule"] = list(config.trials_schedule)
    if data["reference_curve_path"] is None:
        del data["reference_curve_path"]
    return yaml.safe_dump(data, sort_keys=True)


def _codec_spec(config: ExperimentConfig) -> CodecSpec:
    # The codec operating point (5% codeword error) is a property of the
    # surrogate code, independent of the sweep's target PUPE.
    return CodecSpec(
        codeword_bits=config.codeword_bits,
        payload_bits=config.payload_bits,
        model=CodecModel(config.codec_model),
        offset_db=config.codec_offset_db,
        target_eps=0.05,
    )


def build_experiment(config: ExperimentConfig):
    """Instantiate the runnable experiment described by the config."""
    codec = _codec_spec(config)
    receiver = ReceiverMode(config.receiver_mode)
    if config.scenario == "slotted_aloha":
        sa = SlottedAlohaConfig(
            slots=config.n_occasions,
            codec=codec,
            slot_selection=SlotSelection.UNIFORM_RANDOM,
        )
        if sa.slot_len != config.occasion_len:
            raise ConfigError(
                f"occasion_len: slot length is codeword_bits/2 = {sa.slot_len}, "
                f"got {config.occasion_len}"
            )
        return SlottedAlohaExperiment(config=sa, receiver=receiver)
    preamble = PreambleSpec(
        size=config.n_preambles,
        base_length=config.preamble_len,
        repetitions=config.preamble_reps,
        kind=DictionaryKind(config.preamble_kind),
        power_scale=config.preamble_power_scale,
    )
    mapping = (
        Mapping.ONE_TO_ONE
        if config.n_preambles == config.n_occasions
        else Mapping.MANY_TO_ONE
    )
    common = dict(
        preamble=preamble,
        n_occasions=config.n_occasions,
        occasion_len=config.occasion_len,
        codec=codec,
        pilot_len=config.pilot_len,
        mapping=mapping,
        channel_model=ChannelModel(config.channel),
    )
    try:
        if config.scenario == "sbidma":
            proto = SbidmaConfig(
                repetitions=config.rho,
                energy_policy=EnergyPolicy(config.energy_policy),
                **common,
            )
        else:
            proto = TwoStepConfig(**common)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return TwoStepExperiment(config=proto, receiver=receiver)


def frame_length(config: ExperimentConfig) -> int:
    experiment = build_experiment(config)
    return experiment.config.frame_len


def ebn0_db(config: ExperimentConfig, snr_db: float) -> float:
    """Eb/N0 = n P / (2 sigma^2 log2 M) for the scenario's frame."""
    n = frame_length(config)
    log2m = config.payload_bits
    if config.scenario == "slotted_aloha":
        log2m += math.log2(config.n_occasions)
    snr = 10.0 ** (snr_db / 10.0)
    return 10.0 * math.log10(n * snr / (2.0 * log2m))


# ---------------------------------------------------------------------------
# presets


def preset_names() -> list[str]:
    root = resources.files("umacsim").joinpath("presets")
    return sorted(p.name[: -len(".yaml")] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_preset(name: str) -> ExperimentConfig:
    path = resources.files("umacsim").joinpath("presets", f"{name}.yaml")
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        ) from None
    return parse_config(text)


# ---------------------------------------------------------------------------
# running


def _scale_schedule(schedule: tuple[int, ...], scale: float) -> tuple[int, ...]:
    return tuple(max(1, math.ceil(t * scale)) for t in schedule)


def _point_row(point: PupeCurvePoint) -> list:
    snr = "" if point.min_snr_db is None else f"{point.min_snr_db:.6f}"
    return [
        point.scenario, point.channel, point.ka, snr,
        f"{point.pupe:.8f}", f"{point.ci_low:.8f}", f"{point.ci_high:.8f}",
        point.trials, point.seed, point.notes,
    ]


def write_csv(points: list[PupeCurvePoint], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER.split(","))
        for point in points:
            writer.writerow(_point_row(point))


def _config_digest(config: ExperimentConfig, seed: int, trials_scale: float) -> str:
    blob = f"{serialize_config(config)}|{seed}|{trials_scale}"
    return hashlib.sha256(blob.encode()).hexdigest()


def run(
    config: ExperimentConfig,
    out_path: str,
    seed: int | None = None,
    trials_scale: float = 1.0,
    strict: bool = False,
    stream=sys.stdout,
) -> int:
    """Execute the sweep, write the CSV, print a summary; returns exit code."""
    seed = config.seed if seed is None else seed
    schedule = _scale_schedule(config.trials_schedule, trials_scale)
    experiment = build_experiment(config)
    digest = _config_digest(config, seed, trials_scale)

    ckpt_path = out_path + ".ckpt.json"
    done: dict[int, PupeCurvePoint] = {}
    if os.path.exists(ckpt_path):
        try:
            with open(ckpt_path, encoding="utf-8") as fh:
                ckpt = json.load(fh)
            if ckpt.get("digest") == digest:
                for item in ckpt.get("points", []):
                    point = PupeCurvePoint(**item)
                    done[point.ka] = point
        except (json.JSONDecodeError, TypeError):
            pass

    def checkpoint(point: PupeCurvePoint) -> None:
        done[point.ka] = point
        payload = {
            "digest": digest,
            "points": [asdict(p) for p in done.values()],
        }
        tmp = ckpt_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
        os.replace(tmp, ckpt_path)

    pending = [ka for ka in config.ka_list if ka not in done]
    if pending:
        run_sweep(
            experiment,
            pending,
            config.target_pupe,
            config.snr_lo_db,
            config.snr_hi_db,
            seed,
            tol_db=config.tol_db,
            trials_schedule=schedule,
            scenario=config.scenario,
            channel=config.channel,
            point_hook=checkpoint,
        )
    points = [done[ka] for ka in config.ka_list]
    write_csv(points, out_path)
    if os.path.exists(ckpt_path):
        os.remove(ckpt_path)

    reference = None
    if config.reference_curve_path:
        from .bounds import load_reference_curve

        reference = load_reference_curve(config.reference_curve_path)

    print(f"# {config.scenario} on {config.channel}, target PUPE {config.target_pupe:g}, "
          f"seed {seed}", file=stream)
    print(f"{'ka':>5} {'min_snr_db':>12} {'eb_n0_db':>10} {'pupe':>10} {'ref_db':>8}  notes",
          file=stream)
    not_found = 0
    for point in points:
        if point.min_snr_db is None:
            not_found += 1
            snr_s, ebn0_s = "not found", "-"
        else:
            snr_s = f"{point.min_snr_db:.2f}"
            ebn0_s = f"{ebn0_db(config, point.min_snr_db):.2f}"
        ref_s = "-"
        if reference is not None:
            ref = reference.snr_db_at(point.ka)
            if ref is not None:
                ref_s = f"{ref:.2f}"
        print(f"{point.ka:>5} {snr_s:>12} {ebn0_s:>10} {point.pupe:>10.4f} {ref_s:>8}  "
              f"{point.notes}", file=stream)
    print(f"# wrote {out_path} ({len(points)} points)", file=stream)
    if strict and not_found:
        print(f"# strict mode: {not_found} point(s) did not reach the target", file=stream)
        return 2
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="umacsim",
        description="Unsourced-multiple-access Monte-Carlo sweeps (min SNR vs. load).",
    )
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--config", help="path to a YAML experiment config")
    group.add_argument("--preset", help="name of a shipped preset")
    parser.add_argument("--list-presets", action="store_true", help="list shipped presets")
    parser.add_argument("--out", default="results.csv", help="output CSV path")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument(
        "--trials-scale", type=float, default=1.0,
        help="multiply every trials_schedule entry (e.g. 0.1 for smoke runs)",
    )
    parser.add_argument(
        "--strict", action="store_true",
        help="exit nonzero when any point fails to reach the target PUPE",
    )
    args = parser.parse_args(argv)

    if args.list_presets:
        for name in preset_names():
            print(name)
        return 0
    try:
        if args.preset:
            config = load_preset(args.preset)
        elif args.config:
            with open(args.config, encoding="utf-8") as fh:
                config = parse_config(fh.read())
        else:
            parser.error("one of --config or --preset is required")
        if args.trials_scale <= 0:
            raise ConfigError("--trials-scale must be positive")
        return run(
            config,
            args.out,
            seed=args.seed,
            trials_scale=args.trials_scale,
            strict=args.strict,
        )
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
