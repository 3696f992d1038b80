"""Batch command-line pipeline: ingest MIDI, train, generate, inspect.

Every command reads and writes plain files; reruns with identical inputs and
seed produce byte-identical outputs. Settings resolve as flags over config
file over built-in defaults, and the BINROLL_DATA_DIR environment variable
supplies default locations for the manifest, checkpoint, and output
directories when the corresponding flags are omitted.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .diffusion import ConditionSpec, sample, sample_conditional, sample_variation
from .fsio import atomic_write_bytes, atomic_write_text
from .interpret import AMConfig, activation_maximization, default_layer
from .pianoroll import (
    PianoRoll,
    dedup_catalog,
    events_to_roll,
    load_roll,
    ones_ratio,
    parse_midi,
    pitch_range_ok,
    read_catalog,
    render_raster,
    roll_to_midi,
    save_roll,
    segment,
)
from .rng import make_rng
from .training import TrainConfig, load_checkpoint, train
from .unet import UNetConfig

DATA_DIR_ENV = "BINROLL_DATA_DIR"


def _data_dir() -> Path | None:
    value = os.environ.get(DATA_DIR_ENV)
    return Path(value) if value else None


def _read_config_file(path) -> dict[str, str]:
    """Flat key=value lines; blank lines and # comments are ignored."""
    cfg: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, value = stripped.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


class Settings:
    """Resolved run settings: flags beat the config file beat defaults."""

    def __init__(self, args: argparse.Namespace, file_cfg: dict[str, str]):
        self.args = vars(args)
        self.file = file_cfg

    def get(self, name: str, convert=str, default=None):
        value = self.args.get(name)
        if value is None and name in self.file:
            raw = self.file[name]
            try:
                value = convert(raw)
            except ValueError:
                raise ValueError(f"config key '{name}': cannot parse {raw!r}") from None
        return default if value is None else value

    def require(self, name: str, convert=str):
        value = self.get(name, convert)
        if value is None:
            flag = "--" + name.replace("_", "-")
            raise ValueError(f"missing required setting '{name}' (pass {flag} or set it in --config)")
        return value

    def path(self, name: str, default_rel: str | None = None) -> Path:
        value = self.get(name)
        if value is None and default_rel is not None and _data_dir() is not None:
            return _data_dir() / default_rel
        if value is None:
            flag = "--" + name.replace("_", "-")
            raise ValueError(
                f"missing required path '{name}' (pass {flag} or set {DATA_DIR_ENV})")
        return Path(value)


def _parse_steps(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ValueError(f"cannot parse step list {text!r} (want e.g. '100,50,1')") from None


def _out_dir(settings: Settings, default_rel: str) -> Path:
    out = settings.path("out", default_rel)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_manifest(manifest_path: Path) -> list[PianoRoll]:
    """Segment paths are resolved relative to the manifest's directory."""
    lines = [ln.strip() for ln in manifest_path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"manifest {manifest_path} lists no segments")
    rolls = []
    for line in lines:
        p = Path(line)
        rolls.append(load_roll(p if p.is_absolute() else manifest_path.parent / p))
    return rolls


def _load_model(settings: Settings):
    params, schedule = load_checkpoint(settings.path("checkpoint", "model.ckpt"))
    if schedule is None:
        raise ValueError("checkpoint carries no schedule metadata; create it with 'binroll train'")
    return params, schedule


def _write_roll(out: Path, stem: str, roll: PianoRoll) -> None:
    atomic_write_bytes(out / f"{stem}.mid", roll_to_midi(roll))
    atomic_write_bytes(out / f"{stem}.pgm", render_raster(roll))


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(settings: Settings) -> int:
    catalog_path = settings.path("catalog")
    midi_root = settings.get("midi_root")
    root = Path(midi_root) if midi_root else (_data_dir() or catalog_path.parent)
    out = _out_dir(settings, "ingest")
    (out / "segments").mkdir(exist_ok=True)

    records = read_catalog(catalog_path.read_text())
    deduped = dedup_catalog(records)
    rejected_range = 0
    manifest_lines: list[str] = []
    source_lines: list[str] = []
    total = 0
    for rec in deduped:
        piece_path = Path(rec.file_path)
        if not piece_path.is_absolute():
            piece_path = root / piece_path
        events, tpq = parse_midi(piece_path.read_bytes())
        if not pitch_range_ok(events):
            rejected_range += 1
            continue
        count = 0
        for piece_segment in segment(events_to_roll(events, tpq)):
            name = f"segments/seg_{total:06d}.roll"
            save_roll(piece_segment, out / name)
            manifest_lines.append(name)
            total += 1
            count += 1
        source_lines.append(f"{rec.file_path}\t{count}")

    atomic_write_text(out / "manifest.txt", "".join(f"{ln}\n" for ln in manifest_lines))
    atomic_write_text(out / "sources.txt", "".join(f"{ln}\n" for ln in source_lines))
    kept = len(deduped) - rejected_range
    print(f"pieces: {len(records)} in catalog, {len(deduped)} after dedup, "
          f"{kept} kept, {rejected_range} rejected (range)")
    print(f"segments: {total}")
    print(f"manifest: {out / 'manifest.txt'}")
    if total == 0:
        print("warning: no segments produced", file=sys.stderr)
    return 0


def cmd_stats(settings: Settings) -> int:
    segments = _load_manifest(settings.path("manifest", "ingest/manifest.txt"))
    ones = sum(int(s.bits.sum()) for s in segments)
    cells = sum(s.bits.size for s in segments)
    print(f"segments: {len(segments)}")
    print(f"cells: {cells}")
    print(f"ones: {ones}")
    print(f"p_prior: {ones_ratio(segments):.6f}")
    return 0


def cmd_train(settings: Settings) -> int:
    segments = _load_manifest(settings.path("manifest", "ingest/manifest.txt"))
    out = settings.path("out", "model.ckpt")
    out.parent.mkdir(parents=True, exist_ok=True)
    report_path = settings.get("report")
    report_path = Path(report_path) if report_path else out.with_name(out.name + ".report.csv")

    unet = UNetConfig(
        rows=settings.get("rows", int, 56),
        cols=settings.get("cols", int, 384),
        levels=settings.get("levels", int, 3),
        base_channels=settings.get("base_channels", int, 32),
        convs_per_level=settings.get("convs_per_level", int, 2),
    )
    config = TrainConfig(
        unet=unet,
        epochs=settings.get("epochs", int, 50),
        batch_size=settings.get("batch_size", int, 16),
        learning_rate=settings.get("learning_rate", float, 1e-4),
        seed=settings.get("seed", int, 0),
        T=settings.get("T", int, 100),
        manifest=str(settings.path("manifest", "ingest/manifest.txt")),
        t_mode=settings.get("t_mode", str, "uniform"),
        checkpoint_every=settings.get("checkpoint_every", int, 0),
        checkpoint_path=str(out),
    )

    def log(epoch: int, loss: float) -> None:
        print(f"epoch {epoch}: mean_loss {loss:.6f}")

    _, report = train(config, segments, log=log)
    atomic_write_text(report_path, report.to_csv())
    print(f"checkpoint: {out}")
    print(f"report: {report_path}")
    return 0


def cmd_sample(settings: Settings) -> int:
    params, schedule = _load_model(settings)
    out = _out_dir(settings, "samples")
    seed = settings.get("seed", int, 0)
    count = settings.get("count", int, 1)
    steps_text = settings.get("snapshot_steps")
    steps = _parse_steps(steps_text) if steps_text else ()
    for k in range(count):
        roll, trace = sample(params, schedule, make_rng(seed, k), trace_steps=steps)
        stem = f"sample_{k:03d}"
        _write_roll(out, stem, roll)
        atomic_write_text(out / f"{stem}_trace.csv", trace.to_lines())
        for t in sorted(trace.snapshots):
            snap = PianoRoll(trace.snapshots[t])
            atomic_write_bytes(out / f"{stem}_t{t:03d}.pgm", render_raster(snap))
    print(f"wrote {count} sample(s) to {out}")
    return 0


def cmd_infill(settings: Settings) -> int:
    params, schedule = _load_model(settings)
    out = _out_dir(settings, "infill")
    prompt = load_roll(settings.path("prompt"))
    condition = ConditionSpec.from_directives(settings.require("condition"), prompt)
    roll = sample_conditional(params, schedule, condition,
                              make_rng(settings.get("seed", int, 0)))
    _write_roll(out, "infill", roll)
    print(f"wrote infill to {out}")
    return 0


def cmd_harmonize(settings: Settings) -> int:
    params, schedule = _load_model(settings)
    out = _out_dir(settings, "harmonize")
    melody = load_roll(settings.path("melody"))
    rows_text = settings.require("rows").strip()
    if not rows_text.startswith("rows"):
        rows_text = f"rows {rows_text}"
    condition = ConditionSpec.from_directives(rows_text, melody)
    roll = sample_conditional(params, schedule, condition,
                              make_rng(settings.get("seed", int, 0)))
    _write_roll(out, "harmonize", roll)
    print(f"wrote harmonization to {out}")
    return 0


def cmd_vary(settings: Settings) -> int:
    params, schedule = _load_model(settings)
    out = _out_dir(settings, "vary")
    source = load_roll(settings.path("source"))
    t_start = settings.require("t_start", int)
    seed = settings.get("seed", int, 0)
    count = settings.get("count", int, 1)
    for k in range(count):
        roll = sample_variation(params, schedule, source, t_start, make_rng(seed, k))
        _write_roll(out, f"vary_t{t_start:03d}_{k:03d}", roll)
    print(f"wrote {count} variation(s) to {out}")
    return 0


def cmd_inspect(settings: Settings) -> int:
    params, schedule = load_checkpoint(settings.path("checkpoint", "model.ckpt"))
    out = _out_dir(settings, "inspect")
    layer = settings.get("layer") or default_layer(params.config)
    cfg = AMConfig(
        layer=layer,
        filter_index=settings.get("filter", int, 0),
        iterations=settings.get("iters", int, 200),
        step_size=settings.get("step_size", float, 0.1),
        seed=settings.get("seed", int, 0),
        p_prior=schedule.p_prior if schedule is not None else 0.5,
    )
    result = activation_maximization(params, cfg)
    stem = f"inspect_{layer.replace('.', '-')}_{cfg.filter_index:03d}"
    atomic_write_bytes(out / f"{stem}.pgm", render_raster(result.final_input))
    series = "iteration,activation\n" + "".join(
        f"{i},{a!r}\n" for i, a in enumerate(result.activations))
    atomic_write_text(out / f"{stem}_series.csv", series)
    print(f"wrote {stem} outputs to {out}")
    return 0


def cmd_render(settings: Settings) -> int:
    roll_path = settings.path("roll")
    out = _out_dir(settings, "render")
    _write_roll(out, roll_path.stem, load_roll(roll_path))
    print(f"rendered {roll_path.stem} to {out}")
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--config", help="key=value settings file; flags take precedence")
    p.add_argument("--out", help=f"output location (default derived from ${DATA_DIR_ENV})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="binroll",
        description="Binary piano-roll diffusion: corpus preparation, training, generation.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("ingest", help="catalog + MIDI files to segment rolls and a manifest")
    p.add_argument("--catalog", help="CSV with composer,title,file_path columns")
    p.add_argument("--midi-root", dest="midi_root", help="base directory for catalog file paths")
    p.set_defaults(func=cmd_ingest)
    _add_common(p)

    p = sub.add_parser("stats", help="corpus summary and the ones-ratio prior")
    p.add_argument("--manifest", help="segment manifest from ingest")
    p.set_defaults(func=cmd_stats)
    _add_common(p)

    p = sub.add_parser("train", help="fit the denoiser and write a checkpoint")
    p.add_argument("--manifest", help="segment manifest from ingest")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--T", dest="T", type=int, help="diffusion steps")
    p.add_argument("--t-mode", dest="t_mode", choices=["uniform", "sweep"])
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int,
                   help="epochs between interim checkpoints (0 = final only)")
    p.add_argument("--report", help="per-epoch loss CSV path")
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--levels", type=int)
    p.add_argument("--base-channels", dest="base_channels", type=int)
    p.add_argument("--convs-per-level", dest="convs_per_level", type=int)
    p.set_defaults(func=cmd_train)
    _add_common(p)

    p = sub.add_parser("sample", help="unconditional generation from a checkpoint")
    p.add_argument("--checkpoint")
    p.add_argument("--count", type=int)
    p.add_argument("--snapshot-steps", dest="snapshot_steps",
                   help="comma-separated steps whose intermediate state is rendered")
    p.set_defaults(func=cmd_sample)
    _add_common(p)

    p = sub.add_parser("infill", help="regenerate everything outside a clamped region")
    p.add_argument("--checkpoint")
    p.add_argument("--prompt", help="roll file supplying the clamped cells")
    p.add_argument("--condition", help="directives like 'cols 0..191' or 'rows 20..31'")
    p.set_defaults(func=cmd_infill)
    _add_common(p)

    p = sub.add_parser("harmonize", help="keep a melody row band, generate the rest")
    p.add_argument("--checkpoint")
    p.add_argument("--melody", help="roll file carrying the melody")
    p.add_argument("--rows", help="inclusive melody row band, e.g. '44..55'")
    p.set_defaults(func=cmd_harmonize)
    _add_common(p)

    p = sub.add_parser("vary", help="re-noise a roll partway and denoise it again")
    p.add_argument("--checkpoint")
    p.add_argument("--source", help="roll file to vary")
    p.add_argument("--t-start", dest="t_start", type=int, help="re-noising depth, 1..T")
    p.add_argument("--count", type=int)
    p.set_defaults(func=cmd_vary)
    _add_common(p)

    p = sub.add_parser("inspect", help="activation maximization for one conv filter")
    p.add_argument("--checkpoint")
    p.add_argument("--layer", help="conv name, e.g. 'bottom.1' (default: last bottom conv)")
    p.add_argument("--filter", type=int, help="filter index within the layer")
    p.add_argument("--iters", type=int)
    p.add_argument("--step-size", dest="step_size", type=float)
    p.set_defaults(func=cmd_inspect)
    _add_common(p)

    p = sub.add_parser("render", help="roll file to P5 raster and MIDI")
    p.add_argument("--roll", help="roll file to render")
    p.set_defaults(func=cmd_render)
    _add_common(p)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        file_cfg = _read_config_file(args.config) if args.config else {}
        settings = Settings(args, file_cfg)
        return args.func(settings)
    except (OSError, ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
