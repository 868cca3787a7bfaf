"""Operator command line: configure, run, sweep, ingest, report.

Configuration is an INI file with sections [schedule], [grid], [model],
[detector], [corrector], [experiment], and optional trap sections named
[trap] or [trap:anything].  Every value has a default, CLI flags override
file values, and the effective configuration is echoed into the output
directory so any run can be reproduced from its own artifacts.

Window endpoints are configured as fractions of t_total and resolved to
the nearest grid step (ties toward larger t), so changing the step count
never silently moves the detection window.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corrector import CorrectionConfig, RunResult, run_corrected
from .detector import (DetectorConfig, acceleration_curve, bank_from_trajectory,
                       detect, detection_metrics, weighted_dynamics)
from .gmm import (GmmModel, GmmOracle, TrappedOracle, TrapSpec, builtin_template,
                  sample_data)
from .metrics import (SampleSet, knn_precision_recall, nll_under_model,
                      region_escaped, sliced_w2)
from .pgm import heatmap_to_pgm, mask_to_pgm, read_pgm
from .schedule import (ConfigError, StepGrid, grid_step_at_fraction, make_grid,
                       make_schedule)
from .trace_io import TraceError, read_trace, write_trace

__all__ = ["main", "entrypoint"]

ENV_SEED = "ASCED_SEED"

_PERTURBATION_ALIASES = {
    "literal": "literal_multiplicative",
    "one-plus": "one_plus_multiplicative",
    "additive": "additive",
}

_DEFAULTS: dict[str, dict[str, str]] = {
    "schedule": {"kind": "linear", "t_total": "1000",
                 "beta_min": "1e-4", "beta_max": "0.02"},
    "grid": {"nfe": "25"},
    "model": {"templates": "checkerboard,gradient,disk,stripes",
              "weights": "0.3,0.3,0.2,0.2", "sigma0": "0.05", "amplitude": "0.9"},
    "detector": {"td_frac": "0.8", "tc_frac": "0.48", "mad_multiplier": "1.0",
                 "mean_bank_mode": "mean_abs_weighted",
                 "channel_reduce": "l2_over_channels", "dilation_radius": "1"},
    "corrector": {"method": "ttc", "gamma": "0.1",
                  "perturbation_mode": "literal_multiplicative",
                  "replace_source_frac": "", "clip_bound_mode": "tau",
                  "clip_bound": "0", "xi_stream": "0"},
    "experiment": {"n_samples": "8", "seed": "", "out_dir": "artifact-runs"},
}

_TRAP_DEFAULTS = {"spike_steps": "3", "spike_gain": "8.0",
                  "mode": "spike_then_freeze", "seed": "0", "release_rtol": "1e-3"}


def _parse_typed(section: str, key: str, raw: str, kind):
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: cannot parse {raw!r} as {kind.__name__}")


def _load_sections(config_path: str | None) -> tuple[dict, list[dict]]:
    """Merge defaults with an optional INI file; returns (sections, traps)."""
    sections = {name: dict(vals) for name, vals in _DEFAULTS.items()}
    traps: list[dict] = []
    if config_path is None:
        return sections, traps
    parser = configparser.ConfigParser()
    read = parser.read(config_path)
    if not read:
        raise ConfigError(f"cannot read config file {config_path}")
    for name in parser.sections():
        if name == "trap" or name.startswith("trap:"):
            trap = dict(_TRAP_DEFAULTS)
            trap.update(parser[name])
            trap["_section"] = name
            traps.append(trap)
            continue
        if name not in sections:
            raise ConfigError(f"unknown config section [{name}]")
        for key, value in parser[name].items():
            if key not in sections[name]:
                raise ConfigError(f"unknown config key {name}.{key}")
            sections[name][key] = value
    return sections, traps


def _apply_overrides(sections: dict, args: argparse.Namespace) -> None:
    if getattr(args, "seed", None) is not None:
        sections["experiment"]["seed"] = str(args.seed)
    if getattr(args, "out", None) is not None:
        sections["experiment"]["out_dir"] = args.out
    if getattr(args, "method", None) is not None:
        sections["corrector"]["method"] = args.method
    if getattr(args, "gamma", None) is not None:
        sections["corrector"]["gamma"] = str(args.gamma)
    if getattr(args, "perturbation", None) is not None:
        sections["corrector"]["perturbation_mode"] = \
            _PERTURBATION_ALIASES[args.perturbation]
    if getattr(args, "tc_frac", None) is not None:
        sections["detector"]["tc_frac"] = str(args.tc_frac)
    if getattr(args, "td_frac", None) is not None:
        sections["detector"]["td_frac"] = str(args.td_frac)


def _resolve_seed(sections: dict) -> int:
    raw = sections["experiment"]["seed"].strip()
    if raw == "":
        raw = os.environ.get(ENV_SEED, "").strip() or "0"
    return _parse_typed("experiment", "seed", raw, int)


def _build_model(sections: dict) -> GmmModel:
    m = sections["model"]
    names = [v.strip() for v in m["templates"].split(",") if v.strip()]
    if not names:
        raise ConfigError("model.templates is empty")
    weights = [_parse_typed("model", "weights", v, float)
               for v in m["weights"].split(",") if v.strip()]
    if len(weights) != len(names):
        raise ConfigError(
            f"model.weights has {len(weights)} entries for {len(names)} templates")
    amplitude = _parse_typed("model", "amplitude", m["amplitude"], float)
    sigma0 = _parse_typed("model", "sigma0", m["sigma0"], float)
    templates = []
    for name in names:
        if name.endswith(".pgm"):
            img = read_pgm(name).astype(np.float64)
            templates.append((img / 255.0 * 2.0 - 1.0)[None, :, :] * amplitude)
        else:
            templates.append(builtin_template(name, amplitude=amplitude))
    shapes = {t.shape for t in templates}
    if len(shapes) > 1:
        raise ConfigError(f"templates disagree on shape: {sorted(shapes)}")
    return GmmModel(weights=np.asarray(weights), templates=np.stack(templates),
                    sigma0=sigma0)


def _build_traps(trap_sections: list[dict], grid: StepGrid) -> tuple[TrapSpec, ...]:
    traps = []
    for raw in trap_sections:
        section = raw.pop("_section", "trap")
        if "region" not in raw or "trigger_step" not in raw:
            raise ConfigError(f"[{section}] needs region and trigger_step")
        parts = [v.strip() for v in raw["region"].split(",")]
        if len(parts) != 4:
            raise ConfigError(f"{section}.region must be top,left,height,width")
        region = tuple(_parse_typed(section, "region", v, int) for v in parts)
        trigger = _parse_typed(section, "trigger_step", raw["trigger_step"], int)
        if trigger not in grid:
            raise ConfigError(
                f"{section}.trigger_step {trigger} is not on the sampling grid")
        known = {"region", "trigger_step", *_TRAP_DEFAULTS}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown {section} keys: {sorted(unknown)}")
        traps.append(TrapSpec(
            region=region,
            trigger_step=trigger,
            spike_steps=_parse_typed(section, "spike_steps", raw["spike_steps"], int),
            spike_gain=_parse_typed(section, "spike_gain", raw["spike_gain"], float),
            mode=raw["mode"],
            seed=_parse_typed(section, "seed", raw["seed"], int),
            release_rtol=_parse_typed(section, "release_rtol", raw["release_rtol"], float),
        ))
    return tuple(traps)


@dataclass
class Scenario:
    """Fully resolved run setup plus the raw sections it came from."""

    sched: object
    grid: StepGrid
    model: GmmModel
    traps: tuple
    det_cfg: DetectorConfig
    corr_cfg: CorrectionConfig
    n_samples: int
    seed: int
    out_dir: str
    sections: dict
    trap_sections: list


def _resolve(sections: dict, trap_sections: list[dict]) -> Scenario:
    sc = sections["schedule"]
    sched = make_schedule(
        kind=sc["kind"],
        t_total=_parse_typed("schedule", "t_total", sc["t_total"], int),
        beta_min=_parse_typed("schedule", "beta_min", sc["beta_min"], float),
        beta_max=_parse_typed("schedule", "beta_max", sc["beta_max"], float))
    nfe = _parse_typed("grid", "nfe", sections["grid"]["nfe"], int)
    grid = make_grid(sched, nfe)
    model = _build_model(sections)

    det = sections["detector"]
    td_frac = _parse_typed("detector", "td_frac", det["td_frac"], float)
    tc_frac = _parse_typed("detector", "tc_frac", det["tc_frac"], float)
    for label, frac in (("td_frac", td_frac), ("tc_frac", tc_frac)):
        if not (0.0 < frac <= 1.0):
            raise ConfigError(f"detector.{label} must be in (0, 1], got {frac}")
    if tc_frac >= td_frac:
        raise ConfigError(
            f"detector.td_frac ({td_frac}) must exceed detector.tc_frac ({tc_frac})")
    det_cfg = DetectorConfig(
        t_detect_start=grid_step_at_fraction(grid, td_frac, sched.t_total),
        t_correct=grid_step_at_fraction(grid, tc_frac, sched.t_total),
        mad_multiplier=_parse_typed("detector", "mad_multiplier",
                                    det["mad_multiplier"], float),
        mean_bank_mode=det["mean_bank_mode"],
        channel_reduce=det["channel_reduce"],
        dilation_radius=_parse_typed("detector", "dilation_radius",
                                     det["dilation_radius"], int))

    cor = sections["corrector"]
    mode = _PERTURBATION_ALIASES.get(cor["perturbation_mode"],
                                     cor["perturbation_mode"])
    replace_step = None
    if cor["replace_source_frac"].strip():
        rfrac = _parse_typed("corrector", "replace_source_frac",
                             cor["replace_source_frac"], float)
        replace_step = grid_step_at_fraction(grid, rfrac, sched.t_total)
    corr_cfg = CorrectionConfig(
        method=cor["method"],
        gamma=_parse_typed("corrector", "gamma", cor["gamma"], float),
        perturbation_mode=mode,
        replace_source_step=replace_step,
        clip_bound_mode=cor["clip_bound_mode"],
        clip_bound=_parse_typed("corrector", "clip_bound", cor["clip_bound"], float),
        xi_stream=_parse_typed("corrector", "xi_stream", cor["xi_stream"], int))

    exp = sections["experiment"]
    n_samples = _parse_typed("experiment", "n_samples", exp["n_samples"], int)
    if n_samples < 1:
        raise ConfigError(f"experiment.n_samples must be >= 1, got {n_samples}")
    return Scenario(sched=sched, grid=grid, model=model,
                    traps=_build_traps(trap_sections, grid),
                    det_cfg=det_cfg, corr_cfg=corr_cfg, n_samples=n_samples,
                    seed=_resolve_seed(sections), out_dir=exp["out_dir"],
                    sections=sections, trap_sections=trap_sections)


def _scenario_from_args(args: argparse.Namespace) -> Scenario:
    sections, trap_sections = _load_sections(args.config)
    _apply_overrides(sections, args)
    scn = _resolve(sections, trap_sections)
    # Echo the resolved seed so the effective config reproduces the run.
    scn.sections["experiment"]["seed"] = str(scn.seed)
    return scn


def _make_oracle(scn: Scenario):
    if scn.traps:
        return TrappedOracle(scn.model, scn.sched, scn.traps)
    return GmmOracle(scn.model, scn.sched)


def _one_sample(scn: Scenario, sample: int) -> RunResult:
    return run_corrected(_make_oracle(scn), scn.sched, scn.grid, scn.seed,
                         scn.det_cfg, scn.corr_cfg, sample=sample)


def _run_all(scn: Scenario, workers: int) -> list[RunResult]:
    if workers <= 1:
        return [_one_sample(scn, i) for i in range(scn.n_samples)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_one_sample, [scn] * scn.n_samples,
                             range(scn.n_samples)))


def _truth_mask(scn: Scenario) -> np.ndarray:
    _, h, w = scn.model.image_shape
    truth = np.zeros((h, w), dtype=bool)
    for trap in scn.traps:
        truth |= trap.mask(h, w)
    return truth


def _effective_ini(scn: Scenario) -> str:
    lines = []
    for name in _DEFAULTS:
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {v}" for k, v in scn.sections[name].items())
        lines.append("")
    for i, trap in enumerate(scn.trap_sections):
        lines.append(f"[trap:{i}]" if len(scn.trap_sections) > 1 else "[trap]")
        lines.extend(f"{k} = {v}" for k, v in trap.items() if k != "_section")
        lines.append("")
    return "\n".join(lines)


def _quality_block(scn: Scenario, finals: np.ndarray) -> dict:
    ref = sample_data(scn.model, scn.n_samples, seed=scn.seed)
    gen = SampleSet(finals, label="generated")
    real = SampleSet(ref, label="reference")
    block = {
        "sliced_w2": sliced_w2(gen, real, n_projections=128, seed=scn.seed),
        "mean_nll": float(np.mean(nll_under_model(scn.model, finals))),
    }
    if scn.n_samples >= 4:
        p, r = knn_precision_recall(real, gen, k=3)
        block["knn_precision"] = p
        block["knn_recall"] = r
    return block


def cmd_generate(args: argparse.Namespace) -> int:
    scn = _scenario_from_args(args)
    out = Path(scn.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()
    results = _run_all(scn, args.workers)
    t_run = time.perf_counter()

    truth = _truth_mask(scn)
    rows = []
    finals = np.stack([r.final for r in results])
    for i, res in enumerate(results):
        write_trace(res.trajectory, out / f"trace_{i:04d}.trace")
        heatmap_to_pgm(out / f"final_{i:04d}.pgm", res.final[0])
        mask_to_pgm(out / f"mask_{i:04d}.pgm", res.mask.mask)
        precision, recall, iou = detection_metrics(res.mask, truth)
        row = {
            "sample": i,
            "n_flagged": res.mask.n_flagged,
            "precision": precision,
            "recall": recall,
            "iou": iou,
            "nll": float(nll_under_model(scn.model, res.final)),
            "escaped": "",
        }
        if scn.traps:
            row["escaped"] = int(region_escaped(res.final, truth, scn.model))
        rows.append(row)

    report = {
        "method": scn.corr_cfg.method,
        "n_samples": scn.n_samples,
        "detection": {
            "precision": float(np.mean([r["precision"] for r in rows])),
            "recall": float(np.mean([r["recall"] for r in rows])),
            "iou": float(np.mean([r["iou"] for r in rows])),
        },
        "quality": _quality_block(scn, finals),
        "config": {**{k: dict(v) for k, v in scn.sections.items()},
                   "traps": [{k: v for k, v in t.items() if k != "_section"}
                             for t in scn.trap_sections]},
        "timing": {"run_s": t_run - t_start,
                   "total_s": time.perf_counter() - t_start},
    }
    if scn.traps:
        report["quality"]["escape_rate"] = float(
            np.mean([r["escaped"] for r in rows]))

    with open(out / f"report_{scn.corr_cfg.method}.json", "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    with open(out / "metrics.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    (out / "effective.ini").write_text(_effective_ini(scn))

    det = report["detection"]
    print(f"generated {scn.n_samples} samples (method={scn.corr_cfg.method}) -> {out}")
    print(f"detection precision={det['precision']:.4f} recall={det['recall']:.4f} "
          f"iou={det['iou']:.4f}; sliced_w2={report['quality']['sliced_w2']:.4f}")
    return 0


def cmd_sweep_tc(args: argparse.Namespace) -> int:
    fractions = []
    for part in args.fractions.split(","):
        part = part.strip()
        if not part:
            continue
        frac = _parse_typed("sweep", "fractions", part, float)
        if frac in fractions:
            print(f"warning: duplicate fraction {frac} ignored", file=sys.stderr)
            continue
        fractions.append(frac)
    if len(fractions) < 2:
        raise ConfigError(f"sweep needs at least 2 distinct fractions, got {len(fractions)}")

    scn = _scenario_from_args(args)
    if not scn.traps:
        raise ConfigError("sweep-tc needs at least one [trap] section in the config")
    out = Path(scn.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    truth = _truth_mask(scn)
    base_td = float(scn.sections["detector"]["td_frac"])
    base_tc = float(scn.sections["detector"]["tc_frac"])

    rows = []
    for frac in fractions:
        if not (0.0 < frac <= 1.0):
            raise ConfigError(f"sweep fraction must be in (0, 1], got {frac}")
        # Keep the configured window start unless the correction point
        # catches up to it; then slide the window, preserving its width.
        td_frac = base_td if frac < base_td else min(0.98, frac + (base_td - base_tc))
        det_cfg = DetectorConfig(
            t_detect_start=grid_step_at_fraction(scn.grid, td_frac, scn.sched.t_total),
            t_correct=grid_step_at_fraction(scn.grid, frac, scn.sched.t_total),
            mad_multiplier=scn.det_cfg.mad_multiplier,
            mean_bank_mode=scn.det_cfg.mean_bank_mode,
            channel_reduce=scn.det_cfg.channel_reduce,
            dilation_radius=scn.det_cfg.dilation_radius)
        sub = Scenario(**{**scn.__dict__, "det_cfg": det_cfg})
        results = _run_all(sub, args.workers)
        finals = np.stack([r.final for r in results])
        escape = float(np.mean([region_escaped(r.final, truth, scn.model)
                                for r in results]))
        quality = _quality_block(sub, finals)
        rows.append({
            "tc_frac": frac,
            "escape_rate": escape,
            "sliced_w2": quality["sliced_w2"],
            "knn_precision": quality.get("knn_precision", ""),
            "knn_recall": quality.get("knn_recall", ""),
        })
        print(f"tc_frac={frac:.3f} escape_rate={escape:.3f} "
              f"sliced_w2={quality['sliced_w2']:.4f}")

    with open(out / "sweep_tc.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {out / 'sweep_tc.csv'}")
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    sections, trap_sections = _load_sections(args.config)
    _apply_overrides(sections, args)
    det = sections["detector"]
    td_frac = _parse_typed("detector", "td_frac", det["td_frac"], float)
    tc_frac = _parse_typed("detector", "tc_frac", det["tc_frac"], float)
    if tc_frac >= td_frac:
        raise ConfigError(
            f"detector.td_frac ({td_frac}) must exceed detector.tc_frac ({tc_frac})")
    record = read_trace(args.trace)
    t_ref = int(record.timesteps[0])
    pseudo = StepGrid(nfe=record.n_steps,
                      timesteps=np.asarray(record.timesteps, dtype=np.int64))
    t_d = grid_step_at_fraction(pseudo, td_frac, t_ref)
    t_c = grid_step_at_fraction(pseudo, tc_frac, t_ref)
    bank = bank_from_trajectory(record, t_d, t_c)
    if len(bank) < 2:
        raise ConfigError(
            f"window [{t_c}, {t_d}] covers {len(bank)} of the trace's steps; "
            f"need at least 2")
    det_cfg = DetectorConfig(
        t_detect_start=t_d, t_correct=t_c,
        mad_multiplier=_parse_typed("detector", "mad_multiplier",
                                    det["mad_multiplier"], float),
        mean_bank_mode=det["mean_bank_mode"],
        channel_reduce=det["channel_reduce"],
        dilation_radius=_parse_typed("detector", "dilation_radius",
                                     det["dilation_radius"], int))
    mask = detect(bank, det_cfg)

    out = Path(args.out if args.out is not None else
               sections["experiment"]["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    mask_to_pgm(out / "mask.pgm", mask.mask)
    for k in range(bank.n_pairs):
        ta, tb = mask.pair_timesteps[k]
        heatmap_to_pgm(out / f"dynamics_{ta:04d}_{tb:04d}.pgm",
                       weighted_dynamics(bank, k, det_cfg))
    summary = {
        "trace": str(args.trace),
        "window": [int(t_d), int(t_c)],
        "n_flagged": mask.n_flagged,
        "bank_mean": mask.bank_mean,
        "taus": [float(v) for v in mask.taus],
        "pairs": [[int(a), int(b)] for a, b in mask.pair_timesteps],
    }
    if len(bank) >= 3:
        _, h, w = bank.image_shape
        ts, accel = acceleration_curve(bank, np.ones((h, w), dtype=bool))
        with open(out / "acceleration.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["t", "value"])
            writer.writerows([int(t), float(v)] for t, v in zip(ts, accel))
    with open(out / "ingest.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"flagged {mask.n_flagged} pixels over window [{t_d}, {t_c}] -> {out}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    paths = sorted(run_dir.glob("report_*.json"))
    if not paths:
        raise ConfigError(f"no report_*.json found in {run_dir}")
    reports = []
    for path in paths:
        with open(path) as f:
            reports.append(json.load(f))
    methods = [r.get("method", p.stem.removeprefix("report_"))
               for r, p in zip(reports, paths)]

    keys = []
    for rep in reports:
        for block in ("detection", "quality"):
            for key in rep.get(block, {}):
                full = f"{block}.{key}"
                if full not in keys:
                    keys.append(full)
    header = f"{'metric':<24}" + "".join(f"{m:>18}" for m in methods)
    print(header)
    print("-" * len(header))
    table_rows = []
    for full in keys:
        block, key = full.split(".", 1)
        cells = []
        for rep in reports:
            val = rep.get(block, {}).get(key)
            cells.append("" if val is None else f"{val:.6g}")
        print(f"{full:<24}" + "".join(f"{c:>18}" for c in cells))
        table_rows.append([full, *cells])
    with open(run_dir / "report_summary.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["metric", *methods])
        writer.writerows(table_rows)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="INI config file")
    common.add_argument("--seed", type=int, default=None,
                        help=f"run seed (falls back to config, then ${ENV_SEED})")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--workers", type=int, default=1,
                        help="parallel sample workers")
    common.add_argument("--method", default=None,
                        choices=["none", "ttc", "state_replace", "score_clip"])
    common.add_argument("--tc-frac", type=float, default=None,
                        help="correction step as a fraction of t_total")
    common.add_argument("--td-frac", type=float, default=None,
                        help="detection window start as a fraction of t_total")
    common.add_argument("--gamma", type=float, default=None,
                        help="perturbation intensity")
    common.add_argument("--perturbation", default=None,
                        choices=sorted(_PERTURBATION_ALIASES))

    parser = argparse.ArgumentParser(
        prog="artifact",
        description="Diffusion sampling engine with score-trap detection and correction")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common],
                       help="run rollouts, write traces, images, and a report")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("sweep-tc", parents=[common],
                       help="sweep the correction fraction on a trap scenario")
    p.add_argument("--fractions",
                   default="0.1,0.2,0.3,0.4,0.48,0.6,0.7,0.8,0.9",
                   help="comma-separated correction fractions")
    p.set_defaults(func=cmd_sweep_tc)

    p = sub.add_parser("ingest", parents=[common],
                       help="run offline detection on an ASCTRACE file")
    p.add_argument("trace", help="path to the trace file")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("report", parents=[common],
                       help="summarize reports in a run directory")
    p.add_argument("run_dir", help="directory holding report_*.json")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except (ConfigError, TraceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    raise SystemExit(main())
