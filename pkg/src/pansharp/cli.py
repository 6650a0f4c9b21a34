"""Command-line interface: ``pansharp {synth,degrade,fuse,experiment}``.

Exit status is 0 on success, 1 on processing errors and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .adjust import DEFAULT_BINS, AdjustmentMode
from .formats import load_image, save_image
from .fusion import METHODS, WEIGHT_SOURCES, FusionConfig, format_value, run_workflow
from .raster import equal_weights
from .resample import FilterSpec, degrade_wald
from .synth import make_scene, wald_setup

logger = logging.getLogger("pansharp")

# Row order of the method-comparison table.
DEFAULT_MODES = (
    "before",
    "before+mhm",
    "pc+wlow+mhm",
    "phm-full-low+pc+wlow+mhm",
    "phm-full-high+pc+wlow+mhm",
    "phm-simple-low+pc+wlow+mhm",
    "phm-simple-high+pc+wlow+mhm",
)
PER_BAND_MODE = "phm-simple-high+pc+wlow+mhm"
PAN_CORRECTION_MODES = (
    "before",
    "phm-full-low",
    "phm-full-high",
    "phm-simple-low",
    "phm-simple-high",
    "pc",
    "phm-full-low+pc",
    "phm-full-high+pc",
    "phm-simple-low+pc",
    "phm-simple-high+pc",
)
_WEIGHT_TOKENS = {"w0": "provider", "wlow": "estimated_low", "whigh": "estimated_high"}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class ModeSpec:
    """Correction settings parsed from a token such as ``phm-full-low+pc+wlow+mhm``."""

    adjustment: AdjustmentMode
    weight_source: str
    mhm: bool

    def config(self, method: str, spec: FilterSpec, epsilon: float, bins: int) -> FusionConfig:
        if method == "msi":
            return FusionConfig(method="msi", adjustment=AdjustmentMode(), weight_source="provider",
                                mhm=False, filter=spec, epsilon=epsilon, bins=bins)
        return FusionConfig(method=method, adjustment=self.adjustment, weight_source=self.weight_source,
                            mhm=self.mhm, filter=spec, epsilon=epsilon, bins=bins)


def parse_mode(token: str) -> ModeSpec:
    """Parse ``before``, ``pc``, ``mhm``, ``phm-{full|simple}-{low|high}``, ``w0|wlow|whigh`` joined by ``+``.

    Without a weight token the source is ``wlow`` when ``pc`` is present
    (the correction fits those weights) and ``w0`` otherwise.
    """
    phm, scale, pc, mhm, weights = "none", "low", False, False, None
    parts = [p.strip().lower() for p in token.split("+")]
    if not token.strip() or any(not p for p in parts):
        raise UsageError(f"empty component in mode {token!r}")
    for part in parts:
        if part == "before":
            continue
        if part == "pc":
            pc = True
        elif part == "mhm":
            mhm = True
        elif part in _WEIGHT_TOKENS:
            weights = _WEIGHT_TOKENS[part]
        elif part.startswith("phm-"):
            bits = part.split("-")
            if len(bits) != 3 or bits[1] not in ("full", "simple") or bits[2] not in ("low", "high"):
                raise UsageError(f"bad histogram-matching token {part!r}")
            phm, scale = bits[1], bits[2]
        else:
            raise UsageError(f"unknown mode component {part!r} in {token!r}")
    if weights is None:
        weights = "estimated_low" if pc else "provider"
    return ModeSpec(AdjustmentMode(phm, scale, pc), weights, mhm)


def _threads(requested: int | None) -> int:
    if requested is None:
        env = os.environ.get("PANSHARP_THREADS")
        requested = int(env) if env else 1
    return max(1, requested)


def _filter_spec(args, ratio: int) -> FilterSpec:
    return FilterSpec(kind=args.filter, ratio=ratio, cutoff=args.cutoff, order=args.filter_order)


def _load_weights(path, n_bands: int) -> np.ndarray:
    try:
        with open(path, encoding="utf-8") as fh:
            values = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read weights file {path}: {exc}") from exc
    if not isinstance(values, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                               for v in values):
        raise UsageError(f"weights file {path} must hold a JSON array of numbers")
    if len(values) != n_bands:
        raise UsageError(f"weights file {path} has {len(values)} values, expected K={n_bands}")
    w = np.asarray(values, dtype=np.float64)
    if np.any(w < 0) or np.any(w > 1):
        raise UsageError("weights must lie in [0, 1]")
    return w


def _infer_ratio(ms: np.ndarray, pan: np.ndarray, ratio: int | None) -> int:
    h, w = ms.shape[1:]
    if ratio is None:
        if pan.shape[0] % h or pan.shape[0] // h != pan.shape[1] // w:
            raise UsageError(f"cannot infer ratio from MS {h}x{w} and Pan {pan.shape[0]}x{pan.shape[1]}")
        ratio = pan.shape[0] // h
    if pan.shape != (h * ratio, w * ratio):
        raise UsageError(f"Pan {pan.shape[0]}x{pan.shape[1]} is not MS {h}x{w} times ratio {ratio}")
    return ratio


def _write_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerows(rows)


# --------------------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    scene = make_scene(args.seed, size=args.size, pan_ratio=args.pan_ratio, n_bands=args.bands)
    os.makedirs(args.out, exist_ok=True)
    save_image(scene.ms, os.path.join(args.out, "ms"))
    save_image(scene.pan, os.path.join(args.out, "pan"))
    with open(os.path.join(args.out, "provider_weights.json"), "w", encoding="utf-8") as fh:
        json.dump([float(v) for v in scene.provider_weights], fh)
        fh.write("\n")
    return 0


def cmd_degrade(args) -> int:
    ms = load_image(args.ms)
    pan = load_image(args.pan)
    if pan.shape[0] != 1:
        raise UsageError(f"--pan must be a single band, got {pan.shape[0]}")
    pan = pan[0]
    pan_ratio = args.pan_ratio or args.ratio
    spec_ms = _filter_spec(args, args.ratio)
    spec_pan = _filter_spec(args, pan_ratio)
    ms_lr, pan_lr = degrade_wald(ms, pan, spec_ms, spec_pan)
    os.makedirs(args.out, exist_ok=True)
    save_image(ms_lr, os.path.join(args.out, "ms_lr"))
    save_image(pan_lr, os.path.join(args.out, "pan_lr"))
    provenance = {
        "ms": os.fspath(args.ms),
        "pan": os.fspath(args.pan),
        "ms_ratio": args.ratio,
        "pan_ratio": pan_ratio,
        "filter": {"kind": args.filter, "order": args.filter_order,
                   "ms_cutoff": spec_ms.effective_cutoff, "pan_cutoff": spec_pan.effective_cutoff},
        "ms_lr_shape": list(ms_lr.shape),
        "pan_lr_shape": list(pan_lr.shape),
    }
    with open(os.path.join(args.out, "provenance.json"), "w", encoding="utf-8") as fh:
        json.dump(provenance, fh, indent=2)
        fh.write("\n")
    return 0


def cmd_fuse(args) -> int:
    ms = load_image(args.ms)
    pan = load_image(args.pan)
    if pan.shape[0] != 1:
        raise UsageError(f"--pan must be a single band, got {pan.shape[0]}")
    pan = pan[0]
    ratio = _infer_ratio(ms, pan, args.ratio)
    w0 = _load_weights(args.weights, ms.shape[0]) if args.weights else equal_weights(ms.shape[0])
    reference = load_image(args.reference) if args.reference else None

    if args.method == "msi":
        ignored = [flag for flag, on in (("--phm", args.phm != "none"), ("--pc", args.pc),
                                         ("--mhm", args.mhm)) if on]
        if ignored:
            print(f"warning: corrections do not apply to msi; ignoring {', '.join(ignored)}", file=sys.stderr)
        config = ModeSpec(AdjustmentMode(), "provider", False).config(
            "msi", _filter_spec(args, ratio), args.epsilon, args.bins)
    else:
        config = FusionConfig(
            method=args.method,
            adjustment=AdjustmentMode(args.phm, args.phm_scale, args.pc),
            weight_source=args.weight_source,
            mhm=args.mhm,
            filter=_filter_spec(args, ratio),
            epsilon=args.epsilon,
            bins=args.bins,
            literal_multiplicative=args.literal_multiplicative,
        )
    fused, report = run_workflow(ms, pan, config, w0, reference)

    os.makedirs(args.out, exist_ok=True)
    save_image(fused, os.path.join(args.out, "fused"))
    n = ms.shape[0]
    header = ["mode", "method"] + [f"band_{k + 1}" for k in range(n)] + ["mean", "pan_rmse_interp",
                                                                           "pan_rmse_low"]
    if report.rmse is not None:
        values = list(report.rmse.per_band) + [report.rmse.mean]
    else:
        values = [float("nan")] * (n + 1)
    values += [report.pan_rmse_interp, report.pan_rmse_low]
    _write_csv(os.path.join(args.out, "report.csv"),
               [header, [report.label, report.method] + [format_value(v) for v in values]])
    with open(os.path.join(args.out, "weights.json"), "w", encoding="utf-8") as fh:
        json.dump([float(v) for v in report.weights], fh)
        fh.write("\n")
    return 0


@dataclass(frozen=True)
class _Scene:
    ms_lr: np.ndarray
    pan_hr: np.ndarray
    reference: np.ndarray
    w0: np.ndarray


def _experiment_scenes(args, spec_template: FilterSpec) -> list[_Scene]:
    if args.ms or args.pan:
        if not (args.ms and args.pan):
            raise UsageError("--ms and --pan must be given together")
        ms = load_image(args.ms)
        pan = load_image(args.pan)
        if pan.shape[0] != 1:
            raise UsageError(f"--pan must be a single band, got {pan.shape[0]}")
        w0 = _load_weights(args.weights, ms.shape[0]) if args.weights else equal_weights(ms.shape[0])
        setups = [(wald_setup(ms, pan[0], args.ratio, spec_template), w0)]
    else:
        setups = []
        for s in range(args.seed, args.seed + args.seeds):
            scene = make_scene(s, size=args.size)
            setups.append((wald_setup(scene.ms, scene.pan, args.ratio, spec_template), scene.provider_weights))
    return [_Scene(ws.ms_lr, ws.pan_hr, ws.reference, w0) for ws, w0 in setups]


def _run_jobs(jobs, threads: int):
    """Run ``(scene, config)`` jobs; returns reports or exceptions in job order."""

    def run(job):
        scene, config = job
        try:
            return run_workflow(scene.ms_lr, scene.pan_hr, config, scene.w0, scene.reference)[1]
        except Exception as exc:  # recorded per row
            logger.error("%s / %s failed: %s", config.label, config.method, exc)
            return exc

    if threads == 1:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, jobs))


def _mean_reports(reports):
    """Average RMSE fields over scenes; returns ``None`` if any run failed."""
    if any(isinstance(r, Exception) for r in reports):
        return None
    per_band = np.mean([r.rmse.per_band for r in reports], axis=0)
    return {
        "per_band": per_band,
        "mean": float(np.mean([r.rmse.mean for r in reports])),
        "pan_high": float(np.mean([r.pan_rmse_high for r in reports])),
        "pan_low": float(np.mean([r.pan_rmse_low for r in reports])),
        "label": reports[0].label,
    }


def cmd_experiment(args) -> int:
    modes = [m for m in (args.modes or "").split(",") if m.strip()] if args.modes is not None else list(DEFAULT_MODES)
    if not modes:
        raise UsageError("mode list is empty")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()] if args.methods else list(METHODS)
    if not methods:
        raise UsageError("method list is empty")
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}")
    mode_specs = [parse_mode(m) for m in modes]
    pc_specs = [parse_mode(m) for m in PAN_CORRECTION_MODES]
    band_spec = parse_mode(args.per_band_mode)

    template = _filter_spec(args, args.ratio)
    scenes = _experiment_scenes(args, template)
    threads = _threads(args.threads)

    # Every (table row, scene) pair is one job; results are regrouped in order.
    jobs, slots = [], []

    def add(key, config):
        for scene in scenes:
            jobs.append((scene, config))
            slots.append(key)

    for i, ms_ in enumerate(pc_specs):
        # Correction rows report intensity with the fitted weights, the rest with W_0.
        ws = "estimated_low" if ms_.adjustment.pc else "provider"
        add(("pc", i), FusionConfig(method="cs_m", adjustment=ms_.adjustment, weight_source=ws,
                                    mhm=False, filter=template, epsilon=args.epsilon, bins=args.bins))
    for i, ms_ in enumerate(mode_specs):
        for method in methods:
            if method == "msi" and not _is_before(ms_):
                continue
            add(("cmp", i, method), ms_.config(method, template, args.epsilon, args.bins))
    for method in methods:
        spec_ = parse_mode("before") if method == "msi" else band_spec
        add(("band", method), spec_.config(method, template, args.epsilon, args.bins))
    if args.weights_grid:
        grid = _weights_grid_specs()
        for i, ms_ in enumerate(grid):
            add(("grid", i), ms_.config("cs_m", template, args.epsilon, args.bins))

    results = _run_jobs(jobs, threads)
    grouped: dict = {}
    for key, rep in zip(slots, results):
        grouped.setdefault(key, []).append(rep)
    failed = any(isinstance(r, Exception) for r in results)

    os.makedirs(args.out, exist_ok=True)
    n_bands = scenes[0].ms_lr.shape[0]

    rows = [["mode", "rmse_high", "rmse_low"]]
    for i in range(len(pc_specs)):
        agg = _mean_reports(grouped[("pc", i)])
        label = pc_specs[i].adjustment.label
        rows.append([label] + (["error", "error"] if agg is None else
                               [format_value(agg["pan_high"]), format_value(agg["pan_low"])]))
    _write_csv(os.path.join(args.out, "pan_correction.csv"), rows)

    rows = [["mode"] + [_METHOD_TITLES[m] for m in methods]]
    for i, ms_ in enumerate(mode_specs):
        label = ms_.config("cs_m", template, args.epsilon, args.bins).label
        row = [label]
        for method in methods:
            reps = grouped.get(("cmp", i, method))
            if reps is None:
                row.append("-")
                continue
            agg = _mean_reports(reps)
            row.append("error" if agg is None else format_value(agg["mean"]))
        rows.append(row)
    _write_csv(os.path.join(args.out, "method_comparison.csv"), rows)

    aggs = {m: _mean_reports(grouped[("band", m)]) for m in methods}
    rows = [["band"] + [_METHOD_TITLES[m] for m in methods]]
    for k in range(n_bands):
        rows.append([str(k + 1)] + ["error" if aggs[m] is None else format_value(aggs[m]["per_band"][k])
                                    for m in methods])
    rows.append(["Mean of all bands"] + ["error" if aggs[m] is None else format_value(aggs[m]["mean"])
                                         for m in methods])
    _write_csv(os.path.join(args.out, "per_band.csv"), rows)

    if args.weights_grid:
        rows = [["pan_histogram_matching", "pan_correction", "weights", "rmse", "rmse_mhm"]]
        grid = _weights_grid_specs()
        for i in range(0, len(grid), 2):
            plain, matched = (_mean_reports(grouped[("grid", j)]) for j in (i, i + 1))
            adj = grid[i].adjustment
            phm = "-" if adj.phm == "none" else f"{adj.phm.capitalize()}, {adj.phm_scale}"
            rows.append([phm, "+" if adj.pc else "-", _WEIGHT_TITLES[grid[i].weight_source]]
                        + ["error" if a is None else format_value(a["mean"]) for a in (plain, matched)])
        _write_csv(os.path.join(args.out, "weights_grid.csv"), rows)

    return 1 if failed else 0


_METHOD_TITLES = {"msi": "MSI", "cs_a": "CS a", "cs_m": "CS m", "hpf_a": "HPF a", "hpf_m": "HPF m"}
_WEIGHT_TITLES = {"provider": "W_0", "estimated_low": "W_low", "estimated_high": "W_high"}


def _is_before(spec: ModeSpec) -> bool:
    return spec.adjustment == AdjustmentMode() and not spec.mhm and spec.weight_source == "provider"


def _weights_grid_specs() -> list[ModeSpec]:
    """cs_m parameter grid: PHM variant x PC x weight source, each without and with MHM."""
    specs = []
    for phm, scale in (("none", "low"), ("full", "low"), ("full", "high"), ("simple", "low"), ("simple", "high")):
        for pc in (False, True):
            for ws in WEIGHT_SOURCES:
                for mhm in (False, True):
                    specs.append(ModeSpec(AdjustmentMode(phm, scale, pc), ws, mhm))
    return specs


# --------------------------------------------------------------------------- parser


def _add_filter_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--filter", choices=("butterworth", "boxcar"), default="butterworth",
                   help="low-pass filter kind (default: butterworth)")
    p.add_argument("--filter-order", type=int, default=5, help="Butterworth order (default: 5)")
    p.add_argument("--cutoff", type=float, default=None,
                   help="cutoff in cycles/sample (default: 0.5 / ratio)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pansharp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a seeded synthetic MS/Pan scene")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=128, help="MS size in pixels")
    p.add_argument("--pan-ratio", type=int, default=4)
    p.add_argument("--bands", type=int, default=8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("degrade", help="reduce MS and Pan resolution (Wald protocol)")
    p.add_argument("--ms", required=True, help="MS image base path")
    p.add_argument("--pan", required=True, help="Pan image base path or .pgm")
    p.add_argument("--ratio", type=int, default=2, help="MS reduction factor")
    p.add_argument("--pan-ratio", type=int, default=None, help="Pan reduction factor (default: --ratio)")
    _add_filter_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("fuse", help="pansharpen one MS/Pan pair")
    p.add_argument("--ms", required=True)
    p.add_argument("--pan", required=True)
    p.add_argument("--ratio", type=int, default=None, help="Pan/MS ratio (default: inferred)")
    p.add_argument("--method", choices=METHODS, default="cs_m")
    p.add_argument("--phm", choices=("none", "full", "simple"), default="none")
    p.add_argument("--phm-scale", choices=("low", "high"), default="low")
    p.add_argument("--pc", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--mhm", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--weights", help="provider weights: JSON array of K numbers (default: 1/K)")
    p.add_argument("--weight-source", choices=WEIGHT_SOURCES, default="estimated_low")
    p.add_argument("--reference", help="reference MS for RMSE reporting")
    p.add_argument("--literal-multiplicative", action="store_true",
                   help="multiplicative variants add P/I instead of scaling by it")
    _add_filter_args(p)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--epsilon", type=float, default=1e-6, help="safe-divide floor, fraction of Pan range")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("experiment", help="run the reduced-resolution comparison grid")
    p.add_argument("--spec", help="JSON file with default values for any of these options")
    p.add_argument("--ms", help="original-resolution MS (default: synthetic scene)")
    p.add_argument("--pan", help="original-resolution Pan")
    p.add_argument("--weights", help="provider weights JSON for --ms/--pan")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=1, help="number of synthetic scenes to average")
    p.add_argument("--size", type=int, default=128, help="synthetic MS size")
    p.add_argument("--ratio", type=int, default=2, help="MS reduction / fusion ratio")
    p.add_argument("--modes", default=None,
                   help="comma-separated mode tokens, e.g. before,pc+wlow+mhm (default: comparison table rows)")
    p.add_argument("--methods", default=None, help="comma-separated methods (default: all)")
    p.add_argument("--per-band-mode", default=PER_BAND_MODE)
    p.add_argument("--weights-grid", action="store_true", help="also write the cs_m parameter grid")
    _add_filter_args(p)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: $PANSHARP_THREADS or 1)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)
    return parser


def _apply_spec_file(parser, args, argv) -> None:
    """Fill options not given on the command line from ``--spec``."""
    with open(args.spec, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise UsageError("experiment spec must be a JSON object")
    given = {a.split("=")[0] for a in argv if a.startswith("--")}
    for key, value in doc.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest) or dest in ("func", "command", "spec"):
            raise UsageError(f"unknown experiment spec key {key!r}")
        if "--" + dest.replace("_", "-") in given:
            continue
        if dest in ("modes", "methods") and isinstance(value, list):
            value = ",".join(value)
        setattr(args, dest, value)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if getattr(args, "spec", None):
            _apply_spec_file(parser, args, argv)
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
