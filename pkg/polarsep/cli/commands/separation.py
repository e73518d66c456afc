"""
Separation Commands

``separate`` runs the two-stage separator on one or more mixed stacks and
writes the reflection estimate, the transmission intensity and the
objective traces. ``pncc-curve`` sweeps the mixing coefficient between a
reflection and a transmission image and tabulates the PNCC loss.
"""

import argparse
import logging
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from polarsep.cli.commands import add_output_dir, add_sensor_options, flag_values
from polarsep.cli.inputs import load_image, load_stack
from polarsep.io.png16 import write_png16
from polarsep.io.sidecar import RunMetadata, write_csv, write_metadata
from polarsep.io.tensor_file import write_tensor
from polarsep.models.losses import FeaturePyramidSpec
from polarsep.models.polarization import MosaicPattern
from polarsep.models.separation import SeparationResult, SeparatorConfig
from polarsep.services.losses import DEFAULT_ALPHAS, pncc_curve
from polarsep.services.separation import separate
from polarsep.utils.validation import SolverError

logger = logging.getLogger(__name__)


def _alpha_list(text: str) -> List[float]:
    try:
        alphas = [float(part) for part in text.split(",")]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"alphas must be comma-separated numbers (got {text!r})") from e
    if not all(0.0 < alpha <= 1.0 for alpha in alphas):
        raise argparse.ArgumentTypeError(f"alphas must lie in (0, 1] (got {text!r})")
    return alphas


def _factor_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",")]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"pyramid factors must be comma-separated integers (got {text!r})") from e


def register(subparsers) -> None:
    sep = subparsers.add_parser("separate", help="separate reflection and transmission")
    sep.add_argument("--in", dest="input", nargs="+", type=Path, required=True, help="mixed stacks or mosaics")
    sep.add_argument("--lambda-pol", type=float, default=1.0)
    sep.add_argument("--lambda-pncc", type=float, default=0.1)
    sep.add_argument("--lambda-tv", type=float, default=0.01)
    sep.add_argument("--lambda-prox", type=float, default=10.0)
    sep.add_argument("--step-size", type=float, default=0.1)
    sep.add_argument("--max-iters", type=int, default=500)
    sep.add_argument("--tol", type=float, default=1e-6)
    sep.add_argument("--pyramid", type=_factor_list, default=None, help="decimation factors, e.g. 2,4,8")
    sep.add_argument("--seed", type=int, default=0)
    add_sensor_options(sep)
    add_output_dir(sep)
    sep.set_defaults(handler=run_separate)

    curve = subparsers.add_parser("pncc-curve", help="PNCC of T + (1-alpha)R against alpha*R")
    curve.add_argument("--r", type=Path, required=True, help="reflection image")
    curve.add_argument("--t", type=Path, required=True, help="transmission image")
    curve.add_argument("--alphas", type=_alpha_list, default=None, help="comma-separated alpha grid")
    curve.add_argument("--raw", action="store_true", help="skip min-max normalization")
    curve.add_argument("--plot", default=None, help="also save a PNG plot under --out-dir")
    add_output_dir(curve)
    curve.set_defaults(handler=run_pncc_curve)


def _separator_config(args: argparse.Namespace) -> SeparatorConfig:
    options: Dict[str, Any] = {
        "lambda_pol": args.lambda_pol,
        "lambda_pncc": args.lambda_pncc,
        "lambda_tv": args.lambda_tv,
        "lambda_prox": args.lambda_prox,
        "step_size": args.step_size,
        "max_iters": args.max_iters,
        "tol": args.tol,
        "seed": args.seed,
    }
    if args.pyramid is not None:
        options["pyramid"] = FeaturePyramidSpec.from_factors(args.pyramid)
    return SeparatorConfig(**options)


def _trace_frame(result: SeparationResult) -> pd.DataFrame:
    rows = [
        {"stage": stage, "iteration": i, "objective": value}
        for stage, values in result.objective_trace.items()
        for i, value in enumerate(values)
    ]
    return pd.DataFrame(rows, columns=["stage", "iteration", "objective"])


def _write_result(out_dir: Path, result: SeparationResult) -> List[str]:
    write_tensor(out_dir / "R_hat.pmrt", result.R_hat.channels.astype(np.float32))
    write_tensor(out_dir / "T_hat.pmrt", result.T_hat.astype(np.float32))
    preview = np.clip(np.rint(result.T_hat), 0, 2**16 - 1).astype(np.uint16)
    write_png16(out_dir / "T_hat.png", preview)
    write_csv(out_dir / "trace.csv", _trace_frame(result))
    return ["R_hat.pmrt", "T_hat.pmrt", "T_hat.png", "trace.csv"]


def _result_summary(result: SeparationResult) -> Dict[str, Any]:
    return {
        "converged": result.converged,
        "stage1_iterations": max(len(result.stage1_trace) - 1, 0),
        "stage2_iterations": max(len(result.stage2_trace) - 1, 0),
        "pncc_before": result.pncc_before,
        "pncc_after": result.pncc_after,
        "dop_histogram": list(result.dop_histogram),
        "dop_bin_edges": list(result.dop_bin_edges),
        "suspect_polarized_transmission": result.suspect_polarized_transmission,
        "scale": result.scale,
    }


def _separate_one(
    path: Path,
    out_dir: Path,
    cfg: SeparatorConfig,
    bit_depth: int,
    pattern: MosaicPattern,
    written: List[str],
) -> Dict[str, Any]:
    """
    Separate one input into ``out_dir``.

    Names of the files written are appended to ``written``, including the
    partial outputs saved before a SolverError propagates.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    M = load_stack(path, bit_depth, pattern)
    try:
        result = separate(M, cfg)
    except SolverError as e:
        if e.partial is not None:
            written.extend(_write_result(out_dir, e.partial))
        raise
    written.extend(_write_result(out_dir, result))
    return {"input": str(path), "outputs": list(written), **_result_summary(result)}


def _separate_item(
    index: int,
    path: Path,
    out_dir: Path,
    cfg: SeparatorConfig,
    bit_depth: int,
    pattern: MosaicPattern,
) -> Dict[str, Any]:
    item_dir = out_dir / f"{index:04d}_{path.stem}"
    item_meta = RunMetadata(
        command="separate",
        seed=cfg.seed,
        inputs={"mixed": path},
        config=cfg.model_dump(),
    )
    summary: Dict[str, Any] = {"input": str(path), "dir": str(item_dir)}
    written: List[str] = []
    try:
        summary.update(_separate_one(path, item_dir, cfg, bit_depth, pattern, written))
        item_meta.results = summary
    except SolverError as e:
        logger.error(f"Separation of {path} failed in the solver: {e}")
        item_meta.status = summary["status"] = "solver_error"
        item_meta.error = summary["error"] = str(e)
    finally:
        item_meta.outputs = written
        item_dir.mkdir(parents=True, exist_ok=True)
        write_metadata(item_dir / "metadata.json", item_meta)
    return summary


def run_separate(args: argparse.Namespace, metadata: RunMetadata) -> None:
    with flag_values():
        cfg = _separator_config(args)
    metadata.inputs = {"mixed": [str(p) for p in args.input]}
    metadata.config = {**cfg.model_dump(), "bit_depth": args.bit_depth, "pattern": args.pattern}

    if len(args.input) == 1:
        written: List[str] = []
        try:
            summary = _separate_one(args.input[0], args.out_dir, cfg, args.bit_depth, args.pattern, written)
        finally:
            metadata.outputs.extend(written)
        metadata.results = summary
        print(f"separate: converged={summary['converged']}, "
              f"{summary['stage1_iterations']}+{summary['stage2_iterations']} iterations")
        return

    summaries = Parallel(n_jobs=args.workers)(
        delayed(_separate_item)(i, path, args.out_dir, cfg, args.bit_depth, args.pattern)
        for i, path in enumerate(args.input)
    )
    metadata.outputs.extend(Path(s["dir"]).name for s in summaries)
    metadata.results = {"items": summaries}
    failed = [s["input"] for s in summaries if s.get("status") == "solver_error"]
    print(f"separate: {len(summaries) - len(failed)} of {len(summaries)} inputs separated")
    if failed:
        raise SolverError(f"{len(failed)} input(s) failed: {', '.join(failed)}")


def run_pncc_curve(args: argparse.Namespace, metadata: RunMetadata) -> None:
    metadata.inputs = {"reflection": args.r, "transmission": args.t}
    metadata.config = {"alphas": args.alphas or DEFAULT_ALPHAS, "normalize": not args.raw}
    curve = pncc_curve(load_image(args.r), load_image(args.t), args.alphas, normalize=not args.raw)
    write_csv(args.out_dir / "pncc_curve.csv", curve)
    metadata.outputs.append("pncc_curve.csv")

    steps = np.diff(curve["pncc"].to_numpy())
    metadata.results = {
        "min_pncc": float(curve["pncc"].min()),
        "max_pncc": float(curve["pncc"].max()),
        "monotone_fraction": float(np.mean(steps <= 0)) if len(steps) else 1.0,
    }
    if args.plot:
        from polarsep.io.plots import plot_pncc_curve

        plot_pncc_curve(curve, args.out_dir / args.plot)
        metadata.outputs.append(args.plot)
    print(f"pncc-curve: {len(curve)} points, PNCC in [{metadata.results['min_pncc']:.4f}, "
          f"{metadata.results['max_pncc']:.4f}]")
