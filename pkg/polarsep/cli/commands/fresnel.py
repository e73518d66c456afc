"""
Fresnel Command

``fresnel-curve`` tabulates reflected and transmitted DoP over incidence
angle.
"""

import argparse
import logging
import math

from polarsep.cli.commands import add_output_dir, flag_values
from polarsep.io.sidecar import RunMetadata, write_csv
from polarsep.services.fresnel import brewster_angle, dop_crossover_angle, dop_curve

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("fresnel-curve", help="DoP of reflected and transmitted light")
    parser.add_argument("--n", type=float, default=1.7, help="refractive index")
    parser.add_argument("--samples", type=int, default=91, help="grid points over [0, 90] degrees")
    parser.add_argument("--plot", default=None, help="also save a PNG plot under --out-dir")
    add_output_dir(parser)
    parser.set_defaults(handler=run_fresnel_curve)


def run_fresnel_curve(args: argparse.Namespace, metadata: RunMetadata) -> None:
    metadata.config = {"n": args.n, "samples": args.samples}
    with flag_values():
        curve = dop_curve(args.n, args.samples)
    write_csv(args.out_dir / "fresnel_curve.csv", curve)
    metadata.outputs.append("fresnel_curve.csv")

    peak = curve.loc[curve["rho_r"].idxmax()]
    metadata.results = {
        "brewster_deg": math.degrees(brewster_angle(args.n)),
        "crossover_deg": math.degrees(dop_crossover_angle(args.n)),
        "peak_rho_r": float(peak["rho_r"]),
        "peak_theta_deg": float(peak["theta_deg"]),
    }
    if args.plot:
        from polarsep.io.plots import plot_dop_curve

        plot_dop_curve(curve, args.out_dir / args.plot, args.n)
        metadata.outputs.append(args.plot)
    print(f"fresnel-curve: rho_r peaks at {metadata.results['peak_rho_r']:.4f} "
          f"at {metadata.results['peak_theta_deg']:g} deg")
