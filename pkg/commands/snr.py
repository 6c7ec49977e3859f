"""
snr: exposure-referred SNR curves as CSV.
"""

import logging
from pathlib import Path

import numpy as np

from commands.common import (add_cis_arguments, add_plot_argument, add_schedule_arguments,
                             add_sensor_arguments, build_curve, curve_parameters, default_flux_grid,
                             grid_from_text, resolve_cis, resolve_schedule, resolve_sensor, write_manifest)
from commands.manifest import RunTimer
from components.charts import create_response_curve_figure, create_snr_curve_figure, save_figure
from data.writer import write_curve_csv
from utils.analysis import qis_snr_curve
from utils.cis_model import cis_response_curve
from utils.sensor_stats import response_curve

logger = logging.getLogger(__name__)

RESPONSE_POINTS = 512


def register_command(subparsers):
    parser = subparsers.add_parser('snr', help="tabulate SNR curves")
    parser.add_argument('--grid', default=None, help="flux grid 'lo:hi:n' (log-spaced, photons/s)")
    parser.add_argument('--out', required=True, help="output CSV")
    mode = parser.add_mutually_exclusive_group()
    mode.add_argument('--fused', dest='mode', action='store_const', const='fused',
                      help="one fused curve for the whole schedule (default)")
    mode.add_argument('--per-exposure', dest='mode', action='store_const', const='per-exposure',
                      help="one curve per exposure, written as <out>_e<m>.csv when M > 1")
    parser.add_argument('--weights', choices=('optimal', 'equal', 'cis'), default='optimal',
                        help="weight rule of the fused curve")
    parser.add_argument('--response', default=None,
                        help="write the sensor tone curve (expected output against θ) as HTML")
    add_sensor_arguments(parser)
    add_schedule_arguments(parser, required=True)
    add_cis_arguments(parser)
    add_plot_argument(parser)
    parser.set_defaults(handler=run, mode='fused')


def _per_exposure_curves(args):
    params = resolve_sensor(args)
    schedule = resolve_schedule(args)
    grid = grid_from_text(args.grid) if args.grid else default_flux_grid(schedule, params.clip_level)
    return [qis_snr_curve(params, group.duration, group.frames, grid) for group in schedule.groups]


def _response_figure(args):
    """Tone curve of the QIS, or of the linear CIS with --cis, up to ten times its clip level."""
    if args.cis:
        cis = resolve_cis(args)
        theta = np.geomspace(1e-2, 10.0 * cis.full_well, RESPONSE_POINTS)
        return create_response_curve_figure(theta, [cis_response_curve(theta, cis)],
                                            [f"CIS, full well {cis.full_well} e-"])
    params = resolve_sensor(args)
    theta = np.geomspace(1e-2, 10.0 * params.clip_level, RESPONSE_POINTS)
    return create_response_curve_figure(theta, [response_curve(theta, params)],
                                        [f"QIS, L={params.clip_level}, σ={params.read_noise:g}"])


def run(args) -> int:
    timer = RunTimer()
    out = Path(args.out)

    if args.mode == 'per-exposure' and not args.cis:
        curves = _per_exposure_curves(args)
        if len(curves) == 1:
            paths = [write_curve_csv(curves[0], out)]
        else:
            paths = [write_curve_csv(curve, out.with_name(f"{out.stem}_e{m + 1}{out.suffix}"))
                     for m, curve in enumerate(curves)]
        labels = [f"exposure {m + 1}" for m in range(len(curves))]
    else:
        curves = [build_curve(args)]
        paths = [write_curve_csv(curves[0], out)]
        labels = ["fused" if len(curves[0].provenance.get('schedule', [])) > 1 else "SNR"]

    outputs = [str(path) for path in paths]
    if args.plot:
        save_figure(create_snr_curve_figure(curves, labels=labels), args.plot)
        outputs.append(args.plot)
    if args.response:
        save_figure(_response_figure(args), args.response)
        outputs.append(args.response)
        logger.info(f"✓ Wrote tone curve to {args.response}")

    write_manifest(args, paths[0], parameters={**curve_parameters(args), 'mode': args.mode},
                   timer=timer, outputs=outputs)
    return 0
