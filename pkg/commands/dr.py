"""
dr: dynamic range of a stored or freshly computed SNR curve.
"""

import logging

from commands.common import (add_cis_arguments, add_plot_argument, add_schedule_arguments,
                             add_sensor_arguments, build_curve, curve_parameters, print_json,
                             write_manifest)
from commands.manifest import RunTimer
from components.charts import create_dynamic_range_figure, save_figure
from data.loader import read_curve_csv
from data.writer import write_report_csv
from utils.analysis import dynamic_range

logger = logging.getLogger(__name__)


def register_command(subparsers):
    parser = subparsers.add_parser('dr', help="dynamic range report")
    parser.add_argument('--curve', default=None, help="SNR curve CSV; otherwise computed from the flags")
    parser.add_argument('--threshold', type=float, default=0.0, help="SNR threshold in dB")
    parser.add_argument('--grid', default=None, help="flux grid 'lo:hi:n' for computed curves")
    parser.add_argument('--weights', choices=('optimal', 'equal', 'cis'), default='optimal',
                        help="weight rule when several exposures are fused")
    parser.add_argument('--out', default=None, help="write the report as CSV")
    add_sensor_arguments(parser)
    add_schedule_arguments(parser)
    add_cis_arguments(parser)
    add_plot_argument(parser)
    parser.set_defaults(handler=run)


def run(args) -> int:
    timer = RunTimer()
    if args.curve:
        curve = read_curve_csv(args.curve)
        parameters = {'curve': args.curve}
    else:
        curve = build_curve(args)
        parameters = curve_parameters(args)

    report = dynamic_range(curve, threshold_db=args.threshold)
    print_json(report.to_dict())

    if args.plot:
        save_figure(create_dynamic_range_figure(curve, report), args.plot)
    if args.out:
        write_report_csv(report, args.out)
        outputs = [args.out] + ([args.plot] if args.plot else [])
        write_manifest(args, args.out, parameters={**parameters, 'threshold_db': args.threshold},
                       timer=timer, inputs=[args.curve] if args.curve else [], outputs=outputs,
                       extra=report.to_dict())
    return 0
