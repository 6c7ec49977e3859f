"""
histfit: flux of repeated analog readings by photon-counting histogram fit.
"""

import json
import logging
from pathlib import Path

from commands.common import add_plot_argument, print_json, write_manifest
from commands.manifest import RunTimer
from components.charts import create_histogram_fit_figure, save_figure
from data.loader import read_samples_csv
from data.validators import DataValidator
from utils.analysis import histogram_fit

logger = logging.getLogger(__name__)


def register_command(subparsers):
    parser = subparsers.add_parser('histfit', help="fit λ to a photon counting histogram")
    parser.add_argument('--samples', required=True, help="CSV of analog readings (electrons)")
    parser.add_argument('--read-noise', type=float, required=True, help="read noise σ_read (e- rms)")
    parser.add_argument('--dt', default='1s', help="integration time per reading, e.g. 1ms")
    parser.add_argument('--dark', type=float, default=0.0, help="dark current (e-/s)")
    parser.add_argument('--bin-width', type=float, default=0.05, help="histogram bin width (e-)")
    parser.add_argument('--out', default=None, help="write the fit as JSON")
    add_plot_argument(parser)
    parser.set_defaults(handler=run)


def run(args) -> int:
    timer = RunTimer()
    samples = read_samples_csv(args.samples)
    duration = DataValidator.parse_duration(args.dt)
    fit = histogram_fit(samples, args.read_noise, dark_current=args.dark, duration=duration,
                        bin_width=args.bin_width)

    result = {'flux': fit.flux, 'theta': fit.theta, 'mse': fit.mse, 'samples': int(samples.size)}
    print_json(result)

    if args.plot:
        save_figure(create_histogram_fit_figure(fit, args.read_noise), args.plot)
    if args.out:
        Path(args.out).write_text(json.dumps(result, indent=2, sort_keys=True) + '\n', encoding='utf-8')
        write_manifest(args, args.out,
                       parameters={'read_noise': args.read_noise, 'duration': duration,
                                   'dark_current': args.dark, 'bin_width': args.bin_width},
                       timer=timer, inputs=[args.samples],
                       outputs=[args.out] + ([args.plot] if args.plot else []), extra=result)
    return 0
