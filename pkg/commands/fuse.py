"""
fuse: frame stack -> HDR radiance estimate.
"""

import logging

from commands.common import add_plot_argument, print_json, write_manifest
from commands.manifest import RunTimer
from components.charts import create_convergence_figure, save_figure
from data.loader import read_pfm, read_stack
from data.writer import write_pfm, write_weight_maps
from utils.analysis import lmse
from utils.hdr_fusion import METHODS, FusionConfig, HdrReconstructor

logger = logging.getLogger(__name__)


def register_command(subparsers):
    parser = subparsers.add_parser('fuse', help="reconstruct an HDR image from a frame stack")
    parser.add_argument('--stack', required=True, help="input stack container")
    parser.add_argument('--out', required=True, help="output radiance map (PFM)")
    parser.add_argument('--method', choices=METHODS, default='proposed', help="weighting rule")
    parser.add_argument('--max-iter', type=int, default=10, help="iteration budget of the proposed method")
    parser.add_argument('--tol', type=float, default=1e-6, help="relative change that stops the iteration")
    parser.add_argument('--lut-points', type=int, default=2048, help="SNR lookup table size")
    parser.add_argument('--weights-out', default=None, help="prefix for per-exposure weight maps")
    parser.add_argument('--truth', default=None, help="ground-truth PFM; reports the log-MSE")
    add_plot_argument(parser)
    parser.set_defaults(handler=run)


def run(args) -> int:
    timer = RunTimer()
    stack = read_stack(args.stack)
    config = FusionConfig(max_iterations=args.max_iter, convergence_tol=args.tol, lut_points=args.lut_points)

    reconstructor = HdrReconstructor(stack.schedule, stack.params, config)
    result = reconstructor.run(stack, method=args.method)
    write_pfm(args.out, result.flux)

    outputs = [args.out]
    if args.weights_out:
        outputs += [str(path) for path in write_weight_maps(args.weights_out, result.weights)]

    summary = {
        'method': args.method,
        'iterations': result.iterations,
        'converged': result.converged,
        'mean_flux': float(result.flux.mean()),
        'degenerate_pixels': int(result.degenerate.sum()),
    }
    inputs = [args.stack]
    if args.truth:
        summary['lmse'] = lmse(result.flux, read_pfm(args.truth).flux)
        inputs.append(args.truth)

    if args.plot:
        save_figure(create_convergence_figure(result.history, tolerance=config.convergence_tol), args.plot)
        outputs.append(args.plot)

    print_json(summary)
    write_manifest(
        args, args.out,
        parameters={'method': args.method, 'max_iterations': args.max_iter, 'convergence_tol': args.tol,
                    'lut_points': args.lut_points, 'sensor': stack.params.to_dict(), **stack.schedule.to_dict()},
        timer=timer,
        inputs=inputs,
        outputs=outputs,
        seed=stack.seed,
        extra={**summary, 'history': result.history},
    )
    return 0
