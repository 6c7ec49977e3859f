"""
eval: log-MSE between an HDR estimate and its ground truth.
"""

from commands.common import print_json
from data.loader import read_pfm
from utils.analysis import lmse


def register_command(subparsers):
    parser = subparsers.add_parser('eval', help="log-MSE of an estimate against ground truth")
    parser.add_argument('--estimate', required=True, help="estimated radiance map (PFM)")
    parser.add_argument('--truth', required=True, help="ground-truth radiance map (PFM)")
    parser.add_argument('--eps-fraction', type=float, default=1e-4,
                        help="log offset as a fraction of the ground-truth maximum")
    parser.set_defaults(handler=run)


def run(args) -> int:
    estimate = read_pfm(args.estimate)
    truth = read_pfm(args.truth)
    print_json({'lmse': lmse(estimate.flux, truth.flux, eps_fraction=args.eps_fraction)})
    return 0
