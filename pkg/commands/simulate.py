"""
simulate: radiance map -> QIS frame stack container.
"""

import logging

import numpy as np

from commands.common import (add_schedule_arguments, add_sensor_arguments, resolve_schedule,
                             resolve_sensor, write_manifest)
from commands.manifest import RunTimer
from data.loader import read_pfm
from data.validators import DataValidator
from data.writer import write_stack
from utils.errors import DomainError
from utils.qis_simulator import RadianceMap, simulate_stack

logger = logging.getLogger(__name__)


def register_command(subparsers):
    """
    Register the simulate subcommand.

    Args:
        subparsers: argparse subparsers action of the main parser
    """
    parser = subparsers.add_parser('simulate', help="simulate a frame stack from a radiance map")
    scene = parser.add_mutually_exclusive_group(required=True)
    scene.add_argument('--scene', help="radiance map (grayscale PFM, photons/s)")
    scene.add_argument('--uniform', type=float, help="uniform scene at this flux")
    scene.add_argument('--ramp', help="horizontal log ramp 'low:high' in photons/s")
    parser.add_argument('--size', default='64x64', help="WIDTHxHEIGHT of synthetic scenes")
    parser.add_argument('--out', required=True, help="output stack container")
    parser.add_argument('--seed', type=int, default=None, help="root seed (generated when omitted)")
    parser.add_argument('--workers', type=int, default=1, help="threads drawing frames")
    add_sensor_arguments(parser)
    add_schedule_arguments(parser, required=True)
    parser.set_defaults(handler=run)


def _scene(args) -> RadianceMap:
    if args.scene:
        return read_pfm(args.scene)

    try:
        width, height = (int(part) for part in args.size.lower().split('x'))
    except ValueError:
        raise DomainError(f"--size must look like 64x64, got '{args.size}'")
    if args.uniform is not None:
        return RadianceMap.uniform(width, height, args.uniform)

    parts = args.ramp.split(':')
    if len(parts) != 2:
        raise DomainError(f"--ramp must look like low:high, got '{args.ramp}'")
    return RadianceMap.ramp(width, height, float(parts[0]), float(parts[1]))


def run(args) -> int:
    timer = RunTimer()
    params = resolve_sensor(args)
    schedule = resolve_schedule(args)
    radiance = _scene(args)

    argv = list(getattr(args, 'argv', []))
    seed = args.seed
    if seed is None:
        seed = int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0])
        argv += ['--seed', str(seed)]
        logger.info(f"Generated seed {seed}")

    _, _, warnings = DataValidator.validate_schedule(
        [(g.duration, g.frames) for g in schedule.groups], schedule.frame_period)

    stack = simulate_stack(radiance, schedule, params, seed, workers=args.workers)
    write_stack(args.out, stack)

    for index, (group, codes) in enumerate(zip(schedule.groups, stack.frames), start=1):
        print(f"group {index}: Δ={group.duration:g}s K={group.frames} "
              f"mean code={codes.mean():.6g} min={int(codes.min())} max={int(codes.max())}")

    write_manifest(
        args, args.out,
        parameters={'sensor': params.to_dict(), **schedule.to_dict(), 'oversampling': args.oversampling,
                    'width': radiance.width, 'height': radiance.height, 'workers': args.workers},
        timer=timer,
        inputs=[args.scene] if args.scene else [],
        seed=seed,
        argv=argv,
        extra={'group_means': stack.group_means(), 'warnings': warnings},
    )
    return 0
