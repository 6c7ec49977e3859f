"""
Argument groups and parameter resolution shared by the subcommands.
"""

import argparse
import json
import logging
import math
from typing import Any, Dict, List, Optional

import numpy as np

from commands.manifest import RunManifest, RunTimer, manifest_path
from config.sensor_presets import SensorPresets
from data.validators import DataValidator
from utils.analysis import SnrCurve, cis_snr_curve, flux_grid, fused_snr_curve, qis_snr_curve
from utils.cis_model import CisParams
from utils.errors import DomainError
from utils.qis_simulator import ExposureSchedule, effective_frames
from utils.sensor_stats import SensorParams

logger = logging.getLogger(__name__)

DEFAULT_SENSOR_PRESET = 'qis_1bit'


def add_sensor_arguments(parser: argparse.ArgumentParser):
    group = parser.add_argument_group('sensor')
    group.add_argument('--preset', default=None,
                       help=f"sensor preset ({', '.join(sorted(SensorPresets.TEMPLATES))})")
    group.add_argument('--bits', type=int, default=None, help="ADC bit depth b, L = 2^b - 1")
    group.add_argument('--read-noise', type=float, default=None, help="read noise σ_read (e- rms)")
    group.add_argument('--dark', type=float, default=None, help="dark current μ_dark (e-/s)")


def add_schedule_arguments(parser: argparse.ArgumentParser, required: bool = False):
    group = parser.add_argument_group('exposures')
    group.add_argument('--exposures', default=None, help="schedule 'Δ1:K1,Δ2:K2', e.g. 75us:10,375us:10")
    group.add_argument('--schedule-preset', default=None,
                       help=f"named schedule ({', '.join(sorted(SensorPresets.SCHEDULES))})")
    group.add_argument('--frame-period', default=None, help="frame period T (defaults to the longest exposure)")
    group.add_argument('--oversampling', type=int, default=1,
                       help="s x s spatial oversampling, multiplies every frame count by s^2")
    parser.set_defaults(schedule_required=required)


def add_cis_arguments(parser: argparse.ArgumentParser):
    group = parser.add_argument_group('CIS baseline')
    group.add_argument('--cis', action='store_true', help="evaluate a linear CIS instead of a QIS")
    group.add_argument('--full-well', type=int, default=None, help="CIS full-well capacity L (e-)")
    group.add_argument('--cis-read-noise', type=float, default=None, help="CIS read noise (e- rms)")


def add_plot_argument(parser: argparse.ArgumentParser):
    parser.add_argument('--plot', default=None, help="write an interactive HTML figure to this path")


def resolve_sensor(args) -> SensorParams:
    """Preset values overridden by explicit flags."""
    clip_level = None
    if args.bits is not None:
        clip_level = SensorParams.from_bits(args.bits).clip_level
    return SensorPresets.get_sensor(args.preset or DEFAULT_SENSOR_PRESET, clip_level=clip_level,
                                    read_noise=args.read_noise, dark_current=args.dark)


def resolve_cis(args) -> CisParams:
    return SensorPresets.get_cis('cis_default', full_well=args.full_well, read_noise=args.cis_read_noise)


def resolve_schedule(args) -> Optional[ExposureSchedule]:
    """Schedule from --exposures or --schedule-preset, frame counts scaled by the oversampling."""
    frame_period = DataValidator.parse_duration(args.frame_period) if args.frame_period else None

    if args.exposures and args.schedule_preset:
        raise DomainError("use either --exposures or --schedule-preset, not both")
    if args.exposures:
        pairs = DataValidator.parse_schedule(args.exposures)
    elif args.schedule_preset:
        pairs = [(g.duration, g.frames) for g in SensorPresets.get_schedule(args.schedule_preset).groups]
    elif getattr(args, 'schedule_required', False):
        raise DomainError("an exposure schedule is required (--exposures or --schedule-preset)")
    else:
        return None

    pairs = [(duration, effective_frames(frames, args.oversampling)) for duration, frames in pairs]
    return ExposureSchedule.from_pairs(pairs, frame_period)


def grid_from_text(text: str) -> np.ndarray:
    low, high, points = DataValidator.parse_grid(text)
    return np.geomspace(low, high, points)


def default_flux_grid(schedule: ExposureSchedule, clip_level: float) -> np.ndarray:
    """Flux span reaching well below the longest exposure's floor and past the shortest one's saturation."""
    low = 1e-7 / float(schedule.durations.max())
    high = 100.0 * clip_level / float(schedule.durations.min())
    return flux_grid(low, high)


def build_curve(args) -> SnrCurve:
    """
    SNR curve from sensor, schedule and grid flags (shared by snr and dr).

    Single exposures give the plain curve; several exposures give the fused
    curve under --weights.
    """
    schedule = resolve_schedule(args)
    if schedule is None:
        raise DomainError("an exposure schedule is required (--exposures or --schedule-preset)")

    if args.cis:
        cis = resolve_cis(args)
        if schedule.num_groups != 1:
            raise DomainError("the CIS baseline takes a single exposure")
        grid = grid_from_text(args.grid) if args.grid else flux_grid(
            1e-3 / schedule.durations[0], 10.0 * cis.full_well / schedule.durations[0])
        group = schedule.groups[0]
        return cis_snr_curve(cis, group.duration, group.frames, grid)

    params = resolve_sensor(args)
    grid = grid_from_text(args.grid) if args.grid else default_flux_grid(schedule, params.clip_level)
    if schedule.num_groups == 1:
        group = schedule.groups[0]
        return qis_snr_curve(params, group.duration, group.frames, grid)
    return fused_snr_curve(params, schedule, grid, weight_rule=args.weights)


def curve_parameters(args) -> Dict[str, Any]:
    """Resolved parameters of a curve-building command, for manifests."""
    schedule = resolve_schedule(args)
    parameters: Dict[str, Any] = {'grid': args.grid, 'oversampling': args.oversampling}
    if schedule is not None:
        parameters.update(schedule.to_dict())
    if args.cis:
        parameters['cis'] = resolve_cis(args).to_dict()
    else:
        parameters['sensor'] = resolve_sensor(args).to_dict()
        parameters['weight_rule'] = getattr(args, 'weights', None)
    return parameters


def write_manifest(args, output, parameters: Dict[str, Any], timer: RunTimer,
                   inputs: Optional[List[str]] = None, outputs: Optional[List[str]] = None,
                   seed: Optional[int] = None, extra: Optional[Dict[str, Any]] = None,
                   argv: Optional[List[str]] = None) -> None:
    """Write '<output>.manifest.json' for a finished run."""
    manifest = RunManifest(
        subcommand=args.command,
        parameters=parameters,
        inputs=[str(path) for path in (inputs or [])],
        outputs=[str(path) for path in (outputs or [output])],
        seed=seed,
        argv=list(argv if argv is not None else getattr(args, 'argv', [])),
        duration_seconds=timer.elapsed,
        extra=extra or {},
    )
    manifest.save(manifest_path(output))


def print_json(payload: Dict[str, Any]) -> None:
    """Print a result object; non-finite numbers become strings."""
    def clean(value):
        if isinstance(value, float) and not math.isfinite(value):
            return str(value)
        return value
    print(json.dumps({key: clean(value) for key, value in payload.items()}, sort_keys=True))
