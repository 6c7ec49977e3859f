"""
Readers for radiance maps, frame-stack containers, curve CSVs and sample CSVs.
Every malformed input surfaces as a FormatError carrying the offending location.
"""

import json
import logging
import math
import struct
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
import pandas as pd

from data.validators import DataValidator
from utils.analysis import SnrCurve
from utils.errors import DomainError, FormatError
from utils.qis_simulator import MAX_SEED, ExposureSchedule, FrameStack, RadianceMap, code_dtype
from utils.sensor_stats import SensorParams

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

STACK_MAGIC = b"QISSTK1\n"
STACK_FORMAT_VERSION = 1
# Header keys the container interprets; anything else is carried through untouched
STACK_KEYS = (
    'format_version', 'width', 'height', 'clip_level', 'read_noise', 'dark_current',
    'schedule', 'frame_period', 'seed', 'bytes_per_code',
)
CURVE_COLUMNS = ['abscissa', 'snr_db']


def _read_bytes(path: PathLike) -> bytes:
    return Path(path).read_bytes()


def _pfm_header(data: bytes, path: str):
    """Three whitespace-separated header tokens, then one whitespace byte."""
    tokens = []
    position = 0
    while len(tokens) < 4:
        while position < len(data) and data[position:position + 1].isspace():
            position += 1
        if position >= len(data):
            raise FormatError("truncated PFM header", offset=position, path=path)
        start = position
        while position < len(data) and not data[position:position + 1].isspace():
            position += 1
        tokens.append((data[start:position], start))
    if position >= len(data):
        raise FormatError("PFM header is not terminated", offset=position, path=path)
    return tokens, position + 1


def read_pfm(path: PathLike) -> RadianceMap:
    """
    Read a grayscale PFM as a radiance map.

    Args:
        path: str or Path - File in 'Pf' format; negative scale means little-endian

    Returns:
        RadianceMap - Rows in top-to-bottom order
    """
    path = str(path)
    data = _read_bytes(path)
    tokens, payload_start = _pfm_header(data, path)

    (kind, _), (width_text, width_at), (height_text, height_at), (scale_text, scale_at) = tokens
    if kind == b'PF':
        raise FormatError("color PFM ('PF') is not supported; expected grayscale 'Pf'", offset=0, path=path)
    if kind != b'Pf':
        raise FormatError(f"unrecognized PFM identifier {kind[:16]!r}", offset=0, path=path)

    try:
        width, height = int(width_text), int(height_text)
    except ValueError:
        raise FormatError("PFM dimensions are not integers", offset=width_at, path=path)
    if width < 1 or height < 1:
        raise FormatError(f"PFM dimensions must be positive, got {width}x{height}", offset=width_at, path=path)

    try:
        scale = float(scale_text)
    except ValueError:
        raise FormatError("PFM scale is not a number", offset=scale_at, path=path)
    if scale == 0 or not math.isfinite(scale):
        raise FormatError(f"PFM scale must be finite and non-zero, got {scale}", offset=scale_at, path=path)

    expected = 4 * width * height
    payload = data[payload_start:]
    if len(payload) < expected:
        raise FormatError(f"PFM payload truncated: {len(payload)} of {expected} bytes",
                          offset=payload_start + len(payload), path=path)
    if len(payload) > expected:
        raise FormatError(f"{len(payload) - expected} trailing bytes after PFM payload",
                          offset=payload_start + expected, path=path)

    values = np.frombuffer(payload, dtype='<f4' if scale < 0 else '>f4')
    bad = np.flatnonzero(~np.isfinite(values) | (values < 0))
    if bad.size:
        first = int(bad[0])
        problem = 'non-finite' if not np.isfinite(values[first]) else 'negative'
        raise FormatError(f"{problem} pixel value {values[first]}", offset=payload_start + 4 * first, path=path)

    # PFM stores rows bottom to top
    flux = values.reshape(height, width)[::-1].astype(np.float64)
    logger.info(f"✓ Loaded radiance map {width}x{height} from {path}")
    return RadianceMap(flux)


def _stack_header(data: bytes, path: str) -> Tuple[Dict[str, Any], int]:
    if len(data) < len(STACK_MAGIC) or data[:len(STACK_MAGIC)] != STACK_MAGIC:
        raise FormatError("not a QIS stack container (magic mismatch)", offset=0, path=path)
    if len(data) < 12:
        raise FormatError("truncated header length", offset=len(STACK_MAGIC), path=path)

    (length,) = struct.unpack('<I', data[8:12])
    if len(data) < 12 + length:
        raise FormatError(f"truncated header: {len(data) - 12} of {length} bytes", offset=len(data), path=path)
    try:
        header = json.loads(data[12:12 + length].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"stack header is not valid JSON: {exc}", offset=12, path=path)
    if not isinstance(header, dict):
        raise FormatError("stack header must be a JSON object", offset=12, path=path)
    return header, 12 + length


def read_stack(path: PathLike) -> FrameStack:
    """
    Read a frame-stack container.

    Args:
        path: str or Path

    Returns:
        FrameStack - Unknown header keys are kept in extra_header
    """
    path = str(path)
    data = _read_bytes(path)
    header, payload_start = _stack_header(data, path)

    missing = [key for key in STACK_KEYS if key not in header and key != 'bytes_per_code']
    if missing:
        raise FormatError(f"stack header lacks {', '.join(missing)}", offset=12, path=path)
    if header['format_version'] != STACK_FORMAT_VERSION:
        raise FormatError(f"unsupported stack format version {header['format_version']!r}", offset=12, path=path)

    try:
        params = SensorParams(header['clip_level'], header['read_noise'], header['dark_current'])
        schedule = ExposureSchedule.from_pairs([tuple(pair) for pair in header['schedule']],
                                               header['frame_period'])
        width, height, seed = int(header['width']), int(header['height']), int(header['seed'])
        if width < 1 or height < 1:
            raise DomainError(f"frame size must be positive, got {width}x{height}")
        if not 0 <= seed <= MAX_SEED:
            raise DomainError(f"seed must lie in [0, 2^64), got {seed}")
        dtype = code_dtype(params.clip_level)
    except (DomainError, TypeError, ValueError, OverflowError) as exc:
        raise FormatError(f"invalid stack header: {exc}", offset=12, path=path)

    declared = header.get('bytes_per_code', 1)
    if declared != dtype.itemsize:
        raise FormatError(f"clip level {params.clip_level} needs {dtype.itemsize}-byte codes, "
                          f"header declares {declared}", offset=12, path=path)

    pixels = width * height
    expected = pixels * schedule.total_frames * dtype.itemsize
    payload = data[payload_start:]
    if len(payload) < expected:
        index = len(payload) // dtype.itemsize
        raise FormatError(f"stack payload truncated: {len(payload)} of {expected} bytes",
                          offset=payload_start + len(payload), frame=index // pixels,
                          pixel=index % pixels, path=path)
    if len(payload) > expected:
        raise FormatError(f"{len(payload) - expected} trailing bytes after stack payload",
                          offset=payload_start + expected, path=path)

    codes = np.frombuffer(payload, dtype=dtype).reshape(schedule.total_frames, pixels)
    violation = DataValidator.locate_invalid_code(codes, params.clip_level)
    if violation is not None:
        frame, pixel = violation
        raise FormatError(f"code {int(codes[frame, pixel])} exceeds clip level {params.clip_level}",
                          offset=payload_start + (frame * pixels + pixel) * dtype.itemsize,
                          frame=frame, pixel=pixel, path=path)

    frames = []
    start = 0
    for group in schedule.groups:
        frames.append(codes[start:start + group.frames].reshape(group.frames, height, width).copy())
        start += group.frames

    extra = {key: value for key, value in header.items() if key not in STACK_KEYS}
    logger.info(f"✓ Loaded stack {width}x{height}, {schedule.total_frames} frames in "
                f"{schedule.num_groups} groups from {path}")
    return FrameStack(schedule=schedule, params=params, seed=seed, frames=frames, extra_header=extra)


def _read_csv(path: str) -> pd.DataFrame:
    try:
        return pd.read_csv(path, float_precision='round_trip')
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise FormatError(f"unreadable CSV: {exc}", path=path)


def read_curve_csv(path: PathLike):
    """Read an 'abscissa,snr_db' CSV back into an SnrCurve."""
    path = str(path)
    frame = _read_csv(path)
    if list(frame.columns) != CURVE_COLUMNS:
        raise FormatError(f"curve CSV columns must be {CURVE_COLUMNS}, got {list(frame.columns)}", path=path)
    try:
        values = frame.astype(np.float64)
    except ValueError as exc:
        raise FormatError(f"curve CSV holds non-numeric values: {exc}", path=path)
    try:
        return SnrCurve(abscissa=values['abscissa'].to_numpy(), snr_db=values['snr_db'].to_numpy())
    except DomainError as exc:
        raise FormatError(str(exc), path=path)


def read_samples_csv(path: PathLike) -> np.ndarray:
    """
    Read analog readings for a histogram fit.

    Accepts a 'reading' column, or a CSV with a single column.
    """
    path = str(path)
    frame = _read_csv(path)
    if 'reading' in frame.columns:
        column = frame['reading']
    elif len(frame.columns) == 1:
        column = frame.iloc[:, 0]
    else:
        raise FormatError("samples CSV needs a 'reading' column", path=path)

    values = pd.to_numeric(column, errors='coerce')
    if values.isna().any():
        row = int(np.flatnonzero(values.isna().to_numpy())[0])
        raise FormatError(f"non-numeric reading on data row {row + 1}", path=path)
    return values.to_numpy(dtype=np.float64)
