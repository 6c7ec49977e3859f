"""
Writers for radiance maps, frame-stack containers, weight maps and curve/report CSVs.
Output bytes depend only on the data written, so repeated runs produce identical files.
"""

import json
import logging
import struct
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
import pandas as pd

from data.loader import CURVE_COLUMNS, STACK_FORMAT_VERSION, STACK_KEYS, STACK_MAGIC
from utils.analysis import DynamicRangeReport, SnrCurve
from utils.errors import DomainError
from utils.qis_simulator import FrameStack, RadianceMap, code_dtype

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FLOAT_FORMAT = '%.17g'
FLOAT32_MAX = float(np.finfo(np.float32).max)


def write_pfm(path: PathLike, image: Union[RadianceMap, np.ndarray], little_endian: bool = True) -> Path:
    """
    Write a grayscale PFM (rows stored bottom to top).

    Args:
        path: str or Path - Destination
        image: RadianceMap or 2-D array - Non-negative finite values
        little_endian: bool - Payload byte order (scale -1.0 when True)

    Returns:
        Path - The written file
    """
    values = image.flux if isinstance(image, RadianceMap) else np.asarray(image, dtype=np.float64)
    if values.ndim != 2:
        raise DomainError(f"PFM images must be 2-D, got shape {values.shape}")
    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise DomainError("PFM images must hold finite non-negative values")
    if np.any(values > FLOAT32_MAX):
        raise DomainError("values exceed the 32-bit float range of PFM")

    height, width = values.shape
    header = f"Pf\n{width} {height}\n{'-1.0' if little_endian else '1.0'}\n".encode('ascii')
    payload = np.ascontiguousarray(values[::-1], dtype='<f4' if little_endian else '>f4').tobytes()

    path = Path(path)
    path.write_bytes(header + payload)
    logger.info(f"✓ Wrote {width}x{height} PFM to {path}")
    return path


def stack_header(stack: FrameStack) -> dict:
    """Container header for a stack, extra keys included."""
    header = {key: value for key, value in stack.extra_header.items() if key not in STACK_KEYS}
    header.update({
        'format_version': STACK_FORMAT_VERSION,
        'width': stack.width,
        'height': stack.height,
        'clip_level': stack.params.clip_level,
        'read_noise': stack.params.read_noise,
        'dark_current': stack.params.dark_current,
        'seed': int(stack.seed),
        **stack.schedule.to_dict(),
    })
    dtype = code_dtype(stack.params.clip_level)
    if dtype.itemsize > 1:
        header['bytes_per_code'] = dtype.itemsize
    return header


def write_stack(path: PathLike, stack: FrameStack) -> Path:
    """
    Write a frame-stack container: magic, header length, JSON header, codes.

    Args:
        path: str or Path - Destination
        stack: FrameStack

    Returns:
        Path - The written file
    """
    dtype = code_dtype(stack.params.clip_level)
    for index, group in enumerate(stack.frames):
        if np.any(group < 0) or np.any(group > stack.params.clip_level):
            raise DomainError(f"group {index} holds codes outside [0, {stack.params.clip_level}]")

    header = json.dumps(stack_header(stack), sort_keys=True, separators=(',', ':'),
                        ensure_ascii=False).encode('utf-8')
    payload = b''.join(np.ascontiguousarray(group, dtype=dtype).tobytes() for group in stack.frames)

    path = Path(path)
    with path.open('wb') as handle:
        handle.write(STACK_MAGIC)
        handle.write(struct.pack('<I', len(header)))
        handle.write(header)
        handle.write(payload)

    logger.info(f"✓ Wrote stack with {stack.schedule.total_frames} frames to {path}")
    return path


def write_weight_maps(prefix: PathLike, weights: np.ndarray) -> List[Path]:
    """Write one PFM per exposure as '<prefix>_w<m>.pfm' (m from 1)."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 3:
        raise DomainError(f"weight maps must be shaped (M, height, width), got {weights.shape}")
    prefix = Path(prefix)
    return [write_pfm(prefix.with_name(f"{prefix.name}_w{m + 1}.pfm"), weights[m])
            for m in range(weights.shape[0])]


def write_curve_csv(curve: SnrCurve, path: PathLike) -> Path:
    """Write 'abscissa,snr_db' with 17 significant digits."""
    path = Path(path)
    curve.to_frame()[CURVE_COLUMNS].to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"✓ Wrote {len(curve)}-point curve to {path}")
    return path


def write_report_csv(report: DynamicRangeReport, path: PathLike) -> Path:
    """Single-row CSV of a dynamic range report."""
    path = Path(path)
    pd.DataFrame([report.to_dict()]).to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep='nan')
    return path


def write_samples_csv(samples: Sequence[float], path: PathLike) -> Path:
    """Analog readings as a one-column CSV with header 'reading'."""
    path = Path(path)
    pd.DataFrame({'reading': np.asarray(samples, dtype=np.float64)}).to_csv(
        path, index=False, float_format=FLOAT_FORMAT)
    return path
