"""Frame-by-frame JPEG2000 baseline via the OpenJPEG codec.

This is the standard reference point video encoding is compared against:
one ``.jp2`` file per timestep inside a per-stream directory. The
configuration surface keeps the raster-driver creation options
(``QUALITY`` as a size percentage, ``REVERSIBLE``, ``YCBCR420``); they
are mapped onto the OpenJPEG rate control exposed by OpenCV:
``QUALITY`` of q percent becomes a target of q * 10 permille of the raw
size, and 1000 permille selects the reversible (lossless) transform.
"""

from __future__ import annotations

import time
from pathlib import Path

import cv2
import numpy as np

from ..errors import CodecError, ConfigurationError, CorruptStreamError
from .bridge import DecodeStats, EncodeStats
from .presets import CodecConfig

FRAME_PATTERN = "frame_{:05d}.jp2"


def _compression_x1000(config: CodecConfig) -> int:
    quality = config.option("QUALITY")
    if quality is None:
        raise ConfigurationError("JP2OpenJPEG configuration needs a QUALITY option")
    q = float(quality)
    if not 0 < q <= 100:
        raise ConfigurationError(f"QUALITY must be in (0, 100], got {quality}")
    reversible = (config.option("REVERSIBLE") or "NO").upper() == "YES"
    if reversible and q != 100:
        raise ConfigurationError(
            "REVERSIBLE=YES requires QUALITY=100 with this backend"
        )
    if (config.option("YCBCR420") or "NO").upper() == "YES":
        raise ConfigurationError(
            "YCBCR420=YES (chroma subsampling) is not supported; scientific "
            "bands must stay full resolution"
        )
    return min(1000, max(1, round(q * 10)))


def _check_frames(frames: np.ndarray, config: CodecConfig) -> np.ndarray:
    frames = np.asarray(frames)
    if frames.ndim != 4 or frames.shape[-1] not in (1, 3):
        raise ConfigurationError(
            f"expected [t,y,x,c] frames with 1 or 3 channels, got {frames.shape}"
        )
    if config.bit_depth not in (8, 16):
        raise ConfigurationError(
            f"JP2OpenJPEG supports 8- or 16-bit frames, got {config.bit_depth}"
        )
    if not np.issubdtype(frames.dtype, np.integer):
        raise ConfigurationError(f"frames must be integers, got {frames.dtype}")
    if frames.min() < 0 or frames.max() > (1 << config.bit_depth) - 1:
        raise ConfigurationError(
            f"frame values outside [0, 2^{config.bit_depth} - 1]"
        )
    return frames.astype(np.uint8 if config.bit_depth == 8 else np.uint16)


def encode_frames_image(frames: np.ndarray, config: CodecConfig, out_dir) -> EncodeStats:
    """Write one JPEG2000 image per timestep; bytes are summed for bpppb."""
    if config.codec_id != "JP2OpenJPEG":
        raise ConfigurationError(f"not an image codec config: {config.codec_id}")
    frames = _check_frames(frames, config)
    x1000 = _compression_x1000(config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    total = 0
    start = time.perf_counter()
    for i in range(frames.shape[0]):
        img = frames[i]
        if img.shape[-1] == 1:
            img = img[..., 0]
        target = out_dir / FRAME_PATTERN.format(i)
        ok = cv2.imwrite(str(target), img,
                         [cv2.IMWRITE_JPEG2000_COMPRESSION_X1000, x1000])
        if not ok:
            raise CodecError(f"JPEG2000 encoder refused frame {i} -> {target}")
        total += target.stat().st_size
    wall = time.perf_counter() - start
    return EncodeStats(bytes_written=total, wall_seconds=wall)


def decode_frames_image(in_dir, expected_bit_depth: int | None = None):
    """Read a per-frame JPEG2000 directory back to ``[t, y, x, c]`` integers."""
    in_dir = Path(in_dir)
    files = sorted(in_dir.glob("frame_*.jp2"))
    if not files:
        raise CorruptStreamError(f"no frame_*.jp2 files in {in_dir}")
    start = time.perf_counter()
    frames = []
    for f in files:
        img = cv2.imread(str(f), cv2.IMREAD_UNCHANGED)
        if img is None:
            raise CorruptStreamError(f"cannot decode {f}")
        if img.ndim == 2:
            img = img[..., None]
        frames.append(img)
    stack = np.stack(frames)
    wall = time.perf_counter() - start
    bit_depth = 8 if stack.dtype == np.uint8 else 16
    if expected_bit_depth is not None and bit_depth != expected_bit_depth:
        raise CorruptStreamError(
            f"{in_dir.name} decodes as {bit_depth}-bit but the manifest says "
            f"{expected_bit_depth}-bit"
        )
    return stack, bit_depth, DecodeStats(wall_seconds=wall)
