"""Child-process bridge to the external media encoder.

Frames travel as raw planar data over pipes: plane ``i`` of the raw
stream is channel ``i`` of the ``[t, y, x, c]`` array, full resolution,
little-endian, no chroma subsampling. Options from a
:class:`~cubevid.codecs.presets.CodecConfig` are passed to the encoder
verbatim.

The executable is located once per process: the ``CUBEVID_FFMPEG``
environment variable wins, then ``ffmpeg`` on PATH. As a fallback for
machines that ship the FFmpeg libraries but no CLI, a small vendored
shim speaking the same command-line subset is compiled on demand
(requires a C compiler and the libavformat/libavcodec dev packages) and
cached under ``~/.cache/cubevid``. Every encode or decode owns a single
child process; a global semaphore caps how many run at once.
"""

from __future__ import annotations

import os
import re
import shutil
import subprocess
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import CodecError, ConfigurationError, CorruptStreamError
from .presets import ENCODER_NAMES, PIX_FMT_DEPTHS, CodecConfig, probe_capabilities

_discovery_lock = threading.Lock()
_encoder_exe: str | None = None

_process_cap = threading.BoundedSemaphore(max(os.cpu_count() or 4, 1))


def set_max_processes(n: int) -> None:
    """Cap the number of concurrently running encoder/decoder processes."""
    global _process_cap
    if n < 1:
        raise ConfigurationError("process cap must be >= 1")
    _process_cap = threading.BoundedSemaphore(n)


@dataclass(frozen=True)
class EncodeStats:
    bytes_written: int
    wall_seconds: float
    avg_qp: float | None = None


@dataclass(frozen=True)
class DecodeStats:
    wall_seconds: float


def _shim_cache_dir() -> Path:
    base = os.environ.get("XDG_CACHE_HOME", os.path.expanduser("~/.cache"))
    return Path(base) / "cubevid"


def _build_shim() -> str | None:
    """Compile the vendored shim against the system FFmpeg libraries."""
    source = Path(__file__).with_name("ffshim.c")
    if not source.exists():
        return None
    cc = shutil.which("cc") or shutil.which("gcc") or shutil.which("clang")
    if cc is None:
        return None
    out_dir = _shim_cache_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / "ffshim"
    if target.exists() and target.stat().st_mtime >= source.stat().st_mtime:
        return str(target)
    libs = ["-lavformat", "-lavcodec", "-lavutil"]
    cflags: list[str] = []
    try:
        pc = subprocess.run(
            ["pkg-config", "--cflags", "--libs", "libavformat", "libavcodec", "libavutil"],
            capture_output=True, text=True,
        )
        if pc.returncode == 0:
            flags = pc.stdout.split()
            cflags = [f for f in flags if not f.startswith("-l")]
            libs = [f for f in flags if f.startswith("-l")]
    except FileNotFoundError:
        pass
    tmp = target.with_suffix(".tmp")
    build = subprocess.run(
        [cc, "-O2", "-o", str(tmp), str(source), *cflags, *libs],
        capture_output=True, text=True,
    )
    if build.returncode != 0:
        return None
    tmp.replace(target)
    target.chmod(0o755)
    return str(target)


def find_encoder_exe() -> str:
    """Locate the external encoder executable, building the shim if needed."""
    global _encoder_exe
    if _encoder_exe is not None:
        return _encoder_exe
    with _discovery_lock:
        if _encoder_exe is not None:
            return _encoder_exe
        candidates = []
        env = os.environ.get("CUBEVID_FFMPEG")
        if env:
            if not Path(env).exists():
                raise CodecError(
                    f"CUBEVID_FFMPEG points to {env!r}, which does not exist"
                )
            candidates.append(env)
        path_ffmpeg = shutil.which("ffmpeg")
        if path_ffmpeg:
            candidates.append(path_ffmpeg)
        shim = _build_shim()
        if shim:
            candidates.append(shim)
        for exe in candidates:
            try:
                probe = subprocess.run([exe, "-version"], capture_output=True, timeout=30)
            except (OSError, subprocess.TimeoutExpired):
                continue
            if probe.returncode == 0:
                _encoder_exe = exe
                return exe
        raise CodecError(
            "no usable media encoder found: set CUBEVID_FFMPEG to an ffmpeg "
            "executable, put ffmpeg on PATH, or install a C compiler plus the "
            "FFmpeg development libraries so the bundled shim can be built"
        )


def reset_encoder_cache() -> None:
    global _encoder_exe
    _encoder_exe = None


def _pix_fmt_for(config: CodecConfig, n_planes: int) -> str:
    caps = probe_capabilities(config.codec_id)
    if config.bit_depth is None:
        raise ConfigurationError("codec configuration has no bound bit depth")
    if config.bit_depth not in caps.bit_depths:
        raise ConfigurationError(
            f"{config.codec_id} does not support {config.bit_depth}-bit frames "
            f"(supported: {sorted(caps.bit_depths)})"
        )
    return caps.pix_fmt(config.bit_depth, n_planes)


def _frames_to_planar_bytes(frames: np.ndarray, bit_depth: int) -> bytes:
    dtype = "u1" if bit_depth == 8 else "<u2"
    planar = np.moveaxis(frames, -1, 1)  # [t, c, y, x]
    return np.ascontiguousarray(planar).astype(dtype, copy=False).tobytes()


def _planar_bytes_to_frames(raw: bytes, h: int, w: int, n_planes: int,
                            bit_depth: int) -> np.ndarray:
    dtype = np.dtype("u1" if bit_depth == 8 else "<u2")
    frame_bytes = h * w * n_planes * dtype.itemsize
    if frame_bytes == 0 or len(raw) % frame_bytes != 0:
        raise CorruptStreamError(
            f"decoded byte count {len(raw)} is not a whole number of "
            f"{h}x{w}x{n_planes} frames"
        )
    t = len(raw) // frame_bytes
    arr = np.frombuffer(raw, dtype=dtype).reshape(t, n_planes, h, w)
    return np.ascontiguousarray(np.moveaxis(arr, 1, -1))


_AVG_QP_RE = re.compile(r"Avg QP\s*:\s*([0-9.]+)")


def encode_video(frames: np.ndarray, config: CodecConfig, out_path,
                 fps: int = 10, metadata: dict | None = None) -> EncodeStats:
    """Encode ``[t, y, x, c]`` integer frames into one video file.

    ``c`` must be 3, or 1 for a monochrome stream on codecs that support
    it. Values must fit the configured bit depth. Wall time covers the
    whole child-process lifetime.
    """
    frames = np.asarray(frames)
    if frames.ndim != 4:
        raise ConfigurationError(f"expected [t,y,x,c] frames, got {frames.ndim}-D")
    t, h, w, c = frames.shape
    if t < 1:
        raise ConfigurationError("need at least one frame")
    if c not in (1, 3):
        raise ConfigurationError(f"streams carry 1 or 3 planes per video, got {c}")
    if not np.issubdtype(frames.dtype, np.integer):
        raise ConfigurationError(f"frames must be integers, got {frames.dtype}")
    if config.bit_depth is None:
        raise ConfigurationError("codec configuration has no bound bit depth")
    if frames.min() < 0 or frames.max() > (1 << config.bit_depth) - 1:
        raise ConfigurationError(
            f"frame values outside [0, 2^{config.bit_depth} - 1]"
        )
    if config.is_image:
        raise ConfigurationError(
            f"{config.codec_id} is an image codec; use encode_frames_image"
        )

    pix_fmt = _pix_fmt_for(config, c)
    encoder = ENCODER_NAMES[config.codec_id]
    out_path = Path(out_path)

    argv = [
        find_encoder_exe(), "-y", "-hide_banner", "-nostdin",
        "-f", "rawvideo", "-pix_fmt", pix_fmt,
        "-video_size", f"{w}x{h}", "-framerate", str(fps),
        "-i", "-",
        "-c:v", encoder,
    ]
    for key, value in config.passthrough_options():
        argv += [f"-{key}", value]
    for key, value in (metadata or {}).items():
        argv += ["-metadata", f"{key}={value}"]
    argv.append(str(out_path))

    raw = _frames_to_planar_bytes(frames, config.bit_depth)
    with _process_cap:
        start = time.perf_counter()
        proc = subprocess.run(argv, input=raw, capture_output=True)
        wall = time.perf_counter() - start
    if proc.returncode != 0 or not out_path.exists():
        raise CodecError(
            f"encoder failed for {out_path.name} (exit {proc.returncode}):\n"
            + proc.stderr.decode(errors="replace")[-2000:]
        )
    qp_match = _AVG_QP_RE.search(proc.stderr.decode(errors="replace"))
    return EncodeStats(
        bytes_written=out_path.stat().st_size,
        wall_seconds=wall,
        avg_qp=float(qp_match.group(1)) if qp_match else None,
    )


_STREAM_RE = re.compile(
    r"Video:\s*(?P<codec>[A-Za-z0-9_]+).*?,\s*(?P<pix>[A-Za-z0-9]+)"
    r"(?:\([^)]*\))?,\s*(?P<w>\d+)x(?P<h>\d+)"
)


def probe_video(path) -> tuple[str, str, int, int]:
    """Return (codec_name, pix_fmt, width, height) of a video file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such video file: {path}")
    proc = subprocess.run(
        [find_encoder_exe(), "-hide_banner", "-i", str(path)],
        capture_output=True,
    )
    text = proc.stderr.decode(errors="replace")
    match = _STREAM_RE.search(text)
    if not match:
        raise CorruptStreamError(
            f"could not read stream info from {path.name}:\n{text[-800:]}"
        )
    return (match["codec"], match["pix"], int(match["w"]), int(match["h"]))


def decode_video(path, expected_bit_depth: int | None = None):
    """Decode a video file back to ``([t, y, x, c], bit_depth, DecodeStats)``.

    Planes come back in the order they were encoded. The file is
    self-describing; ``expected_bit_depth`` adds a consistency check
    against the manifest.
    """
    path = Path(path)
    _, pix_fmt, w, h = probe_video(path)
    if pix_fmt not in PIX_FMT_DEPTHS:
        raise CorruptStreamError(
            f"{path.name} carries unsupported pixel layout {pix_fmt!r}"
        )
    bit_depth, n_planes = PIX_FMT_DEPTHS[pix_fmt]
    if expected_bit_depth is not None and bit_depth != expected_bit_depth:
        raise CorruptStreamError(
            f"{path.name} is {bit_depth}-bit but the manifest says "
            f"{expected_bit_depth}-bit"
        )

    argv = [
        find_encoder_exe(), "-hide_banner", "-loglevel", "error", "-nostdin",
        "-i", str(path),
        "-f", "rawvideo", "-pix_fmt", pix_fmt, "-vsync", "0", "-",
    ]
    with _process_cap:
        start = time.perf_counter()
        proc = subprocess.run(argv, capture_output=True)
        wall = time.perf_counter() - start
    if proc.returncode != 0 or not proc.stdout:
        raise CorruptStreamError(
            f"decoder failed for {path.name} (exit {proc.returncode}):\n"
            + proc.stderr.decode(errors="replace")[-2000:]
        )
    frames = _planar_bytes_to_frames(proc.stdout, h, w, n_planes, bit_depth)
    return frames, bit_depth, DecodeStats(wall_seconds=wall)
