"""Named quality presets and static codec capabilities.

Six named quality levels span the ladder from lossless ("Best") down to
"Very low". Each resolves to an exact, ordered option set per codec;
these strings are part of the format contract and are passed to the
encoder verbatim. For ERA5-style reanalysis data the JP2OpenJPEG ladder
uses a different QUALITY sequence (100, 25, 5, 1, 0.25, 0.05).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..errors import ConfigurationError

PRESET_LADDER = ("Best", "Very high", "High", "Medium", "Low", "Very low")

VIDEO_CODECS = ("libx264", "libx265", "vp9", "ffv1", "hevc_nvenc")
IMAGE_CODECS = ("JP2OpenJPEG",)
SUPPORTED_CODECS = VIDEO_CODECS + IMAGE_CODECS

# ffmpeg encoder names for the codec identifiers used in configs
ENCODER_NAMES = {
    "libx264": "libx264",
    "libx265": "libx265",
    "vp9": "libvpx-vp9",
    "ffv1": "ffv1",
    "hevc_nvenc": "hevc_nvenc",
}


@dataclass(frozen=True)
class CodecConfig:
    """An encoder selection plus its ordered passthrough options.

    ``options`` holds every key/value pair, including the codec selector
    itself (``c:v`` for video codecs, ``codec`` for image codecs), exactly
    as it will be handed to the encoding backend.
    """

    codec_id: str
    options: tuple[tuple[str, str], ...]
    bit_depth: int | None = None
    preset_name: str | None = None

    def __post_init__(self):
        if self.codec_id not in SUPPORTED_CODECS:
            raise ConfigurationError(
                f"unknown codec {self.codec_id!r}; supported: {SUPPORTED_CODECS}"
            )

    def option(self, key: str, default=None) -> str | None:
        for k, v in self.options:
            if k == key:
                return v
        return default

    def passthrough_options(self) -> tuple[tuple[str, str], ...]:
        """Options without the codec selector key."""
        return tuple((k, v) for k, v in self.options if k not in ("c:v", "codec"))

    @property
    def is_image(self) -> bool:
        return self.codec_id in IMAGE_CODECS

    @property
    def lossless(self) -> bool:
        if self.codec_id == "ffv1":
            return True
        if self.codec_id == "libx265":
            return "lossless=1" in (self.option("x265-params") or "")
        if self.codec_id == "vp9":
            return self.option("lossless") == "1"
        if self.codec_id == "JP2OpenJPEG":
            return self.option("REVERSIBLE") == "YES"
        return False

    def with_bit_depth(self, bit_depth: int) -> "CodecConfig":
        return replace(self, bit_depth=bit_depth)


def config_from_options(options, bit_depth=None, preset_name=None) -> CodecConfig:
    """Build a CodecConfig from raw option pairs (dict or key/value list).

    The codec is read from the ``c:v`` (video) or ``codec`` (image) key,
    mirroring the shape of a mapping-rule configuration block.
    """
    if hasattr(options, "items"):
        pairs = tuple((str(k), str(v)) for k, v in options.items())
    else:
        pairs = tuple((str(k), str(v)) for k, v in options)
    keys = [k for k, _ in pairs]
    codec_id = None
    for selector in ("c:v", "codec"):
        if selector in keys:
            codec_id = dict(pairs)[selector]
            break
    if codec_id is None:
        raise ConfigurationError(
            "codec configuration needs a 'c:v' (video) or 'codec' (image) key"
        )
    return CodecConfig(codec_id, pairs, bit_depth=bit_depth, preset_name=preset_name)


# --------------------------------------------------------------------------
# Preset option sets. Key order matters: it is preserved all the way to the
# encoder command line.

_X265_BASE = (("c:v", "libx265"), ("preset", "medium"), ("tune", "psnr"))

_X265_PRESETS = {
    "Best": _X265_BASE + (("crf", "51"), ("x265-params", "lossless=1")),
    "Very high": _X265_BASE + (("crf", "51"), ("x265-params", "qpmin=0:qpmax=0.01")),
    "High": _X265_BASE + (("crf", "1"),),
    "Medium": _X265_BASE + (("crf", "7"),),
    "Low": _X265_BASE + (("crf", "16"),),
    "Very low": _X265_BASE + (("crf", "27"),),
}

_VP9_TAIL = (
    ("arnr-strength", "2"),
    ("lag-in-frames", "25"),
    ("arnr-maxframes", "7"),
)

_VP9_PRESETS = {
    "Best": (("c:v", "vp9"), ("crf", "0"), ("lossless", "1")),
    "Very high": (
        ("c:v", "vp9"),
        ("crf", "0"),
        ("arnr-strength", "2"),
        ("qmin", "0"),
        ("qmax", "0.01"),
        ("lag-in-frames", "25"),
        ("arnr-maxframes", "7"),
    ),
    "High": (("c:v", "vp9"), ("crf", "5")) + _VP9_TAIL,
    "Medium": (("c:v", "vp9"), ("crf", "12")) + _VP9_TAIL,
    "Low": (("c:v", "vp9"), ("crf", "20")) + _VP9_TAIL,
    "Very low": (("c:v", "vp9"), ("crf", "30")) + _VP9_TAIL,
}


def _jp2(quality: str, reversible: str) -> tuple[tuple[str, str], ...]:
    return (
        ("codec", "JP2OpenJPEG"),
        ("QUALITY", quality),
        ("REVERSIBLE", reversible),
        ("YCBCR420", "NO"),
    )


_JP2_PRESETS = {
    "Best": _jp2("100", "YES"),
    "Very high": _jp2("80", "NO"),
    "High": _jp2("35", "NO"),
    "Medium": _jp2("15", "NO"),
    "Low": _jp2("5", "NO"),
    "Very low": _jp2("1", "NO"),
}

# Reanalysis-style data spans a far wider dynamic range, so the JP2 ladder
# drops much faster there.
ERA5_JP2_QUALITIES = ("100", "25", "5", "1", "0.25", "0.05")

_JP2_PRESETS_ERA5 = {
    name: _jp2(q, "YES" if name == "Best" else "NO")
    for name, q in zip(PRESET_LADDER, ERA5_JP2_QUALITIES)
}

_PRESET_TABLES = {
    "libx265": _X265_PRESETS,
    "vp9": _VP9_PRESETS,
    "JP2OpenJPEG": _JP2_PRESETS,
}


def resolve_preset(codec_id: str, name: str, era5_mode: bool = False) -> CodecConfig:
    """Resolve a (codec, quality-name) pair to its exact option set.

    ``era5_mode`` swaps the JP2OpenJPEG quality ladder for the reanalysis
    variant. ffv1 is always lossless and only answers to "Best".
    """
    if name not in PRESET_LADDER:
        raise ConfigurationError(
            f"unknown quality preset {name!r}; ladder is {PRESET_LADDER}"
        )
    if codec_id == "ffv1":
        if name != "Best":
            raise ConfigurationError("ffv1 is lossless only; use preset 'Best'")
        return CodecConfig("ffv1", (("c:v", "ffv1"),), preset_name="Best")
    table = _PRESET_TABLES.get(codec_id)
    if table is None:
        raise ConfigurationError(f"no preset table for codec {codec_id!r}")
    if codec_id == "JP2OpenJPEG" and era5_mode:
        table = _JP2_PRESETS_ERA5
    return CodecConfig(codec_id, table[name], preset_name=name)


def ladder_position(name: str) -> int:
    return PRESET_LADDER.index(name)


# --------------------------------------------------------------------------
# Capabilities

@dataclass(frozen=True)
class CodecCaps:
    bit_depths: frozenset[int]
    max_channels: int
    lossless_supported: bool
    per_frame: bool
    # (bit_depth, n_planes) -> raw pixel layout handed to the encoder process
    pix_fmts: tuple[tuple[tuple[int, int], str], ...] = ()

    def pix_fmt(self, bit_depth: int, n_planes: int) -> str:
        for (depth, planes), fmt in self.pix_fmts:
            if depth == bit_depth and planes == n_planes:
                return fmt
        raise ConfigurationError(
            f"no pixel layout for bit depth {bit_depth} with {n_planes} plane(s)"
        )

    def supports(self, bit_depth: int, n_planes: int = 3) -> bool:
        return any(d == bit_depth and p == n_planes for (d, p), _ in self.pix_fmts)


# ffv1 in current FFmpeg builds has no 8-bit planar-GBR layout, so the
# 8-bit path rides on the equivalent full-resolution planar 4:4:4 layout
# (a plane-label difference only; bytes pass through unchanged).
_CAPABILITIES = {
    "libx264": CodecCaps(
        frozenset({8, 10}), 3, True, False,
        (((8, 3), "yuv444p"), ((10, 3), "yuv444p10le"),
         ((8, 1), "gray"), ((10, 1), "gray10le")),
    ),
    "libx265": CodecCaps(
        frozenset({8, 10, 12}), 3, True, False,
        (((8, 3), "gbrp"), ((10, 3), "gbrp10le"), ((12, 3), "gbrp12le"),
         ((8, 1), "gray"), ((10, 1), "gray10le"), ((12, 1), "gray12le")),
    ),
    "vp9": CodecCaps(
        frozenset({8, 10, 12}), 3, True, False,
        (((8, 3), "gbrp"), ((10, 3), "gbrp10le"), ((12, 3), "gbrp12le")),
    ),
    "ffv1": CodecCaps(
        frozenset({8, 16}), 3, True, False,
        (((8, 3), "yuv444p"), ((16, 3), "gbrp16le"),
         ((8, 1), "gray"), ((16, 1), "gray16le")),
    ),
    # accepted as passthrough configuration; needs NVIDIA hardware at runtime
    "hevc_nvenc": CodecCaps(
        frozenset({8}), 3, False, False, (((8, 3), "yuv444p"),),
    ),
    "JP2OpenJPEG": CodecCaps(frozenset({8, 16}), 3, True, True),
}

PIX_FMT_DEPTHS = {
    "gbrp": (8, 3), "gbrp10le": (10, 3), "gbrp12le": (12, 3), "gbrp16le": (16, 3),
    "yuv444p": (8, 3), "yuv444p10le": (10, 3), "yuv444p16le": (16, 3),
    "gray": (8, 1), "gray10le": (10, 1), "gray12le": (12, 1), "gray16le": (16, 1),
}


def probe_capabilities(codec_id: str) -> CodecCaps:
    """Static capability table: supported bit depths, channel cap, lossless."""
    try:
        return _CAPABILITIES[codec_id]
    except KeyError:
        raise ConfigurationError(
            f"unknown codec {codec_id!r}; supported: {SUPPORTED_CODECS}"
        ) from None
