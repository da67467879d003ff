from .bridge import (
    DecodeStats,
    EncodeStats,
    decode_video,
    encode_video,
    find_encoder_exe,
    probe_video,
    set_max_processes,
)
from .jp2 import decode_frames_image, encode_frames_image
from .presets import (
    ERA5_JP2_QUALITIES,
    PRESET_LADDER,
    SUPPORTED_CODECS,
    CodecCaps,
    CodecConfig,
    config_from_options,
    ladder_position,
    probe_capabilities,
    resolve_preset,
)

__all__ = [
    "CodecCaps",
    "CodecConfig",
    "DecodeStats",
    "ERA5_JP2_QUALITIES",
    "EncodeStats",
    "PRESET_LADDER",
    "SUPPORTED_CODECS",
    "config_from_options",
    "decode_frames_image",
    "decode_video",
    "encode_frames_image",
    "encode_video",
    "find_encoder_exe",
    "ladder_position",
    "probe_capabilities",
    "probe_video",
    "resolve_preset",
    "set_max_processes",
]
