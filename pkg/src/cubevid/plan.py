"""Mapping rules and the deterministic channel-to-video packing plan.

A mapping rule declares how a set of cube variables becomes one named
stream of video files: which variables, which axes play (time, y, x),
an optional number of principal components, the encoder configuration,
and the output bit depth. Video codecs carry at most three planes per
file, so a stream's channels are packed into groups of three in input
order; a trailing partial group repeats its last real channel to fill
the three slots (a repeated plane costs almost nothing after
prediction).

Rules are plain data and planning is pure: the same rules on the same
cube shape always produce the identical plan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .codecs.presets import CodecConfig, config_from_options, probe_capabilities
from .cube import DataCube, channel_axis_of
from .errors import ConfigurationError


@dataclass(frozen=True)
class MappingRule:
    """Recipe for one output stream, mirroring the rule-document fields.

    ``codec_config`` is a single options mapping applied to every output
    video of the stream, or a list with one mapping per output video.
    """

    stream_name: str
    input_vars: tuple[str, ...]
    axis_order: tuple[str, str, str]
    n_pcs: int = 0
    codec_config: dict | list = field(default_factory=dict)
    out_bit_depth: int = 12
    fill_value_for_leading: float = 0.0
    monochrome: bool = False

    def __post_init__(self):
        if isinstance(self.input_vars, str):
            object.__setattr__(self, "input_vars", (self.input_vars,))
        else:
            object.__setattr__(self, "input_vars", tuple(self.input_vars))
        object.__setattr__(self, "axis_order", tuple(self.axis_order))
        if not self.stream_name:
            raise ConfigurationError("stream name must be non-empty")
        if not self.input_vars:
            raise ConfigurationError(
                f"stream {self.stream_name!r} selects no variables"
            )
        if len(self.axis_order) != 3:
            raise ConfigurationError(
                f"stream {self.stream_name!r}: axis_order must name the "
                f"(time, y, x) roles, got {self.axis_order}"
            )
        if self.n_pcs < 0:
            raise ConfigurationError(
                f"stream {self.stream_name!r}: n_pcs must be >= 0"
            )
        if self.out_bit_depth not in (8, 10, 12, 16):
            raise ConfigurationError(
                f"stream {self.stream_name!r}: bit depth {self.out_bit_depth} "
                "not one of 8, 10, 12, 16"
            )

    @property
    def config_is_list(self) -> bool:
        return isinstance(self.codec_config, (list, tuple))

    def configs_for(self, n_videos: int) -> list[CodecConfig]:
        """Resolve per-video codec configs, replicating a single mapping."""
        if self.config_is_list:
            raw = list(self.codec_config)
            if len(raw) != n_videos:
                raise ConfigurationError(
                    f"stream {self.stream_name!r}: {len(raw)} codec configs "
                    f"for {n_videos} output videos"
                )
        else:
            raw = [self.codec_config] * n_videos
        configs = []
        for entry in raw:
            if isinstance(entry, CodecConfig):
                cfg = entry
            else:
                cfg = config_from_options(entry)
            configs.append(cfg.with_bit_depth(self.out_bit_depth))
        return configs


@dataclass(frozen=True)
class ChannelGroup:
    """Three channel slots of one output video.

    ``members`` holds 0-based channel indices of the stream; padding
    slots repeat the group's last real channel. ``video_index`` is the
    1-based index used in file names.
    """

    video_index: int
    members: tuple[int, int, int]
    n_real: int

    def __post_init__(self):
        if not 1 <= self.n_real <= 3:
            raise ConfigurationError("a group carries 1 to 3 real channels")
        real = self.members[: self.n_real]
        if self.members != real + (real[-1],) * (3 - self.n_real):
            raise ConfigurationError(
                "padding slots must repeat the group's last real channel"
            )


def pack_groups(n_channels: int) -> list[ChannelGroup]:
    """Pack channels 0..n-1 into ceil(n/3) groups of three, padding by repetition."""
    if n_channels < 1:
        raise ConfigurationError("cannot plan a stream with zero channels")
    groups = []
    for video_index in range(1, math.ceil(n_channels / 3) + 1):
        start = (video_index - 1) * 3
        real = tuple(range(start, min(start + 3, n_channels)))
        members = real + (real[-1],) * (3 - len(real))
        groups.append(ChannelGroup(video_index, members, len(real)))
    return groups


def plan_stream(rule: MappingRule, n_channels: int) -> list[ChannelGroup]:
    """Group a stream's channels into output videos.

    When the rule enables PCA, the encoded channel count is the number of
    kept components rather than the raw input channel count.
    """
    if rule.n_pcs > 0:
        n_channels = rule.n_pcs
    return pack_groups(n_channels)


@dataclass(frozen=True)
class StreamPlan:
    """Everything needed to encode one stream, fully resolved."""

    rule: MappingRule
    n_input_channels: int
    n_encoded_channels: int
    groups: tuple[ChannelGroup, ...]
    codec_configs: tuple[CodecConfig, ...]
    channel_axis: str | None          # set for a single 4-D input variable
    monochrome: bool

    @property
    def name(self) -> str:
        return self.rule.stream_name

    @property
    def video_names(self) -> tuple[str, ...]:
        return tuple(
            f"{self.name}_{g.video_index:04d}" for g in self.groups
        )


@dataclass(frozen=True)
class ValidatedPlan:
    streams: tuple[StreamPlan, ...]
    residual_vars: tuple[str, ...]


def validate_rules(rules, cube: DataCube) -> ValidatedPlan:
    """Check a rule set against a cube and compute the full packing plan.

    Verifies that every referenced variable exists with congruent shape,
    that no variable is claimed twice, that stream names are unique, and
    that each codec supports the requested bit depth. Whatever is not
    claimed by any rule lands in the residual set.
    """
    streams: list[StreamPlan] = []
    claimed: dict[str, str] = {}
    names_seen: set[str] = set()

    for rule in rules:
        if rule.stream_name in names_seen:
            raise ConfigurationError(f"duplicate stream name {rule.stream_name!r}")
        names_seen.add(rule.stream_name)

        for var in rule.input_vars:
            if var not in cube:
                raise ConfigurationError(
                    f"stream {rule.stream_name!r} references unknown variable {var!r}"
                )
            if var in claimed:
                raise ConfigurationError(
                    f"variable {var!r} claimed by streams {claimed[var]!r} "
                    f"and {rule.stream_name!r}"
                )
            claimed[var] = rule.stream_name

        channel_axis = None
        if len(rule.input_vars) == 1 and cube[rule.input_vars[0]].ndim == 4:
            channel_axis = channel_axis_of(cube, rule.input_vars[0], rule.axis_order)
            n_input = cube.axis_length(channel_axis)
        else:
            for var in rule.input_vars:
                var_axes = cube.axes_of(var)
                if cube[var].ndim != 3 or set(var_axes) != set(rule.axis_order):
                    raise ConfigurationError(
                        f"stream {rule.stream_name!r}: variable {var!r} with axes "
                        f"{var_axes} does not match axis order {rule.axis_order}"
                    )
            n_input = len(rule.input_vars)

        if rule.n_pcs > n_input:
            raise ConfigurationError(
                f"stream {rule.stream_name!r}: n_pcs={rule.n_pcs} exceeds the "
                f"{n_input} input channels"
            )
        n_encoded = rule.n_pcs if rule.n_pcs > 0 else n_input

        monochrome = rule.monochrome
        if monochrome and n_encoded != 1:
            raise ConfigurationError(
                f"stream {rule.stream_name!r}: monochrome packing needs exactly "
                f"one encoded channel, got {n_encoded}"
            )

        groups = tuple(plan_stream(rule, n_input))
        configs = tuple(rule.configs_for(len(groups)))
        for cfg in configs:
            caps = probe_capabilities(cfg.codec_id)
            if rule.out_bit_depth not in caps.bit_depths:
                raise ConfigurationError(
                    f"stream {rule.stream_name!r}: {cfg.codec_id} does not "
                    f"support {rule.out_bit_depth}-bit output "
                    f"(supported: {sorted(caps.bit_depths)})"
                )
            if monochrome and not cfg.is_image and not caps.supports(rule.out_bit_depth, 1):
                raise ConfigurationError(
                    f"stream {rule.stream_name!r}: {cfg.codec_id} has no "
                    f"monochrome layout at {rule.out_bit_depth} bits"
                )

        streams.append(
            StreamPlan(
                rule=rule,
                n_input_channels=n_input,
                n_encoded_channels=n_encoded,
                groups=groups,
                codec_configs=configs,
                channel_axis=channel_axis,
                monochrome=monochrome,
            )
        )

    residual = tuple(v for v in cube.variable_names() if v not in claimed)
    return ValidatedPlan(streams=tuple(streams), residual_vars=residual)


def rules_from_document(doc: dict) -> list[MappingRule]:
    """Parse a rules document (parsed YAML/JSON) into mapping rules.

    Two shapes are accepted per stream entry. The positional list form
    ``[input_vars, axis_order, n_pcs, codec_config, out_bit_depth]``
    mirrors the in-code configuration tuple; the mapping form uses the
    field names of :class:`MappingRule`.
    """
    if not isinstance(doc, dict):
        raise ConfigurationError("rules document must map stream names to rules")
    rules = []
    for stream_name, body in doc.items():
        if isinstance(body, (list, tuple)):
            if len(body) != 5:
                raise ConfigurationError(
                    f"stream {stream_name!r}: positional rule needs 5 entries "
                    "(input vars, axis order, n_pcs, codec config, bit depth), "
                    f"got {len(body)}"
                )
            input_vars, axis_order, n_pcs, codec_config, bit_depth = body
            rules.append(
                MappingRule(
                    stream_name=str(stream_name),
                    input_vars=input_vars,
                    axis_order=tuple(axis_order),
                    n_pcs=int(n_pcs),
                    codec_config=codec_config,
                    out_bit_depth=int(bit_depth),
                )
            )
        elif isinstance(body, dict):
            known = {
                "input_vars", "axis_order", "n_pcs", "codec_config",
                "out_bit_depth", "fill_value_for_leading", "monochrome",
            }
            unknown = set(body) - known
            if unknown:
                raise ConfigurationError(
                    f"stream {stream_name!r}: unknown rule fields {sorted(unknown)}"
                )
            kwargs = dict(body)
            if "axis_order" in kwargs:
                kwargs["axis_order"] = tuple(kwargs["axis_order"])
            rules.append(MappingRule(stream_name=str(stream_name), **kwargs))
        else:
            raise ConfigurationError(
                f"stream {stream_name!r}: rule must be a list or mapping"
            )
    return rules
