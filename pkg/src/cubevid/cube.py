"""Labeled in-memory data cubes and the missing-data policy.

A :class:`DataCube` is a small, dependency-free stand-in for a labeled
multi-dimensional dataset: named 3-D/4-D variables, named axes with
optional coordinate vectors, and free-form attributes. Cubes are held
fully in memory and are immutable after construction, so they can be
shared freely across threads.

Lossy encoders cannot represent missing values, so before any encoding
gaps are closed with :func:`forward_fill_time` (hold the last valid
value along time) and the synthesized cells are recorded in a
:class:`ValidityMask`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


def _readonly(arr: np.ndarray) -> np.ndarray:
    view = np.asarray(arr).view()
    view.flags.writeable = False
    return view


@dataclass(frozen=True)
class ValidityMask:
    """Marks which cells of a variable were actually observed.

    ``True`` means the value was present in the source; ``False`` means
    it was synthesized by the fill policy.
    """

    mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mask", _readonly(np.asarray(self.mask, dtype=bool)))

    @property
    def n_synthesized(self) -> int:
        return int((~self.mask).sum())

    @property
    def all_observed(self) -> bool:
        return bool(self.mask.all())


class DataCube:
    """Immutable collection of labeled 3-D/4-D arrays sharing named axes.

    Parameters
    ----------
    variables:
        Mapping of variable name to a 3-D or 4-D numeric array.
    axes:
        Mapping of variable name to its ordered axis names. Axis names
        are arbitrary labels (``time``, ``y``, ``lat``, ...); an axis
        name must have one consistent length across the whole cube.
    coords:
        Optional mapping of axis name to a 1-D coordinate vector of the
        same length as the axis.
    attrs:
        Optional per-variable metadata dictionaries.
    global_attrs:
        Optional cube-wide metadata.

    Arrays may contain NaN (missing data, to be filled before encoding)
    but never +/-inf, which indicates upstream corruption.
    """

    def __init__(self, variables, axes, coords=None, attrs=None, global_attrs=None):
        coords = {} if coords is None else dict(coords)
        attrs = {} if attrs is None else {k: dict(v) for k, v in attrs.items()}
        global_attrs = {} if global_attrs is None else dict(global_attrs)

        self._variables: dict[str, np.ndarray] = {}
        self._axes: dict[str, tuple[str, ...]] = {}
        axis_lengths: dict[str, int] = {}

        for name, arr in variables.items():
            arr = np.asarray(arr)
            if arr.ndim not in (3, 4):
                raise ConfigurationError(
                    f"variable {name!r} must be 3-D or 4-D, got {arr.ndim}-D"
                )
            if not (np.issubdtype(arr.dtype, np.number) or arr.dtype == bool):
                raise ConfigurationError(
                    f"variable {name!r} has non-numeric dtype {arr.dtype}"
                )
            if np.issubdtype(arr.dtype, np.floating) and np.isinf(arr).any():
                raise ConfigurationError(
                    f"variable {name!r} contains +/-inf values (corrupt input); "
                    "only NaN is accepted as missing data"
                )
            if name not in axes:
                raise ConfigurationError(f"variable {name!r} has no axes entry")
            ax = tuple(axes[name])
            if len(ax) != arr.ndim:
                raise ConfigurationError(
                    f"variable {name!r}: {arr.ndim} dims but {len(ax)} axis names"
                )
            if len(set(ax)) != len(ax):
                raise ConfigurationError(f"variable {name!r} repeats an axis name: {ax}")
            for axis_name, length in zip(ax, arr.shape):
                prev = axis_lengths.setdefault(axis_name, length)
                if prev != length:
                    raise ConfigurationError(
                        f"axis {axis_name!r} has conflicting lengths {prev} and {length}"
                    )
            self._variables[name] = _readonly(arr)
            self._axes[name] = ax

        for axis_name, vec in coords.items():
            vec = np.asarray(vec)
            if vec.ndim != 1:
                raise ConfigurationError(f"coordinate {axis_name!r} must be 1-D")
            if axis_name in axis_lengths and len(vec) != axis_lengths[axis_name]:
                raise ConfigurationError(
                    f"coordinate {axis_name!r} has length {len(vec)}, "
                    f"axis has length {axis_lengths[axis_name]}"
                )

        self._coords = {k: _readonly(np.asarray(v)) for k, v in coords.items()}
        self._attrs = attrs
        self._global_attrs = global_attrs
        self._axis_lengths = axis_lengths

    @property
    def variables(self) -> dict[str, np.ndarray]:
        return dict(self._variables)

    @property
    def axes(self) -> dict[str, tuple[str, ...]]:
        return dict(self._axes)

    @property
    def coords(self) -> dict[str, np.ndarray]:
        return dict(self._coords)

    @property
    def attrs(self) -> dict[str, dict]:
        return {k: dict(v) for k, v in self._attrs.items()}

    @property
    def global_attrs(self) -> dict:
        return dict(self._global_attrs)

    def __contains__(self, name) -> bool:
        return name in self._variables

    def __getitem__(self, name) -> np.ndarray:
        return self._variables[name]

    def axes_of(self, name: str) -> tuple[str, ...]:
        return self._axes[name]

    def attrs_of(self, name: str) -> dict:
        return dict(self._attrs.get(name, {}))

    def axis_length(self, axis_name: str) -> int:
        return self._axis_lengths[axis_name]

    def variable_names(self) -> tuple[str, ...]:
        return tuple(self._variables)

    def with_variables(self, extra_variables, extra_axes, extra_attrs=None) -> "DataCube":
        """Return a new cube with additional variables appended."""
        variables = dict(self._variables)
        axes = dict(self._axes)
        attrs = {k: dict(v) for k, v in self._attrs.items()}
        for name in extra_variables:
            if name in variables:
                raise ConfigurationError(f"variable {name!r} already exists")
        variables.update(extra_variables)
        axes.update(extra_axes)
        if extra_attrs:
            attrs.update({k: dict(v) for k, v in extra_attrs.items()})
        return DataCube(variables, axes, self._coords, attrs, self._global_attrs)

    # -- comparison helpers -------------------------------------------------

    def same_structure(self, other: "DataCube") -> bool:
        """Names, axes, shapes, dtypes, coords and attrs match (values ignored)."""
        if set(self._variables) != set(other._variables):
            return False
        for name, arr in self._variables.items():
            oarr = other._variables[name]
            if arr.shape != oarr.shape or arr.dtype != oarr.dtype:
                return False
            if self._axes[name] != other._axes[name]:
                return False
        if set(self._coords) != set(other._coords):
            return False
        for axis, vec in self._coords.items():
            if not np.array_equal(vec, other._coords[axis]):
                return False
        return self._attrs == other._attrs and self._global_attrs == other._global_attrs

    def identical(self, other: "DataCube") -> bool:
        """Structure plus bit-exact variable values (NaNs compare equal)."""
        if not self.same_structure(other):
            return False
        return all(
            np.array_equal(arr, other._variables[name], equal_nan=np.issubdtype(arr.dtype, np.floating))
            for name, arr in self._variables.items()
        )


def forward_fill_time(arr, time_axis: int, fill_value_for_leading=0.0):
    """Fill NaN gaps by holding the last valid value along the time axis.

    Leading gaps (no prior valid value) take ``fill_value_for_leading``.
    Returns the filled array plus a :class:`ValidityMask` marking exactly
    the cells that were synthesized. Valid cells are preserved bit-exactly
    and the operation is idempotent.
    """
    arr = np.asarray(arr)
    if not -arr.ndim <= time_axis < arr.ndim:
        raise ConfigurationError(
            f"time axis {time_axis} does not exist on a {arr.ndim}-D array"
        )
    if not np.issubdtype(arr.dtype, np.floating):
        # integer/bool data cannot hold NaN: identity fill
        return arr.copy(), ValidityMask(np.ones(arr.shape, dtype=bool))
    if np.isinf(arr).any():
        raise ConfigurationError("array contains +/-inf; only NaN marks missing data")

    work = np.moveaxis(arr, time_axis, 0)
    valid = ~np.isnan(work)
    t = work.shape[0]

    # index of the most recent valid timestep per cell, -1 while leading
    idx = np.where(valid, np.arange(t).reshape((t,) + (1,) * (work.ndim - 1)), -1)
    idx = np.maximum.accumulate(idx, axis=0)

    filled = np.take_along_axis(work, np.maximum(idx, 0), axis=0)
    filled = np.where(idx >= 0, filled, fill_value_for_leading)
    filled = np.where(valid, work, filled)

    filled = np.moveaxis(filled, 0, time_axis)
    mask = np.moveaxis(valid, 0, time_axis)
    return np.ascontiguousarray(filled), ValidityMask(mask)


def select_for_video(cube: DataCube, names, axis_order) -> np.ndarray:
    """Stack variables into one contiguous ``[t, y, x, c]`` array.

    ``names`` is either a list of 3-D variables sharing the three axes in
    ``axis_order`` (stacked in list order, one channel each) or a single
    4-D variable whose extra axis becomes the channel axis.
    """
    names = [names] if isinstance(names, str) else list(names)
    axis_order = tuple(axis_order)
    if len(axis_order) != 3:
        raise ConfigurationError(f"axis_order must name 3 axes, got {axis_order}")
    if len(set(names)) != len(names):
        raise ConfigurationError(f"duplicate variable names in selection: {names}")
    if not names:
        raise ConfigurationError("empty variable selection")
    for n in names:
        if n not in cube:
            raise ConfigurationError(f"variable {n!r} not found in cube")

    ndims = {cube[n].ndim for n in names}
    if ndims == {4}:
        if len(names) != 1:
            raise ConfigurationError(
                "a stream may use several 3-D variables or one 4-D variable, "
                f"got {len(names)} 4-D variables"
            )
        name = names[0]
        var_axes = cube.axes_of(name)
        extra = [a for a in var_axes if a not in axis_order]
        if len(extra) != 1 or not all(a in var_axes for a in axis_order):
            raise ConfigurationError(
                f"variable {name!r} with axes {var_axes} does not match "
                f"axis order {axis_order} plus one channel axis"
            )
        order = [var_axes.index(a) for a in axis_order] + [var_axes.index(extra[0])]
        return np.ascontiguousarray(np.transpose(cube[name], order))
    if ndims != {3}:
        raise ConfigurationError("cannot mix 3-D and 4-D variables in one stream")

    planes = []
    shape = None
    for n in names:
        var_axes = cube.axes_of(n)
        if set(var_axes) != set(axis_order):
            raise ConfigurationError(
                f"variable {n!r} has axes {var_axes}, expected a permutation "
                f"of {axis_order}"
            )
        plane = np.transpose(cube[n], [var_axes.index(a) for a in axis_order])
        if shape is None:
            shape = plane.shape
        elif plane.shape != shape:
            raise ConfigurationError(
                f"variable {n!r} has shape {plane.shape}, expected {shape}"
            )
        planes.append(plane)
    return np.ascontiguousarray(np.stack(planes, axis=-1))


def channel_axis_of(cube: DataCube, name: str, axis_order) -> str:
    """Name of the channel axis of a 4-D variable (the one not in axis_order)."""
    extra = [a for a in cube.axes_of(name) if a not in tuple(axis_order)]
    if len(extra) != 1:
        raise ConfigurationError(f"variable {name!r} has no unique channel axis")
    return extra[0]
