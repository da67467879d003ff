"""Cube readers and writers.

Two formats are supported:

* NetCDF (``.nc``): HDF5 files following the NetCDF-4 dimension-scale
  conventions, written through h5py with deflate-compressed variables.
  This is the format of the container's residual store.
* A simple raw-binary test format (``.cube``): an 8-byte magic, a JSON
  header describing variables/axes/coordinates/attributes, then the raw
  little-endian array payloads. Handy for synthetic test cubes; see
  ``docs/formats.md``.

Both store exactly the :class:`~cubevid.cube.DataCube` model: 3-D/4-D
variables, per-axis coordinates, per-variable and global attributes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import h5py
import numpy as np

from .cube import DataCube
from .errors import ConfigurationError

_PHONY = b"This is a netCDF dimension but not a netCDF variable."
_DTYPE_ATTR = "_cubevid_dtype"

RAW_MAGIC = b"CVCUBE01"


def _encode_array(arr: np.ndarray):
    """Map a cube array onto an HDF5-storable one, returning (data, tag)."""
    if arr.dtype == bool:
        return arr.astype(np.uint8), "bool"
    if np.issubdtype(arr.dtype, np.datetime64):
        ns = arr.astype("datetime64[ns]")
        return ns.view(np.int64), "datetime64[ns]"
    if arr.dtype.kind in ("U", "O", "S"):
        return arr.astype(object), "str"
    return arr, None


def _decode_array(data: np.ndarray, tag):
    if tag == "bool":
        return data.astype(bool)
    if tag == "datetime64[ns]":
        return data.astype(np.int64).view("datetime64[ns]")
    if tag == "str":
        return np.array([s.decode() if isinstance(s, bytes) else str(s) for s in data])
    return data


def _clean_attr(value):
    if isinstance(value, bytes):
        return value.decode()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def write_netcdf(cube: DataCube, path, compress: bool = True) -> None:
    """Write a cube as a NetCDF-4 style HDF5 file with deflated variables."""
    path = Path(path)
    axis_lengths: dict[str, int] = {}
    for name, arr in cube.variables.items():
        for ax, ln in zip(cube.axes_of(name), arr.shape):
            axis_lengths[ax] = ln
    for ax, vec in cube.coords.items():
        axis_lengths.setdefault(ax, len(vec))

    with h5py.File(path, "w") as f:
        scales = {}
        for i, (ax, length) in enumerate(sorted(axis_lengths.items())):
            coord = cube.coords.get(ax)
            if coord is not None:
                data, tag = _encode_array(coord)
                if tag == "str":
                    ds = f.create_dataset(ax, data=data,
                                          dtype=h5py.string_dtype("utf-8"))
                else:
                    ds = f.create_dataset(ax, data=data)
                if tag:
                    ds.attrs[_DTYPE_ATTR] = tag
                ds.make_scale(ax)
            else:
                ds = f.create_dataset(ax, data=np.zeros(length, dtype=np.float32))
                ds.make_scale(ax)
                ds.attrs["NAME"] = _PHONY + (" %10d" % length).encode()
            ds.attrs["_Netcdf4Dimid"] = np.int32(i)
            scales[ax] = ds

        for name, arr in cube.variables.items():
            data, tag = _encode_array(arr)
            ds = f.create_dataset(
                name, data=data,
                compression="gzip" if compress else None,
                compression_opts=4 if compress else None,
                shuffle=compress,
            )
            if tag:
                ds.attrs[_DTYPE_ATTR] = tag
            for i, ax in enumerate(cube.axes_of(name)):
                ds.dims[i].attach_scale(scales[ax])
            for key, value in cube.attrs_of(name).items():
                ds.attrs[key] = value

        for key, value in cube.global_attrs.items():
            f.attrs[key] = value


def read_netcdf(path) -> DataCube:
    """Read a cube written by :func:`write_netcdf` (or a compatible file)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such cube file: {path}")
    variables, axes, coords, attrs = {}, {}, {}, {}
    with h5py.File(path, "r") as f:
        scale_names = set()
        for name, ds in f.items():
            if not isinstance(ds, h5py.Dataset):
                continue
            if ds.attrs.get("CLASS") == b"DIMENSION_SCALE":
                scale_names.add(name)
                raw_name = ds.attrs.get("NAME", b"")
                if isinstance(raw_name, str):
                    raw_name = raw_name.encode()
                if not raw_name.startswith(_PHONY):
                    coords[name] = _decode_array(
                        ds[()], _clean_attr(ds.attrs.get(_DTYPE_ATTR))
                    )
        for name, ds in f.items():
            if not isinstance(ds, h5py.Dataset) or name in scale_names:
                continue
            if ds.ndim not in (3, 4):
                continue
            dim_names = []
            for i in range(ds.ndim):
                dim = ds.dims[i]
                if len(dim) == 0:
                    raise ConfigurationError(
                        f"variable {name!r} in {path.name} has an unlabeled "
                        f"dimension {i}"
                    )
                dim_names.append(dim[0].name.rsplit("/", 1)[-1])
            data = _decode_array(ds[()], _clean_attr(ds.attrs.get(_DTYPE_ATTR)))
            variables[name] = data
            axes[name] = tuple(dim_names)
            attrs[name] = {
                k: _clean_attr(v) for k, v in ds.attrs.items()
                if k not in ("CLASS", "NAME", "DIMENSION_LIST", "_Netcdf4Dimid",
                             _DTYPE_ATTR) and not k.startswith("REFERENCE_LIST")
            }
        global_attrs = {k: _clean_attr(v) for k, v in f.attrs.items()}
    return DataCube(variables, axes, coords, attrs, global_attrs)


# --------------------------------------------------------------------------
# Raw-binary test format

def _coord_to_json(vec: np.ndarray):
    if np.issubdtype(vec.dtype, np.datetime64):
        return {"dtype": "datetime64[ns]",
                "values": vec.astype("datetime64[ns]").view(np.int64).tolist()}
    if vec.dtype.kind in ("U", "O", "S"):
        return {"dtype": "str", "values": [str(v) for v in vec]}
    return {"dtype": vec.dtype.str, "values": vec.tolist()}


def _coord_from_json(spec) -> np.ndarray:
    if spec["dtype"] == "datetime64[ns]":
        return np.array(spec["values"], dtype=np.int64).view("datetime64[ns]")
    if spec["dtype"] == "str":
        return np.array(spec["values"])
    return np.array(spec["values"], dtype=np.dtype(spec["dtype"]))


def write_raw_cube(cube: DataCube, path) -> None:
    """Write the single-file raw-binary+header test format."""
    path = Path(path)
    header = {
        "variables": {}, "coords": {}, "global_attrs": cube.global_attrs,
    }
    payload = []
    for name, arr in cube.variables.items():
        data = arr.astype(arr.dtype.newbyteorder("<")) if arr.dtype.byteorder == ">" else arr
        if data.dtype == bool:
            stored = data.astype(np.uint8)
            dtype_str, orig = stored.dtype.str, "bool"
        else:
            stored = np.ascontiguousarray(data)
            dtype_str, orig = stored.dtype.str, None
        header["variables"][name] = {
            "dtype": dtype_str,
            "original_dtype": orig,
            "shape": list(arr.shape),
            "axes": list(cube.axes_of(name)),
            "attrs": cube.attrs_of(name),
        }
        payload.append(stored.tobytes())
    for ax, vec in cube.coords.items():
        header["coords"][ax] = _coord_to_json(vec)

    blob = json.dumps(header).encode()
    with open(path, "wb") as f:
        f.write(RAW_MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for chunk in payload:
            f.write(chunk)


def read_raw_cube(path) -> DataCube:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(len(RAW_MAGIC))
        if magic != RAW_MAGIC:
            raise ConfigurationError(f"{path.name} is not a raw cube file")
        (header_len,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(header_len).decode())
        variables, axes, attrs = {}, {}, {}
        for name, spec in header["variables"].items():
            count = int(np.prod(spec["shape"]))
            dtype = np.dtype(spec["dtype"])
            raw = f.read(count * dtype.itemsize)
            if len(raw) != count * dtype.itemsize:
                raise ConfigurationError(f"{path.name}: truncated payload for {name!r}")
            arr = np.frombuffer(raw, dtype=dtype).reshape(spec["shape"])
            if spec.get("original_dtype") == "bool":
                arr = arr.astype(bool)
            variables[name] = arr
            axes[name] = tuple(spec["axes"])
            attrs[name] = spec.get("attrs", {})
    coords = {ax: _coord_from_json(s) for ax, s in header["coords"].items()}
    return DataCube(variables, axes, coords, attrs, header.get("global_attrs", {}))


def load_cube(path) -> DataCube:
    """Load a cube file, dispatching on the extension (.nc or .cube)."""
    path = Path(path)
    if path.suffix == ".nc":
        return read_netcdf(path)
    if path.suffix == ".cube":
        return read_raw_cube(path)
    raise ConfigurationError(
        f"unknown cube format {path.suffix!r} (expected .nc or .cube)"
    )


def save_cube(cube: DataCube, path) -> None:
    path = Path(path)
    if path.suffix == ".nc":
        write_netcdf(cube, path)
    elif path.suffix == ".cube":
        write_raw_cube(cube, path)
    else:
        raise ConfigurationError(
            f"unknown cube format {path.suffix!r} (expected .nc or .cube)"
        )
