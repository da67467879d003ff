"""Reversible float/integer quantization and the optional PCA channel transform.

Quantization maps each channel linearly from its observed [min, max] range
onto the integer range [0, 2^B - 1]. The scaling is computed once over the
whole sequence (per-frame scaling would break inter-frame prediction). The
rounding rule is round-half-away-from-zero so that every implementation of
the format agrees bit-for-bit.

The PCA transform projects per-pixel channel vectors onto orthonormal
components ordered by descending explained variance; it is fitted per cube
so that a compressed directory stays self-contained.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

SUPPORTED_BIT_DEPTHS = (8, 10, 12, 16)


@dataclass(frozen=True)
class QuantParams:
    """Per-channel [min, max] ranges plus the target bit depth."""

    bit_depth: int
    mins: tuple[float, ...]
    maxs: tuple[float, ...]

    def __post_init__(self):
        if self.bit_depth not in SUPPORTED_BIT_DEPTHS:
            raise ConfigurationError(
                f"bit depth {self.bit_depth} not in {SUPPORTED_BIT_DEPTHS}"
            )
        if len(self.mins) != len(self.maxs):
            raise ConfigurationError("mins and maxs must have equal length")
        for lo, hi in zip(self.mins, self.maxs):
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ConfigurationError("quantization range must be finite")
            if lo > hi:
                raise ConfigurationError(f"channel min {lo} exceeds max {hi}")

    @property
    def levels(self) -> int:
        return (1 << self.bit_depth) - 1

    @property
    def n_channels(self) -> int:
        return len(self.mins)

    def is_constant(self, channel: int) -> bool:
        return self.mins[channel] == self.maxs[channel]

    def step(self, channel: int) -> float:
        return (self.maxs[channel] - self.mins[channel]) / self.levels


def fit_quant(arr, bit_depth: int) -> QuantParams:
    """Observe per-channel min/max over all (t, y, x) of a [t,y,x,c] array."""
    arr = np.asarray(arr)
    if arr.ndim != 4:
        raise ConfigurationError(f"expected a [t,y,x,c] array, got {arr.ndim}-D")
    if np.issubdtype(arr.dtype, np.floating) and not np.isfinite(arr).all():
        raise ConfigurationError("cannot fit quantization on non-finite values")
    mins = arr.min(axis=(0, 1, 2)).astype(np.float64)
    maxs = arr.max(axis=(0, 1, 2)).astype(np.float64)
    return QuantParams(bit_depth, tuple(mins.tolist()), tuple(maxs.tolist()))


def _int_dtype(bit_depth: int):
    return np.uint8 if bit_depth == 8 else np.uint16


def quantize(arr, params: QuantParams, clamp: bool = False) -> np.ndarray:
    """Map float values to integers: q = round((v - min) / (max - min) * (2^B - 1)).

    Values must lie inside each channel's [min, max] unless ``clamp`` is set.
    Constant channels (min == max) map to all zeros. Rounding is
    half-away-from-zero.
    """
    arr = np.asarray(arr)
    if arr.ndim != 4 or arr.shape[-1] != params.n_channels:
        raise ConfigurationError(
            f"array shape {arr.shape} does not match {params.n_channels} channels"
        )
    mins = np.array(params.mins, dtype=np.float64)
    maxs = np.array(params.maxs, dtype=np.float64)
    data = arr.astype(np.float64, copy=False)
    if clamp:
        data = np.clip(data, mins, maxs)
    elif ((data < mins) | (data > maxs)).any():
        raise ConfigurationError(
            "values outside the quantization range (pass clamp=True to clip)"
        )
    span = maxs - mins
    constant = span == 0
    scale = np.where(constant, 1.0, span)
    x = (data - mins) / scale * params.levels
    # scaled values are non-negative, so floor(x + 0.5) rounds half away from zero
    q = np.floor(x + 0.5)
    q[..., constant] = 0
    return q.astype(_int_dtype(params.bit_depth))


def dequantize(q, params: QuantParams) -> np.ndarray:
    """Invert :func:`quantize`: v = min + q / (2^B - 1) * (max - min)."""
    q = np.asarray(q)
    if q.ndim != 4 or q.shape[-1] != params.n_channels:
        raise ConfigurationError(
            f"array shape {q.shape} does not match {params.n_channels} channels"
        )
    if q.min() < 0 or q.max() > params.levels:
        raise ConfigurationError(
            f"integer values outside [0, {params.levels}] for bit depth "
            f"{params.bit_depth}"
        )
    mins = np.array(params.mins, dtype=np.float64)
    maxs = np.array(params.maxs, dtype=np.float64)
    out = mins + q.astype(np.float64) / params.levels * (maxs - mins)
    constant = maxs - mins == 0
    if constant.any():
        out[..., constant] = mins[constant]
    return out


@dataclass(frozen=True)
class PcaModel:
    """Orthonormal channel transform ordered by descending explained variance."""

    mean: np.ndarray                 # [c]
    components: np.ndarray           # [n_kept, c], orthonormal rows
    explained_variance: np.ndarray   # [n_kept], non-increasing
    n_input_channels: int
    per_component_quality: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "components", np.asarray(self.components, dtype=np.float64))
        object.__setattr__(
            self, "explained_variance", np.asarray(self.explained_variance, dtype=np.float64)
        )
        k, c = self.components.shape
        if c != self.n_input_channels or self.mean.shape != (c,):
            raise ConfigurationError("inconsistent PCA model shapes")
        gram = self.components @ self.components.T
        if not np.allclose(gram, np.eye(k), atol=1e-10):
            raise ConfigurationError("PCA component rows are not orthonormal")
        ev = self.explained_variance
        if len(ev) != k or (np.diff(ev) > 1e-12 * max(ev[0], 1.0)).any():
            raise ConfigurationError("explained variance must be non-increasing")

    @property
    def n_kept(self) -> int:
        return self.components.shape[0]


def pca_fit(arr, n_keep: int) -> PcaModel:
    """Fit a PCA over all pixel spectra of a [t,y,x,c] array.

    Rank-deficient input is not an error; trailing components simply carry
    zero variance.
    """
    arr = np.asarray(arr)
    if arr.ndim != 4:
        raise ConfigurationError(f"expected a [t,y,x,c] array, got {arr.ndim}-D")
    c = arr.shape[-1]
    if not 1 <= n_keep <= c:
        raise ConfigurationError(f"n_keep={n_keep} outside [1, {c}]")
    flat = arr.reshape(-1, c).astype(np.float64)
    if flat.shape[0] < c:
        raise ConfigurationError(
            f"need at least {c} pixel samples to fit {c} channels"
        )
    mean = flat.mean(axis=0)
    centered = flat - mean
    cov = centered.T @ centered / flat.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:n_keep]
    variance = np.clip(eigvals[order], 0.0, None)
    components = eigvecs[:, order].T
    # fix the sign so repeated fits give identical models
    signs = np.sign(components[np.arange(n_keep), np.abs(components).argmax(axis=1)])
    signs[signs == 0] = 1.0
    components = components * signs[:, None]
    return PcaModel(mean, components, variance, n_input_channels=c)


def pca_forward(arr, model: PcaModel) -> np.ndarray:
    """Project [t,y,x,c] onto the kept components: (v - mean) @ components.T."""
    arr = np.asarray(arr)
    if arr.ndim != 4 or arr.shape[-1] != model.n_input_channels:
        raise ConfigurationError(
            f"array has {arr.shape[-1] if arr.ndim == 4 else '?'} channels, "
            f"model expects {model.n_input_channels}"
        )
    return (arr.astype(np.float64) - model.mean) @ model.components.T


def pca_inverse(pc, model: PcaModel) -> np.ndarray:
    """Reconstruct channel space from component space: pc @ components + mean."""
    pc = np.asarray(pc)
    if pc.ndim != 4 or pc.shape[-1] != model.n_kept:
        raise ConfigurationError(
            f"array has {pc.shape[-1] if pc.ndim == 4 else '?'} components, "
            f"model keeps {model.n_kept}"
        )
    return pc.astype(np.float64) @ model.components + model.mean
