"""Rectangular self-organizing map: initialisation, online training, BMU search.

The inner loops are compiled with numba. Distances are accumulated
sequentially over dimensions so that batch and single-query searches give
bit-identical results.

Artifact format (little-endian)::

    magic   6 bytes  b"HVDSOM"
    version uint16   FORMAT_VERSION
    rows    uint32
    cols    uint32
    dim     uint32
    weights float64[rows * cols * dim], row-major (row, col, dim)
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

FORMAT_VERSION = 1
_MAGIC = b"HVDSOM"
_HEADER = struct.Struct("<6sHIII")

# exp(-x) is exactly 0.0 in float64 for x beyond this, so such units are skipped.
_EXP_UNDERFLOW = 746.0


class DimensionMismatch(ValueError):
    pass


class EmptyData(ValueError):
    pass


@dataclass
class Som:
    weights: np.ndarray  # (rows, cols, dim) float64

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 3 or min(self.weights.shape) < 1:
            raise ValueError(f"weights must have shape (rows, cols, dim), got {self.weights.shape}")

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def cols(self) -> int:
        return self.weights.shape[1]

    @property
    def dim(self) -> int:
        return self.weights.shape[2]

    @property
    def n_units(self) -> int:
        return self.rows * self.cols

    def flat(self) -> np.ndarray:
        return self.weights.reshape(self.n_units, self.dim)

    def unit(self, linear: int) -> tuple[int, int]:
        return divmod(int(linear), self.cols)

    def grid_coords(self) -> np.ndarray:
        r, c = np.divmod(np.arange(self.n_units), self.cols)
        return np.stack([r, c], axis=1).astype(np.float64)

    def copy(self) -> "Som":
        return Som(self.weights.copy())


@dataclass(frozen=True)
class TrainSchedule:
    """One training phase. Learning rate and radius decay exponentially
    from start to end over ``total_steps`` (linearly when an endpoint is 0)."""

    total_steps: int
    lr_start: float
    lr_end: float
    radius_start: float
    radius_end: float
    seed: int = 0

    def __post_init__(self):
        if self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        if not (1.0 >= self.lr_start >= self.lr_end > 0.0):
            raise ValueError("need 1 >= lr_start >= lr_end > 0")
        if not (self.radius_start >= self.radius_end >= 0.0):
            raise ValueError("need radius_start >= radius_end >= 0")

    def learning_rates(self) -> np.ndarray:
        return _interpolate(self.lr_start, self.lr_end, self.total_steps)

    def radii(self) -> np.ndarray:
        return _interpolate(self.radius_start, self.radius_end, self.total_steps)


def _interpolate(start: float, end: float, steps: int) -> np.ndarray:
    frac = np.arange(steps) / (steps - 1) if steps > 1 else np.zeros(1)
    if start == end:
        return np.full(steps, float(start))
    if start == 0.0 or end == 0.0:
        return start + (end - start) * frac
    return start * (end / start) ** frac


def default_schedule(
    rows: int,
    cols: int,
    n_data: int,
    seed: int,
    steps_per_sample: float = 20.0,
    max_steps: int = 500_000,
    ordering_fraction: float = 0.25,
) -> list[TrainSchedule]:
    """Ordering phase followed by fine tuning, Kohonen style."""
    total = max(2, min(int(steps_per_sample * n_data), max_steps))
    ordering = max(1, int(total * ordering_fraction))
    r0 = max(max(rows, cols) / 2.0, 2.0)
    return [
        TrainSchedule(ordering, 0.5, 0.1, r0, 2.0, seed),
        TrainSchedule(total - ordering, 0.1, 0.01, 2.0, 0.5, (seed + 1) % 2**64),
    ]


def init_som(rows: int, cols: int, dim: int, seed: int, data_sample=None) -> Som:
    if min(rows, cols, dim) < 1:
        raise ValueError("rows, cols and dim must be >= 1")
    rng = np.random.default_rng(seed)
    if data_sample is None:
        lo, hi = np.full(dim, -1.0), np.full(dim, 1.0)
    else:
        sample = np.asarray(data_sample, dtype=np.float64)
        if sample.ndim != 2 or sample.shape[1] != dim:
            raise DimensionMismatch(f"data sample has shape {sample.shape}, map dim is {dim}")
        if len(sample) == 0:
            raise EmptyData("data sample is empty")
        lo, hi = sample.min(axis=0), sample.max(axis=0)
    weights = lo + (hi - lo) * rng.random((rows, cols, dim))
    return Som(weights)


# --- compiled kernels -------------------------------------------------------

@njit(cache=True, nogil=True)
def _sqdist(w, x):
    acc = 0.0
    for k in range(x.shape[0]):
        d = w[k] - x[k]
        acc += d * d
    return acc


@njit(cache=True, nogil=True)
def _bmu(W, x):
    best = 0
    best_d = np.inf
    for u in range(W.shape[0]):
        d = _sqdist(W[u], x)
        if d < best_d:
            best_d = d
            best = u
    return best, best_d


@njit(cache=True, nogil=True)
def _bmu_batch(W, X, out_idx, out_sq):
    for i in range(X.shape[0]):
        b, d = _bmu(W, X[i])
        out_idx[i] = b
        out_sq[i] = d


@njit(cache=True, nogil=True)
def _update(W, coords, x, bmu, lr, radius):
    dim = x.shape[0]
    denom = 2.0 * radius * radius
    if radius <= 0.0 or denom == 0.0:
        if lr == 1.0:
            for k in range(dim):
                W[bmu, k] = x[k]
        else:
            for k in range(dim):
                W[bmu, k] += lr * (x[k] - W[bmu, k])
        return
    br = coords[bmu, 0]
    bc = coords[bmu, 1]
    for u in range(W.shape[0]):
        dr = coords[u, 0] - br
        dc = coords[u, 1] - bc
        z = (dr * dr + dc * dc) / denom
        if z > _EXP_UNDERFLOW:
            continue
        f = lr * math.exp(-z)
        if f == 1.0:
            for k in range(dim):
                W[u, k] = x[k]
        else:
            for k in range(dim):
                W[u, k] += f * (x[k] - W[u, k])


@njit(cache=True, nogil=True)
def _train_kernel(W, coords, data, order, lrs, radii):
    n = order.shape[0]
    for t in range(lrs.shape[0]):
        x = data[order[t % n]]
        b, _ = _bmu(W, x)
        _update(W, coords, x, b, lrs[t], radii[t])


# --- public API ---------------------------------------------------------------

def _as_data(som: Som, data) -> np.ndarray:
    X = np.ascontiguousarray(data, dtype=np.float64)
    if X.size == 0:
        raise EmptyData("no data vectors given")
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != som.dim:
        raise DimensionMismatch(f"data has shape {X.shape}, map dim is {som.dim}")
    return X


def best_matching_unit(som: Som, x) -> tuple[tuple[int, int], float]:
    """Nearest unit to ``x`` and its Euclidean distance. Ties go to the
    smallest row-major index."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (som.dim,):
        raise DimensionMismatch(f"query has shape {x.shape}, map dim is {som.dim}")
    b, sq = _bmu(som.flat(), x)
    return som.unit(b), math.sqrt(sq)


def best_matching_units(som: Som, data) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised BMU search: (linear unit indices, Euclidean distances)."""
    X = _as_data(som, data)
    idx = np.empty(len(X), dtype=np.int64)
    sq = np.empty(len(X), dtype=np.float64)
    _bmu_batch(som.flat(), X, idx, sq)
    return idx, np.sqrt(sq)


def train(
    som: Som,
    data,
    schedule: TrainSchedule | Sequence[TrainSchedule],
    check: bool = False,
) -> Som:
    """Online training; returns a new map and leaves ``som`` untouched.

    Each phase visits the data in a seed-shuffled order, cycling as needed.
    With ``check`` set, every step is run from Python and asserted to keep
    weights finite and bounded.
    """
    X = _as_data(som, data)
    phases = [schedule] if isinstance(schedule, TrainSchedule) else list(schedule)
    out = som.copy()
    W = out.flat()
    coords = out.grid_coords()
    for phase in phases:
        order = np.random.default_rng(phase.seed).permutation(len(X))
        lrs, radii = phase.learning_rates(), phase.radii()
        if not check:
            _train_kernel(W, coords, X, order, lrs, radii)
            continue
        for t in range(phase.total_steps):
            x = X[order[t % len(X)]]
            before = W.copy()
            b, _ = _bmu(W, x)
            _update(W, coords, x, b, lrs[t], radii[t])
            _assert_bounded(before, W, x)
    return out


def _assert_bounded(before: np.ndarray, after: np.ndarray, x: np.ndarray) -> None:
    if not np.all(np.isfinite(after)):
        raise AssertionError("non-finite weight after update")
    bound = np.maximum(np.linalg.norm(before, axis=1), np.linalg.norm(x)) + np.linalg.norm(x - before, axis=1)
    if np.any(np.linalg.norm(after, axis=1) > bound * (1 + 1e-12) + 1e-12):
        raise AssertionError("weight update escaped the convex-hull bound")


def quantization_error(som: Som, data) -> float:
    X = _as_data(som, data)
    _, dist = best_matching_units(som, X)
    return float(dist.mean())


def save_som(som: Som, path) -> None:
    with open(path, "wb") as fh:
        write_som(som, fh)


def write_som(som: Som, fh) -> None:
    fh.write(_HEADER.pack(_MAGIC, FORMAT_VERSION, som.rows, som.cols, som.dim))
    fh.write(som.weights.astype("<f8").tobytes(order="C"))


def load_som(path) -> Som:
    with open(path, "rb") as fh:
        return read_som(fh, name=str(path))


def read_som(fh, name: str = "<stream>") -> Som:
    head = fh.read(_HEADER.size)
    if len(head) != _HEADER.size:
        raise ValueError(f"{name}: truncated SOM header")
    magic, version, rows, cols, dim = _HEADER.unpack(head)
    if magic != _MAGIC:
        raise ValueError(f"{name}: not a SOM artifact (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise ValueError(f"{name}: unsupported SOM format version {version}")
    nbytes = rows * cols * dim * 8
    body = fh.read(nbytes)
    if len(body) != nbytes:
        raise ValueError(f"{name}: truncated SOM weights")
    return Som(np.frombuffer(body, dtype="<f8").reshape(rows, cols, dim).astype(np.float64))

