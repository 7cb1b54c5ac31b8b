"""Dataset ingestion, generation, normalization, and spatial partitioning.

File formats (see docs/FORMATS.md): SRTM ``.hgt`` tiles are raw big-endian
int16 grids (1201 x 1201 or 3601 x 3601 samples, row-major from the
north-west corner, void value -32768); CSV datasets carry a strict
``x1,...,xD,y`` header with finite float cells.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import encodings, qkernels, torus
from .errors import ConfigError, FormatError, StructureError
from .gp import chol_with_jitter

HGT_VOID = -32768
HGT_SIZES = (1201, 3601)
CLIP_SIGMA = 3.0

_TILE_NAME = re.compile(r"^([NS])(\d{2})([EW])(\d{3})$")


@dataclass
class Dataset:
    """Inputs, targets, and provenance metadata."""

    X: np.ndarray
    y: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float)
        if self.y.shape != (self.X.shape[0],):
            raise StructureError(f"X rows {self.X.shape[0]} != y length {self.y.shape}")
        if self.X.shape[0] < 1:
            raise FormatError("dataset is empty")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise FormatError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]


@dataclass
class Partition:
    """Disjoint index sets over a dataset, one per agent."""

    index_sets: list[np.ndarray]

    def audit(self, n: int) -> None:
        seen = np.concatenate(self.index_sets) if self.index_sets else np.array([], dtype=int)
        if len(seen) != len(set(seen.tolist())):
            raise StructureError("partition index sets overlap")
        if sorted(seen.tolist()) != list(range(n)):
            raise StructureError("partition does not cover all indices")

    def extract(self, ds: Dataset) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(ds.X[idx], ds.y[idx]) for idx in self.index_sets]


def parse_tile_name(stem: str) -> tuple[float, float]:
    """South-west corner (lat, lon) from an SRTM tile name like N17E073."""
    match = _TILE_NAME.match(stem)
    if not match:
        raise FormatError(f"cannot parse tile coordinates from {stem!r}")
    ns, lat, ew, lon = match.groups()
    lat = float(lat) * (1 if ns == "N" else -1)
    lon = float(lon) * (1 if ew == "E" else -1)
    return lat, lon


def load_hgt(path, sw_lat: float | None = None, sw_lon: float | None = None) -> Dataset:
    """Elevation tile -> (lat, lon) inputs with elevation targets; voids dropped."""
    path = Path(path)
    raw = path.read_bytes()
    size = None
    for candidate in HGT_SIZES:
        if len(raw) == 2 * candidate * candidate:
            size = candidate
            break
    if size is None:
        raise FormatError(f"{path.name}: size {len(raw)} bytes is not a 1201^2 or 3601^2 tile")
    if sw_lat is None or sw_lon is None:
        sw_lat, sw_lon = parse_tile_name(path.stem)
    grid = np.frombuffer(raw, dtype=">i2").reshape(size, size)
    rows, cols = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    lat = sw_lat + 1.0 - rows / (size - 1)
    lon = sw_lon + cols / (size - 1)
    valid = grid != HGT_VOID
    if not np.any(valid):
        raise FormatError(f"{path.name}: all samples are void")
    X = np.stack([lat[valid], lon[valid]], axis=1)
    y = grid[valid].astype(float)
    meta = {"source": str(path), "tile_size": size, "void_dropped": int((~valid).sum())}
    return Dataset(X, y, meta)


def write_hgt(path, grid) -> None:
    """Writer for the raw tile format (round-trip fixture support)."""
    grid = np.asarray(grid, dtype=np.int16)
    if grid.ndim != 2 or grid.shape[0] != grid.shape[1] or grid.shape[0] not in HGT_SIZES:
        raise FormatError(f"grid must be square with side in {HGT_SIZES}, got {grid.shape}")
    Path(path).write_bytes(grid.astype(">i2").tobytes())


def load_csv(path) -> Dataset:
    """Strict CSV reader for the ``x1,...,xD,y`` dataset layout."""
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path.name}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    dim = len(header) - 1
    if dim < 1 or header[-1] != "y" or header[:-1] != [f"x{i + 1}" for i in range(dim)]:
        raise FormatError(f"{path.name}: header must be x1,...,xD,y, got {lines[0]!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != dim + 1:
            raise FormatError(f"{path.name}:{lineno}: expected {dim + 1} cells, got {len(cells)}")
        try:
            values = [float(c) for c in cells]
        except ValueError as err:
            raise FormatError(f"{path.name}:{lineno}: {err}") from err
        if not all(np.isfinite(values)):
            raise FormatError(f"{path.name}:{lineno}: non-finite value")
        rows.append(values)
    if not rows:
        raise FormatError(f"{path.name}: no data rows")
    data = np.array(rows)
    return Dataset(data[:, :dim], data[:, dim], {"source": str(path)})


def write_csv(path, ds: Dataset) -> None:
    header = ",".join([f"x{i + 1}" for i in range(ds.dim)] + ["y"])
    lines = [header]
    for i in range(ds.n):
        cells = [repr(float(v)) for v in ds.X[i]] + [repr(float(ds.y[i]))]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def subsample(ds: Dataset, n: int, seed: int) -> Dataset:
    """Uniform subsample without replacement, seeded."""
    if not 1 <= n <= ds.n:
        raise ConfigError(f"subsample size {n} not in [1, {ds.n}]")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(ds.n, size=n, replace=False))
    base = ds.metadata.get("source_indices", np.arange(ds.n))
    meta = dict(ds.metadata, subsample_seed=seed, subsample_n=n, source_indices=base[idx])
    return Dataset(ds.X[idx], ds.y[idx], meta)


@dataclass(frozen=True)
class NormalizationParams:
    """Per-column standardization statistics plus the clip tally."""

    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float
    clip_count: int = 0


def _standardize(values, mean, std):
    scaled = (values - mean) / std
    clipped = np.clip(scaled, -CLIP_SIGMA, CLIP_SIGMA)
    return clipped, int(np.sum(scaled != clipped))


def zscore_normalize(ds: Dataset) -> tuple[Dataset, NormalizationParams]:
    """Standardize every feature column and the target, clipping to [-3, 3]."""
    x_mean = ds.X.mean(axis=0)
    x_std = ds.X.std(axis=0)
    y_mean = float(ds.y.mean())
    y_std = float(ds.y.std())
    if np.any(x_std == 0.0) or y_std == 0.0:
        raise ConfigError("cannot z-score a constant column")
    params = NormalizationParams(x_mean, x_std, y_mean, y_std)
    normalized, clip_count = _apply(ds, params)
    params = NormalizationParams(x_mean, x_std, y_mean, y_std, clip_count)
    return normalized, params


def apply_normalization(ds: Dataset, params: NormalizationParams) -> Dataset:
    return _apply(ds, params)[0]


def _apply(ds: Dataset, params: NormalizationParams) -> tuple[Dataset, int]:
    X, clipped_x = _standardize(ds.X, params.x_mean, params.x_std)
    y, clipped_y = _standardize(ds.y, params.y_mean, params.y_std)
    meta = dict(ds.metadata, normalized=True)
    return Dataset(X, y, meta), clipped_x + clipped_y


def denormalize_y(y_normalized, params: NormalizationParams) -> np.ndarray:
    """Inverse of the target standardization (exact for unclipped values)."""
    return np.asarray(y_normalized) * params.y_std + params.y_mean


def train_test_split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Disjoint seeded split; the test side gets ``ceil(n * fraction)`` points."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test fraction must be in (0, 1), got {test_fraction}")
    n_test = int(np.ceil(ds.n * test_fraction))
    if n_test >= ds.n:
        raise ConfigError(f"test fraction {test_fraction} leaves no training data")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(ds.n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    base = ds.metadata.get("source_indices", np.arange(ds.n))
    train = Dataset(
        ds.X[train_idx], ds.y[train_idx], dict(ds.metadata, source_indices=base[train_idx])
    )
    test = Dataset(
        ds.X[test_idx], ds.y[test_idx], dict(ds.metadata, source_indices=base[test_idx])
    )
    return train, test


def kdtree_split(ds: Dataset, num_parts: int) -> Partition:
    """Spatial partition: repeatedly halve the largest leaf at the median of
    its widest input dimension until ``num_parts`` leaves exist.

    Fully deterministic (stable sorts, lowest-index tie-breaks); supports any
    ``num_parts <= n``.
    """
    if not 1 <= num_parts <= ds.n:
        raise ConfigError(f"cannot split {ds.n} points into {num_parts} parts")
    leaves: list[np.ndarray] = [np.arange(ds.n)]
    while len(leaves) < num_parts:
        largest = max(range(len(leaves)), key=lambda i: (len(leaves[i]), -i))
        idx = leaves.pop(largest)
        spans = ds.X[idx].max(axis=0) - ds.X[idx].min(axis=0)
        dim = int(np.argmax(spans))
        order = idx[np.argsort(ds.X[idx, dim], kind="stable")]
        mid = len(order) // 2
        leaves.insert(largest, order[:mid])
        leaves.insert(largest + 1, order[mid:])
    partition = Partition([np.sort(leaf) for leaf in leaves])
    partition.audit(ds.n)
    return partition


def sample_qgp_prior(
    spec: encodings.CircuitSpec,
    theta,
    n_samples: int,
    noise_variance: float,
    seed: int,
    obs: qkernels.ObservableSet | None = None,
    outer: qkernels.OuterKernel | None = None,
    inputs=None,
) -> Dataset:
    """Draw targets from a zero-mean prior with the projected quantum kernel.

    Inputs default to a seeded uniform design over [-3, 3]^2; the draw is
    ``y = L u`` with ``L`` the Cholesky factor of the noise-inclusive gram and
    ``u`` seeded standard normals.
    """
    theta = torus.project(theta)
    if obs is None:
        obs = qkernels.observable_set("xyz_per_qubit", spec.num_qubits)
    if outer is None:
        outer = qkernels.OuterKernel("gaussian", 1.0)
    rng = np.random.default_rng(seed)
    if inputs is None:
        X = rng.uniform(-CLIP_SIGMA, CLIP_SIGMA, size=(n_samples, 2))
    else:
        X = np.atleast_2d(np.asarray(inputs, dtype=float))
    gram_matrix = qkernels.gram(spec, X, theta, obs, outer, noise_variance)
    L, _ = chol_with_jitter(gram_matrix.covariance())
    y = L @ rng.standard_normal(X.shape[0])
    meta = {
        "source": "qgp_prior",
        "seed": seed,
        "theta": tuple(float(t) for t in theta),
        "noise_variance": noise_variance,
        "circuit": spec.family,
    }
    return Dataset(X, y, meta)
