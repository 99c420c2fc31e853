"""Targeted patch database: construction, search, and selection refinement.

The database is an in-memory (n, d) matrix of clean reference patches with
per-patch origins. Queries are read-only; a built database is never mutated.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .imaging import as_image, extract_patches, plan_grid, read_pgm

__all__ = [
    "Database",
    "build_database",
    "load_database",
    "save_database_cache",
    "load_database_cache",
    "knn",
    "refine_cross_similarity",
    "refine_first_pass",
    "cross_similarity_scores",
    "first_pass_scores",
    "k_smallest",
    "compute_weights",
    "database_quality",
    "default_tau",
    "default_bandwidth",
]

_CACHE_MAGIC = b"TDBC\x01\n"


@dataclass(frozen=True)
class Database:
    """Clean reference patches with their source locations.

    patches: (n_total, d) float64, one row per patch, d = patch_size**2.
    origins: (n_total, 3) int64 rows of (image_id, row, col).
    """

    patches: np.ndarray
    origins: np.ndarray
    patch_size: int

    def __post_init__(self):
        if self.patches.ndim != 2 or len(self.patches) < 1:
            raise ValueError("database needs at least one patch")
        if self.patches.shape[1] != self.patch_size**2:
            raise ValueError(
                f"patch dimension {self.patches.shape[1]} != patch_size**2 "
                f"({self.patch_size}**2)"
            )
        if len(self.origins) != len(self.patches):
            raise ValueError("origins and patches must have equal length")

    def __len__(self) -> int:
        return len(self.patches)


def build_database(images, patch_size: int, stride: int) -> Database:
    """Collect all grid patches of all images, in deterministic order.

    Patches are ordered by image, then row-major grid order within each
    image (the same order as plan_grid).
    """
    images = list(images)
    if not images:
        raise ValueError("need at least one image to build a database")
    chunks = []
    origins = []
    for image_id, img in enumerate(images):
        img = as_image(img)
        h, w = img.shape
        locs = plan_grid(w, h, patch_size, stride)
        chunks.append(extract_patches(img, locs, patch_size))
        ids = np.full((len(locs), 1), image_id, dtype=np.int64)
        origins.append(np.hstack([ids, locs]))
    return Database(
        patches=np.vstack(chunks),
        origins=np.vstack(origins),
        patch_size=patch_size,
    )


def load_database(directory, patch_size: int, stride: int) -> Database:
    """Build a database from every .pgm file in a directory (sorted names)."""
    directory = Path(directory)
    paths = sorted(directory.glob("*.pgm"))
    if not paths:
        raise ValueError(f"no .pgm files found in {directory}")
    images = [read_pgm(path.read_bytes()) for path in paths]
    return build_database(images, patch_size, stride)


def save_database_cache(db: Database, path) -> None:
    """Write the flat binary cache: magic, patch_size, n_total, raw floats."""
    header = _CACHE_MAGIC + struct.pack("<IQ", db.patch_size, len(db))
    payload = np.ascontiguousarray(db.patches, dtype="<f8").tobytes()
    Path(path).write_bytes(header + payload)


def load_database_cache(path) -> Database:
    """Load a cache written by save_database_cache.

    The cache stores patches only; origins are synthesized with image id -1
    and the row index in place of coordinates.
    """
    data = Path(path).read_bytes()
    if not data.startswith(_CACHE_MAGIC):
        raise ValueError(f"{path}: not a patch database cache")
    offset = len(_CACHE_MAGIC)
    patch_size, n_total = struct.unpack_from("<IQ", data, offset)
    offset += struct.calcsize("<IQ")
    d = patch_size * patch_size
    expected = n_total * d * 8
    payload = data[offset:]
    if len(payload) != expected:
        raise ValueError(
            f"{path}: payload length {len(payload)} != expected {expected}"
        )
    patches = np.frombuffer(payload, dtype="<f8").reshape(n_total, d).copy()
    origins = np.stack(
        [
            np.full(n_total, -1, dtype=np.int64),
            np.arange(n_total, dtype=np.int64),
            np.zeros(n_total, dtype=np.int64),
        ],
        axis=1,
    )
    return Database(patches=patches, origins=origins, patch_size=patch_size)


# ---------------------------------------------------------------------------
# Search and selection refinement
# ---------------------------------------------------------------------------


def _query_distances(db: Database, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (db.patches.shape[1],):
        raise ValueError(
            f"query dimension {q.shape} does not match patches "
            f"({db.patches.shape[1]},)"
        )
    return cdist(q[None, :], db.patches)[0]


def k_smallest(values: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest values; ties broken by lower index."""
    return np.argsort(values, kind="stable")[:k]


def knn(db: Database, q, k: int) -> np.ndarray:
    """The k nearest database patches to q by Euclidean distance.

    Returns database indices sorted ascending by distance, ties broken by
    lower index.
    """
    if not 1 <= k <= len(db):
        raise ValueError(f"k must be in [1, {len(db)}], got {k}")
    return k_smallest(_query_distances(db, q), k)


def cross_similarity_scores(c: np.ndarray, B: np.ndarray, tau: float) -> np.ndarray:
    """Linear selection objective: query distance plus tau * column sums of B."""
    B = np.asarray(B, dtype=np.float64)
    return np.asarray(c, dtype=np.float64) + tau * B.sum(axis=0)


def first_pass_scores(c: np.ndarray, e: np.ndarray, tau: float) -> np.ndarray:
    """Linear selection objective: query distance plus tau * pilot distance."""
    return np.asarray(c, dtype=np.float64) + tau * np.asarray(e, dtype=np.float64)


def _candidate_pool(db: Database, q, pool_size: int, k: int):
    if k > pool_size:
        raise ValueError(f"k ({k}) must not exceed pool_size ({pool_size})")
    if pool_size > len(db):
        raise ValueError(f"pool_size ({pool_size}) exceeds database size ({len(db)})")
    dists = _query_distances(db, q)
    pool = k_smallest(dists, pool_size)
    return pool, dists[pool]


def refine_cross_similarity(
    db: Database, q, pool_size: int, k: int, tau: float
) -> np.ndarray:
    """Select k patches penalizing candidates far from the rest of the pool.

    Restricts to the pool_size nearest candidates, scores each by its query
    distance plus tau times the sum of its distances to every pool member,
    and keeps the k smallest scores. tau = 0 reduces to plain knn.
    """
    pool, c = _candidate_pool(db, q, pool_size, k)
    B = cdist(db.patches[pool], db.patches[pool])
    scores = cross_similarity_scores(c, B, tau)
    # Score ties break by lower database index, not by pool position.
    return pool[np.lexsort((pool, scores))[:k]]


def refine_first_pass(
    db: Database, q, pbar, pool_size: int, k: int, tau: float
) -> np.ndarray:
    """Select k patches balancing distance to the query and to a pilot patch.

    Scores each pool candidate by ||q - p_j|| + tau * ||pbar - p_j|| and
    keeps the k smallest. tau = 0 reduces to plain knn; large tau ranks by
    pilot distance alone.
    """
    pool, c = _candidate_pool(db, q, pool_size, k)
    pbar = np.asarray(pbar, dtype=np.float64)
    if pbar.shape != (db.patches.shape[1],):
        raise ValueError(f"pilot dimension {pbar.shape} does not match database")
    e = cdist(pbar[None, :], db.patches[pool])[0]
    scores = first_pass_scores(c, e, tau)
    return pool[np.lexsort((pool, scores))[:k]]


def compute_weights(q, selected, h: float) -> np.ndarray:
    """Similarity weights w_j ∝ exp(-||q - p_j||^2 / h^2), normalized to 1.

    selected is a (k, d) array of patch rows. Weights are computed with the
    minimum squared distance subtracted inside the exponent, which leaves
    the normalized result unchanged but avoids underflow when h is small.
    """
    if h <= 0:
        raise ValueError(f"bandwidth h must be > 0, got {h}")
    selected = np.asarray(selected, dtype=np.float64)
    if selected.ndim != 2 or len(selected) < 1:
        raise ValueError("selection must be a nonempty (k, d) array")
    q = np.asarray(q, dtype=np.float64)
    sq = np.sum((selected - q[None, :]) ** 2, axis=1) / h**2
    w = np.exp(-(sq - sq.min()))
    return w / w.sum()


# ---------------------------------------------------------------------------
# Database quality
# ---------------------------------------------------------------------------


def database_quality(db: Database, clean, patch_size: int | None = None) -> float:
    """Average distance from the clean image's stride-1 patches to the database.

    For each of the m dense patches p_i of the clean image, take the minimum
    Euclidean distance to any database patch, normalized by sqrt(d); return
    the mean over i. Zero iff every clean patch appears in the database.
    """
    if patch_size is None:
        patch_size = db.patch_size
    if patch_size != db.patch_size:
        raise ValueError(
            f"patch_size {patch_size} does not match database ({db.patch_size})"
        )
    clean = as_image(clean)
    h, w = clean.shape
    if h < patch_size or w < patch_size:
        raise ValueError("clean image admits no patches at this patch size")
    windows = np.lib.stride_tricks.sliding_window_view(clean, (patch_size, patch_size))
    dense = windows.reshape(-1, patch_size * patch_size)
    d = patch_size * patch_size
    # Nearest neighbors located via the Gram expansion (BLAS speed), then the
    # winning distances recomputed directly so exact matches report exactly 0.
    db_sq = np.einsum("ij,ij->i", db.patches, db.patches)
    total = 0.0
    chunk = max(1, int(2e7) // max(len(db), 1))
    for start in range(0, len(dense), chunk):
        block = dense[start : start + chunk]
        block_sq = np.einsum("ij,ij->i", block, block)
        sq = block_sq[:, None] + db_sq[None, :] - 2.0 * (block @ db.patches.T)
        nearest = np.argmin(sq, axis=1)
        diffs = block - db.patches[nearest]
        total += np.sqrt(np.einsum("ij,ij->i", diffs, diffs)).sum()
    return total / (len(dense) * np.sqrt(d))


# ---------------------------------------------------------------------------
# Parameter schedules
# ---------------------------------------------------------------------------


def default_tau(selection: str, sigma: float, pool_size: int) -> float:
    """Noise-dependent penalty weight for the selection refinements.

    first_pass: 0.01 below sigma 30, 1.0 from 30 up. cross_similarity:
    1/(200 m) below sigma 30, 1/(2 m) from 30 up, with m the pool size.
    """
    high = sigma >= 30
    if selection == "first_pass":
        return 1.0 if high else 0.01
    if selection == "cross_similarity":
        return 1.0 / (2 * pool_size) if high else 1.0 / (200 * pool_size)
    raise ValueError(f"no tau schedule for selection {selection!r}")


def default_bandwidth(sigma: float) -> float:
    """Similarity bandwidth h matched to the noise level."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0 to derive a bandwidth, got {sigma}")
    return float(sigma)
