"""
Balanced ranked set sampling (RSS) and multistage RSS designs.

A cycle of an r-stage design draws k^(r+1) units, splits them into k^r sets
of size k and ranks every set by one coordinate. Groups of k sets are then
reduced to one ranked set (set i contributes its i-th ranked unit), which is
repeated r times until a single ranked set of k units, one per rank, is left.
"""

import os
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import IngestionError, ParameterError, SizeError
from .parents import ParentModel

SeedLike = Union[None, int, np.random.SeedSequence]


@dataclass(frozen=True)
class Design:
    """Parameters of a balanced MRSS design.

    k=1 is accepted and yields simple random sampling; r=1 is ordinary RSS,
    r=2 double RSS (DRSS).
    """
    k: int
    m: int
    r: int = 1
    rank_by: int = 0
    replacement: bool = True
    ranking_noise_sd: float = 0.0

    def __post_init__(self):
        if self.k < 1:
            raise ParameterError(f"set size k must be >= 1, got {self.k}")
        if self.m < 1:
            raise ParameterError(f"cycle count m must be >= 1, got {self.m}")
        if self.r < 1:
            raise ParameterError(f"stage count r must be >= 1, got {self.r}")
        if self.rank_by < 0:
            raise ParameterError(f"rank_by must be >= 0, got {self.rank_by}")
        if self.ranking_noise_sd < 0:
            raise ParameterError(f"ranking_noise_sd must be >= 0, got {self.ranking_noise_sd}")

    @property
    def n(self) -> int:
        return self.k * self.m

    @property
    def units_per_cycle(self) -> int:
        return self.k ** (self.r + 1)

    @property
    def scheme(self) -> str:
        if self.k == 1:
            return "srs"
        return {1: "rss", 2: "drss"}.get(self.r, f"mrss{self.r}")


@dataclass(frozen=True, eq=False)
class RankedSetSample:
    """A complete k x m grid of p-variate observations.

    ``obs[i, j]`` is the unit of rank i+1 measured in cycle j+1.
    """
    design: Design
    obs: np.ndarray

    def __post_init__(self):
        obs = np.array(self.obs, dtype=float)
        if obs.ndim == 2:
            obs = obs[:, :, None]
        if obs.ndim != 3 or obs.shape[:2] != (self.design.k, self.design.m):
            raise ParameterError(
                f"observation grid must have shape ({self.design.k}, {self.design.m}, p), "
                f"got {np.shape(self.obs)}"
            )
        if obs.shape[2] < 1:
            raise ParameterError("observations must have at least one coordinate")
        if not np.all(np.isfinite(obs)):
            raise ParameterError("observations must be finite")
        obs.setflags(write=False)
        object.__setattr__(self, 'obs', obs)

    @property
    def k(self) -> int:
        return self.design.k

    @property
    def m(self) -> int:
        return self.design.m

    @property
    def p(self) -> int:
        return self.obs.shape[2]

    @property
    def n(self) -> int:
        return self.design.n

    def points(self) -> np.ndarray:
        """All observations as an (n, p) array in cycle-major order."""
        return self.obs.transpose(1, 0, 2).reshape(self.n, self.p)

    def cycle_labels(self) -> np.ndarray:
        """Cycle index (0-based) of each row of ``points()``."""
        return np.repeat(np.arange(self.m), self.k)

    def rank_labels(self) -> np.ndarray:
        """Rank index (0-based) of each row of ``points()``."""
        return np.tile(np.arange(self.k), self.m)

    def project(self, coordinates: Sequence[int]) -> 'RankedSetSample':
        """The same grid restricted to the given coordinates."""
        coordinates = list(coordinates)
        if not coordinates or min(coordinates) < 0 or max(coordinates) >= self.p:
            raise ParameterError(f"coordinates {coordinates} out of range for p={self.p}")
        return RankedSetSample(self.design, self.obs[:, :, coordinates])

    def drop_cycle(self, j: int) -> 'RankedSetSample':
        """The sample without cycle j (0-based)."""
        if self.m < 2:
            raise ParameterError("cannot drop the only cycle")
        design = replace(self.design, m=self.m - 1)
        return RankedSetSample(design, np.delete(self.obs, j, axis=1))

    @classmethod
    def from_srs(cls, data) -> 'RankedSetSample':
        """Wrap a flat (n, p) sample as a k=1 design with n cycles."""
        data = np.asarray(data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2 or data.shape[0] < 1:
            raise ParameterError(f"flat sample must be a non-empty (n, p) array, got {data.shape}")
        return cls(Design(k=1, m=data.shape[0]), data[None, :, :])

    def to_frame(self, columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
        """Long format frame with 1-based ``cycle`` and ``rank`` columns."""
        columns = list(columns) if columns else [f"x{c + 1}" for c in range(self.p)]
        if len(columns) != self.p:
            raise ParameterError(f"expected {self.p} column names, got {len(columns)}")
        frame = pd.DataFrame(self.points(), columns=columns)
        frame.insert(0, 'rank', self.rank_labels() + 1)
        frame.insert(0, 'cycle', self.cycle_labels() + 1)
        return frame

    def to_csv(self, path: str, columns: Optional[Sequence[str]] = None):
        self.to_frame(columns).to_csv(path, index=False)

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        columns: Optional[Sequence[str]] = None,
        r: int = 1,
        rank_by: int = 0
    ) -> 'RankedSetSample':
        """Rebuild a sample from long format (``cycle``, ``rank``, value columns)."""
        for required in ('cycle', 'rank'):
            if required not in frame.columns:
                raise IngestionError(f"sample is missing the '{required}' column")
        columns = list(columns) if columns else [c for c in frame.columns if c not in ('cycle', 'rank')]
        missing = [c for c in columns if c not in frame.columns]
        if missing:
            raise IngestionError(f"sample is missing column(s): {', '.join(missing)}")
        try:
            values = frame[columns].to_numpy(dtype=float)
            cycles = frame['cycle'].to_numpy(dtype=int)
            ranks = frame['rank'].to_numpy(dtype=int)
        except (TypeError, ValueError) as e:
            raise IngestionError(f"non-numeric cell in sample: {e}") from e

        k, m = int(ranks.max()), int(cycles.max())
        if ranks.min() < 1 or cycles.min() < 1 or len(frame) != k * m:
            raise IngestionError(f"sample does not form a complete {k} x {m} grid")
        obs = np.full((k, m, len(columns)), np.nan)
        obs[ranks - 1, cycles - 1] = values
        if np.isnan(obs).any():
            raise IngestionError("sample grid has duplicated or missing (rank, cycle) cells")
        return cls(Design(k=k, m=m, r=r, rank_by=rank_by), obs)

    @classmethod
    def from_csv(cls, path: str, columns: Optional[Sequence[str]] = None, **kwargs) -> 'RankedSetSample':
        if not os.path.exists(path):
            raise IngestionError(f"sample file not found: {path}")
        return cls.from_frame(pd.read_csv(path), columns, **kwargs)


@dataclass(frozen=True, eq=False)
class FinitePopulation:
    """N p-variate rows, typically loaded from a CSV file."""
    rows: np.ndarray
    columns: Tuple[str, ...] = ()

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim == 1:
            rows = rows[:, None]
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise ParameterError(f"population must be a non-empty (N, p) array, got {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise IngestionError("population contains non-finite values")
        rows.setflags(write=False)
        object.__setattr__(self, 'rows', rows)
        if not self.columns:
            object.__setattr__(self, 'columns', tuple(f"x{c + 1}" for c in range(rows.shape[1])))

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    @property
    def size(self) -> int:
        return self.rows.shape[0]

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, columns: Optional[Sequence[str]] = None) -> 'FinitePopulation':
        columns = list(columns) if columns else list(frame.columns)
        missing = [c for c in columns if c not in frame.columns]
        if missing:
            raise IngestionError(f"population is missing column(s): {', '.join(missing)}")
        try:
            values = frame[columns].to_numpy(dtype=float)
        except (TypeError, ValueError) as e:
            raise IngestionError(f"non-numeric cell in population: {e}") from e
        return cls(values, tuple(columns))

    @classmethod
    def from_csv(cls, path: str, columns: Optional[Sequence[str]] = None) -> 'FinitePopulation':
        if not os.path.exists(path):
            raise IngestionError(f"population file not found: {path}")
        return cls.from_frame(pd.read_csv(path), columns)


PopulationSource = Union[ParentModel, FinitePopulation]


def as_sample(data) -> RankedSetSample:
    """Accept either a RankedSetSample or a flat (n, p) array."""
    if isinstance(data, RankedSetSample):
        return data
    return RankedSetSample.from_srs(data)


def source_dim(source: PopulationSource) -> int:
    return source.dim


def _draw_units(
    source: PopulationSource,
    rng: np.random.Generator,
    size: int,
    replacement: bool
) -> Tuple[np.ndarray, np.ndarray]:
    """Draw ``size`` units and the ids used to break ranking ties."""
    if isinstance(source, FinitePopulation):
        if not replacement and source.size < size:
            raise SizeError(
                f"population of {source.size} rows is too small for {size} draws without replacement"
            )
        ids = rng.choice(source.size, size=size, replace=replacement)
        return source.rows[ids], ids
    return source.sample(rng, size), np.arange(size)


def rank_stage(
    sets: np.ndarray,
    ids: np.ndarray,
    rank_by: int,
    rng: Optional[np.random.Generator] = None,
    noise_sd: float = 0.0
) -> Tuple[np.ndarray, np.ndarray]:
    """One ranking stage.

    Args:
        sets: Array (S, k, p) of S sets of k units, S a multiple of k
        ids: Array (S, k) of tie-breaking ids
        rank_by: Coordinate used for ranking
        rng: Generator for judgement noise (needed when noise_sd > 0)
        noise_sd: Standard deviation of Gaussian noise added to the ranking key

    Returns:
        Tuple (selected, selected_ids) with shapes (S / k, k, p) and (S / k, k):
        within every group of k consecutive sets, set i contributes its unit of rank i.
    """
    n_sets, k, p = sets.shape
    key = sets[:, :, rank_by]
    if noise_sd > 0:
        key = key + noise_sd * rng.standard_normal(key.shape)
    order = np.lexsort((ids, key), axis=-1)
    ordered = np.take_along_axis(sets, order[:, :, None], axis=1)
    ordered_ids = np.take_along_axis(ids, order, axis=1)

    groups = n_sets // k
    ordered = ordered.reshape(groups, k, k, p)
    ordered_ids = ordered_ids.reshape(groups, k, k)
    diag = np.arange(k)
    return ordered[:, diag, diag, :], ordered_ids[:, diag, diag]


def draw_cycle(
    source: PopulationSource,
    design: Design,
    rng: np.random.Generator,
    trace: Optional[List[dict]] = None
) -> np.ndarray:
    """Draw one cycle: k units, one per rank, shape (k, p).

    If ``trace`` is a list, every stage appends ``{'stage', 'sets', 'selected'}``.
    """
    k = design.k
    units, ids = _draw_units(source, rng, design.units_per_cycle, design.replacement)
    if design.rank_by >= units.shape[1]:
        raise ParameterError(f"rank_by={design.rank_by} out of range for p={units.shape[1]}")
    if k == 1:
        return units.reshape(1, -1)

    sets = units.reshape(k ** design.r, k, -1)
    set_ids = ids.reshape(k ** design.r, k)
    for stage in range(1, design.r + 1):
        selected, set_ids = rank_stage(
            sets, set_ids, design.rank_by, rng, design.ranking_noise_sd
        )
        if trace is not None:
            trace.append({'stage': stage, 'sets': sets.copy(), 'selected': selected.copy()})
        sets = selected
    return sets[0]


def cycle_generators(seed: SeedLike, count: int) -> List[np.random.Generator]:
    """Independent per-cycle generators spawned from one master seed."""
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in root.spawn(count)]


def draw_mrss(
    source: PopulationSource,
    design: Design,
    seed: SeedLike = None,
    trace: Optional[List[dict]] = None
) -> RankedSetSample:
    """Draw a balanced r-stage ranked set sample.

    Args:
        source: Parent model or finite population
        design: Design parameters
        seed: Master seed; cycle j uses the j-th spawned substream
        trace: Optional list collecting per-stage ranking records (with a 'cycle' key)

    Returns:
        RankedSetSample of shape (k, m, p)

    Raises:
        ParameterError: If rank_by is not a coordinate of the source
        SizeError: If a finite population is too small for a draw without replacement
    """
    if design.rank_by >= source_dim(source):
        raise ParameterError(f"rank_by={design.rank_by} out of range for p={source_dim(source)}")
    cycles = []
    for j, rng in enumerate(cycle_generators(seed, design.m)):
        stages = [] if trace is not None else None
        cycles.append(draw_cycle(source, design, rng, stages))
        if trace is not None:
            trace.extend({**record, 'cycle': j} for record in stages)
    return RankedSetSample(design, np.stack(cycles, axis=1))


def draw_srs(
    source: PopulationSource,
    n: int,
    seed: SeedLike = None,
    replacement: bool = True
) -> np.ndarray:
    """Draw n iid units as an (n, p) array."""
    if n < 1:
        raise ParameterError(f"sample size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    units, _ = _draw_units(source, rng, n, replacement)
    return units
