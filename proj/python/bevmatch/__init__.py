"""BEV semantic map matching: rasterize vector maps, render observations,
and localize by exhaustive rotational cross-correlation."""

from ._core import (
    BevmatchError,
    VectorMap,
    corrupt,
    evaluate,
    generate_map,
    ingest_osm,
    localize,
    query_tile,
    render_observation,
    score_volume,
)

__all__ = [
    "BevmatchError",
    "VectorMap",
    "corrupt",
    "evaluate",
    "generate_map",
    "ingest_osm",
    "localize",
    "query_tile",
    "render_observation",
    "score_volume",
]

__version__ = "0.1.0"
