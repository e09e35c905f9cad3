"""Benchmark harness: separation quality metric, mixing generators,
Monte-Carlo protocol, dimensionality validation grid, solver fixtures."""

from .latdim_grid import GridCell, GridConfig, grid_csv, grid_json, latdim_validation
from .mixing import MixingFamily, MixingSpec, gen_mixing
from .montecarlo import McRunDetail, monte_carlo_bss
from .problems import (
    electron_problem,
    nnls_problem,
    polygon_area,
    polygon_problem,
    random_nnls_instance,
)
from .sir import McSirReport, SirReport, sir
from .sources import (
    SOURCE_SUITES,
    make_sources,
    model_dataset,
    narrowband,
    sparse_bells,
    speech_like,
    synth5,
)

__all__ = [
    "GridCell",
    "GridConfig",
    "McRunDetail",
    "McSirReport",
    "MixingFamily",
    "MixingSpec",
    "SOURCE_SUITES",
    "SirReport",
    "electron_problem",
    "gen_mixing",
    "grid_csv",
    "grid_json",
    "latdim_validation",
    "make_sources",
    "model_dataset",
    "monte_carlo_bss",
    "narrowband",
    "nnls_problem",
    "polygon_area",
    "polygon_problem",
    "random_nnls_instance",
    "sir",
    "sparse_bells",
    "speech_like",
    "synth5",
]
