from .grid import PAPER_GRID_SIZE, Axis, ConfigGrid, SurrogateTable
from .gp import GaussianProcess, expected_improvement, fit_gp, matern32
from .search import HpoRun, adtm, adtm_curve, gp_smbo, random_search, warm_start
from .surrogate import read_corpus, synth_surrogate, write_corpus

__all__ = [
    "PAPER_GRID_SIZE", "Axis", "ConfigGrid", "SurrogateTable", "GaussianProcess",
    "expected_improvement", "fit_gp", "matern32", "HpoRun", "adtm", "adtm_curve",
    "gp_smbo", "random_search", "warm_start", "read_corpus", "synth_surrogate",
    "write_corpus",
]
