"""Monte Carlo estimation of Kemeny's constant on strongly connected digraphs."""

__version__ = "0.1.0"

from .config import EstimateReport, EstimatorConfig, TreeSampleStats, WalkStats
from .graph import Digraph, GraphStats, graph_stats, largest_scc, load_edge_list, write_edge_list
from .spectral import SpectralInfo, exact_kemeny, spectral_info
from .trees import tree_mc
from .walks import ablation_mc, dynamic_mc, improved_mc

__all__ = [
    "Digraph",
    "EstimateReport",
    "EstimatorConfig",
    "GraphStats",
    "SpectralInfo",
    "TreeSampleStats",
    "WalkStats",
    "ablation_mc",
    "dynamic_mc",
    "exact_kemeny",
    "graph_stats",
    "improved_mc",
    "largest_scc",
    "load_edge_list",
    "spectral_info",
    "tree_mc",
    "write_edge_list",
]
