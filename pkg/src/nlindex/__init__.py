"""Non-linearity index for topology-optimization landscapes."""
from .embedding import Embedding2D, classical_mds, cosine_distance_matrix, embed_designs, pca_embed
from .landscape import LandscapeSurface, LowerHullEnvelope, analyze, build_surface, lower_convex_hull, nonlinearity_index
from .problems import ConfigError, ObjectiveSpec, Problem, ProblemSpec
from .sampler import SampleSet, SamplingConfig, run_sampling

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "Embedding2D", "LandscapeSurface", "LowerHullEnvelope", "ObjectiveSpec", "Problem",
    "ProblemSpec", "SampleSet", "SamplingConfig", "analyze", "build_surface", "classical_mds",
    "cosine_distance_matrix", "embed_designs", "lower_convex_hull", "nonlinearity_index", "pca_embed",
    "run_sampling",
]
