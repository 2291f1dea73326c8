from .config import ALL_ALGORITHMS, ExperimentConfig, family, load_config
from .rng import ROLES, make_streams, stream
from .runner import (METRICS_HEADER, SeedRun, emit_plotdata, evaluate, extract_policy, load_checkpoint,
                     metrics_text, read_metrics, run, run_seed)

__all__ = [
    "ALL_ALGORITHMS", "ExperimentConfig", "family", "load_config", "ROLES", "make_streams", "stream",
    "METRICS_HEADER", "SeedRun", "emit_plotdata", "evaluate", "extract_policy", "load_checkpoint",
    "metrics_text", "read_metrics", "run", "run_seed",
]
