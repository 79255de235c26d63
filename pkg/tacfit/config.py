"""
Environment-level defaults for tacfit runs.

Values here are the lowest-precedence layer: a YAML run configuration
overrides them, and CLI flags override both.
"""

import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


class Config:
    """Configuration settings loaded from environment variables."""

    # Model settings
    DISCRETIZATION_K = int(os.getenv("TACFIT_K", "32"))
    BRAC_SUBINTERVALS = int(os.getenv("TACFIT_BRAC_SUBINTERVALS", "300"))

    # Optimizer settings
    SCORE_TOL = float(os.getenv("TACFIT_SCORE_TOL", "1e-8"))
    MAX_ITER = int(os.getenv("TACFIT_MAX_ITER", "200"))

    # Simulation settings
    NOISE_SIGMA = float(os.getenv("TACFIT_SIGMA", "0.01"))
    REPLICATES = int(os.getenv("TACFIT_REPLICATES", "100"))
    RANDOM_SEED = int(os.getenv("TACFIT_SEED", "42"))

    # Performance settings
    PARALLEL_WORKERS = int(os.getenv("TACFIT_WORKERS") or os.cpu_count() or 4)

    @classmethod
    def display(cls):
        """Return configuration as a dict for display."""
        return {
            "Discretization k": cls.DISCRETIZATION_K,
            "BrAC Sub-intervals": cls.BRAC_SUBINTERVALS,
            "Score Tolerance": f"{cls.SCORE_TOL:g}",
            "Max Iterations": cls.MAX_ITER,
            "Noise Sigma": f"{cls.NOISE_SIGMA:g}",
            "Replicates": cls.REPLICATES,
            "Random Seed": cls.RANDOM_SEED,
            "Parallel Workers": cls.PARALLEL_WORKERS,
        }
