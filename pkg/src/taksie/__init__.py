"""Progress-aware subgoal generation, evaluation, and goal-conditioned
diffusion policies on a deterministic 2-D tabletop simulator."""

import os

# BLAS must run single-threaded for bit-reproducible training and evaluation.
# These only take effect if numpy has not been imported yet, so set them before
# anything below pulls it in.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

__version__ = "0.1.0"
