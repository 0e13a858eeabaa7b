import os

# Pin BLAS threading before numpy loads anywhere; bit-reproducibility depends
# on a fixed reduction order.
for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")
