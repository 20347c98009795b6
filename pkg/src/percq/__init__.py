"""Entanglement percolation on 1D chains upgraded to hierarchical networks by swapping."""

import os

import numba

# The TBB layer on this image fails its version probe and warns on first use.
if "NUMBA_THREADING_LAYER" not in os.environ and "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

__version__ = "0.1.0"
