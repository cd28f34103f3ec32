"""Package-wide default parameters."""

import numpy as np

DENSITY_DEGREE = 80        # polynomial degree for spectral density estimation
TRANSFORM_DEGREE = 50      # polynomial degree for analysis/synthesis filters
PROBE_VECTORS = 30         # random probe vectors for trace estimation
CDF_POINTS = 50            # abscissas for the cumulative density fit
BAND_ADJUST_DELTA = 1e-3   # half-width of the density difference quotient
BAND_ADJUST_GRID = 201     # candidate grid size for band-end adjustment
KAPPA = 1.0                # sampling-term weight in the synthesis objective
RATIONAL_EPSILON = (np.sqrt(5.0) - 1.0) / 2.0
MAX_DENSE_N = 5000         # largest graph the exact path will eigendecompose
LAMBDA_MAX_ITERS = 50      # power iteration steps for the spectral bound
CACHE_BUDGET_BYTES = 512 * 1024 * 1024  # full-storage ceiling for the basis cache
