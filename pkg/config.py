"""
Configuration file for mixfit
This file stores all settings and constants used throughout the library and CLI
"""

import os
from dotenv import load_dotenv

# Load environment variables from .env file if it exists
load_dotenv()

# Environment Configuration - defaults that can be overridden per machine
DEFAULT_SEED = int(os.getenv("MIXFIT_SEED", "0"))  # Master seed when none is given
LOG_LEVEL = os.getenv("MIXFIT_LOG_LEVEL", "WARNING")
DEFAULT_THREADS = int(os.getenv("MIXFIT_THREADS", str(os.cpu_count() or 1)))

# Measure Configuration - numerical tolerances for mixing measures
ATOM_MERGE_TOL = 1e-12  # Atoms closer than this (sup-norm) are merged
WEIGHT_SUM_TOL = 1e-12  # Allowed deviation of sum(weights) from 1
MIN_WEIGHT = 1e-12  # Smaller weights are rejected as degenerate

# Optimizer Configuration - Nelder-Mead multistart defaults
RESTARTS = 8
MAX_ITERATIONS = 2000
OBJECTIVE_TOL = 1e-9
SIMPLEX_TOL = 1e-10
SIMPLEX_EDGE = 0.05  # Initial simplex edge, fraction of each coordinate's scale
SPLIT_OFFSET = 0.01  # Atom split offset for order-increasing starts, fraction of box width
WEIGHT_FLOOR = 1e-11  # Decoded weights never go below this
BOUNDARY_MARGIN = 1e-6  # Quantile starts are pulled this fraction of the width inside the box

# Quadrature Configuration - accuracy of kernel mean embeddings
HERMITE_NODES = 80
LEGENDRE_NODES = 16  # Gauss-Legendre (and Gauss-Jacobi) nodes per panel
QUADRATURE_PANELS = 16  # Panels per embedding window, half on each side of the evaluation point
MAX_OUTER_PANELS = 4096  # Cap on panels for the outer integral of a Gamma gram
GRADED_PANELS = 24  # Outer Gamma panels halving toward the origin
GEOMETRIC_PANELS = 16  # Geometric panels per side of a Gamma embedding window
KERNEL_CUTOFF = 1e-17  # Kernel values below this are treated as zero
TAIL_MASS = 1e-15  # Continuous supports are truncated at these quantiles
DISCRETE_TAIL_MASS = 1e-10  # Discrete supports are summed until 1 - this mass
GRAM_CHUNK = 2048  # Rows per block in kernel grams and quadrature embeddings

# Order Selection Configuration - default c1 per test-function class
DEFAULT_C1 = {
    'ks': 3 ** 0.5 / 2,  # Needs c1 >= sqrt(3)/2
    'mmd': 2.0,  # Multiplied by the kernel sup-norm
    'moments': 1.0  # Concentration constant is not explicit; overridable
}
POPULATION_GRID = 2048  # Grid points for the population KS separation gap
POPULATION_PAD_SD = 6.0  # Grid padding in component standard deviations

# Output Configuration - number formatting and file layout
SIGNIFICANT_DIGITS = 12
SCIENTIFIC_BELOW = 1e-4
FILE_DIGITS = 17  # Measure and data files keep full double precision
CSV_COLUMNS = ['n', 'mean', 'se', 'reps', 'frac_correct']
SVG_HASH_SALT = "mixfit"

# Exit Codes - contract for the command-line front end
EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NOT_CONVERGED = 4
EXIT_STUDY_SHAPE = 5
