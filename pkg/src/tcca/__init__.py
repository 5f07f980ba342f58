"""Canonical correlation analysis with rank-one tensor directions."""

from .cca import CcaSolution, cca_1d, sample_correlation
from .errors import (Budget, DegenerateProjection, IllConditioned, NotPsd, NumericalError,
                     RankDeficient, ShapeError, TccaError, ZeroInput)
from .hopm import (AssumptionReport, ConvergenceTrace, HopmConfig, HopmState, Inner,
                   Normalization, RankOneDirections, check_assumptions, diff_metric,
                   fit_tcca, hopm_sweep, partial_contraction)
from .init import init_effective, init_random
from .multiway import BlockDirections, DeflationSet, deflate, fit_block_tcca
from .synth import P2dccaModel, error_metric, generate, population_optimum
from .tensor import DataTensor, DenseTensor

__version__ = "0.1.0"
