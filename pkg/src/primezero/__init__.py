"""Numerical laboratory for smoothed prime-power and zeta-zero measures.

Builds mollified counting measures on both sides of the explicit formula,
extremal/band-limited window kernels with verified transform pairs, probe
bundles and their L1-controlled pairing decomposition, and linear/entropic
views of the KL-regularized unbalanced transport cost between the two
measures, with a sweep driver that reports growth against T log^2 T.
"""
from .errors import (CalibrationError, ConfigError, CoverageError,
                     GridResolutionError, InvalidParameterError,
                     NumericalConsistencyError, PrimeZeroError,
                     ResourceLimitError, TableFormatError, VerificationError)
from .kernels import (Kernel, beurling_function, combine_kernels, make_fejer,
                      make_mollifier, make_probe, make_window, numeric_ft_check,
                      scale_kernel)
from .measures import (AtomicMeasure, FluctuationReport, GriddedDensity,
                       GridSpec, fluctuation_report, fluctuations,
                       logarithmic_integral, main_densities, prime_power_atoms,
                       smooth_measure)
from .zerodata import (ZeroTable, builtin_zero_table, locate_zeros,
                       parse_zero_table, riemann_siegel_Z, verify_table,
                       z_function, zero_atoms, zero_count_N)
from .explicit_formula import (EFReport, NormReport, ProbeBundle, build_bundle,
                               check_cosine_pairing, check_two_way_fejer,
                               ef_difference, norm_report, pair_measure,
                               transform_mass_identity)
from .calibration import (CalibrationResult, calibrate, defect, make_bump,
                          transform_mass)
from .transport import (CostSpec, PotentialPair, TransportResult,
                        c_transform_ascent, default_potential_grids,
                        dual_value, feasibility_margin, one_node_closed_form,
                        r1_upper_bound, sinkhorn_unbalanced)
from .pipeline import (ROW_FIELDS, RunConfig, SweepResult, growth_fit,
                       load_zero_table, run_pipeline, run_sweep, to_csv,
                       to_json)

__version__ = "0.1.0"
