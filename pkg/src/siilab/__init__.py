"""siilab: simulate independent-increment drivers from local characteristics,
solve the driven SDE, and numerically verify the splicing/recovery, martingale
and independence structure of the solutions, including the sticky reflecting
Brownian example."""

from .chars import (BivariateCharacteristics, CharacteristicsError, ConstantSize,
                    GaussianSize, JumpMeasure, LocalCharacteristics, MixtureSize,
                    PiecewiseConstant, TimeScale, TruncationFunction, UniformSize,
                    ValidationResult, brownian_chars, integrated_exponent,
                    levy_exponent, mixed_jump_chars, standard_poisson_chars)
from .config import ConfigError, ScenarioConfig, load_preset, parse_config, print_config
from .dual import DualConstructionError, SplicingMask, construct_v, recover_driver, splicing_mask
from .expr import (ExpressionEvalError, ExpressionSyntaxError, compile_expression,
                   evaluate, parse_expression, to_source)
from .martingale import (TestFunction, bump, cos_wave, generator_L, kg_process,
                         kg_value_matrix, martingale_test, mf_bound, mf_process,
                         mf_value_matrix, multiplicative_presets, operator_K,
                         sin_wave, solution_presets, zero_covariation_check)
from .paths import (CadlagPath, PathError, TimeGrid, joint_jump_mass,
                    realized_covariation, state_before, write_jump_table,
                    write_path_table)
from .report import ReportRow, TestReport
from .sde import (CoefficientError, CoefficientFunctional, QuadratureError, SdeSpec,
                  ZProcess, solve_sde, z_process)
from .simulate import RngStream, simulate_bivariate, simulate_many, simulate_sii
from .stats import (distance_covariance_sq, ecf_law_test, ecf_law_test_matrix,
                    ecf_statistics, independence_test, project_paths,
                    projection_times)
from .sticky import (StickyParams, calibrate_kappa_unit, extrapolated_local_time,
                     local_time_estimate, naive_euler_sticky, occupation_time_at_zero,
                     simulate_sticky, sticky_sde_spec, verify_sticky_system)

__version__ = "0.1.0"
