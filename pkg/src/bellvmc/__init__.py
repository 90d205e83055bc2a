"""Variational search for maximal quantum violations of multipartite Bell
inequalities: RBM wavefunctions trained by stochastic reconfiguration against
Metropolis estimates of the Bell operator, with exact diagonalization and
brute-force classical bounds as oracles."""

from .basis import (PauliSumMatvec, all_configs, config_to_index, dense_matrix,
                    index_to_config, sector_indices)
from .ed import (EdResult, eigen_variance, load_ed_result, min_eigenpair,
                 rbm_overlap, relative_error, save_ed_result)
from .errors import BellVmcError, CapacityError, NumericsError
from .estimator import (EstimateRecord, EstimatorPlan, batch_estimate,
                        blocked_stderr, exact_expectation, local_estimator,
                        local_estimator_batch, rbm_state_vector)
from .inequalities import (BellInequality, CorrelatorTerm, Measurement,
                           MeasurementAssignment, brute_force_classical_min,
                           build_i1_hamiltonian, build_i2, build_i3,
                           classical_bound_i1, compile_bell_operator,
                           dump_experiment, i2_settings_random, i3_settings,
                           load_experiment, measurement_xz, measurement_zx)
from .operators import (PauliString, WeightedPauliSum, apply_string,
                        merge_terms, pauli_string, spin_config)
from .rbm import (RbmParams, TyingScheme, derivatives, derivatives_batch,
                  load_checkpoint, log_amplitude, log_cosh, log_ratio,
                  make_lookup, random_init, save_checkpoint)
from .rngs import make_rng
from .sampler import (ChainEnsemble, SamplerConfig, exact_distribution,
                      make_chain, metropolis_step, run_chain)
from .sr import (LearnCurve, LearnPoint, Metric, SrConfig, compute_forces,
                 exact_moments, sr_step, train)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
