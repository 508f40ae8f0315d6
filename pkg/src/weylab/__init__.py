"""weylab: a numerical laboratory for phase-space analysis of degenerate
Schrodinger operators.

The package is organized around the pipeline symbol -> metric -> operator:

* profiles, geometry: the smooth cutoff profile, vector-field systems,
  anisotropic dilations;
* symbols, metric: symbol classes with exact jets, order functions,
  split metrics and their admissibility gates;
* quantize: discrete quantization on periodic grids, convention
  transport, star products;
* hamiltonians, spectral, evolve: Dirichlet finite-difference operators,
  eigenvalue machinery, growth fits, compactness trend experiments,
  unitary and heat flows;
* bounds: sup-norm band probes, p-norm window brackets, subellipticity
  ladders;
* cli: the config-driven runner (`weylab run`, `list-builders`,
  `reproduce`).
"""

__version__ = "0.1.0"

from .geometry import (HormanderSystem, NilpotentData, PhasePoint,
                       check_hormander_order2, commutator_value, dilate,
                       homogeneous_norm, nilpotent_data, pointwise_diagonalize)
from .hamiltonians import (DirichletGrid, HamiltonianMatrix, Potential,
                           daho_matrix, fractional_power, grushin_kinetic,
                           hamiltonian_with_potential, harmonic_matrix,
                           sum_of_squares_matrix, validate_p2)
from .metric import (MetricCheckReport, WeightEvaluator, check_gweight,
                     check_slowness, check_temperateness, check_uncertainty,
                     eval_dual_metric, eval_metric, eval_weight, planck)
from .profiles import CutoffProfileSquared, DyadicPartition, band_bump
from .quantize import (Grid, OperatorMatrix, jt_transport, kn_quantize,
                       load_operator, moyal_sharp, save_operator, tau_quantize,
                       weyl_quantize)
from .spectral import (GrowthFit, SchattenEstimate, SpectralResult, eigensolve,
                       growth_fit, schatten_criterion_experiment, schatten_norm,
                       singular_values, weyl_inequality_check)
from .symbols import (PolySymbol, SeminormEstimate, SymbolEvaluator,
                      class_membership, daho_symbol, grushin_a2, harmonic_a2,
                      smg_seminorm, weight_symbol_evaluator, with_confinement)
from .evolve import (EvolutionTrace, fractional_evolve, heat_evolve,
                     schrodinger_evolve)

__all__ = [name for name in dir() if not name.startswith("_")]
