"""Projected least-squares quantum process tomography.

Simulate Pauli and MUB measurement scenarios for a known channel, build the
closed-form least-squares Choi estimators, project them onto the physical
set (thresholded first stage plus AP / Dykstra / HIP / dual second stage),
and evaluate concentration bounds and confidence regions.
"""

from .channels import (ChannelSpec, ChoiMatrix, DensityMatrix, KrausSet,
                       apply_kraus, apply_via_choi, choi_from_kraus, choi_rank,
                       distance, fidelity, kraus_rank, make_channel,
                       maximally_entangled_state, partial_trace, qft_unitary)
from .designs import (MubFamily, Povm, mub_family, near_isotropy_defect,
                      pauli_projector, scenario_inputs, scenario_povm)
from .simulate import (FrequencyTable, SamplingPlan, born_probabilities,
                       exact_table, sample)
from .estimators import (LsEstimate, ls_estimate, ls_scenario1, ls_scenario2,
                         ls_scenario3, ls_scenario4)
from .projections import (HalfSpace, ProjectionConfig, ProjectionReport,
                          depolarizing_finalize, hip_inner, pls_pipeline,
                          proj_cp, proj_cp1_thresholded, proj_tp,
                          project_to_cptp)
from .bounds import (ConfidenceRegion, ErrorBudget, confidence_region,
                     direct_projection_bound, f_factor, g_factor,
                     ls_failure_prob, pls_failure_prob, sample_complexity)
from .harness import ExperimentConfig, RunRecord, load_config, run

__version__ = "0.1.0"
