"""Periodic curve flows: bi-Hamiltonian operators, hierarchy, evolution, sine-Gordon, solitonic seeds."""
from .evolve import (FlowState, HierarchyConfig, evolve, measure_shift, relative_drift, sech_soliton,
                     shift_field, stability_bound)
from .hierarchy import (Hamiltonians, apply_H, apply_J, e_parallel, e_perp, flow_rhs, hamiltonians,
                        hierarchy_field)
from .seeds import line_soliton_h4, solit1_residual, solitonic_metric
from .sinegordon import (HyperbolicDomainError, SGConfig, SGTrajectory, WindingError, heq_residual,
                         mode_frequency, sg_evolve)
from .spectral import CurveField, dx, dx_inverse

__all__ = [
    "CurveField", "dx", "dx_inverse", "apply_J", "apply_H", "hierarchy_field", "e_perp", "e_parallel",
    "flow_rhs", "Hamiltonians", "hamiltonians", "FlowState", "HierarchyConfig", "evolve", "stability_bound",
    "relative_drift", "sech_soliton", "measure_shift", "shift_field", "SGConfig", "SGTrajectory", "sg_evolve",
    "heq_residual", "mode_frequency", "WindingError", "HyperbolicDomainError", "solit1_residual",
    "line_soliton_h4", "solitonic_metric",
]
