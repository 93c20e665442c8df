"""sfflab: spectral form factor laboratory for coupled chaotic torus maps."""

__version__ = "0.1.0"

from .dynamics import (
    CatMapSpec,
    CorrelationEstimate,
    DEFAULT_MAP,
    ManyBodyPoint,
    SystemSpec,
    TorusPoint,
    coupled_step,
    estimate_correlation,
    interaction_derivative,
    subsystem_step,
)
from .orbits import (
    OrbitFamily,
    PeriodicPoint,
    ShiftVector,
    SubsystemOrbit,
    enumerate_periodic_points,
    family_iterator,
    group_into_orbits,
    shift_action,
    stability_amplitude_sq,
    sum_rule_check,
)
from .phases import (
    CltReport,
    PhaseSample,
    VarianceTable,
    action_difference_identity_check,
    clt_diagnostics,
    per_bond_variance_table,
    phase_difference,
    quotient_projection,
    sample_phase_distribution,
    variance_series,
    variance_time_average,
)
from .potts import (
    PottsParams,
    SffPrediction,
    closed_form_sff,
    deviation_bound,
    k0_reference,
    scaled_kappa,
    sff_transfer,
    thouless_time,
    transfer_eigenvalues,
)
from .quantum import (
    CircuitSpec,
    EnsembleSpec,
    QuantizedMap,
    SffSeries,
    build_circuit,
    compare,
    coupling_operator,
    lambda_sweep,
    quantize_subsystem,
    sff_numeric,
)
from .harness import ExperimentConfig, RunManifest, load_config, run_experiment
