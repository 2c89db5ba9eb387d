"""Two-time correlations of optical pulses from homodyne sum-field statistics."""
from .fock import FockState, expect, make_state, quadrature, tensor
from .measurement import MeasurementSetting, SampleBatch, sample, spectral_measure, sum_field_operator
from .moments import (
    CorrelationSet,
    MomentTable,
    PhysicalQuantities,
    decontaminate,
    double_slit_difference,
    estimate_moments,
    extract_physics,
    invert_q_system,
)
from .oracle import MomentSpec, contaminate, exact_moment, exact_physics, exact_table
from .pulses import LOTrain, PulseEnvelope, overlap, shift_phases, validate_train

__version__ = "0.1.0"
