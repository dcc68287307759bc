"""residuelab: finite-matrix laboratory for residues and singular traces.

Realises order -d symbols as dense matrices on a truncated torus Fourier
basis, computes eigenvalue/residue asymptotics, and verifies the trace
identities that connect them at desk scale.
"""

from .quadrature import DEFAULT_QUAD, QuadSpec, QuadratureError, sphere_volume
from .symbols import (
    Box,
    ClassicalSymbol,
    GeneralSymbol,
    ModulatedNormReport,
    OscillatorySymbol,
    ProductSymbol,
    ResidueSeries,
    SupportError,
    Symbol,
    ball_integral,
    bessel_weight_radial,
    box,
    bump,
    linear_combination,
    make_classical_symbol,
    make_nonmeasurable_symbol,
    make_product_symbol,
    modulated_norm,
    residue_series,
    smoothstep,
    torus_box,
    unit_bump,
    wodzicki_residue,
    zero_symbol,
)
from .quantize import (
    BudgetError,
    FrequencyBasis,
    OperatorMatrix,
    SupportLeakageError,
    assemble_operator,
    diagonal_multiplier_sums,
    enumerate_frequencies,
    fourier_coefficient,
    laplacian_multiplier,
    matrix_budget,
    multiplication_operator,
    torus_diagonal_sums,
)
from .spectral import (
    EigenSequence,
    EigensolverError,
    commutator_difference_diagnostic,
    eigensum_vs_symbol,
    eigenvalue_sequence,
    lidskii_check,
    modulation_profile,
    product_trace_check,
    singular_values,
    tail_energy,
    weak_lp_seminorm,
)
from .traces import (
    DixmierBand,
    MeasurabilityVerdict,
    SampledSeries,
    SurrogateConfig,
    connes_check,
    dixmier_band,
    double_exp_grid,
    l2_integration_check,
    measurability_verdict,
    partial_sum_series,
    torus_spectral_formula_check,
)
from .cache import CacheError, load_operator, save_operator

__version__ = "0.1.0"
