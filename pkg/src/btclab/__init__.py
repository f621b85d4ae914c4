"""Numerical laboratory for dissipative collective-spin time-crystal metrology.

Submodules:
    dicke       -- collective spin operators on the symmetric (N+1)-dim sector
    liouvillian -- vectorized Lindblad generator, steady states, spectra, dynamics
    metrology   -- fidelity, quantum/classical Fisher information, time bounds
    scaling     -- finite-size-scaling collapse, peak finding, power-law fits
    sweep       -- parameter sweeps with CSV output and on-disk caching
    cli         -- command-line entry points
    plots       -- matplotlib rendering of sweep products
"""

from btclab.dicke import (
    CollectiveSpinBasis,
    build_basis,
    spin_operator,
    spin_projection,
    projection_eigenbasis,
)
from btclab.liouvillian import (
    ModelParams,
    Superoperator,
    build_liouvillian,
    steady_state,
    spectrum,
    dominant_decay_rate,
    evolve,
    expectation,
)
from btclab.metrology import (
    MeasurementSetting,
    FisherResult,
    fidelity,
    qfi_fidelity,
    qfi_sld_oracle,
    measurement_probabilities,
    cfi,
    optimize_cfi,
    qfi_time_bound,
    verify_alpha_constraint,
    qfi_rate_trajectory,
)
from btclab.scaling import (
    ScalingDataset,
    CollapseFit,
    PowerLawFit,
    scale_dataset,
    collapse_quality,
    fit_collapse,
    find_peak,
    fit_power_law,
    check_exponent_consistency,
)

__version__ = "0.1.0"
