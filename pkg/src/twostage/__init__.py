"""Two-stage purity decay in random and dual-unitary brickwork circuits.

Effective spin-model transfer matrices, free-boundary and pinned partition
functions, W/Z resummation, closed-form rate predictions and exact small-L
Floquet simulation.
"""
__version__ = "0.1.0"

from .effective_magnet import (SpinConfig, Haar, XYZAveraged, FixedFloquet, haar_weight,
                               xyz_weights, local_transfer, dual_basis, dw_config, magnon_config)
from .propagator import (NumericalError, Schedule, build_schedule, partition_free_boundary,
                         dw_sector_evolve, pinned_table, fit_rate, two_stage_fit, default_windows,
                         saturation_time)
from .resummation import (NoRootError, reduce_space, solve_irreducible, reconstruct,
                          generating_root, resummed_rate)
from .theory import (line_tension_ruc, staircase_minimize, averaged_channel, r_mag_analytic,
                     predict_rates, classify)

__all__ = [n for n in dir() if not n.startswith("_")]
