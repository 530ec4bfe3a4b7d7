"""Autocorrelation of Pauli operators on site 1 averaged over random product states.

Below a_z = 1/3 the decay is set by the wall rate (1); above it by the magnon.
"""
from twostage import exact_circuit as ec
from twostage import r_mag_analytic

for az in (0.2, 0.6):
    rt = ec.reverse_transition_correlator(az, 0.6, L=10)
    print(f"a_z={az}: sampled r={rt.fit.rate:.3f}, Haar-averaged r={rt.fit_exact.rate:.3f}, "
          f"predicted {min(1.0, r_mag_analytic(az)):.3f} on window {rt.window}")
