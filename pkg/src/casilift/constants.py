"""Physical constants used throughout the solver (CODATA, via scipy).

All internal quantities are SI: frequencies in rad/s, lengths in m,
energies in J, temperatures in K.
"""

import scipy.constants as _sc

HBAR = _sc.hbar            # J s
KB = _sc.k                 # J/K
C = _sc.c                  # m/s
E_CHARGE = _sc.e           # C
EPS0 = _sc.epsilon_0       # F/m
M_ELECTRON = _sc.m_e       # kg
G_STANDARD = _sc.g         # m/s^2

EV_TO_RAD_S = E_CHARGE / HBAR   # photon energy in eV -> angular frequency


def constants_record():
    """Constants echoed into run manifests for reproducibility."""
    return {
        "hbar_J_s": HBAR,
        "k_B_J_K": KB,
        "c_m_s": C,
        "e_C": E_CHARGE,
        "eps0_F_m": EPS0,
        "m_e_kg": M_ELECTRON,
        "g_m_s2": G_STANDARD,
    }
