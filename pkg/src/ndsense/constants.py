"""Physical constants and unit helpers shared across the package.

Internal unit conventions: positions in nm, time in s, temperatures in
degC unless a kelvin argument is explicit, viscosity in Pa*s, moduli in
Pa, count rates in counts/s.
"""

BOLTZMANN_J_PER_K = 1.380649e-23

ZERO_CELSIUS_K = 273.15

# k_B T / (6 pi r eta) with r in nm and eta in Pa*s gives m^2/s * 1e-9;
# multiplying by 1e27 yields nm^2/s directly.
_NM_SCALE = 1e27


def celsius_to_kelvin(t_c: float) -> float:
    return t_c + ZERO_CELSIUS_K
