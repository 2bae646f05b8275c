"""Physical constants (SI, CODATA 2018)."""

E_CHARGE = 1.602176634e-19      # elementary charge [C]
HBAR = 1.054571817e-34          # reduced Planck constant [J s]
K_B = 1.380649e-23              # Boltzmann constant [J/K]
TWO_PI = 6.283185307179586
