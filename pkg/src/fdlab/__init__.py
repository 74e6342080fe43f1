"""Principal periodic eigenvalues and reaction-diffusion dynamics on
time-periodic moving intervals."""

__version__ = "0.1.0"
