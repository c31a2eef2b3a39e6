"""cropforge: crop simulation, PSO coefficient calibration, calibrated-model
ensembles, Sobol-sampled surrogate datasets, and a neural-network surrogate."""

__version__ = "0.1.0"
