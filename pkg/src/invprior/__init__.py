"""invprior: scientific inverse problems with plug-and-play diffusion priors.

Subpackages
-----------
core     field/FFT/Bessel/RNG/GRF primitives
prior    noise schedules and analytic score priors
ops      physics forward models (scattering, MRI, interferometry,
         full-waveform inversion, 2-D turbulent flow recovery)
solvers  posterior samplers and classical baselines
metrics  reconstruction quality measures and evaluation counters
harness  experiment configs, runner, grid search, reports, CLI
"""

__version__ = "0.1.0"
