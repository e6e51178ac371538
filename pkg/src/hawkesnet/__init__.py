"""Nonlinear Hawkes and NHPP modelling with small ReLU networks.

Submodules:
    events       event streams, loading, time scaling, chronological splits
    network      scalar ReLU nets: forward, gradients, exact integrals
    intensity    model intensities, zero crossings, exact compensators
    likelihood   exact log-likelihood and unbiased per-event gradients
    optimizer    Adam with per-layer rates, fitting loops, early stopping
    simulate     ground-truth simulators (thinning) and parametric kernels
    diagnostics  held-out NLL, rescaled residuals, QQ points, plot grids
    report       matplotlib figure rendering for the CLI report path
    cli          simulate / fit / eval command line
"""

__version__ = "0.1.0"
