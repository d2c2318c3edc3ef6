"""stochnav - stochastic navigation with artificial potentials.

Drives an agent toward the minimum of a convex objective inside a spherical
workspace with convex holes, using only local and noisy sensor estimates of
the gradient of a Rimon-Koditschek (or logarithmic barrier) potential.

The package is structured into:
- geometry: workspace, obstacles, objective and world files
- potentials: exact potentials, condition check, critical points
- sensors: noise model, sensor rig, gradient estimators
- descent: stochastic update loop, gradient-flow baseline, metrics
- analysis: bias diagnostics and saddle quotients
- experiments: world generators and Monte Carlo campaigns
- cli: command line front end, config files, SVG output
"""

__all__ = [
    "DEFAULT_BOUNDARY_SAMPLES",
    "DEFAULT_EGG_HESSIAN_SAMPLES",
]

DEFAULT_BOUNDARY_SAMPLES = 1000
DEFAULT_EGG_HESSIAN_SAMPLES = 10000
