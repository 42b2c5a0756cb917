"""wmlab: a desk-scale numerical laboratory for self-similar blowup of wave
maps from Minkowski space into the round sphere.

Modules:
    geometry   sphere target, stereographic chart, blowup solution, residuals
    symmetry   symmetry group, transformed profiles, eigen/parameter modes
    operators  free generator, perturbation potentials, K, nonlinearity
    ballgrid   quadrature grids on the unit ball and its boundary sphere
    norms      Sobolev-type inner products and inequality sampling
    modes      spectral ODEs, shooting, mode scan, generalized-mode machinery
    evolution  method-of-lines nonlinear evolution and parameter fitting
    cli        batch command-line interface
"""

__version__ = "0.1.0"
