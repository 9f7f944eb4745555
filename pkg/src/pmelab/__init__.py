"""Linear and nonlinear parametric model embedding for shape design spaces.

Submodules are imported explicitly, e.g. ``from pmelab.pme import fit_pme``;
the package itself stays import-light so the command line can pin BLAS
threading before numpy loads.
"""

__version__ = "0.1.0"
