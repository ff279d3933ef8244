"""Desk-scale laboratory for elastic wave speed recovery from boundary data.

Submodules:

* ``model_core``       speed fields, materials, domains, model files
* ``ray_tracer``       bicharacteristic flow, scattering relation, lens tables
* ``convexity``        strictly convex foliation checks (HWZ, planes, general)
* ``elastic_sim``      2D finite-difference Dirichlet-to-Neumann synthesizer
* ``wavefield_analysis`` mode split, arrival picking, lens extraction,
                       Neumann-to-Cauchy conversion
* ``inversion``        radial and depth-profile speed recovery from lens data
* ``cli``              command-line pipeline

Ray tracing and convexity support 2D and 3D; the finite-difference solver
is 2D (plane-strain) by design.
"""

__version__ = "0.1.0"
