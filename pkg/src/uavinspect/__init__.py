"""Data-driven predictive planning and control for aerial 3D mesh inspection.

A quadrotor LTI plant, a Hankel-matrix trajectory engine, triangle-mesh
visibility geometry with back-face elimination, a small mixed-integer QP
solver, and a receding-horizon inspection mission loop on top of them.
"""

__version__ = "0.1.0"
