"""
Stability module - GIT/Chow stability of point configurations.

Subspace counting, diagonal one-parameter subgroups, flat limits of points
and Chow weights; a numerical weight estimate for rational curves.
"""
