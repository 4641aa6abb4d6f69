"""
Integration module - measures on schemes.

Counting measure on point schemes and two-chart FS quadrature on rational
curves. Every integral over a scheme in the package goes through here.
"""
