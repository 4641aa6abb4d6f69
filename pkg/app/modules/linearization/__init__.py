"""
Linearization module - derivative of F_t along traceless Hermitian directions.

The Newton systems use the finite-difference operator; the analytic perp
quadratic form validates it.
"""
