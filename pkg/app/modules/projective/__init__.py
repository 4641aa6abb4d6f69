"""
Projective module - complex projective space with the Fubini-Study metric.

Points, Hermitian matrices, tangent vectors and group elements, plus the
Hamiltonians and vector fields of the SU(n+1) action.
"""
