"""
Moment map module - the balanced-embedding residual.

Moment matrices M(S), the maps F(g) and F_t(g) in their Hermitian
representative, and the normalizing constant lambda_t.
"""
