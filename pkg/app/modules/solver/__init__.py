"""
Solver module - damped Newton for F_t(g) = 0 and the continuity driver.

The driver enters at a large t from a balanced model of the auxiliary
points and walks t down to t_end, warm-starting each solve.
"""
