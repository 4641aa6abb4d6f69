"""
CLI module - the balanced-embed command line.

Subcommands: moment, balance, continuity, stability, chow-weight and
make-example. Exit codes: 0 success, 1 breakdown or non-convergence,
2 usage errors, 3 unreadable or invalid scheme files.
"""
