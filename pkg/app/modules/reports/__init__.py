"""
Reports module - scheme files, JSON reports and CSV traces.

Scheme description files and reports are JSON with complex numbers as
[re, im] pairs and a fixed key order; continuity traces are also written
as CSV for plotting.

- schemas.py -> SchemeFile and the report models
- service.py -> readers, writers and report builders
- utils.py -> CSV rendering and JSON encoding
"""
