"""
Flat-file input/output: CSV and YAML formats plus static SVG plots.
"""
