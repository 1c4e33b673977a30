"""
Computational services: field model, dynamics, identification, control and tasks.
"""
