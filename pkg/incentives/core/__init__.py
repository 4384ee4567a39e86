"""
Computational core: scenario model, game, direct and iterative mechanisms,
continuous-time dynamics.
"""
