"""
Incentives Module.

This module provides incentive mechanism design for budgeted risk management:
the investment game among organizational units, the direct mechanisms, their
iterative strategy-proof counterparts and the continuous-time convergence
analysis.
"""

__version__ = '0.1.0'
