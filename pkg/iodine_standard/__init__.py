"""
Simulation and analysis toolkit for an iodine-stabilized Ar+ laser at 501.7 nm
"""

__version__ = "1.0.0"
