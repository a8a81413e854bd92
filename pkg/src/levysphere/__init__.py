"""
levysphere - Stochastic Navier-Stokes on the rotating sphere driven by stable Levy noise.
"""

__version__ = '0.3.0'
