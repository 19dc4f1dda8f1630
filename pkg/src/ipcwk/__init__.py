"""
ipcwk is a library and command line tool for kernel estimation of conditional functionals of a right-censored response, weighted by the
inverse probability of censoring, with almost sure simultaneous confidence bands and a seeded Monte Carlo harness.
"""

from .main import main
