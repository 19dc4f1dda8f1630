"""
Module for storing the version global.
"""

VERSION = "0.1.0"
"""
    The current version number of ipcwk.
"""
