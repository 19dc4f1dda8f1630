"""
Entrypoint module for ipcwk.
"""

import sys

from .main import main

if __name__ == "__main__":
    sys.exit(main())
