"""Shared test setup.

The workspace root goes first on sys.path so the suite imports the local
`oval_lab_app`. Hypothesis runs without deadlines: quadrature on the default
grid takes tens of milliseconds per example.
"""

import sys
from pathlib import Path

from hypothesis import settings

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

settings.register_profile("oval-lab", deadline=None, print_blob=True)
settings.load_profile("oval-lab")
