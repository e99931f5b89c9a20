"""Load the plots script as an importable module for the tests."""

import importlib.util
import sys
from pathlib import Path

_SCRIPT = Path(__file__).resolve().parents[1] / "plots.py"
_spec = importlib.util.spec_from_file_location("plots_cli", _SCRIPT)
plots_cli = importlib.util.module_from_spec(_spec)
sys.modules["plots_cli"] = plots_cli
_spec.loader.exec_module(plots_cli)
