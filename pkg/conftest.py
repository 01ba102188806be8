"""
Puts the project root on sys.path so tests import models, utils and data directly.
"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))
