import os
import sys

# flat layout: make the top-level modules importable from tests/
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
