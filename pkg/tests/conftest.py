import sys
from pathlib import Path

# make reference_impls and the fixture generator importable as plain modules
sys.path.insert(0, str(Path(__file__).parent))
