import sys
from pathlib import Path

# Make the oracle helpers importable without packaging them.
sys.path.insert(0, str(Path(__file__).parent))
