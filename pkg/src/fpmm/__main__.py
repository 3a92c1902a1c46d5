"""Allow running as `python -m fpmm`."""

from fpmm.cli import app

app()
