"""tipshift: tipping analysis for scalar nonautonomous ODEs driven by parameter shifts."""

__version__ = "0.1.0"
