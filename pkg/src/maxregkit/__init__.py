"""Forward/backward maximal regularity operators for matrix generators."""

__version__ = "0.1.0"
