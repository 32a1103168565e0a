"""Version information for the kdesign package."""

__version__ = "0.1.0.dev0"
