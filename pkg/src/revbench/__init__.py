"""Multi-turn report revision harness for deep-research agents."""

__version__ = "0.1.0"
