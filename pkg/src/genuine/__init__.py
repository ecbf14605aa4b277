"""Graph-based supervised uncertainty estimation for generated text."""

__version__ = "0.1.0"
