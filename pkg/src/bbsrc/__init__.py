"""Block-based sparse representation classification of texture ROIs."""
__version__ = "0.1.0"
