"""Gas-demand datasets, interpretable forecasters, and base-fee simulation for Ethereum."""

__version__ = "0.1.0"
