"""Key rates of probabilistically shaped QAM for coherent-state CV-QKD."""

__version__ = "0.1.0"
