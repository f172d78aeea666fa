"""girkolab: a desk-scale numerical laboratory for Girko's Hermitization formula."""

__version__ = "0.1.0"
