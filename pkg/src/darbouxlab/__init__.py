"""darbouxlab: exact Darboux-integrability analysis for polynomial vector fields."""

__version__ = "0.1.0"
