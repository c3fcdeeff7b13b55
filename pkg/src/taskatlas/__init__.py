"""taskatlas: country-conditioned task exposure measures.

Pipeline engine turning task-level automation-exposure labels into country,
occupation, and industry measures, with aggregation, linkage, reweighting,
validation, and statistics as reproducible, testable operations.
"""

__version__ = "0.1.0"

from . import aggregate, core, ingest, linkage, reweight, stats, validate

__all__ = ["aggregate", "core", "ingest", "linkage", "reweight", "stats", "validate", "__version__"]
