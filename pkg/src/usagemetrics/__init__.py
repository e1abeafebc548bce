"""Usage-metric analysis of academic publications: download profiles,
paper classification, download-decay model fitting and downloads/citations
correlation."""

__version__ = "0.1.0"
