"""quadscan: a desk-scale quad-modal tracker built on multi-scan state-space fusion."""

__version__ = "0.1.0"
