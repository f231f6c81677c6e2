"""Few-shot ornamented font synthesis with stacked conditional GANs."""

__version__ = "0.1.0"
