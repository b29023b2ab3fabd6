"""Global latent workspace built from independently trained modules."""

__version__ = "0.1.0"
