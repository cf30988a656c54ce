"""Total-variation recovery of gradient-sparse signals and images from
subsampled Fourier data, with structure metrics, sampling designs and
numerical checks of the incoherence and dual-certificate conditions."""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: F401
