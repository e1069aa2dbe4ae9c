"""Grain boundary extraction from TEM-like images, trained on self-made synthetic data.

The package is organized around the data flow:

    microgen  -> ground-truth label images and boundary masks
    synth     -> TEM-like grayscale inputs synthesized from the labels
    edges     -> Sobel / LoG / Canny fusion into a 3-channel edge map
    nn        -> from-scratch tensor kernels, the two encoder-decoder nets, training
    pipeline  -> initial guess + iterative refinement + accuracy metric
    cli       -> reproducible command-line runs

Hot kernels live in ``grainforge.kernels`` with a compiled Cython core and a
pure-NumPy fallback selected at import.
"""

__version__ = "0.1.0"

from .kernels import KERNEL_BACKEND

__all__ = ["KERNEL_BACKEND", "__version__"]
