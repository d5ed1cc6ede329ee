"""toonpipe: desk-scale cartoon stylization pipeline.

Diffusion-based stylization with stochastic inversion, fixed-input-size tiled
processing with overlap blending, non-local-means post-denoising, frame-wise
video stylization with temporal metrics, and an embedding-similarity
evaluation harness.
"""

__version__ = "0.1.0"

from .imagecore import Image, Rng, clamp_to_image, load_image, save_image

__all__ = ["Image", "Rng", "clamp_to_image", "load_image", "save_image", "__version__"]
