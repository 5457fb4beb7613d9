"""Desk-scale cascaded speech-to-text translation sandbox.

Pipeline pieces: n-best candidate alignment by longest common
subsequences, a small numpy encoder-decoder with candidate-averaged
decoding, pooled beam search, discrete speech units from k-means
quantization, a synthetic noisy-channel ASR simulator, and the metrics
and experiment runner that tie them together.
"""

__version__ = "0.1.0"
