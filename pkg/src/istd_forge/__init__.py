"""Data-side toolkit for cross-domain infrared small target detection.

Background region detection with wavelet multi-frequency filtering, hard-target
harvesting, SSIM-matched Poisson re-generation, real-domain noise libraries,
degradation benchmarks, and the evaluation metrics and loss formulas.
"""

__version__ = "0.1.0"
