"""Privacy-preserving distributed average consensus.

Subspace perturbation with adaptive differential quantization (ADQSP),
secret-sharing and local-DP baselines, adversary reconstructions and
mutual-information leakage estimation.
"""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
