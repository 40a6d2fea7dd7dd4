"""
Main package module for the BSRN super-resolution toolkit.

This package contains a numpy implementation of a block state-based
recursive super-resolution network: convolution kernels with hand-written
backward passes, the recursive residual block, progressive upscaling heads,
the training loop, PSNR/SSIM evaluation and the services behind the CLI.
"""

__version__ = "0.1.0"
