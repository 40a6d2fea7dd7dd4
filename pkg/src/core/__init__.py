"""
Numerical core: primitive kernels, the network, optimisation, resampling and metrics.
"""
