"""
tacfit - diffusion-parameter estimation from transdermal alcohol data.
"""

__version__ = "1.0.0"
