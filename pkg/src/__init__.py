"""
MSGC: Middle Spectrum Grouped Convolution

A numpy package for training and analysing convolutional networks whose
layers learn, per sample, which input channels each group of filters reads,
under a budget on multiply-accumulate operations.
"""

__version__ = "0.1.0"
