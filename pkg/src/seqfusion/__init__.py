"""Two-stream CNN-feature LSTM fusion engine for video sequence classification.

Implements four architectures (conv_l, fc_l, fu_1, fu_2) with exact
backpropagation through time, deterministic training, evenly-spaced frame
subsampling, cross-validation planning and confusion-matrix evaluation.
"""

__version__ = "0.1.0"
