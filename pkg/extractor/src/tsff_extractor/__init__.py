"""Exports per-video dual-layer VGG-16 activations (last conv layer and
first fully-connected layer) into the seqfusion .tsff feature-file format.

Standalone on purpose: the frame-sampling rule and the file format are
re-implemented here and cross-validated against the main engine through its
command-line interface, so a bug cannot hide in shared code.
"""

__version__ = "0.1.0"
