"""Calibrated-confidence toolkit for task-oriented semantic parsing.

Everything revolves around per-step token probabilities: extracting
sequence confidence from them, simulating an annotator in the decoding
loop, gating execution behind tuned thresholds, and confirming
paraphrased predictions with users.
"""

__version__ = "0.1.0"
