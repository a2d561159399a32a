"""Grip force estimation from video of a two-finger grasp.

A spatial stream regresses force from fingertip colour histograms, a
temporal stream regresses force change from optical-flow histograms, and a
Kalman filter with EM-tuned noise fuses the two.
"""

__version__ = "0.1.0"
