"""Monocular 3D localization toolkit.

The mathematical core of a locality-regularised monocular 3D detector:
KITTI label/calibration parsing, pinhole inverse projection and oriented
box geometry, the similarity-graph regulariser with its losses, a toy
trainer for controlled regulariser experiments, and KITTI-protocol
evaluation (rotated IoU, average precision, localization accuracy).
"""

__version__ = "0.1.0"
