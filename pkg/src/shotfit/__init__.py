"""shotfit: multi-shot 3D human placement with scene-context guidance.

Fits an articulated body model to 2D keypoint detections across shot
boundaries with calibrated cameras, associates identities by fitting cost,
and performs context-guided monocular fitting against a voxel density
field. Includes a synthetic-scene oracle, evaluation metrics and a CLI.
"""

from .kernels import BACKEND as kernel_backend  # noqa: F401

__version__ = "0.1.0"
