"""Epipolar visual odometry with keypoint refinement and graph-weighted pose estimation."""

__version__ = "0.1.0"
