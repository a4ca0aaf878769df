"""EMG-driven teleoperation of non-anthropomorphic robot hands.

Maps multichannel forearm EMG into a 3-D teleoperation subspace
(spread, size, curl) and from there into robot joint space. Ships the
hybrid classifier/regressor controller plus three baseline control
methods, trainable models, a synthetic session generator, and a
benchmark harness.
"""

from emg_teleop.signal import EmgSample, FilterConfig, rectify, lowpass_filter, median_filter
from emg_teleop.subspace import (
    SubspacePose,
    HandMap,
    PcaSubspace,
    project_to_robot,
    project_from_joints,
    fit_pca_subspace,
    pca_project,
    pca_reconstruct,
)

__all__ = [
    "EmgSample",
    "FilterConfig",
    "rectify",
    "lowpass_filter",
    "median_filter",
    "SubspacePose",
    "HandMap",
    "PcaSubspace",
    "project_to_robot",
    "project_from_joints",
    "fit_pca_subspace",
    "pca_project",
    "pca_reconstruct",
]

__version__ = "0.1.0"
