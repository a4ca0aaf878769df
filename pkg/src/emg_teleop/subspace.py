"""The 3-D teleoperation subspace and its mappings to joint space.

A pose in the subspace is psi = (alpha, sigma, epsilon): finger spread,
hand size/aperture, and finger curl, each normalized to [0, 1]. A HandMap
carries the per-hand affine transform between the subspace and that hand's
joint space:

    to robot joints:    q = ((psi * delta_star) @ A.T) + o
    from joint angles:  psi = ((q - o) @ A) * delta

The [0, 1] range of the subspace is a convention of this package; poses
are clamped into it on construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

PSI_DIM = 3
PSI_NAMES = ("alpha", "sigma", "epsilon")


class ShapeMismatchError(ValueError):
    """Raised when vector/matrix dimensions disagree with a HandMap or subspace."""


@dataclass(frozen=True)
class SubspacePose:
    """A point in the teleoperation subspace, clamped to [0, 1] per axis."""

    alpha: float
    sigma: float
    epsilon: float

    def __post_init__(self):
        for name in PSI_NAMES:
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"non-finite {name}={v!r}")
            object.__setattr__(self, name, min(1.0, max(0.0, v)))

    @classmethod
    def from_array(cls, a) -> "SubspacePose":
        a = np.asarray(a, dtype=float)
        if a.shape != (PSI_DIM,):
            raise ShapeMismatchError(f"expected shape ({PSI_DIM},), got {a.shape}")
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def to_array(self) -> np.ndarray:
        return np.array([self.alpha, self.sigma, self.epsilon])


@dataclass(frozen=True)
class HandMap:
    """Per-hand affine mapping between joint space and the subspace.

    Args:
        name: identifier for the hand.
        A: [n_joints, 3] linear mapping, columns linearly independent.
        o: [n_joints] joint offsets in radians, inside the joint limits.
        delta_star: forward (subspace -> robot) per-axis scale, positive.
        delta: inverse (joints -> subspace) per-axis scale, positive.
        joint_limits: [n_joints, 2] (lo, hi) pairs in radians, lo < hi.
    """

    name: str
    A: np.ndarray
    o: np.ndarray
    delta_star: np.ndarray
    delta: np.ndarray
    joint_limits: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        o = np.asarray(self.o, dtype=float)
        ds = np.asarray(self.delta_star, dtype=float)
        d = np.asarray(self.delta, dtype=float)
        lim = np.asarray(self.joint_limits, dtype=float)
        for field_name, v in (("A", A), ("o", o), ("delta_star", ds), ("delta", d), ("joint_limits", lim)):
            if not np.all(np.isfinite(v)):
                raise ValueError(f"non-finite values in {field_name}")
            object.__setattr__(self, field_name, v)
        n = A.shape[0]
        if A.ndim != 2 or A.shape[1] != PSI_DIM:
            raise ShapeMismatchError(f"A must be [n_joints, {PSI_DIM}], got {A.shape}")
        if o.shape != (n,):
            raise ShapeMismatchError(f"o must have shape ({n},), got {o.shape}")
        if ds.shape != (PSI_DIM,) or d.shape != (PSI_DIM,):
            raise ShapeMismatchError("delta and delta_star must be 3-vectors")
        if np.any(ds <= 0) or np.any(d <= 0):
            raise ValueError("delta and delta_star must be strictly positive")
        if lim.shape != (n, 2):
            raise ShapeMismatchError(f"joint_limits must be [{n}, 2], got {lim.shape}")
        if np.any(lim[:, 0] >= lim[:, 1]):
            raise ValueError("joint limits must satisfy lo < hi")
        if np.any(o < lim[:, 0]) or np.any(o > lim[:, 1]):
            raise ValueError("offset o must lie within the joint limits")
        if np.linalg.matrix_rank(A) < PSI_DIM:
            raise ValueError("columns of A must be linearly independent (rank 3)")

    @property
    def n_joints(self) -> int:
        return self.A.shape[0]


def project_to_robot(psi, hand_map: HandMap) -> tuple[np.ndarray, np.ndarray]:
    """Map a subspace pose to robot joint angles.

    Returns:
        (q, clamped): joint angles clamped to the hand's limits, and a
        boolean flag per joint marking where clamping fired.
    """
    p = psi.to_array() if isinstance(psi, SubspacePose) else np.asarray(psi, dtype=float)
    if p.shape != (PSI_DIM,):
        raise ShapeMismatchError(f"psi must have shape ({PSI_DIM},), got {p.shape}")
    q_raw = (p * hand_map.delta_star) @ hand_map.A.T + hand_map.o
    lo, hi = hand_map.joint_limits[:, 0], hand_map.joint_limits[:, 1]
    q = np.clip(q_raw, lo, hi)
    clamped = (q_raw < lo) | (q_raw > hi)
    return q, clamped


def project_from_joints(q, hand_map: HandMap) -> tuple[np.ndarray, np.ndarray]:
    """Map robot/human joint angles into the subspace.

    Returns:
        (psi, clamped): subspace coordinates clamped to [0, 1], and a
        boolean flag per axis marking where clamping fired.
    """
    q = np.asarray(q, dtype=float)
    n = hand_map.n_joints
    if q.shape != (n,):
        raise ShapeMismatchError(f"q must have shape ({n},) for map '{hand_map.name}', got {q.shape}")
    psi_raw = ((q - hand_map.o) @ hand_map.A) * hand_map.delta
    psi = np.clip(psi_raw, 0.0, 1.0)
    clamped = (psi_raw < 0.0) | (psi_raw > 1.0)
    return psi, clamped


def project_from_joints_batch(Q: np.ndarray, hand_map: HandMap) -> np.ndarray:
    """Vectorized project_from_joints over rows of Q, clamp flags dropped."""
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[1] != hand_map.n_joints:
        raise ShapeMismatchError(f"Q must be [T, {hand_map.n_joints}], got {Q.shape}")
    psi_raw = ((Q - hand_map.o) @ hand_map.A) * hand_map.delta
    return np.clip(psi_raw, 0.0, 1.0)


@dataclass(frozen=True)
class PcaSubspace:
    """PCA basis retaining a given fraction of joint-angle variance."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    variance_fraction_retained: float

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        comps = np.asarray(self.components, dtype=float)
        ev = np.asarray(self.explained_variance, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "explained_variance", ev)
        gram = comps @ comps.T
        if not np.allclose(gram, np.eye(comps.shape[0]), atol=1e-9):
            raise ValueError("PCA components must be orthonormal")
        if np.any(np.diff(ev) > 0):
            raise ValueError("explained_variance must be sorted descending")

    @property
    def k(self) -> int:
        return self.components.shape[0]


def fit_pca_subspace(joint_data, variance_threshold: float = 0.9) -> PcaSubspace:
    """Fit a PCA subspace on joint-angle rows.

    k is the smallest number of leading eigenvectors whose eigenvalue mass
    reaches variance_threshold of the total.
    """
    if not (0.0 < variance_threshold <= 1.0):
        raise ValueError(f"variance_threshold must be in (0, 1], got {variance_threshold}")
    X = np.asarray(joint_data, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 1:
        raise ValueError(f"need a [n>=2, d>=1] data matrix, got shape {X.shape}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (X.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    total = float(evals.sum())
    if total <= 0.0:
        raise ValueError("degenerate data: zero variance")
    cum = np.cumsum(evals) / total
    k = int(np.searchsorted(cum, variance_threshold - 1e-12) + 1)
    return PcaSubspace(
        mean=mean,
        components=evecs[:, :k].T,
        explained_variance=evals[:k],
        variance_fraction_retained=float(cum[k - 1]),
    )


def pca_project(q, sub: PcaSubspace) -> np.ndarray:
    """Coefficients of q in the retained basis: components @ (q - mean)."""
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != sub.mean.shape[0]:
        raise ShapeMismatchError(
            f"q has {q.shape[-1]} joints, subspace expects {sub.mean.shape[0]}"
        )
    return (q - sub.mean) @ sub.components.T


def pca_reconstruct(c, sub: PcaSubspace) -> np.ndarray:
    """Reconstruct joint angles from coefficients: mean + c @ components."""
    c = np.asarray(c, dtype=float)
    if c.shape[-1] != sub.k:
        raise ShapeMismatchError(f"coefficients have length {c.shape[-1]}, subspace has k={sub.k}")
    return sub.mean + c @ sub.components


# ---------------------------------------------------------------------------
# Hand-map file I/O (JSON; arrays row-major)

HAND_MAP_VERSION = 1


def save_hand_map(hand_map: HandMap, path) -> None:
    doc = {
        "schema_version": HAND_MAP_VERSION,
        "name": hand_map.name,
        "n_joints": hand_map.n_joints,
        "A": hand_map.A.tolist(),
        "o": hand_map.o.tolist(),
        "delta": hand_map.delta.tolist(),
        "delta_star": hand_map.delta_star.tolist(),
        "joint_limits": hand_map.joint_limits.tolist(),
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def load_hand_map(path) -> HandMap:
    with open(path) as f:
        doc = json.load(f)
    version = doc.get("schema_version")
    if version != HAND_MAP_VERSION:
        raise ValueError(f"unsupported hand map schema_version {version!r} in {path}")
    required = {"name", "n_joints", "A", "o", "delta", "delta_star", "joint_limits"}
    missing = required - doc.keys()
    if missing:
        raise ValueError(f"hand map {path} missing fields: {sorted(missing)}")
    hand_map = HandMap(
        name=doc["name"],
        A=np.array(doc["A"], dtype=float),
        o=np.array(doc["o"], dtype=float),
        delta_star=np.array(doc["delta_star"], dtype=float),
        delta=np.array(doc["delta"], dtype=float),
        joint_limits=np.array(doc["joint_limits"], dtype=float),
    )
    if hand_map.n_joints != int(doc["n_joints"]):
        raise ValueError(
            f"hand map {path}: declared n_joints={doc['n_joints']} but A has {hand_map.n_joints} rows"
        )
    return hand_map


BUNDLED_MAPS = ("human-hand-15", "gripper-9")


def bundled_hand_map(name: str) -> HandMap:
    """Load one of the hand maps shipped with the package.

    Available names are listed in BUNDLED_MAPS: a 15-joint human hand and a
    9-joint three-fingered gripper. Both have orthonormal A columns and
    delta = 1/delta_star, so subspace round trips through them are exact to
    rounding.
    """
    from importlib import resources

    if name not in BUNDLED_MAPS:
        raise ValueError(f"unknown bundled map {name!r}; available: {BUNDLED_MAPS}")
    res = resources.files("emg_teleop") / "data" / f"{name}.json"
    with resources.as_file(res) as path:
        return load_hand_map(path)


def make_orthonormal_hand_map(
    name: str = "synthetic-hand",
    n_joints: int = 15,
    seed: int = 7,
    delta_star=(1.0, 1.0, 1.0),
    limit_margin: float = 2.5,
) -> HandMap:
    """Build a hand map with orthonormal A columns and delta = 1/delta_star.

    The joint limits leave limit_margin radians of room around the offset so
    that every pose in [0,1]^3 maps inside the limits; round trips through
    the subspace are then exact.
    """
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n_joints, PSI_DIM))
    A, _ = np.linalg.qr(M)
    ds = np.asarray(delta_star, dtype=float)
    o = np.full(n_joints, 0.1)
    limits = np.stack([o - limit_margin, o + limit_margin], axis=1)
    return HandMap(
        name=name,
        A=A,
        o=o,
        delta_star=ds,
        delta=1.0 / ds,
        joint_limits=limits,
    )
