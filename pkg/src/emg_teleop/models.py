"""Trainable regressors and classifiers for the EMG pipeline.

Regressors map filtered EMG to subspace coordinates: kernel ridge
regression (RBF), non-negative matrix factorization followed by linear
regression, and a PCA latent-space linear model. Classifiers detect the
discrete gestures: a from-scratch random forest and an RBF SVM (scikit-learn
solves the dual; prediction runs from stored arrays here).

All models standardize features with training statistics (except the NMF
route, which needs non-negative inputs) and predict deterministically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from emg_teleop.subspace import fit_pca_subspace, pca_project

DEFAULT_LAMBDA_GRID = tuple(np.logspace(-4, 2, 7))
DEFAULT_GAMMA_GRID = tuple(np.logspace(-3, 1, 5))
DEFAULT_CV_FOLDS = 5

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class LabeledWindow:
    """One training sample: filtered EMG features with optional targets/label."""

    features: np.ndarray
    target: np.ndarray | None = None
    gesture: str | None = None

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        if not np.all(np.isfinite(f)):
            raise ValueError("non-finite features")
        object.__setattr__(self, "features", f)
        if self.target is not None:
            t = np.asarray(self.target, dtype=float)
            if np.any(t < 0.0) or np.any(t > 1.0):
                raise ValueError("targets must lie in [0, 1]")
            object.__setattr__(self, "target", t)


def _split_xy(data, need_targets=True):
    X = np.stack([w.features for w in data])
    if not need_targets:
        return X, None
    rows = [w for w in data if w.target is not None]
    if not rows:
        raise ValueError("no training samples carry targets")
    X = np.stack([w.features for w in rows])
    Y = np.stack([w.target for w in rows])
    return X, Y


def _split_labeled(data):
    rows = [w for w in data if w.gesture is not None]
    if not rows:
        raise ValueError("no training samples carry gesture labels")
    X = np.stack([w.features for w in rows])
    y = np.array([w.gesture for w in rows])
    return X, y


@dataclass(frozen=True)
class Standardizer:
    """Per-feature z-score fitted on training data."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return cls(mean=mean, std=std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std


def _sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise squared euclidean distances, clipped at zero."""
    # built in place: the [n_A, n_B] buffer dominates the cost at session scale
    d = A @ B.T
    d *= -2.0
    d += np.sum(A * A, axis=1)[:, None]
    d += np.sum(B * B, axis=1)[None, :]
    np.clip(d, 0.0, None, out=d)
    return d


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    K = _sq_dists(A, B)
    K *= -gamma
    np.exp(K, out=K)
    return K


# ---------------------------------------------------------------------------
# Kernel ridge regression


@dataclass(frozen=True)
class KrrModel:
    """RBF kernel ridge regressor in dual form."""

    support_points: np.ndarray
    dual_weights: np.ndarray
    kernel_gamma: float
    ridge_lambda: float
    output_names: tuple
    scaler: Standardizer

    def __post_init__(self):
        if self.kernel_gamma <= 0:
            raise ValueError("kernel_gamma must be positive")
        if self.dual_weights.shape[0] != self.support_points.shape[0]:
            raise ValueError("dual_weights rows must match support point count")

    def predict(self, x) -> np.ndarray:
        """Predict outputs for one feature vector or a batch of rows."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = x[None, :] if single else x
        if X.shape[1] != self.support_points.shape[1]:
            raise ValueError(
                f"feature length {X.shape[1]} does not match "
                f"training length {self.support_points.shape[1]}"
            )
        Xs = self.scaler.transform(X)
        # chunked so session-length batches never materialize the full
        # [n_query, n_support] kernel matrix at once
        out = np.empty((X.shape[0], self.dual_weights.shape[1]))
        chunk = 4096
        for i in range(0, X.shape[0], chunk):
            K = rbf_kernel(Xs[i : i + chunk], self.support_points, self.kernel_gamma)
            np.matmul(K, self.dual_weights, out=out[i : i + chunk])
        return out[0] if single else out


def _solve_krr(K: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    n = K.shape[0]
    M = K + lam * np.eye(n)
    try:
        return np.linalg.solve(M, Y)
    except np.linalg.LinAlgError as e:
        raise np.linalg.LinAlgError(
            f"singular kernel system at lambda={lam:g}; "
            "duplicate training points need lambda > 0"
        ) from e


def _cv_folds_indices(n: int, folds: int) -> list[np.ndarray]:
    """Deterministic contiguous fold split (no shuffling)."""
    sizes = np.full(folds, n // folds)
    sizes[: n % folds] += 1
    idx = np.arange(n)
    out, start = [], 0
    for s in sizes:
        out.append(idx[start : start + s])
        start += s
    return out


def _stratified_folds(y, folds: int) -> list[np.ndarray]:
    """Deterministic round-robin fold assignment within each class."""
    assignment = np.empty(len(y), dtype=int)
    for cls in sorted(set(y)):
        idx = np.nonzero(y == cls)[0]
        assignment[idx] = np.arange(idx.size) % folds
    return [np.nonzero(assignment == f)[0] for f in range(folds)]


def train_krr(
    data,
    cv_folds: int = DEFAULT_CV_FOLDS,
    lambda_grid=DEFAULT_LAMBDA_GRID,
    gamma_grid=DEFAULT_GAMMA_GRID,
    output_names=("sigma", "epsilon"),
) -> KrrModel:
    """Grid-search (lambda, gamma) by k-fold CV mean squared error, refit on all data.

    Ties in CV error break toward larger lambda, then larger gamma
    (strongest smoothing).
    """
    X, Y = _split_xy(data)
    n = X.shape[0]
    if cv_folds < 2:
        raise ValueError("cv_folds must be >= 2")
    if n < cv_folds:
        raise ValueError(f"need at least {cv_folds} target-bearing samples, got {n}")
    scaler = Standardizer.fit(X)
    Xs = scaler.transform(X)
    D = _sq_dists(Xs, Xs)
    folds = _cv_folds_indices(n, cv_folds)

    best = None  # (cv_mse, lam, gamma)
    for gamma in gamma_grid:
        K = np.exp(-gamma * D)
        for lam in lambda_grid:
            sq_err, count = 0.0, 0
            ok = True
            for val_idx in folds:
                tr_idx = np.setdiff1d(np.arange(n), val_idx, assume_unique=True)
                try:
                    W = _solve_krr(K[np.ix_(tr_idx, tr_idx)], Y[tr_idx], lam)
                except np.linalg.LinAlgError:
                    ok = False
                    break
                pred = K[np.ix_(val_idx, tr_idx)] @ W
                sq_err += float(np.sum((pred - Y[val_idx]) ** 2))
                count += val_idx.size
            if not ok:
                continue
            mse = sq_err / count
            if (
                best is None
                or mse < best[0] - 1e-15
                or (abs(mse - best[0]) <= 1e-15 and (lam, gamma) > (best[1], best[2]))
            ):
                best = (mse, lam, gamma)
    if best is None:
        raise np.linalg.LinAlgError("all CV grid points produced singular systems")
    _, lam, gamma = best
    W = _solve_krr(np.exp(-gamma * D), Y, lam)
    return KrrModel(
        support_points=Xs,
        dual_weights=W,
        kernel_gamma=float(gamma),
        ridge_lambda=float(lam),
        output_names=tuple(output_names),
        scaler=scaler,
    )


def train_krr_fixed(
    data, ridge_lambda: float, kernel_gamma: float,
    output_names=("sigma", "epsilon"),
) -> KrrModel:
    """Fit KRR at fixed (lambda, gamma), skipping cross-validation."""
    X, Y = _split_xy(data)
    scaler = Standardizer.fit(X)
    Xs = scaler.transform(X)
    K = rbf_kernel(Xs, Xs, kernel_gamma)
    W = _solve_krr(K, Y, ridge_lambda)
    return KrrModel(
        support_points=Xs,
        dual_weights=W,
        kernel_gamma=float(kernel_gamma),
        ridge_lambda=float(ridge_lambda),
        output_names=tuple(output_names),
        scaler=scaler,
    )


def predict_krr(model: KrrModel, x) -> np.ndarray:
    return model.predict(x)


# ---------------------------------------------------------------------------
# NMF + linear regression


def nmf_multiplicative(
    X: np.ndarray, n_components: int, n_iter: int = 500, seed: int = 0
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Frobenius NMF X ~= W @ H via multiplicative updates.

    Returns (W, H, loss_trace); the loss trace is non-increasing.
    """
    if np.any(X < 0):
        raise ValueError("NMF requires non-negative input")
    n, d = X.shape
    if n_components > d:
        raise ValueError(f"n_components={n_components} exceeds feature dimension {d}")
    rng = np.random.default_rng(seed)
    scale = np.sqrt(X.mean() / n_components) if X.mean() > 0 else 1.0
    W = rng.uniform(0.1, 1.0, size=(n, n_components)) * scale
    H = rng.uniform(0.1, 1.0, size=(n_components, d)) * scale
    eps = 1e-12
    losses = []
    for _ in range(n_iter):
        H *= (W.T @ X) / (W.T @ W @ H + eps)
        W *= (X @ H.T) / (W @ (H @ H.T) + eps)
        losses.append(float(np.linalg.norm(X - W @ H)))
    return W, H, losses


@dataclass(frozen=True)
class NmfLrModel:
    """NMF activation encoding followed by ordinary least squares."""

    H: np.ndarray
    coef: np.ndarray
    intercept: np.ndarray
    output_names: tuple
    seed: int

    def encode(self, x: np.ndarray) -> np.ndarray:
        """Non-negative least squares activations of x against H."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = x[None, :] if single else x
        acts = np.stack([nnls(self.H.T, row)[0] for row in X])
        return acts[0] if single else acts

    def predict(self, x) -> np.ndarray:
        acts = self.encode(x)
        return acts @ self.coef + self.intercept


def _ols(X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least squares with intercept; returns (coef, intercept)."""
    Xa = np.column_stack([X, np.ones(X.shape[0])])
    sol, *_ = np.linalg.lstsq(Xa, Y, rcond=None)
    return sol[:-1], sol[-1]


def train_nmf_lr(
    data, n_components: int = 4, n_iter: int = 500, seed: int = 0,
    output_names=("sigma", "epsilon"),
) -> NmfLrModel:
    """Factor the (non-negative) feature matrix, regress targets on activations."""
    X, Y = _split_xy(data)
    if np.any(X < 0):
        raise ValueError("NMF features must be non-negative (rectified envelopes)")
    W, H, _ = nmf_multiplicative(X, n_components, n_iter=n_iter, seed=seed)
    coef, intercept = _ols(W, Y)
    return NmfLrModel(H=H, coef=coef, intercept=intercept,
                      output_names=tuple(output_names), seed=seed)


# ---------------------------------------------------------------------------
# Latent-space (PCA + linear) regressor


@dataclass(frozen=True)
class LatentSpaceModel:
    """Linear regression from PCA latent coordinates of the EMG features."""

    mean: np.ndarray
    components: np.ndarray
    coef: np.ndarray
    intercept: np.ndarray
    output_names: tuple
    scaler: Standardizer

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        Xs = self.scaler.transform(x)
        z = (Xs - self.mean) @ self.components.T
        return z @ self.coef + self.intercept


def train_latent_space(
    data, latent_dim: int = 4, output_names=("sigma", "epsilon")
) -> LatentSpaceModel:
    """PCA the EMG features, then least-squares map latent coords to targets."""
    X, Y = _split_xy(data)
    d = X.shape[1]
    if not (1 <= latent_dim <= d):
        raise ValueError(f"latent_dim must be in [1, {d}], got {latent_dim}")
    scaler = Standardizer.fit(X)
    Xs = scaler.transform(X)
    sub = fit_pca_subspace(Xs, variance_threshold=1.0)
    comps = sub.components[:latent_dim]
    Z = (Xs - sub.mean) @ comps.T
    coef, intercept = _ols(Z, Y)
    return LatentSpaceModel(
        mean=sub.mean, components=comps, coef=coef, intercept=intercept,
        output_names=tuple(output_names), scaler=scaler,
    )


# ---------------------------------------------------------------------------
# Random forest classifier (from scratch)


@dataclass
class _TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "_TreeNode | None" = None
    right: "_TreeNode | None" = None
    leaf_class: int = -1


def _gini_scan(values: np.ndarray, y: np.ndarray, n_classes: int):
    """Best threshold for one feature by exhaustive midpoint scan.

    Returns (cost, threshold) or None when no split separates the data.
    Thresholds ascend during the scan, so the argmin-first rule yields the
    lowest threshold among ties.
    """
    order = np.argsort(values, kind="stable")
    v = values[order]
    ys = y[order]
    n = len(v)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), ys] = 1.0
    left_counts = np.cumsum(onehot, axis=0)
    total = left_counts[-1]
    # candidate split after position i (left = [0..i]) only where value changes
    valid = np.nonzero(v[:-1] < v[1:])[0]
    if valid.size == 0:
        return None
    nl = (valid + 1).astype(float)
    nr = n - nl
    lc = left_counts[valid]
    rc = total - lc
    gini_l = 1.0 - np.sum((lc / nl[:, None]) ** 2, axis=1)
    gini_r = 1.0 - np.sum((rc / nr[:, None]) ** 2, axis=1)
    cost = (nl * gini_l + nr * gini_r) / n
    j = int(np.argmin(cost))
    thr = 0.5 * (v[valid[j]] + v[valid[j] + 1])
    return float(cost[j]), thr


def _build_tree(X, y, n_classes, depth, max_depth, rng, n_sub):
    node = _TreeNode()
    counts = np.bincount(y, minlength=n_classes)
    if depth >= max_depth or counts.max() == len(y) or len(y) < 2:
        node.leaf_class = int(np.argmax(counts))
        return node
    feats = np.sort(rng.choice(X.shape[1], size=n_sub, replace=False))
    best = None  # (cost, feature, threshold)
    for f in feats:
        res = _gini_scan(X[:, f], y, n_classes)
        if res is None:
            continue
        cost, thr = res
        if best is None or cost < best[0] - 1e-15:
            best = (cost, int(f), thr)
    if best is None:
        node.leaf_class = int(np.argmax(counts))
        return node
    _, f, thr = best
    mask = X[:, f] <= thr
    node.feature = f
    node.threshold = thr
    node.left = _build_tree(X[mask], y[mask], n_classes, depth + 1, max_depth, rng, n_sub)
    node.right = _build_tree(X[~mask], y[~mask], n_classes, depth + 1, max_depth, rng, n_sub)
    return node


def _tree_apply(node: _TreeNode, X: np.ndarray, out: np.ndarray, idx: np.ndarray):
    if node.leaf_class >= 0:
        out[idx] = node.leaf_class
        return
    mask = X[idx, node.feature] <= node.threshold
    _tree_apply(node.left, X, out, idx[mask])
    _tree_apply(node.right, X, out, idx[~mask])


@dataclass
class ForestModel:
    """Bagged Gini decision trees with per-split random feature subsets."""

    trees: list
    n_trees: int
    max_depth: int
    class_labels: tuple
    seed: int
    scaler: Standardizer

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = self.scaler.transform(x[None, :] if single else x)
        votes = np.zeros((X.shape[0], len(self.class_labels)), dtype=int)
        out = np.empty(X.shape[0], dtype=int)
        idx = np.arange(X.shape[0])
        for tree in self.trees:
            _tree_apply(tree, X, out, idx)
            votes[idx, out] += 1
        # majority vote; np.argmax takes the first maximum = class-label order
        winners = np.argmax(votes, axis=1)
        labels = np.array(self.class_labels, dtype=object)[winners]
        return labels[0] if single else labels


def train_forest(data, n_trees: int = 100, max_depth: int = 12, seed: int = 0) -> ForestModel:
    """Train the random forest on gesture-labeled windows."""
    X, y_str = _split_labeled(data)
    class_labels = tuple(sorted(set(y_str)))
    if len(class_labels) < 2:
        raise ValueError("degenerate labels: need at least 2 classes")
    label_index = {c: i for i, c in enumerate(class_labels)}
    y = np.array([label_index[c] for c in y_str])
    scaler = Standardizer.fit(X)
    Xs = scaler.transform(X)
    n, d = Xs.shape
    n_sub = int(np.ceil(np.sqrt(d)))
    rng = np.random.default_rng(seed)
    trees = []
    for _ in range(n_trees):
        boot = rng.integers(0, n, size=n)
        trees.append(
            _build_tree(Xs[boot], y[boot], len(class_labels), 0, max_depth, rng, n_sub)
        )
    return ForestModel(
        trees=trees, n_trees=n_trees, max_depth=max_depth,
        class_labels=class_labels, seed=seed, scaler=scaler,
    )


# ---------------------------------------------------------------------------
# SVM classifier (dual solved by scikit-learn; prediction from stored arrays)


@dataclass
class SvmModel:
    """One-vs-rest RBF SVM; each row of the tables below is one binary machine."""

    class_labels: tuple
    support_vectors: list
    dual_coefs: list
    intercepts: np.ndarray
    c: float
    gamma: float
    scaler: Standardizer

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        Xs = self.scaler.transform(X)
        scores = np.empty((Xs.shape[0], len(self.class_labels)))
        for i, (sv, dc) in enumerate(zip(self.support_vectors, self.dual_coefs)):
            K = rbf_kernel(Xs, sv, self.gamma)
            scores[:, i] = K @ dc + self.intercepts[i]
        return scores

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = x[None, :] if single else x
        scores = self.decision_function(X)
        labels = np.array(self.class_labels, dtype=object)[np.argmax(scores, axis=1)]
        return labels[0] if single else labels


def _fit_ovr_svm(Xs, y, class_labels, c, gamma):
    from sklearn.svm import SVC

    svs, dcs, bs = [], [], []
    for cls in class_labels:
        ybin = (y == cls).astype(int)
        if ybin.min() == ybin.max():
            # class absent (or alone) in this split: constant decision
            svs.append(np.zeros((0, Xs.shape[1])))
            dcs.append(np.zeros(0))
            bs.append(1.0 if ybin.max() == 1 else -1.0)
            continue
        clf = SVC(kernel="rbf", C=c, gamma=gamma, tol=1e-3)
        clf.fit(Xs, ybin)
        sign = 1.0 if clf.classes_[1] == 1 else -1.0
        svs.append(clf.support_vectors_.copy())
        dcs.append(sign * clf.dual_coef_[0].copy())
        bs.append(sign * float(clf.intercept_[0]))
    return svs, dcs, np.array(bs)


def train_svm(
    data,
    c_grid=(0.1, 1.0, 10.0, 100.0),
    gamma_grid=(0.01, 0.1, 1.0),
    cv_folds: int = DEFAULT_CV_FOLDS,
) -> SvmModel:
    """CV grid search over (C, gamma) by accuracy; ties break toward smaller C."""
    X, y = _split_labeled(data)
    class_labels = tuple(sorted(set(y)))
    if len(class_labels) < 2:
        raise ValueError("degenerate labels: need at least 2 classes")
    scaler = Standardizer.fit(X)
    Xs = scaler.transform(X)
    n = Xs.shape[0]
    folds = _stratified_folds(y, min(cv_folds, n))
    best = None  # (accuracy, -c, -gamma)
    for c in sorted(c_grid):
        for gamma in sorted(gamma_grid):
            correct = 0
            for val_idx in folds:
                tr_idx = np.setdiff1d(np.arange(n), val_idx, assume_unique=True)
                if len(set(y[tr_idx])) < 2:
                    continue
                svs, dcs, bs = _fit_ovr_svm(Xs[tr_idx], y[tr_idx], class_labels, c, gamma)
                model = SvmModel(class_labels, svs, dcs, bs, c, gamma,
                                 Standardizer(np.zeros(Xs.shape[1]), np.ones(Xs.shape[1])))
                pred = model.predict(Xs[val_idx])
                correct += int(np.sum(pred == y[val_idx]))
            acc = correct / n
            key = (acc, -c, -gamma)
            if best is None or key > best[0]:
                best = (key, c, gamma)
    _, c, gamma = best
    svs, dcs, bs = _fit_ovr_svm(Xs, y, class_labels, c, gamma)
    return SvmModel(class_labels, svs, dcs, bs, float(c), float(gamma), scaler)


# ---------------------------------------------------------------------------
# Metrics


@dataclass
class EvalReport:
    """Per-axis regression error and/or classifier confusion summary."""

    nrmse_per_output: dict = field(default_factory=dict)
    global_accuracy: float | None = None
    confusion: np.ndarray | None = None
    class_labels: tuple = ()
    n_samples: int = 0


def nrmse(truth, pred) -> float:
    """RMSE normalized by the truth range, as a percentage."""
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if truth.shape != pred.shape or truth.size == 0:
        raise ValueError(f"need equal nonzero lengths, got {truth.shape} vs {pred.shape}")
    rng = float(truth.max() - truth.min())
    if rng == 0.0:
        raise ValueError("cannot normalize: truth has zero range")
    rmse = float(np.sqrt(np.mean((pred - truth) ** 2)))
    return 100.0 * rmse / rng


def classification_report(truth, pred, class_labels=None) -> EvalReport:
    """Confusion matrix (rows = truth) and global accuracy."""
    truth = np.asarray(truth, dtype=object)
    pred = np.asarray(pred, dtype=object)
    if truth.shape != pred.shape:
        raise ValueError(f"length mismatch: {truth.shape} vs {pred.shape}")
    if truth.size == 0:
        raise ValueError("empty inputs")
    if class_labels is None:
        class_labels = tuple(sorted(set(truth) | set(pred)))
    index = {c: i for i, c in enumerate(class_labels)}
    confusion = np.zeros((len(class_labels), len(class_labels)), dtype=int)
    for t, p in zip(truth, pred):
        confusion[index[t], index[p]] += 1
    n = int(truth.size)
    acc = 100.0 * np.trace(confusion) / n
    return EvalReport(
        global_accuracy=acc, confusion=confusion,
        class_labels=tuple(class_labels), n_samples=n,
    )


# ---------------------------------------------------------------------------
# Serialization (versioned JSON; floats round-trip exactly via repr)


def _arr(a):
    return np.asarray(a, dtype=float).tolist()


def _node_to_doc(node: _TreeNode):
    if node.leaf_class >= 0:
        return {"leaf": node.leaf_class}
    return {
        "f": node.feature,
        "t": node.threshold,
        "l": _node_to_doc(node.left),
        "r": _node_to_doc(node.right),
    }


def _node_from_doc(doc):
    node = _TreeNode()
    if "leaf" in doc:
        node.leaf_class = doc["leaf"]
        return node
    node.feature = doc["f"]
    node.threshold = doc["t"]
    node.left = _node_from_doc(doc["l"])
    node.right = _node_from_doc(doc["r"])
    return node


def model_to_doc(model) -> dict:
    base = {"format_version": MODEL_FORMAT_VERSION}
    if isinstance(model, KrrModel):
        base.update(
            kind="krr",
            support_points=_arr(model.support_points),
            dual_weights=_arr(model.dual_weights),
            kernel_gamma=model.kernel_gamma,
            ridge_lambda=model.ridge_lambda,
            output_names=list(model.output_names),
            scaler_mean=_arr(model.scaler.mean),
            scaler_std=_arr(model.scaler.std),
        )
    elif isinstance(model, NmfLrModel):
        base.update(
            kind="nmf_lr",
            H=_arr(model.H),
            coef=_arr(model.coef),
            intercept=_arr(model.intercept),
            output_names=list(model.output_names),
            seed=model.seed,
        )
    elif isinstance(model, LatentSpaceModel):
        base.update(
            kind="latent_space",
            mean=_arr(model.mean),
            components=_arr(model.components),
            coef=_arr(model.coef),
            intercept=_arr(model.intercept),
            output_names=list(model.output_names),
            scaler_mean=_arr(model.scaler.mean),
            scaler_std=_arr(model.scaler.std),
        )
    elif isinstance(model, ForestModel):
        base.update(
            kind="forest",
            trees=[_node_to_doc(t) for t in model.trees],
            n_trees=model.n_trees,
            max_depth=model.max_depth,
            class_labels=list(model.class_labels),
            seed=model.seed,
            scaler_mean=_arr(model.scaler.mean),
            scaler_std=_arr(model.scaler.std),
        )
    elif isinstance(model, SvmModel):
        base.update(
            kind="svm",
            class_labels=list(model.class_labels),
            support_vectors=[_arr(sv) for sv in model.support_vectors],
            dual_coefs=[_arr(dc) for dc in model.dual_coefs],
            intercepts=_arr(model.intercepts),
            c=model.c,
            gamma=model.gamma,
            scaler_mean=_arr(model.scaler.mean),
            scaler_std=_arr(model.scaler.std),
        )
    else:
        raise TypeError(f"cannot serialize model of type {type(model).__name__}")
    return base


def model_from_doc(doc: dict):
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format_version {version!r}")
    kind = doc["kind"]
    if kind == "krr":
        return KrrModel(
            support_points=np.array(doc["support_points"]),
            dual_weights=np.array(doc["dual_weights"]),
            kernel_gamma=doc["kernel_gamma"],
            ridge_lambda=doc["ridge_lambda"],
            output_names=tuple(doc["output_names"]),
            scaler=Standardizer(np.array(doc["scaler_mean"]), np.array(doc["scaler_std"])),
        )
    if kind == "nmf_lr":
        return NmfLrModel(
            H=np.array(doc["H"]),
            coef=np.array(doc["coef"]),
            intercept=np.array(doc["intercept"]),
            output_names=tuple(doc["output_names"]),
            seed=doc["seed"],
        )
    if kind == "latent_space":
        return LatentSpaceModel(
            mean=np.array(doc["mean"]),
            components=np.array(doc["components"]),
            coef=np.array(doc["coef"]),
            intercept=np.array(doc["intercept"]),
            output_names=tuple(doc["output_names"]),
            scaler=Standardizer(np.array(doc["scaler_mean"]), np.array(doc["scaler_std"])),
        )
    if kind == "forest":
        return ForestModel(
            trees=[_node_from_doc(t) for t in doc["trees"]],
            n_trees=doc["n_trees"],
            max_depth=doc["max_depth"],
            class_labels=tuple(doc["class_labels"]),
            seed=doc["seed"],
            scaler=Standardizer(np.array(doc["scaler_mean"]), np.array(doc["scaler_std"])),
        )
    if kind == "svm":
        return SvmModel(
            class_labels=tuple(doc["class_labels"]),
            support_vectors=[np.array(sv) for sv in doc["support_vectors"]],
            dual_coefs=[np.array(dc) for dc in doc["dual_coefs"]],
            intercepts=np.array(doc["intercepts"]),
            c=doc["c"],
            gamma=doc["gamma"],
            scaler=Standardizer(np.array(doc["scaler_mean"]), np.array(doc["scaler_std"])),
        )
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    with open(path, "w") as f:
        json.dump(model_to_doc(model), f)
        f.write("\n")


def load_model(path):
    with open(path) as f:
        return model_from_doc(json.load(f))
