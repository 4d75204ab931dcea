"""Loss landscapes the simulator trains on.

Two task families are provided.  ``QuadraticTask`` gives per-device
quadratic losses with closed-form optima and exact smoothness / strong
convexity constants, which the convergence checks require.
``ClassificationTask`` is a multinomial linear classifier on labeled
feature vectors and is used by the scheduling experiments, where label
histograms drive the device selection.

Model parameters are plain 1-D float64 numpy arrays of a fixed
dimension; every operation validates dimensions and finiteness.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "QuadraticTask",
    "ClassificationTask",
    "global_loss",
    "gradient",
    "quadratic_optimum",
    "load_csv_dataset",
    "make_cluster_dataset",
    "random_quadratic_task",
]


def check_parameter_vector(theta, dim: int) -> np.ndarray:
    """Validate and return a d-dimensional finite float vector."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (dim,):
        raise ValueError(f"parameter vector has shape {theta.shape}, expected ({dim},)")
    if not np.all(np.isfinite(theta)):
        raise ValueError("parameter vector contains non-finite entries")
    return theta


def _check_batch(batch, shard_size: int) -> np.ndarray:
    batch = np.asarray(batch, dtype=int)
    if batch.ndim != 1 or batch.size == 0:
        raise ValueError("batch must be a nonempty 1-D index array")
    if batch.min() < 0 or batch.max() >= shard_size:
        raise ValueError("batch indices out of range for shard")
    return batch


class QuadraticTask:
    """Per-device quadratics 0.5 * (theta - c_k)' A_k (theta - c_k).

    ``curvatures`` is either ``(n_devices, dim)`` for diagonal A_k or
    ``(n_devices, dim, dim)`` for full symmetric PSD matrices.  Each
    device's loss attains its minimum value of exactly zero at its
    center c_k.

    Optional per-sample scale factors (positive, renormalized to mean
    exactly one per device) make mini-batch gradients stochastic while
    keeping every device loss and its minimum in closed form: the
    full-shard mean always reproduces the deterministic quadratic.
    """

    def __init__(self, curvatures, centers, sample_scales=None, shard_sizes=None):
        self.centers = np.asarray(centers, dtype=float)
        if self.centers.ndim != 2:
            raise ValueError("centers must have shape (n_devices, dim)")
        n, d = self.centers.shape
        self.curvatures = np.asarray(curvatures, dtype=float)
        if self.curvatures.shape not in ((n, d), (n, d, d)):
            raise ValueError("curvatures must have shape (n, d) or (n, d, d)")
        self.diagonal = self.curvatures.ndim == 2

        if sample_scales is not None:
            if shard_sizes is not None:
                raise ValueError("pass sample_scales or shard_sizes, not both")
            scales = []
            for s in sample_scales:
                s = np.asarray(s, dtype=float)
                if s.ndim != 1 or s.size == 0 or np.any(s <= 0):
                    raise ValueError("sample scales must be positive 1-D arrays")
                scales.append(s / s.mean())  # mean exactly 1 keeps F_k closed-form
            if len(scales) != n:
                raise ValueError("need one scale array per device")
            self.sample_scales = scales
        else:
            if shard_sizes is None:
                shard_sizes = np.ones(n, dtype=int)
            shard_sizes = np.asarray(shard_sizes, dtype=int)
            if shard_sizes.shape != (n,) or np.any(shard_sizes < 1):
                raise ValueError("shard_sizes must be positive, one per device")
            self.sample_scales = [np.ones(int(m)) for m in shard_sizes]

        self._eigvals = self._curvature_eigenvalues()
        if np.any(self._eigvals <= 0):
            raise ValueError("curvatures must be positive definite")

    def _curvature_eigenvalues(self) -> np.ndarray:
        if self.diagonal:
            return self.curvatures
        return np.linalg.eigvalsh(self.curvatures)

    @property
    def n_devices(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def shard_sizes(self) -> np.ndarray:
        return np.array([s.size for s in self.sample_scales], dtype=int)

    @property
    def data_weights(self) -> np.ndarray:
        sizes = self.shard_sizes
        return sizes / sizes.sum()

    @property
    def smoothness(self) -> float:
        """Largest curvature eigenvalue across devices."""
        return float(self._eigvals.max())

    @property
    def strong_convexity(self) -> float:
        """Smallest curvature eigenvalue across devices."""
        return float(self._eigvals.min())

    def _apply_curvature(self, k: int, delta: np.ndarray) -> np.ndarray:
        if self.diagonal:
            return self.curvatures[k] * delta
        return self.curvatures[k] @ delta

    def local_loss(self, k: int, theta, batch=None) -> float:
        theta = check_parameter_vector(theta, self.dim)
        delta = theta - self.centers[k]
        quad = 0.5 * float(delta @ self._apply_curvature(k, delta))
        if batch is None:
            return quad
        batch = _check_batch(batch, self.sample_scales[k].size)
        return float(self.sample_scales[k][batch].mean()) * quad

    def local_gradient(self, k: int, theta, batch=None) -> np.ndarray:
        theta = check_parameter_vector(theta, self.dim)
        g = self._apply_curvature(k, theta - self.centers[k])
        if batch is None:
            return g
        batch = _check_batch(batch, self.sample_scales[k].size)
        return float(self.sample_scales[k][batch].mean()) * g

    def local_optimum(self, k: int) -> tuple[np.ndarray, float]:
        return self.centers[k].copy(), 0.0

    def global_optimum(self, weights=None) -> tuple[np.ndarray, float]:
        """Minimizer and minimum of the weighted average loss.

        Solves (sum_k w_k A_k) theta = sum_k w_k A_k c_k.  Raises on a
        singular aggregate curvature.
        """
        if weights is None:
            weights = self.data_weights
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (self.n_devices,):
            raise ValueError("need one weight per device")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        if self.diagonal:
            agg = weights @ self.curvatures
            rhs = weights @ (self.curvatures * self.centers)
            if np.any(np.abs(agg) < 1e-300):
                raise np.linalg.LinAlgError("aggregate curvature is singular")
            theta_star = rhs / agg
        else:
            agg = np.einsum("k,kij->ij", weights, self.curvatures)
            rhs = np.einsum("k,kij,kj->i", weights, self.curvatures, self.centers)
            theta_star = np.linalg.solve(agg, rhs)
        f_star = sum(
            w * self.local_loss(k, theta_star) for k, w in enumerate(weights)
        )
        return theta_star, float(f_star)

    def test_accuracy(self, theta) -> None:
        return None


class ClassificationTask:
    """Multinomial linear classifier with cross-entropy loss.

    The parameter vector stacks a (features x classes) weight matrix and
    a bias row, giving dimension (features + 1) * classes.  Shards are
    index arrays into the training set; batches index positions within a
    shard.
    """

    def __init__(self, features, labels, n_classes, shards,
                 test_features=None, test_labels=None):
        self.features = np.asarray(features, dtype=float)
        self.labels = np.asarray(labels, dtype=int)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.size:
            raise ValueError("features must be (n_samples, n_features) matching labels")
        self.n_classes = int(n_classes)
        if self.n_classes < 2:
            raise ValueError("need at least two classes")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError("labels out of range")
        self.shards = [np.asarray(getattr(s, "indices", s), dtype=int) for s in shards]
        for s in self.shards:
            if s.size == 0:
                raise ValueError("shards must be nonempty")
        if test_features is not None:
            self.test_features = np.asarray(test_features, dtype=float)
            self.test_labels = np.asarray(test_labels, dtype=int)
        else:
            self.test_features = None
            self.test_labels = None

    @property
    def n_devices(self) -> int:
        return len(self.shards)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def dim(self) -> int:
        return (self.n_features + 1) * self.n_classes

    @property
    def shard_sizes(self) -> np.ndarray:
        return np.array([s.size for s in self.shards], dtype=int)

    @property
    def data_weights(self) -> np.ndarray:
        sizes = self.shard_sizes
        return sizes / sizes.sum()

    def _unpack(self, theta: np.ndarray):
        f, c = self.n_features, self.n_classes
        return theta[: f * c].reshape(f, c), theta[f * c:]

    def _log_probs(self, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        w, b = self._unpack(theta)
        z = x @ w + b
        z = z - z.max(axis=1, keepdims=True)
        return z - np.log(np.exp(z).sum(axis=1, keepdims=True))

    def _loss_on(self, idx: np.ndarray, theta: np.ndarray) -> float:
        lp = self._log_probs(self.features[idx], theta)
        return float(-lp[np.arange(idx.size), self.labels[idx]].mean())

    def local_loss(self, k: int, theta, batch=None) -> float:
        theta = check_parameter_vector(theta, self.dim)
        idx = self.shards[k]
        if batch is not None:
            batch = _check_batch(batch, idx.size)
            idx = idx[batch]
        return self._loss_on(idx, theta)

    def local_gradient(self, k: int, theta, batch=None) -> np.ndarray:
        theta = check_parameter_vector(theta, self.dim)
        idx = self.shards[k]
        if batch is not None:
            batch = _check_batch(batch, idx.size)
            idx = idx[batch]
        x = self.features[idx]
        probs = np.exp(self._log_probs(x, theta))
        probs[np.arange(idx.size), self.labels[idx]] -= 1.0
        grad_w = x.T @ probs / idx.size
        grad_b = probs.mean(axis=0)
        return np.concatenate([grad_w.ravel(), grad_b])

    def label_histogram(self, k: int) -> np.ndarray:
        return np.bincount(self.labels[self.shards[k]], minlength=self.n_classes)

    def test_accuracy(self, theta) -> float | None:
        if self.test_features is None:
            return None
        theta = check_parameter_vector(theta, self.dim)
        lp = self._log_probs(self.test_features, theta)
        return float((lp.argmax(axis=1) == self.test_labels).mean())


def global_loss(task, theta) -> float:
    """Data-size-weighted average of the device losses.

    With disjoint shards this equals the plain mean of the sample losses
    over the union of all shards.
    """
    theta = check_parameter_vector(theta, task.dim)
    weights = task.data_weights
    return float(sum(w * task.local_loss(k, theta) for k, w in enumerate(weights)))


def gradient(task, device: int, theta, batch=None) -> np.ndarray:
    """Device gradient, exact on the full shard or on a mini-batch."""
    if batch is not None and np.asarray(batch).size == 0:
        raise ValueError("batch must be nonempty")
    return task.local_gradient(device, theta, batch)


def quadratic_optimum(task: QuadraticTask, weights=None) -> tuple[np.ndarray, float]:
    """Closed-form weighted optimum of a quadratic task."""
    return task.global_optimum(weights)


def load_csv_dataset(path) -> tuple[np.ndarray, np.ndarray]:
    """Load a CSV with one sample per row: features..., integer label."""
    raw = np.genfromtxt(path, delimiter=",", dtype=float)
    if raw.ndim == 1:
        raw = raw.reshape(1, -1)
    if raw.shape[1] < 2:
        raise ValueError("dataset rows need at least one feature and a label")
    if not np.all(np.isfinite(raw)):
        raise ValueError("dataset contains non-finite values")
    features = raw[:, :-1]
    labels = raw[:, -1]
    if np.any(labels != np.round(labels)):
        raise ValueError("labels must be integers")
    return features, labels.astype(int)


def make_cluster_dataset(rng, n_classes: int, n_features: int, size: int,
                         spread: float = 2.0, noise: float = 1.0):
    """Synthetic Gaussian clusters with near-balanced integer labels."""
    means = rng.normal(0.0, spread, size=(n_classes, n_features))
    labels = rng.permuted(np.resize(np.arange(n_classes), size))
    features = means[labels] + rng.normal(0.0, noise, size=(size, n_features))
    return features, labels


def random_quadratic_task(rng, n_devices: int, dim: int,
                          curvature_range=(1.0, 1.0), center_spread: float = 1.0,
                          center_offset: float = 0.0, shard_size: int = 1,
                          scale_jitter: float = 0.0) -> QuadraticTask:
    """Random diagonal quadratic task; jitter > 0 adds per-sample scale noise."""
    lo, hi = curvature_range
    curv = rng.uniform(lo, hi, size=(n_devices, dim))
    centers = center_offset + rng.normal(0.0, center_spread, size=(n_devices, dim))
    scales = None
    if scale_jitter > 0:
        if not scale_jitter < 1:
            raise ValueError("scale_jitter must be < 1 to keep scales positive")
        scales = [1.0 + scale_jitter * rng.uniform(-1.0, 1.0, size=shard_size)
                  for _ in range(n_devices)]
        return QuadraticTask(curv, centers, sample_scales=scales)
    return QuadraticTask(curv, centers, shard_sizes=np.full(n_devices, shard_size))
