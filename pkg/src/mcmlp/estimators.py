"""Scikit-learn style wrappers so the pieces compose with the wider
ecosystem: two stateless transformers for the coordinate-frame changes and a
classifier wrapping the full train/predict loop.

All of them follow the usual conventions: ``__init__`` stores
hyperparameters untouched (so ``get_params``/``set_params``/``clone`` work),
``fit`` returns ``self``, fitted attributes end in an underscore.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import autograd as ag
from .data import channel_stats, normalize
from .model import ModelConfig, init_model, model_forward
from .training import AdamWState, TrainConfig, evaluate_top1, train_epoch
from .transforms import dct2d_array, dct2d_transpose_array, hadamard2d_array
from .validation import check_array, check_image_batch, check_labels


class _Transform2D(TransformerMixin, BaseEstimator):
    """Shared plumbing for the stateless 2-D transforms.

    Input is ``(n_samples, N, C)`` with power-of-two ``N`` and ``C``;
    ``fit`` only validates.
    """

    def fit(self, X, y=None):
        check_array(X, ndim=3)
        return self

    def transform(self, X):
        return self._forward(check_array(X, ndim=3, dtype=np.float64))

    def inverse_transform(self, X):
        return self._inverse(check_array(X, ndim=3, dtype=np.float64))


class DiscreteCosine2D(_Transform2D):
    """Orthonormal 2-D DCT over the trailing (token, channel) axes."""

    def _forward(self, X):
        return dct2d_array(X)

    def _inverse(self, X):
        return dct2d_transpose_array(X)


class WalshHadamard2D(_Transform2D):
    """Scaled 2-D Walsh-Hadamard transform over the trailing axes.

    The forward map divides by ``N * C``; the inverse multiplies it back.
    """

    def _forward(self, X):
        return hadamard2d_array(X)

    def _inverse(self, X):
        n, c = X.shape[-2], X.shape[-1]
        return hadamard2d_array(X) * (n * c)


class MixerClassifier(ClassifierMixin, BaseEstimator):
    """Image classifier over ``(n_samples, channels, H, W)`` float arrays.

    ``fit`` learns per-channel normalization from the training images, then
    trains the mixer network with the configured recipe.  Labels may be any
    hashable values; they are indexed through ``classes_``.
    """

    def __init__(
        self,
        image_size=32,
        patch_size=4,
        dim=64,
        depth=2,
        expansion=3,
        mixer_order=("hadamard", "dct"),
        epochs=20,
        warmup_epochs=3,
        base_lr=0.01,
        weight_decay=1e-5,
        mixup_alpha=0.2,
        cutmix_alpha=0.4,
        batch_size=128,
        seed=0,
    ):
        self.image_size = image_size
        self.patch_size = patch_size
        self.dim = dim
        self.depth = depth
        self.expansion = expansion
        self.mixer_order = mixer_order
        self.epochs = epochs
        self.warmup_epochs = warmup_epochs
        self.base_lr = base_lr
        self.weight_decay = weight_decay
        self.mixup_alpha = mixup_alpha
        self.cutmix_alpha = cutmix_alpha
        self.batch_size = batch_size
        self.seed = seed

    def _configs(self, channels_in: int, num_classes: int):
        model_cfg = ModelConfig(
            image_size=self.image_size,
            patch_size=self.patch_size,
            channels_in=channels_in,
            dim=self.dim,
            depth=self.depth,
            expansion=self.expansion,
            num_classes=num_classes,
            mixer_order=tuple(self.mixer_order),
        )
        train_cfg = TrainConfig(
            epochs=self.epochs,
            warmup_epochs=self.warmup_epochs,
            base_lr=self.base_lr,
            weight_decay=self.weight_decay,
            mixup_alpha=self.mixup_alpha,
            cutmix_alpha=self.cutmix_alpha,
            batch_size=self.batch_size,
            seed=self.seed,
        )
        return model_cfg, train_cfg

    def fit(self, X, y):
        X = check_image_batch(X).astype(np.float32)
        self.classes_, y_idx = np.unique(np.asarray(y), return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least 2 classes to fit")
        y_idx = check_labels(y_idx, len(self.classes_))
        model_cfg, train_cfg = self._configs(X.shape[1], len(self.classes_))

        mean, std = channel_stats(X)
        std = np.where(std == 0, 1.0, std)
        self.normalization_ = (mean, std)
        X = normalize(X, mean, std)

        with ag.precision(np.float32):
            self.model_ = init_model(model_cfg, seed=train_cfg.seed)
            state = AdamWState.initialize(self.model_.named_parameters())
            self.history_ = []
            for epoch in range(train_cfg.epochs):
                stats = train_epoch(self.model_, (X, y_idx), state, train_cfg, epoch)
                self.history_.append(stats)
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("fit must be called before predicting")

    def decision_function(self, X):
        self._check_fitted()
        X = check_image_batch(X).astype(np.float32)
        mean, std = self.normalization_
        X = normalize(X, mean, std)
        with ag.precision(np.float32), ag.no_grad():
            logits = []
            for lo in range(0, len(X), 256):
                batch = ag.Tensor(np.ascontiguousarray(X[lo : lo + 256]))
                logits.append(model_forward(batch, self.model_).data)
        return np.concatenate(logits, axis=0)

    def predict_proba(self, X):
        logits = self.decision_function(X)
        shifted = logits - logits.max(axis=1, keepdims=True)
        expd = np.exp(shifted)
        return expd / expd.sum(axis=1, keepdims=True)

    def predict(self, X):
        logits = self.decision_function(X)
        return self.classes_[logits.argmax(axis=1)]

    def top1_score(self, X, y) -> float:
        """Top-1 accuracy via the training module's evaluator."""
        self._check_fitted()
        X = check_image_batch(X).astype(np.float32)
        mean, std = self.normalization_
        X = normalize(X, mean, std)
        lookup = {label: i for i, label in enumerate(self.classes_)}
        y_idx = np.array([lookup[v] for v in np.asarray(y)], dtype=np.int64)
        with ag.precision(np.float32):
            return evaluate_top1(self.model_, (X, y_idx))
