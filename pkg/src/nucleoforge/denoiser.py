"""Noise predictors for the masked diffusion pipeline.

Three implementations of the predict(x_t, sem, C, t) contract:

* OracleDenoiser — closed-form inversion of the forward noising for a
  known clean image; exact by construction, used to validate the
  sampler end to end.
* StencilDenoiser — a single 3x3 convolution on x_t (10 parameters),
  small enough to check every analytic gradient against central finite
  differences.
* TinyConvDenoiser — two 3x3 conv layers with a ReLU between, fed x_t
  plus conditioning channels (class map, centroid-offset maps, region
  mask, normalized step). Around two thousand parameters; trains in
  seconds on desk-scale data with the Adam loop below.

All gradients are hand-derived; the convs run via im2col so the heavy
lifting is two matmuls per layer.
"""

import json

import numpy as np

from .diffusion import as_mask, masked_q_sample


class OracleDenoiser:
    """Recovers the exact noise when x_t was generated from a known x0."""

    def __init__(self, x0, sched):
        self.x0 = np.asarray(x0, dtype=np.float64)
        self.sched = sched

    def predict(self, x_t, sem, C, t):
        abar = self.sched.alpha_bar[self.sched._index(t)]
        return (np.asarray(x_t, dtype=np.float64)
                - np.sqrt(abar) * self.x0) / np.sqrt(1.0 - abar)


def oracle_denoiser(x0, sched):
    return OracleDenoiser(x0, sched)


def _im2col3(x):
    """(C, H, W) -> (C*9, H*W) patch matrix for a padded 3x3 window."""
    c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    cols = np.empty((c, 9, h, w), dtype=x.dtype)
    k = 0
    for dr in range(3):
        for dc in range(3):
            cols[:, k] = xp[:, dr:dr + h, dc:dc + w]
            k += 1
    return cols.reshape(c * 9, h * w)


def _col2im3(cols, shape):
    """Adjoint of _im2col3: scatter-add patch gradients back to (C, H, W)."""
    c, h, w = shape
    cols = cols.reshape(c, 9, h, w)
    xp = np.zeros((c, h + 2, w + 2), dtype=cols.dtype)
    k = 0
    for dr in range(3):
        for dc in range(3):
            xp[:, dr:dr + h, dc:dc + w] += cols[:, k]
            k += 1
    return xp[:, 1:-1, 1:-1]


def _conv3(x, kernel, bias):
    cols = _im2col3(x)
    cout = kernel.shape[0]
    y = kernel.reshape(cout, -1) @ cols + bias[:, None]
    return y.reshape(cout, x.shape[1], x.shape[2]), cols


def _conv3_backward(dy, cols, kernel, in_shape):
    cout = kernel.shape[0]
    dy2 = dy.reshape(cout, -1)
    dk = (dy2 @ cols.T).reshape(kernel.shape)
    db = dy2.sum(axis=1)
    dcols = kernel.reshape(cout, -1).T @ dy2
    dx = _col2im3(dcols, in_shape)
    return dk, db, dx


def _as_chw(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[None]
    if x.ndim == 3:
        return x
    raise ValueError("image must be 2-D or 3-D, got shape %s" % (x.shape,))


class StencilDenoiser:
    """One 3x3 conv + bias on a single-channel x_t; ignores conditioning.

    Deliberately tiny (10 parameters) so its analytic gradient can be
    verified coefficient by coefficient against finite differences of
    the public training loss.
    """

    arch = {"kind": "stencil"}
    n_params = 10

    def __init__(self, rng_seed=0):
        rng = np.random.default_rng(rng_seed)
        self.kernel = rng.normal(scale=0.1, size=(1, 1, 3, 3))
        self.bias = np.zeros(1)
        self.meta = {"seed": int(rng_seed)}

    def get_params(self):
        return np.concatenate([self.kernel.ravel(), self.bias])

    def set_params(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.n_params:
            raise ValueError("expected %d parameters, got %d"
                             % (self.n_params, vec.size))
        self.kernel = vec[:9].reshape(1, 1, 3, 3).copy()
        self.bias = vec[9:10].copy()

    def predict(self, x_t, sem, C, t):
        x = _as_chw(x_t)
        if x.shape[0] != 1:
            raise ValueError("stencil denoiser is single-channel, got %d"
                             % x.shape[0])
        y, _ = _conv3(x, self.kernel, self.bias)
        return y if np.asarray(x_t).ndim == 3 else y[0]

    def _forward(self, x_t, sem, C, t):
        x = _as_chw(x_t)
        y, cols = _conv3(x, self.kernel, self.bias)
        return y, (cols, x.shape)

    def _backward(self, dy, cache):
        cols, in_shape = cache
        dk, db, _ = _conv3_backward(dy, cols, self.kernel, in_shape)
        return np.concatenate([dk.ravel(), db])


class TinyConvDenoiser:
    """Two-layer 3x3 conv noise predictor with conditioning channels.

    Input channels: the image itself, the class map scaled to roughly
    [0, 1], the two centroid-offset maps, the region mask, and a
    constant t/T plane. Hidden width is small; the whole parameter
    vector fits comfortably in a float32 NPY file.
    """

    def __init__(self, img_channels=1, hidden=32, T=50, rng_seed=0):
        self.img_channels = int(img_channels)
        self.hidden = int(hidden)
        self.T = int(T)
        cin = self.img_channels + 5
        rng = np.random.default_rng(rng_seed)
        s1 = np.sqrt(2.0 / (cin * 9))
        s2 = np.sqrt(2.0 / (self.hidden * 9))
        self.k1 = rng.normal(scale=s1, size=(self.hidden, cin, 3, 3))
        self.b1 = np.zeros(self.hidden)
        self.k2 = rng.normal(scale=s2, size=(self.img_channels,
                                             self.hidden, 3, 3))
        self.b2 = np.zeros(self.img_channels)
        self.meta = {"seed": int(rng_seed)}

    @property
    def arch(self):
        return {"kind": "tiny_conv", "img_channels": self.img_channels,
                "hidden": self.hidden, "T": self.T}

    @property
    def n_params(self):
        return self.k1.size + self.b1.size + self.k2.size + self.b2.size

    def get_params(self):
        return np.concatenate([self.k1.ravel(), self.b1,
                               self.k2.ravel(), self.b2])

    def set_params(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.n_params:
            raise ValueError("expected %d parameters, got %d"
                             % (self.n_params, vec.size))
        i = 0
        for name in ("k1", "b1", "k2", "b2"):
            arr = getattr(self, name)
            setattr(self, name, vec[i:i + arr.size].reshape(arr.shape).copy())
            i += arr.size

    def _features(self, x_t, sem, C, t):
        x = _as_chw(x_t)
        h, w = x.shape[1:]
        chans = [x]
        if sem is not None:
            chans.append(np.asarray(sem.sem, dtype=np.float64)[None] / 8.0)
            chans.append(np.asarray(sem.hdist, dtype=np.float64)[None])
            chans.append(np.asarray(sem.vdist, dtype=np.float64)[None])
        else:
            chans.append(np.zeros((3, h, w)))
        if C is not None:
            chans.append(as_mask(C, (h, w)).astype(np.float64)[None])
        else:
            chans.append(np.zeros((1, h, w)))
        chans.append(np.full((1, h, w), t / self.T))
        return np.concatenate(chans, axis=0)

    def _forward(self, x_t, sem, C, t):
        feats = self._features(x_t, sem, C, t)
        z1, cols1 = _conv3(feats, self.k1, self.b1)
        a1 = np.maximum(z1, 0.0)
        y, cols2 = _conv3(a1, self.k2, self.b2)
        return y, (cols1, feats.shape, z1, cols2, a1.shape)

    def _backward(self, dy, cache):
        cols1, feat_shape, z1, cols2, a1_shape = cache
        dk2, db2, da1 = _conv3_backward(dy, cols2, self.k2, a1_shape)
        dz1 = da1 * (z1 > 0.0)
        dk1, db1, _ = _conv3_backward(dz1, cols1, self.k1, feat_shape)
        return np.concatenate([dk1.ravel(), db1, dk2.ravel(), db2])

    def predict(self, x_t, sem, C, t):
        y, _ = self._forward(x_t, sem, C, t)
        return y if np.asarray(x_t).ndim == 3 else y[0]

    def save(self, path_prefix):
        np.save(str(path_prefix) + ".npy",
                self.get_params().astype(np.float32))
        desc = {"arch": self.arch, "seed": self.meta.get("seed"),
                "schedule": self.meta.get("schedule")}
        with open(str(path_prefix) + ".json", "w") as fh:
            json.dump(desc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path_prefix):
        with open(str(path_prefix) + ".json") as fh:
            desc = json.load(fh)
        arch = desc["arch"]
        if arch.get("kind") != "tiny_conv":
            raise ValueError("descriptor is not a tiny_conv model: %r"
                             % arch.get("kind"))
        model = cls(img_channels=arch["img_channels"], hidden=arch["hidden"],
                    T=arch["T"], rng_seed=desc.get("seed") or 0)
        model.set_params(np.load(str(path_prefix) + ".npy"))
        model.meta = {"seed": desc.get("seed"), "schedule": desc.get("schedule")}
        return model


def loss_and_grad(denoiser, x0, sem, C, t, eps, sched, complement_weight=0.0):
    """Masked noise-prediction loss and its gradient w.r.t. parameters.

    The forward pass reproduces diffusion.training_loss exactly (same
    masking, same weighting, same mean-over-elements reduction), so the
    returned loss can be cross-checked against it and the gradient
    against finite differences of it.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    mask = as_mask(C, x0.shape[-2:])
    x_t = masked_q_sample(x0, mask, t, eps, sched)
    eps_hat, cache = denoiser._forward(x_t, sem, mask, t)
    eps_hat = eps_hat.reshape(np.shape(x0))
    weight = np.where(mask, 1.0, complement_weight)
    resid = weight * (np.asarray(eps, dtype=np.float64) - eps_hat)
    loss = float(np.mean(resid * resid))
    dy = (2.0 / resid.size) * weight * weight * (eps_hat - eps)
    grad = denoiser._backward(_as_chw(dy), cache)
    return loss, grad


class Adam:
    """Plain Adam with bias correction."""

    def __init__(self, n_params, learning_rate=1e-2, beta1=0.9, beta2=0.999,
                 eps=1e-8):
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.step_count = 0

    def update(self, params, grad):
        self.step_count += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        mhat = self.m / (1.0 - self.beta1 ** self.step_count)
        vhat = self.v / (1.0 - self.beta2 ** self.step_count)
        return params - self.lr * mhat / (np.sqrt(vhat) + self.eps)


def train_tiny_denoiser(dataset, sched, iterations=2000, learning_rate=1e-4,
                        rng_seed=0, hidden=32, complement_weight=0.0):
    """Fit a TinyConvDenoiser to the masked noise-prediction objective.

    dataset is a list of (x0, structural_label, mask) triples; items are
    cycled in order while the step index and noise draw are sampled
    fresh each iteration from a seeded generator, so equal seeds give
    identical loss curves. Returns the trained model with its
    per-iteration losses attached as ``training_losses``.
    """
    if not dataset:
        raise ValueError("dataset must be nonempty")
    iterations = int(iterations)
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    x0_first = _as_chw(dataset[0][0])
    rng = np.random.default_rng(rng_seed)
    model = TinyConvDenoiser(img_channels=x0_first.shape[0], hidden=hidden,
                             T=sched.T, rng_seed=rng_seed)
    model.meta["schedule"] = {"T": sched.T,
                              "beta_1": float(sched.beta[0]),
                              "beta_T": float(sched.beta[-1])}
    opt = Adam(model.n_params, learning_rate=learning_rate)
    losses = []
    for it in range(iterations):
        x0, sem, C = dataset[it % len(dataset)]
        t = int(rng.integers(1, sched.T + 1))
        eps = rng.standard_normal(np.shape(x0))
        loss, grad = loss_and_grad(model, x0, sem, C, t, eps, sched,
                                   complement_weight)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise RuntimeError("training diverged at iteration %d" % it)
        model.set_params(opt.update(model.get_params(), grad))
        losses.append(loss)
    model.training_losses = np.array(losses)
    return model
