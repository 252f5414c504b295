"""Gaussian diffusion schedule, masked noising, and masked reverse sampling.

Steps are indexed 1..T throughout (t = 1 is the least-noised step), so
``beta[t - 1]`` is the variance added at step t. Images are float arrays
shaped (channels, height, width) or plain (height, width), scaled to
[-1, 1] by convention; masks are (height, width) and broadcast over
channels.

The masked variants confine both forward corruption and reverse
generation to a binary region mask: outside the mask the original image
always survives unchanged, inside it the usual DDPM machinery runs, and
after every reverse step the known region is re-imposed from the
original (so generation can never drift outside the mask).
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step variances and their cumulative products.

    beta, alpha = 1 - beta, alpha_bar = cumprod(alpha), and the reverse
    step variance sigma2 (= beta here) are all length-T arrays indexed
    by t - 1.
    """

    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1, got %d" % self.T)
        for name in ("beta", "alpha", "alpha_bar", "sigma2"):
            arr = getattr(self, name)
            if arr.shape != (self.T,):
                raise ValueError("%s must have shape (%d,), got %s"
                                 % (name, self.T, arr.shape))
        if np.any(self.beta <= 0.0) or np.any(self.beta >= 1.0):
            raise ValueError("beta values must lie strictly in (0, 1)")
        if not np.allclose(self.alpha, 1.0 - self.beta, rtol=0, atol=1e-12):
            raise ValueError("alpha must equal 1 - beta")
        expected = np.concatenate(([1.0], self.alpha_bar[:-1])) * self.alpha
        if not np.allclose(self.alpha_bar, expected, rtol=1e-12, atol=0):
            raise ValueError("alpha_bar must be the running product of alpha")
        if np.any(np.diff(self.alpha_bar) >= 0.0):
            raise ValueError("alpha_bar must be strictly decreasing")

    def _index(self, t):
        t = int(t)
        if not 1 <= t <= self.T:
            raise ValueError("t must be in 1..%d, got %d" % (self.T, t))
        return t - 1


def linear_schedule(T, beta_1=1e-4, beta_T=0.2):
    """Schedule with beta linearly interpolated from beta_1 to beta_T."""
    T = int(T)
    if T < 1:
        raise ValueError("T must be >= 1, got %d" % T)
    if not (0.0 < beta_1 <= beta_T < 1.0):
        raise ValueError("need 0 < beta_1 <= beta_T < 1, got %g, %g"
                         % (beta_1, beta_T))
    beta = np.linspace(beta_1, beta_T, T, dtype=np.float64)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    return NoiseSchedule(T=T, beta=beta, alpha=alpha, alpha_bar=alpha_bar,
                         sigma2=beta.copy())


def as_mask(C, spatial_shape=None):
    """Coerce a region argument to a boolean (H, W) array.

    Accepts an InternuclearMask (its ``mask`` field is used), any array
    of 0/1 values, or a scalar 0/1 which expands to a constant mask
    (spatial_shape required in that case).
    """
    mask = getattr(C, "mask", C)
    if np.isscalar(mask):
        if spatial_shape is None:
            raise ValueError("scalar mask needs an explicit spatial shape")
        return np.full(spatial_shape, bool(mask))
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError("mask must be 2-D, got shape %s" % (mask.shape,))
    if spatial_shape is not None and mask.shape != tuple(spatial_shape):
        raise ValueError("mask shape %s does not match image spatial shape %s"
                         % (mask.shape, tuple(spatial_shape)))
    return mask.astype(bool)


def _spatial(x):
    if x.ndim == 2:
        return x.shape
    if x.ndim == 3:
        return x.shape[1:]
    raise ValueError("image must be 2-D or 3-D, got shape %s" % (x.shape,))


def q_sample(x0, t, eps, sched):
    """Forward-noised image at step t: sqrt(abar_t) x0 + sqrt(1 - abar_t) eps."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != x0.shape:
        raise ValueError("eps shape %s != x0 shape %s" % (eps.shape, x0.shape))
    abar = sched.alpha_bar[sched._index(t)]
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * eps


def masked_q_sample(x0, C, t, eps, sched):
    """Noise only the masked region; everywhere else the original survives.

    Pixels where C is 0 are returned bit-identical to x0 (selection, not
    arithmetic blending, so no rounding is introduced there).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    mask = as_mask(C, _spatial(x0))
    return np.where(mask, q_sample(x0, t, eps, sched), x0)


def p_step(x_t, t, eps_hat, sched, z=None):
    """One reverse step from x_t to x_{t-1} given a noise estimate.

    mean = (x_t - beta_t / sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t);
    the step adds sigma_t * z except at t = 1, where the mean is
    returned regardless of z. Pass z=None (or 0) for the deterministic
    variant.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    if eps_hat.shape != x_t.shape:
        raise ValueError("eps_hat shape %s != x_t shape %s"
                         % (eps_hat.shape, x_t.shape))
    i = sched._index(t)
    coef = sched.beta[i] / np.sqrt(1.0 - sched.alpha_bar[i])
    mean = (x_t - coef * eps_hat) / np.sqrt(sched.alpha[i])
    if t == 1 or z is None:
        return mean
    z = np.asarray(z, dtype=np.float64)
    if z.shape != x_t.shape and z.shape != ():
        raise ValueError("z shape %s != x_t shape %s" % (z.shape, x_t.shape))
    return mean + np.sqrt(sched.sigma2[i]) * z


def repaint_step(x_prev, x0, C):
    """Re-impose the original outside the mask after a reverse step.

    Inside C the freshly denoised content is kept; outside C the pixel
    is taken from x0 exactly.
    """
    x_prev = np.asarray(x_prev, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    if x_prev.shape != x0.shape:
        raise ValueError("x_prev shape %s != x0 shape %s"
                         % (x_prev.shape, x0.shape))
    mask = as_mask(C, _spatial(x0))
    return np.where(mask, x_prev, x0)


def training_loss(denoiser, x0, sem, C, t, eps, sched, complement_weight=0.0):
    """Mean squared masked noise-prediction error at step t.

    Builds x_t by masked noising, asks the denoiser for its noise
    estimate, weights the residual by 1 inside the mask and by
    complement_weight outside (default 0: the loss only sees the
    region being generated), and averages the squared weighted residual
    over every element.
    """
    if not 0.0 <= complement_weight <= 1.0:
        raise ValueError("complement_weight must lie in [0, 1], got %g"
                         % complement_weight)
    x0 = np.asarray(x0, dtype=np.float64)
    mask = as_mask(C, _spatial(x0))
    x_t = masked_q_sample(x0, mask, t, eps, sched)
    eps_hat = np.asarray(denoiser.predict(x_t, sem, mask, t), dtype=np.float64)
    if eps_hat.shape != x0.shape:
        raise ValueError("denoiser output shape %s != input shape %s"
                         % (eps_hat.shape, x0.shape))
    if not np.all(np.isfinite(eps_hat)):
        raise RuntimeError("denoiser returned non-finite values at t=%d" % t)
    weight = np.where(mask, 1.0, complement_weight)
    resid = weight * (np.asarray(eps, dtype=np.float64) - eps_hat)
    return float(np.mean(resid * resid))


def inpaint_sample(denoiser, x0, sem, C, sched, rng_seed=0,
                   deterministic=False, invert_repaint=False):
    """Regenerate the masked region of x0 by full reverse diffusion.

    Starts from the masked forward noising at t = T and walks t = T..1;
    after each reverse step the unmasked region is restored from x0, so
    only the region under C is ever synthesized. With deterministic=True
    the per-step noise z is zero (initial noising still uses the seed),
    which makes oracle-based reconstruction exact rather than
    statistical. invert_repaint swaps which region the restoration
    treats as known — an alternate reading of the replacement rule —
    and is exposed on the CLI for comparison.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    mask = as_mask(C, _spatial(x0))
    rng = np.random.default_rng(rng_seed)
    eps = rng.standard_normal(x0.shape)
    x = masked_q_sample(x0, mask, sched.T, eps, sched)
    repaint_mask = ~mask if invert_repaint else mask
    for t in range(sched.T, 0, -1):
        eps_hat = np.asarray(denoiser.predict(x, sem, mask, t),
                             dtype=np.float64)
        if not np.all(np.isfinite(eps_hat)):
            raise RuntimeError("denoiser returned non-finite values "
                               "at reverse step t=%d" % t)
        if deterministic or t == 1:
            z = None
        else:
            z = rng.standard_normal(x0.shape)
        x = p_step(x, t, eps_hat, sched, z)
        x = repaint_step(x, x0, repaint_mask)
    return x
