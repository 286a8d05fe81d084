"""Central finite-difference oracle for the LSTM gradients."""

import math

import numpy as np

from scoregen.neural.lstm import ModelConfig, batch_loss, forward_batch, init_weights

EPS = 1e-5
# Gradients smaller than this are compared absolutely: the central difference
# itself carries ~1e-11 of rounding noise at unit-scale losses.
MAGNITUDE_FLOOR = 1e-5


def relative_error(analytic, numeric):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), MAGNITUDE_FLOOR)


def summed_loss(weights, x, targets, masks):
    probs, _ = forward_batch(weights, x, "infer" if masks is None else "train", masks=masks)
    return math.fsum(batch_loss(probs, targets).tolist())


def max_fd_error(weights, grads, x, targets, masks=None):
    worst = 0.0
    for (name, w), (_, g) in zip(weights.named_tensors(), grads.named_tensors()):
        for ix in np.ndindex(w.shape):
            orig = w[ix]
            w[ix] = orig + EPS
            up = summed_loss(weights, x, targets, masks)
            w[ix] = orig - EPS
            down = summed_loss(weights, x, targets, masks)
            w[ix] = orig
            worst = max(worst, relative_error(g[ix], (up - down) / (2 * EPS)))
    return worst


def random_model(rng, max_layers=3, max_width=8, max_vocab=10, max_len=5, dropout=0.0):
    layers = tuple(int(w) for w in rng.integers(1, max_width + 1, size=rng.integers(1, max_layers + 1)))
    cfg = ModelConfig(layers, dropout, int(rng.integers(1, max_len + 1)),
                      int(rng.integers(2, max_vocab + 1)), int(rng.integers(2 ** 32)))
    weights = init_weights(cfg, rng)
    # Push parameters off the initialization scale so every gate is exercised.
    for _, a in weights.named_tensors():
        a[...] = rng.normal(0.0, 0.6, a.shape)
    return weights
