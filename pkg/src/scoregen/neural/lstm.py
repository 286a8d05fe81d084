"""Stacked LSTM next-token model in plain numpy (float64).

The model reads a window of scalar inputs (one normalized token index per
timestep), runs it through a stack of LSTM layers with inverted dropout
after each layer, and maps the top layer's last hidden state through a
dense layer and softmax to a distribution over the vocabulary.

Computation is batched: windows have shape ``[batch, L, input_dim]``.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError, ShapeError, ValidationError

GATES = ("f", "i", "c", "o")
PARAM_NAMES = tuple(f"W_{g}" for g in GATES) + tuple(f"U_{g}" for g in GATES) + tuple(
    f"b_{g}" for g in GATES)
LOSS_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelConfig:
    layer_sizes: tuple = (256, 256, 256)
    dropout_rate: float = 0.3
    sequence_length: int = 32
    vocab_size: int = 1
    rng_seed: int = 0
    input_dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(w) for w in self.layer_sizes))
        if not self.layer_sizes or min(self.layer_sizes) < 1:
            raise ValidationError(f"need at least one layer of width >= 1, got {self.layer_sizes}")
        if not 0 <= self.dropout_rate < 1:
            raise ValidationError(f"dropout rate must be in [0, 1), got {self.dropout_rate}")
        if self.sequence_length < 1:
            raise ValidationError("sequence length must be >= 1")
        if self.vocab_size < 1:
            raise ValidationError("vocabulary size must be >= 1")

    def to_dict(self):
        return {
            "layer_sizes": list(self.layer_sizes),
            "dropout_rate": self.dropout_rate,
            "sequence_length": self.sequence_length,
            "vocab_size": self.vocab_size,
            "rng_seed": self.rng_seed,
            "input_dim": self.input_dim,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class LayerParams:
    W_f: np.ndarray
    W_i: np.ndarray
    W_c: np.ndarray
    W_o: np.ndarray
    U_f: np.ndarray
    U_i: np.ndarray
    U_c: np.ndarray
    U_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray

    @property
    def hidden(self):
        return self.b_f.shape[0]

    @property
    def input_dim(self):
        return self.W_f.shape[1]

    def check(self, where="layer"):
        h, d = self.hidden, self.input_dim
        for name in PARAM_NAMES:
            arr = getattr(self, name)
            want = {"W": (h, d), "U": (h, h), "b": (h,)}[name[0]]
            if arr.shape != want:
                raise ShapeError(f"{where}.{name} has shape {arr.shape}, expected {want}")

    @classmethod
    def zeros(cls, input_dim, hidden):
        shapes = {"W": (hidden, input_dim), "U": (hidden, hidden), "b": (hidden,)}
        return cls(**{n: np.zeros(shapes[n[0]]) for n in PARAM_NAMES})


@dataclass
class ModelWeights:
    layers: list
    dense_W: np.ndarray
    dense_b: np.ndarray
    config: ModelConfig = field(default_factory=ModelConfig)

    def named_tensors(self):
        """Ordered ``(name, array)`` pairs; the arrays are the live parameters."""
        out = []
        for k, layer in enumerate(self.layers):
            for name in PARAM_NAMES:
                out.append((f"layer{k}.{name}", getattr(layer, name)))
        out.append(("dense.W", self.dense_W))
        out.append(("dense.b", self.dense_b))
        return out

    @classmethod
    def from_named(cls, tensors, config):
        layers = []
        for k in range(len(config.layer_sizes)):
            layers.append(LayerParams(**{n: tensors[f"layer{k}.{n}"] for n in PARAM_NAMES}))
        return cls(layers, tensors["dense.W"], tensors["dense.b"], config)

    def copy(self):
        return ModelWeights.from_named({n: a.copy() for n, a in self.named_tensors()}, self.config)

    def zeros_like(self):
        return ModelWeights.from_named(
            {n: np.zeros_like(a) for n, a in self.named_tensors()}, self.config)

    def validate(self):
        cfg = self.config
        if len(self.layers) != len(cfg.layer_sizes):
            raise ShapeError(f"{len(self.layers)} layers but config lists {len(cfg.layer_sizes)}")
        dim = cfg.input_dim
        for k, (layer, width) in enumerate(zip(self.layers, cfg.layer_sizes)):
            if layer.hidden != width or layer.input_dim != dim:
                raise ShapeError(
                    f"layer{k} is {layer.input_dim}->{layer.hidden}, config says {dim}->{width}")
            layer.check(f"layer{k}")
            dim = width
        if self.dense_W.shape != (cfg.vocab_size, dim):
            raise ShapeError(f"dense.W has shape {self.dense_W.shape}, expected {(cfg.vocab_size, dim)}")
        if self.dense_b.shape != (cfg.vocab_size,):
            raise ShapeError(f"dense.b has shape {self.dense_b.shape}, expected {(cfg.vocab_size,)}")
        for name, arr in self.named_tensors():
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"{name} contains non-finite values")

    def __eq__(self, other):
        if not isinstance(other, ModelWeights) or self.config != other.config:
            return False
        a, b = self.named_tensors(), other.named_tensors()
        return all(n1 == n2 and x.shape == y.shape and np.array_equal(x, y)
                   for (n1, x), (n2, y) in zip(a, b))

    def global_norm(self):
        return float(np.sqrt(sum(float(np.sum(a * a)) for _, a in self.named_tensors())))


def init_weights(config, rng=None):
    """Uniform(-k, k) initialization with k = 1/sqrt(fan_in); forget bias 1."""
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    layers = []
    dim = config.input_dim
    for width in config.layer_sizes:
        params = {}
        for name in PARAM_NAMES:
            kind = name[0]
            if kind == "b":
                params[name] = np.full(width, 1.0 if name == "b_f" else 0.0)
            else:
                fan_in = dim if kind == "W" else width
                k = 1.0 / np.sqrt(fan_in)
                params[name] = rng.uniform(-k, k, size=(width, fan_in))
        layers.append(LayerParams(**params))
        dim = width
    k = 1.0 / np.sqrt(dim)
    dense_W = rng.uniform(-k, k, size=(config.vocab_size, dim))
    return ModelWeights(layers, dense_W, np.zeros(config.vocab_size), config)


def sigmoid(x):
    # Split by sign so neither branch overflows.
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits):
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def lstm_cell_step(x, h_prev, c_prev, params):
    """One LSTM step. Works on single vectors or on ``[batch, dim]`` rows."""
    x, h_prev, c_prev = (np.asarray(a, dtype=np.float64) for a in (x, h_prev, c_prev))
    if x.shape[-1] != params.input_dim:
        raise ShapeError(f"x has width {x.shape[-1]}, W_* expect {params.input_dim}")
    if h_prev.shape[-1] != params.hidden:
        raise ShapeError(f"h_prev has width {h_prev.shape[-1]}, U_* expect {params.hidden}")
    if c_prev.shape[-1] != params.hidden:
        raise ShapeError(f"c_prev has width {c_prev.shape[-1]}, expected {params.hidden}")
    h, c, _ = _cell(x, h_prev, c_prev, params)
    return h, c


def _cell(x, h_prev, c_prev, p):
    f = sigmoid(x @ p.W_f.T + h_prev @ p.U_f.T + p.b_f)
    i = sigmoid(x @ p.W_i.T + h_prev @ p.U_i.T + p.b_i)
    g = np.tanh(x @ p.W_c.T + h_prev @ p.U_c.T + p.b_c)
    o = sigmoid(x @ p.W_o.T + h_prev @ p.U_o.T + p.b_o)
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (f, i, g, o, tc)


def dropout(vector, rate, mode, rng):
    """Inverted dropout; identity outside training or when ``rate`` is 0."""
    vector = np.asarray(vector, dtype=np.float64)
    if mode != "train" or rate == 0:
        return vector.copy()
    return vector * dropout_mask(vector.shape, rate, rng)


def dropout_mask(shape, rate, rng):
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def loss(probabilities, target):
    """Categorical cross-entropy. ``target`` is a one-hot vector or an index."""
    p = np.asarray(probabilities, dtype=np.float64)
    t = np.asarray(target)
    idx = int(np.argmax(t)) if t.ndim == 1 else int(t)
    return float(-np.log(max(p[idx], LOSS_FLOOR)))


class ForwardCache:
    """Everything the backward pass needs from one batched forward pass."""

    def __init__(self):
        self.layer_inputs = []   # per layer: [B, L, D] input sequence actually fed in
        self.steps = []          # per layer: list over t of (h_prev, c_prev, c, gates)
        self.masks = []          # per layer: [B, L, H] dropout mask or None
        self.top = None          # [B, H] dropped top hidden state at the last step
        self.probs = None


def _check_finite(arr, layer, t):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite activation in layer {layer} at timestep {t}")


def forward_batch(weights, inputs, mode="infer", rng=None, masks=None):
    """Run ``inputs`` of shape ``[B, L, input_dim]``; returns (probs [B, N], cache).

    In train mode dropout masks are drawn from ``rng`` unless ``masks`` (one
    array per layer, or None entries) is given.
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    cfg = weights.config
    if x.shape[1] != cfg.sequence_length:
        raise ShapeError(
            f"window length {x.shape[1]} does not match model sequence length {cfg.sequence_length}")
    if x.shape[2] != cfg.input_dim:
        raise ShapeError(f"input feature width {x.shape[2]}, model expects {cfg.input_dim}")
    B, L, _ = x.shape
    train = mode == "train" and cfg.dropout_rate > 0
    cache = ForwardCache()
    seq = x
    for k, p in enumerate(weights.layers):
        H = p.hidden
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        out = np.empty((B, L, H))
        steps = []
        for t in range(L):
            h_prev, c_prev = h, c
            h, c, gates = _cell(seq[:, t, :], h_prev, c_prev, p)
            _check_finite(h, k, t)
            _check_finite(c, k, t)
            steps.append((h_prev, c_prev, c, gates))
            out[:, t, :] = h
        mask = None
        if masks is not None and masks[k] is not None:
            mask = masks[k]
        elif train:
            mask = dropout_mask((B, L, H), cfg.dropout_rate, rng)
        cache.layer_inputs.append(seq)
        cache.steps.append(steps)
        cache.masks.append(mask)
        seq = out * mask if mask is not None else out
    top = seq[:, -1, :]
    logits = top @ weights.dense_W.T + weights.dense_b
    _check_finite(logits, "dense", L - 1)
    probs = softmax(logits)
    cache.top = top
    cache.probs = probs
    return probs, cache


def forward(weights, window, mode="infer", rng=None):
    """Next-token distribution for a single window of ``L`` normalized inputs."""
    x = np.asarray(window, dtype=np.float64).reshape(1, -1, weights.config.input_dim)
    probs, _ = forward_batch(weights, x, mode, rng)
    return probs[0]


def backward_batch(weights, cache, targets):
    """Gradients of the summed cross-entropy over the batch.

    ``targets`` is ``[B]`` indices or ``[B, N]`` one-hot rows. Returns a
    :class:`ModelWeights` of gradients.
    """
    targets = np.asarray(targets)
    if targets.ndim == 2:
        targets = np.argmax(targets, axis=1)
    probs = cache.probs
    B = probs.shape[0]
    grads = weights.zeros_like()

    dlogits = probs.copy()
    dlogits[np.arange(B), targets] -= 1.0
    grads.dense_W[...] = dlogits.T @ cache.top
    grads.dense_b[...] = dlogits.sum(axis=0)

    n_layers = len(weights.layers)
    L = len(cache.steps[0])
    top_H = weights.layers[-1].hidden
    d_seq = np.zeros((B, L, top_H))
    d_seq[:, -1, :] = dlogits @ weights.dense_W

    for k in range(n_layers - 1, -1, -1):
        p, g = weights.layers[k], grads.layers[k]
        mask = cache.masks[k]
        if mask is not None:
            d_seq = d_seq * mask
        x_seq = cache.layer_inputs[k]
        d_x = np.zeros_like(x_seq)
        dh_next = np.zeros((B, p.hidden))
        dc_next = np.zeros((B, p.hidden))
        for t in range(L - 1, -1, -1):
            h_prev, c_prev, c, (f, i, gc, o, tc) = cache.steps[k][t]
            dh = d_seq[:, t, :] + dh_next
            do = dh * tc
            dc = dh * o * (1.0 - tc * tc) + dc_next
            da = {
                "f": dc * c_prev * f * (1.0 - f),
                "i": dc * gc * i * (1.0 - i),
                "c": dc * i * (1.0 - gc * gc),
                "o": do * o * (1.0 - o),
            }
            x_t = x_seq[:, t, :]
            dh_next = np.zeros_like(dh)
            for gate, a in da.items():
                getattr(g, f"W_{gate}")[...] += a.T @ x_t
                getattr(g, f"U_{gate}")[...] += a.T @ h_prev
                getattr(g, f"b_{gate}")[...] += a.sum(axis=0)
                d_x[:, t, :] += a @ getattr(p, f"W_{gate}")
                dh_next += a @ getattr(p, f"U_{gate}")
            dc_next = dc * f
        d_seq = d_x

    for name, arr in grads.named_tensors():
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite gradient for {name}")
    return grads


def backward(weights, window, target, mode="infer", rng=None, masks=None):
    """Gradients of the loss for one window (or a batch of windows).

    When ``masks`` is given the same dropout masks as a previous forward
    pass are reused; otherwise train mode draws fresh ones from ``rng``.
    """
    x = np.asarray(window, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1, weights.config.input_dim)
        t = np.asarray(target)
        target = t[None] if t.ndim == 1 else t.reshape(1)
    _, cache = forward_batch(weights, x, mode, rng, masks)
    return backward_batch(weights, cache, target)


def batch_loss(probs, targets):
    """Per-window cross-entropy losses for a batch."""
    targets = np.asarray(targets)
    if targets.ndim == 2:
        targets = np.argmax(targets, axis=1)
    picked = probs[np.arange(len(targets)), targets]
    return -np.log(np.maximum(picked, LOSS_FLOOR))
