"""Dilated densely-connected convolutional denoiser with explicit
forward/backward passes, MSE loss, and Adam optimization.

Every hidden layer produces a single channel from 3x3 convolutions (with
layer-dependent dilation) over the network input and all previous layer
outputs; a final 1x1 linear layer combines all channels.  Borders use
reflection padding.  The backward pass is hand-derived reverse-mode
differentiation; no autograd framework is involved.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import NormalizationMismatchError

CHECKPOINT_MAGIC = "N2I-CHECKPOINT v1"


@dataclass(frozen=True)
class NetworkConfig:
    depth: int = 20
    dilation_cycle: int = 5
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.dilation_cycle < 1:
            raise ValueError("dilation_cycle must be >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")

    @property
    def dilations(self):
        return tuple(1 + (i % self.dilation_cycle) for i in range(self.depth))

    def parameter_count(self):
        L = self.depth
        return sum(9 * (i + 1) + 1 for i in range(L)) + (L + 1) + 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 12
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")


class Network:
    """Parameter and optimizer state of the denoiser.

    Parameters are held as a list of arrays: one (C_i, 3, 3) weight tensor
    per hidden layer, the (depth,) hidden biases, the (depth + 1,) output
    weights, and the scalar output bias.
    """

    def __init__(self, config, params):
        self.config = config
        self.params = params
        self.step = 0
        self.adam_m = None
        self.adam_v = None
        self.norm_mean = None
        self.norm_std = None
        self.scheme_k = None
        self.scheme_strategy = None
        self._tape = None

    @property
    def dtype(self):
        return np.dtype(self.config.dtype)

    def parameter_count(self):
        return sum(int(np.size(p)) for p in self.params)

    def flat_params(self):
        return np.concatenate([np.ravel(p) for p in self.params])

    def all_finite(self):
        return all(np.all(np.isfinite(p)) for p in self.params)


def init_network(config):
    """He-scaled Gaussian weights, zero biases; deterministic per seed."""
    rng = np.random.default_rng(config.seed)
    dtype = np.dtype(config.dtype)
    L = config.depth
    params = []
    for i in range(L):
        fan_in = 9 * (i + 1)
        w = rng.standard_normal((i + 1, 3, 3)) * np.sqrt(2.0 / fan_in)
        params.append(w.astype(dtype))
    params.append(np.zeros(L, dtype=dtype))  # hidden biases
    w_out = rng.standard_normal(L + 1) / np.sqrt(L + 1)
    params.append(w_out.astype(dtype))
    params.append(np.zeros((), dtype=dtype))  # output bias
    net = Network(config, params)
    assert net.parameter_count() == config.parameter_count()
    return net


def _pad_reflect(x, m):
    return np.pad(x, ((0, 0), (m, m), (m, m)), mode="reflect")


def _fold_reflect_axis(g, m, axis):
    """Adjoint of reflect padding along one axis."""
    n = g.shape[axis] - 2 * m
    sl = [slice(None)] * g.ndim

    def take(i):
        sl[axis] = i
        return g[tuple(sl)]

    sl[axis] = slice(m, m + n)
    out = g[tuple(sl)].copy()
    osl = [slice(None)] * out.ndim
    for j in range(m):
        # padded m-1-j mirrors interior j+1; padded m+n+j mirrors n-2-j
        osl[axis] = j + 1
        out[tuple(osl)] += take(m - 1 - j)
        osl[axis] = n - 2 - j
        out[tuple(osl)] += take(m + n + j)
    return out


def _fold_reflect(g, m):
    return _fold_reflect_axis(_fold_reflect_axis(g, m, 1), m, 2)


def forward(network, image, record=True):
    """Run the network on an image or an (B, H, W) batch.

    Output has the input's spatial dimensions.  With ``record=True`` the
    intermediate state is kept on the network for :func:`backward`.
    """
    cfg = network.config
    x = np.asarray(image, dtype=network.dtype)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    B, H, W = x.shape
    L = cfg.depth
    dil = cfg.dilations
    m = max(dil)
    if H <= m or W <= m:
        raise ValueError(
            f"image of shape {(H, W)} too small for reflection pad {m}"
        )
    weights = network.params[:L]
    biases = network.params[L]
    w_out = network.params[L + 1]
    b_out = network.params[L + 2]

    P = np.empty((L + 1, B, H + 2 * m, W + 2 * m), dtype=network.dtype)
    P[0] = _pad_reflect(x, m)
    masks = []
    out = np.full((B, H, W), float(b_out), dtype=network.dtype)
    out += w_out[0] * x
    for i in range(L):
        d = dil[i]
        z = np.full((B, H, W), biases[i], dtype=network.dtype)
        for ky in range(3):
            oy = m + (ky - 1) * d
            for kx in range(3):
                ox = m + (kx - 1) * d
                view = P[: i + 1, :, oy:oy + H, ox:ox + W]
                z += np.tensordot(weights[i][:, ky, kx], view, axes=(0, 0))
        mask = z > 0
        a = np.where(mask, z, 0)
        masks.append(mask)
        P[i + 1] = _pad_reflect(a, m)
        out += w_out[i + 1] * a
    if record:
        network._tape = (P, masks, (B, H, W), m)
    return out[0] if squeeze else out


def mse_loss(prediction, target):
    """Pixel-wise mean squared error and its gradient w.r.t. the prediction."""
    prediction = np.asarray(prediction)
    target = np.asarray(target)
    if prediction.shape != target.shape:
        raise ValueError("prediction and target shapes differ")
    diff = prediction - target
    n = diff.size
    return float((diff**2).sum() / n), (2.0 / n) * diff


def masked_mse_loss(prediction, target, mask):
    """MSE restricted to a boolean mask, normalized by the masked count."""
    prediction = np.asarray(prediction)
    target = np.asarray(target)
    mask = np.asarray(mask, dtype=bool)
    if prediction.shape != target.shape or mask.shape != prediction.shape:
        raise ValueError("prediction, target, and mask shapes differ")
    n = int(mask.sum())
    if n == 0:
        raise ValueError("loss mask selects no pixels")
    diff = (prediction - target) * mask
    return float((diff**2).sum() / n), (2.0 / n) * diff


def backward(network, loss_gradient):
    """Gradients of the loss w.r.t. every parameter.

    Requires a recorded forward pass; returns a list of arrays shaped like
    ``network.params``.
    """
    if network._tape is None:
        raise RuntimeError("backward called without a recorded forward pass")
    P, masks, (B, H, W), m = network._tape
    cfg = network.config
    L = cfg.depth
    dil = cfg.dilations
    weights = network.params[:L]
    w_out = network.params[L + 1]

    g = np.asarray(loss_gradient, dtype=network.dtype)
    if g.ndim == 2:
        g = g[None]
    if g.shape != (B, H, W):
        raise ValueError("loss gradient shape does not match the forward pass")

    crop = (slice(None), slice(m, m + H), slice(m, m + W))
    d_weights = [np.zeros_like(w) for w in weights]
    d_biases = np.zeros(L, dtype=network.dtype)
    d_wout = np.empty(L + 1, dtype=network.dtype)
    d_bout = np.asarray(g.sum(), dtype=network.dtype)
    for c in range(L + 1):
        d_wout[c] = (P[c][crop] * g).sum()

    # Gradients flowing into each channel: via the output layer (unpadded)
    # and via later hidden layers (accumulated in padded coordinates).
    dP = np.zeros_like(P)
    for i in range(L - 1, -1, -1):
        d = dil[i]
        dz = (w_out[i + 1] * g + _fold_reflect(dP[i + 1], m)) * masks[i]
        d_biases[i] = dz.sum()
        for ky in range(3):
            oy = m + (ky - 1) * d
            for kx in range(3):
                ox = m + (kx - 1) * d
                view = P[: i + 1, :, oy:oy + H, ox:ox + W]
                d_weights[i][:, ky, kx] = np.tensordot(
                    view, dz, axes=([1, 2, 3], [0, 1, 2])
                )
                dP[: i + 1, :, oy:oy + H, ox:ox + W] += (
                    weights[i][:, ky, kx][:, None, None, None] * dz[None]
                )
    return d_weights + [d_biases, d_wout, d_bout]


def adam_step(network, gradients, train_config):
    """One Adam update with bias correction; mutates and returns the network."""
    if network.adam_m is None:
        network.adam_m = [np.zeros_like(p) for p in network.params]
        network.adam_v = [np.zeros_like(p) for p in network.params]
    tc = train_config
    network.step += 1
    t = network.step
    lr_t = tc.learning_rate * np.sqrt(1.0 - tc.beta2**t) / (1.0 - tc.beta1**t)
    for p, gr, mm, vv in zip(network.params, gradients,
                             network.adam_m, network.adam_v):
        mm *= tc.beta1
        mm += (1.0 - tc.beta1) * gr
        vv *= tc.beta2
        vv += (1.0 - tc.beta2) * gr**2
        p -= (lr_t * mm / (np.sqrt(vv) + tc.eps)).astype(p.dtype)
    return network


def set_normalization(network, mean, std):
    if std <= 0:
        raise ValueError("normalization std must be > 0")
    network.norm_mean = float(mean)
    network.norm_std = float(std)


def normalize(network, image):
    if network.norm_mean is None:
        raise NormalizationMismatchError("network has no stored normalization")
    return (np.asarray(image) - network.norm_mean) / network.norm_std


def denormalize(network, image):
    if network.norm_mean is None:
        raise NormalizationMismatchError("network has no stored normalization")
    return np.asarray(image) * network.norm_std + network.norm_mean


def apply_denoiser(network, image):
    """Normalized forward pass: scale in, run the network, scale out."""
    x = normalize(network, image)
    y = forward(network, x.astype(network.dtype), record=False)
    return denormalize(network, np.asarray(y, dtype=float))


def train(dataset_pairs, network, train_config, loss_log=None):
    """Mini-batch MSE training over (input, target) pairs.

    Stores the training set's global input mean/std on the network and
    trains in normalized space.  Deterministic for fixed seeds; appends
    (epoch, mean_loss) rows to ``loss_log`` when given.
    """
    if len(dataset_pairs) == 0:
        raise ValueError("dataset is empty")
    inputs = np.stack([np.asarray(p.input) for p in dataset_pairs])
    targets = np.stack([np.asarray(p.target) for p in dataset_pairs])
    masks = None
    if any(p.loss_mask is not None for p in dataset_pairs):
        masks = np.stack([
            np.ones(p.input.shape, dtype=bool) if p.loss_mask is None
            else np.asarray(p.loss_mask, dtype=bool)
            for p in dataset_pairs
        ])
    mean = float(inputs.mean())
    std = float(inputs.std())
    if std == 0.0:
        std = 1.0
    set_normalization(network, mean, std)
    inputs = ((inputs - mean) / std).astype(network.dtype)
    targets = ((targets - mean) / std).astype(network.dtype)

    rng = np.random.default_rng(train_config.shuffle_seed)
    n = len(dataset_pairs)
    bs = train_config.batch_size
    for epoch in range(1, train_config.epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, n, bs):
            idx = order[lo:lo + bs]
            pred = forward(network, inputs[idx])
            if masks is None:
                loss, grad = mse_loss(pred, targets[idx])
            else:
                loss, grad = masked_mse_loss(pred, targets[idx], masks[idx])
            grads = backward(network, grad)
            adam_step(network, grads, train_config)
            epoch_loss += loss
            n_batches += 1
        if loss_log is not None:
            loss_log.append((epoch, epoch_loss / n_batches))
    network._tape = None
    return network


def save_checkpoint(network, path):
    """Versioned checkpoint: text header, then little-endian float64 params."""
    header = [
        CHECKPOINT_MAGIC,
        f"depth={network.config.depth}",
        f"dilation_cycle={network.config.dilation_cycle}",
        f"seed={network.config.seed}",
        f"dtype={network.config.dtype}",
        f"step={network.step}",
        f"norm_mean={'' if network.norm_mean is None else repr(network.norm_mean)}",
        f"norm_std={'' if network.norm_std is None else repr(network.norm_std)}",
        f"scheme_k={'' if network.scheme_k is None else network.scheme_k}",
        f"scheme_strategy={network.scheme_strategy or ''}",
        f"params={network.parameter_count()}",
        "",
        "",
    ]
    blob = network.flat_params().astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write("\n".join(header).encode("ascii"))
        fh.write(blob)


def load_checkpoint(path):
    with open(path, "rb") as fh:
        data = fh.read()
    head, _, blob = data.partition(b"\n\n")
    lines = head.decode("ascii").split("\n")
    if lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"not a checkpoint file: {path}")
    fields = dict(line.split("=", 1) for line in lines[1:])
    config = NetworkConfig(
        depth=int(fields["depth"]),
        dilation_cycle=int(fields["dilation_cycle"]),
        seed=int(fields["seed"]),
        dtype=fields["dtype"],
    )
    net = init_network(config)
    flat = np.frombuffer(blob, dtype="<f8")
    if flat.size != int(fields["params"]):
        raise ValueError("checkpoint parameter blob has wrong length")
    offset = 0
    for k, p in enumerate(net.params):
        chunk = flat[offset:offset + p.size].reshape(p.shape)
        net.params[k] = chunk.astype(net.dtype)
        offset += p.size
    net.step = int(fields["step"])
    if fields["norm_mean"]:
        net.norm_mean = float(fields["norm_mean"])
        net.norm_std = float(fields["norm_std"])
    if fields["scheme_k"]:
        net.scheme_k = int(fields["scheme_k"])
    if fields["scheme_strategy"]:
        net.scheme_strategy = fields["scheme_strategy"]
    return net
