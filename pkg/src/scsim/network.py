"""Quantized CNN representation, fixed-point reference inference, and SC
inference by decomposition into 25-input MAC groups.

Both inference paths run the same structure: conv/fc layers start a fused
block, an optional ReLU and max-pool attach to it, and the block ends at a
stochastic-to-binary boundary where the dot-product estimate is rescaled by
the layer's power-of-two scale, saturated to the bipolar range and
re-quantized.  The fixed-point path computes the exact dot products; the SC
path evaluates every MAC group bit by bit through the PCC -> XNOR -> APC
chain and accumulates the counts exactly at the S2B boundary, so it
converges to the fixed-point path as the bitstream grows.

Every neuron's fan-in is padded to a multiple of 25 with grounded filler
slots (constant products, subtracted at decode); biases, when present, are
folded in as one extra weight against a constant near-one activation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .neuron import MAC_FAN_IN, mac_tree, pcc_bits
from .pcc import PccKind, PccSpec
from .rns import BalancedSource

# ---------------------------------------------------------------------------
# layer specs and the quantized model


@dataclass(frozen=True)
class Conv:
    out_channels: int
    kernel: tuple  # (kh, kw)
    stride: int = 1


@dataclass(frozen=True)
class FullyConnected:
    out_features: int


@dataclass(frozen=True)
class MaxPool:
    window: int


@dataclass(frozen=True)
class Relu:
    pass


LayerSpec = Union[Conv, FullyConnected, MaxPool, Relu]


def quantize_values(values, n_bits: int):
    """Round-to-nearest onto the 2^n-level fixed-point grid over [-1, 1),
    ties away from zero."""
    v = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("weights must be finite")
    grid = 1 << (n_bits - 1)
    q = np.sign(v) * np.floor(np.abs(v) * grid + 0.5)
    q = np.clip(q, -grid, grid - 1)
    return q / grid


def value_to_word(v_q, n_bits: int):
    """Bipolar grid value -> PCC input word (X = v*2^(n-1) + 2^(n-1))."""
    grid = 1 << (n_bits - 1)
    w = np.rint(np.asarray(v_q) * grid).astype(np.int64) + grid
    return np.clip(w, 0, 2 * grid - 1)


@dataclass
class QuantizedModel:
    n_bits: int
    input_shape: tuple                      # (channels, height, width)
    layers: list                            # LayerSpec in order
    weights: dict = field(default_factory=dict)   # layer index -> array
    biases: dict = field(default_factory=dict)
    scale_exps: dict = field(default_factory=dict)  # layer index -> int

    def __post_init__(self):
        if not 3 <= self.n_bits <= 10:
            raise ValueError("n_bits must be in [3, 10]")
        self._validate_shapes()

    def _validate_shapes(self):
        shape = tuple(self.input_shape)
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Conv):
                c, h, w = shape
                kh, kw = layer.kernel
                wt = self.weights[i]
                if wt.shape != (layer.out_channels, c, kh, kw):
                    raise ValueError(f"layer {i}: weight shape {wt.shape} "
                                     f"!= {(layer.out_channels, c, kh, kw)}")
                oh = (h - kh) // layer.stride + 1
                ow = (w - kw) // layer.stride + 1
                if oh < 1 or ow < 1:
                    raise ValueError(f"layer {i}: kernel larger than input")
                shape = (layer.out_channels, oh, ow)
            elif isinstance(layer, MaxPool):
                c, h, w = shape
                if h % layer.window or w % layer.window:
                    raise ValueError(f"layer {i}: pool window must tile the map")
                shape = (c, h // layer.window, w // layer.window)
            elif isinstance(layer, FullyConnected):
                n_in = int(np.prod(shape))
                wt = self.weights[i]
                if wt.shape != (layer.out_features, n_in):
                    raise ValueError(f"layer {i}: weight shape {wt.shape} "
                                     f"!= {(layer.out_features, n_in)}")
                shape = (layer.out_features,)
            elif not isinstance(layer, Relu):
                raise ValueError(f"unknown layer spec {layer!r}")
        self.output_shape = shape

    def requantized(self, n_bits: int) -> "QuantizedModel":
        return QuantizedModel(
            n_bits, self.input_shape, list(self.layers),
            {i: quantize_values(w, n_bits) for i, w in self.weights.items()},
            {i: quantize_values(b, n_bits) for i, b in self.biases.items()},
            dict(self.scale_exps))


def quantize(weights_by_layer: dict, n_bits: int, input_shape, layers,
             biases=None, scale_exps=None) -> QuantizedModel:
    """Quantize a real-valued weight set into a model at n_bits precision."""
    return QuantizedModel(
        n_bits, tuple(input_shape), list(layers),
        {i: quantize_values(w, n_bits) for i, w in weights_by_layer.items()},
        {i: quantize_values(b, n_bits) for i, b in (biases or {}).items()},
        dict(scale_exps or {}))


# ---------------------------------------------------------------------------
# model file I/O (JSON with integer weight arrays + scale exponents)

def save_model(model: QuantizedModel, path) -> None:
    grid = 1 << (model.n_bits - 1)
    layers = []
    for i, layer in enumerate(model.layers):
        if isinstance(layer, Conv):
            entry = {"kind": "conv", "out_channels": layer.out_channels,
                     "kernel": list(layer.kernel), "stride": layer.stride}
        elif isinstance(layer, FullyConnected):
            entry = {"kind": "fc", "out_features": layer.out_features}
        elif isinstance(layer, MaxPool):
            entry = {"kind": "max_pool", "window": layer.window}
        else:
            entry = {"kind": "relu"}
        if i in model.weights:
            w = model.weights[i]
            entry["weights"] = np.rint(w * grid).astype(int).ravel().tolist()
            entry["weight_shape"] = list(w.shape)
            entry["weight_frac_bits"] = model.n_bits - 1
            entry["scale_exp"] = model.scale_exps.get(i, 0)
            if i in model.biases:
                entry["biases"] = np.rint(
                    model.biases[i] * grid).astype(int).tolist()
        layers.append(entry)
    doc = {"n_bits": model.n_bits, "input_shape": list(model.input_shape),
           "layers": layers}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path) -> QuantizedModel:
    with open(path) as fh:
        doc = json.load(fh)
    layers, weights, biases, scales = [], {}, {}, {}
    for i, entry in enumerate(doc["layers"]):
        kind = entry["kind"]
        if kind == "conv":
            layers.append(Conv(entry["out_channels"], tuple(entry["kernel"]),
                               entry.get("stride", 1)))
        elif kind == "fc":
            layers.append(FullyConnected(entry["out_features"]))
        elif kind == "max_pool":
            layers.append(MaxPool(entry["window"]))
        elif kind == "relu":
            layers.append(Relu())
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
        if "weights" in entry:
            denom = 1 << entry["weight_frac_bits"]
            w = np.asarray(entry["weights"], dtype=np.float64) / denom
            weights[i] = w.reshape(entry["weight_shape"])
            scales[i] = int(entry.get("scale_exp", 0))
            if "biases" in entry:
                biases[i] = np.asarray(entry["biases"],
                                       dtype=np.float64) / denom
    return QuantizedModel(doc["n_bits"], tuple(doc["input_shape"]), layers,
                          weights, biases, scales)


# ---------------------------------------------------------------------------
# block planning: conv/fc + attached relu/pool, padded to 25-wide MAC groups


@dataclass
class _Block:
    layer_index: int
    main: LayerSpec
    relu: bool
    pool: Optional[int]
    act_idx: np.ndarray      # (n_pos, G, 25) indices into the padded pixel list
    weights_padded: np.ndarray  # (out_c, G, 25) quantized weight values
    out_c: int
    out_hw: Optional[tuple]
    groups: int
    n_pad: int               # grounded filler slots per neuron
    scale_exp: int
    is_last: bool


_PAD_SLOT = -2   # grounded filler slot (tied-off SNG inputs)
_ONE_SLOT = -1   # index of the constant near-one activation (bias partner)


def _conv_indices(shape, kernel, stride):
    c, h, w = shape
    kh, kw = kernel
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    idx = np.arange(c * h * w).reshape(c, h, w)
    taps = []
    for y in range(0, oh * stride, stride):
        for x in range(0, ow * stride, stride):
            taps.append(idx[:, y:y + kh, x:x + kw].ravel())
    return np.asarray(taps), (oh, ow)


def _pad_groups(act_idx, weight_vals, bias_vals):
    """Pad (n_pos, fan_in) index rows and (out_c, fan_in) weights up to a
    multiple of 25; the bias occupies the first padding slot if present.

    Filler slots are grounded rather than zero-valued: tying both SNG
    inputs off makes the XNOR product a constant-1 stream, which adds a
    known +1 per slot to every count (subtracted in the decode) instead of
    a shared random bit whose noise would grow with the slot count."""
    n_pos, fan_in = act_idx.shape
    out_c = weight_vals.shape[0]
    with_bias = bias_vals is not None
    padded = fan_in + (1 if with_bias else 0)
    groups = -(-padded // MAC_FAN_IN)
    total = groups * MAC_FAN_IN
    a = np.full((n_pos, total), _PAD_SLOT, dtype=np.int64)
    a[:, :fan_in] = act_idx
    w = np.zeros((out_c, total), dtype=np.float64)
    w[:, :fan_in] = weight_vals
    if with_bias:
        a[:, fan_in] = _ONE_SLOT
        w[:, fan_in] = bias_vals
    return (a.reshape(n_pos, groups, MAC_FAN_IN),
            w.reshape(out_c, groups, MAC_FAN_IN), groups, total - padded)


def _plan_blocks(model: QuantizedModel) -> list:
    blocks = []
    shape = tuple(model.input_shape)
    i = 0
    layers = model.layers
    while i < len(layers):
        layer = layers[i]
        if isinstance(layer, (Relu, MaxPool)):
            raise ValueError("activation/pool layer without a preceding "
                             "conv/fc layer")
        li = i
        if isinstance(layer, Conv):
            act_idx, out_hw = _conv_indices(shape, layer.kernel, layer.stride)
            wt = model.weights[li].reshape(layer.out_channels, -1)
            out_c = layer.out_channels
        else:
            n_in = int(np.prod(shape))
            act_idx = np.arange(n_in)[None, :]
            wt = model.weights[li]
            out_c = layer.out_features
            out_hw = None
        bias = model.biases.get(li)
        a_idx, w_vals, groups, n_pad = _pad_groups(act_idx, wt, bias)
        relu_flag, pool = False, None
        i += 1
        while i < len(layers) and isinstance(layers[i], (Relu, MaxPool)):
            if isinstance(layers[i], Relu):
                relu_flag = True
            else:
                if out_hw is None:
                    raise ValueError("max_pool after a fully connected layer")
                pool = layers[i].window
            i += 1
        if isinstance(layer, Conv):
            shape = (out_c, *out_hw)
            if pool:
                shape = (out_c, shape[1] // pool, shape[2] // pool)
        else:
            shape = (out_c,)
        blocks.append(_Block(li, layer, relu_flag, pool, a_idx,
                             w_vals, out_c, out_hw, groups, n_pad,
                             model.scale_exps.get(li, 0), i >= len(layers)))
    return blocks


def mac_invocations(model: QuantizedModel) -> list:
    """Per-block count of 25-input MAC-group evaluations (the accelerator's
    unit of work)."""
    counts = []
    for blk in _plan_blocks(model):
        n_pos = blk.act_idx.shape[0]
        counts.append(n_pos * blk.out_c * blk.groups)
    return counts


# ---------------------------------------------------------------------------
# fixed-point reference path


def _prepare_input(model: QuantizedModel, image) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[None, :, :]
    if img.shape != tuple(model.input_shape):
        raise ValueError(
            f"image shape {img.shape} != model input {model.input_shape}")
    return quantize_values(img, model.n_bits)


def _block_padded_acts(model, blk, acts_flat):
    """Activation values in padded group order: (n_pos, G, 25)."""
    grid = 1 << (model.n_bits - 1)
    ext = np.concatenate([acts_flat, [0.0, (grid - 1) / grid]])
    return ext[blk.act_idx]


def fixed_point_infer(model: QuantizedModel, image) -> np.ndarray:
    """Deterministic fixed-point forward pass (the binary NN baseline)."""
    acts = _prepare_input(model, image).ravel()
    for blk in _plan_blocks(model):
        a = _block_padded_acts(model, blk, acts)            # (n_pos, G, 25)
        dots = np.einsum("pgi,cgi->cp", a, blk.weights_padded)
        pre = dots                                          # dot-product units
        if blk.relu:
            pre = np.maximum(pre, 0.0)
        if blk.pool:
            oh, ow = blk.out_hw
            pre = pre.reshape(blk.out_c, oh, ow)
            p = blk.pool
            pre = pre.reshape(blk.out_c, oh // p, p, ow // p, p).max(axis=(2, 4))
        out = pre * (2.0 ** blk.scale_exp)
        if blk.is_last:
            return out.ravel()
        acts = quantize_values(np.clip(out, -1.0, 1.0), model.n_bits).ravel()
    raise ValueError("model has no layers")


# ---------------------------------------------------------------------------
# stochastic-computing path


def layer_sources(seed, layer_index: int, n_bits: int = 8) -> tuple:
    """The two deterministic random sources of one layer block: activation
    PCC words and weight PCC words.  Balanced (LFSR-like full-coverage)
    sources keep the stream sampling noise low."""
    roles = np.random.SeedSequence([int(seed) & (2**63 - 1), layer_index]).spawn(2)
    return (BalancedSource(roles[0], width=n_bits),
            BalancedSource(roles[1], width=n_bits))


def sc_infer(model: QuantizedModel, image, k: int, pcc_spec: PccSpec,
             seed: int) -> np.ndarray:
    """SC forward pass.

    Every conv/fc neuron is decomposed into 25-input MAC groups (PCC streams
    -> XNOR multipliers -> APC); the S2B stage accumulates the APC outputs
    in binary over the k cycles (exact, no re-sampling), the adder tree
    joins groups, and the result is rescaled and re-encoded through the
    shared activation source.  ReLU and max pooling operate on those
    re-encoded streams as ORs inside one correlation group — since the
    streams are constant-word comparator streams sharing their thresholds,
    decode(OR) equals the exact maximum, so the maxima are computed directly
    on the re-encoded words (bit-identical, cheaper).  Deterministic in
    (model, image, k, seed)."""
    if k < 1:
        raise ValueError("bitstream length must be positive")
    if pcc_spec.n_bits != model.n_bits:
        raise ValueError("PCC precision must match model precision")
    n = model.n_bits
    acts = _prepare_input(model, image).ravel()
    tree = mac_tree()
    for blk in _plan_blocks(model):
        src_a, src_w = layer_sources(seed, blk.layer_index, n)

        # correlated activation streams: one word sequence for the layer
        words = value_to_word(np.concatenate(
            [acts, [0.0, ((1 << (n - 1)) - 1) / (1 << (n - 1))]]), n)
        ra = np.asarray(src_a.words(k), dtype=np.int64)
        uniq, inv = np.unique(words, return_inverse=True)
        ubits = np.stack([pcc_bits(pcc_spec, int(x), ra) for x in uniq])
        act_bits = ubits[inv][blk.act_idx]          # (n_pos, G, 25, k)

        # independent weight streams sharing the second word sequence
        wwords = value_to_word(blk.weights_padded, n)   # (out_c, G, 25)
        rw = np.asarray(src_w.words(k), dtype=np.int64)
        wuniq, winv = np.unique(wwords, return_inverse=True)
        wub = np.stack([pcc_bits(pcc_spec, int(x), rw) for x in wuniq])
        w_bits = wub[winv.reshape(wwords.shape)]     # (out_c, G, 25, k)

        prod = (act_bits[None, ...] ^ w_bits[:, None, ...]) ^ 1
        if blk.n_pad:
            # grounded filler slots: tied-off XNOR inputs give constant 1
            prod[:, blk.act_idx == _PAD_SLOT, :] = 1
        counts = tree.count(np.moveaxis(prod, 3, 4))  # (out_c, n_pos, G, k)

        # S2B reads the APC accumulator directly: summing the per-cycle
        # parallel counts in binary is exact (and cheaper than regenerating
        # a stream and re-counting it), then the adder tree joins groups
        totals = counts.sum(axis=3, dtype=np.int64).sum(axis=2)
        dot_est = (2.0 * totals - MAC_FAN_IN * blk.groups * k) / k
        dot_est -= blk.n_pad            # constant filler contribution

        out = dot_est * (2.0 ** blk.scale_exp)
        if blk.is_last:
            return out.ravel()
        # rescale at the S2B boundary, saturate, re-encode on the n-bit grid
        out = quantize_values(np.clip(out, -1.0, 1.0), model.n_bits)
        if blk.relu:
            # OR with the correlated zero stream == exact max against 0
            out = np.maximum(out, 0.0)
        if blk.pool:
            oh, ow = blk.out_hw
            p = blk.pool
            out = out.reshape(blk.out_c, oh // p, p, ow // p, p)
            # OR across the pool window's correlated streams == exact max
            out = out.max(axis=(2, 4))
        acts = out.ravel()
    raise ValueError("model has no layers")


def sc_infer_batch(model, images, k, pcc_spec, seed) -> np.ndarray:
    """Score matrix for many images; image i uses child seed (seed, i)."""
    scores = []
    for i, img in enumerate(np.asarray(images)):
        child = np.random.SeedSequence(
            [int(seed) & (2**63 - 1), 0x1000 + i]).generate_state(1)[0]
        scores.append(sc_infer(model, img, k, pcc_spec, int(child)))
    return np.asarray(scores)


# ---------------------------------------------------------------------------
# datasets and evaluation


def load_idx_images(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic = int.from_bytes(raw[:4], "big")
    if magic != 0x00000803:
        raise ValueError(f"not an IDX image file (magic {magic:#x})")
    n, h, w = (int.from_bytes(raw[4 + 4 * i:8 + 4 * i], "big") for i in range(3))
    return np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(n, h, w)


def load_idx_labels(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic = int.from_bytes(raw[:4], "big")
    if magic != 0x00000801:
        raise ValueError(f"not an IDX label file (magic {magic:#x})")
    n = int.from_bytes(raw[4:8], "big")
    return np.frombuffer(raw, dtype=np.uint8, offset=8)[:n]


def save_idx_images(images: np.ndarray, path) -> None:
    images = np.asarray(images, dtype=np.uint8)
    n, h, w = images.shape
    with open(path, "wb") as fh:
        fh.write((0x00000803).to_bytes(4, "big"))
        for dim in (n, h, w):
            fh.write(dim.to_bytes(4, "big"))
        fh.write(images.tobytes())


def save_idx_labels(labels: np.ndarray, path) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write((0x00000801).to_bytes(4, "big"))
        fh.write(len(labels).to_bytes(4, "big"))
        fh.write(labels.tobytes())


def load_csv_dataset(path) -> tuple:
    """CSV fallback: one row per image, first column label, then pixel
    values in [0, 255], row-major."""
    data = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    labels = data[:, 0].astype(np.uint8)
    pixels = data[:, 1:]
    side = int(round(pixels.shape[1] ** 0.5))
    if side * side != pixels.shape[1]:
        raise ValueError("pixel count is not a square image")
    return pixels.reshape(-1, side, side).astype(np.uint8), labels


@dataclass(frozen=True)
class EvalReport:
    k: int
    n_bits: int
    accuracy: float
    n_images: int
    seed: int
    per_class: tuple = ()


def _images_to_inputs(images) -> np.ndarray:
    # pixels use the full bipolar range: 0 -> -1, 255 -> ~+1
    return np.asarray(images, dtype=np.float64) / 255.0 * 2.0 - 1.0


def evaluate_fixed(model: QuantizedModel, images, labels) -> EvalReport:
    inputs = _images_to_inputs(images)
    preds = np.array([int(np.argmax(fixed_point_infer(model, img)))
                      for img in inputs])
    labels = np.asarray(labels)
    acc = float((preds == labels).mean())
    per_class = tuple(int(((preds == labels) & (labels == c)).sum())
                      for c in range(10))
    return EvalReport(0, model.n_bits, acc, len(labels), 0, per_class)


def evaluate_sc(model: QuantizedModel, images, labels, k: int,
                pcc_spec: PccSpec, seed: int) -> EvalReport:
    inputs = _images_to_inputs(images)
    scores = sc_infer_batch(model, inputs, k, pcc_spec, seed)
    preds = scores.argmax(axis=1)
    labels = np.asarray(labels)
    acc = float((preds == labels).mean())
    per_class = tuple(int(((preds == labels) & (labels == c)).sum())
                      for c in range(10))
    return EvalReport(k, model.n_bits, acc, len(labels), seed, per_class)


def accuracy_sweep(model: QuantizedModel, images, labels,
                   k_values: Sequence[int], n_bits_values: Sequence[int],
                   seed: int, pcc_kind: PccKind = PccKind.NAND_NOR) -> list:
    """One report per (k, n_bits) pair; deterministic given the seed."""
    if len(images) == 0:
        raise ValueError("dataset must be non-empty")
    reports = []
    for nb in n_bits_values:
        m = model.requantized(nb)
        spec = PccSpec(pcc_kind, nb)
        for k in k_values:
            reports.append(evaluate_sc(m, images, labels, k, spec, seed))
    return reports
