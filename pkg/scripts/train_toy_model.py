#!/usr/bin/env python3
"""Train the bundled toy digit classifier and emit its quantized model file
plus the 1000-image evaluation subset (IDX format).

Offline tooling: the package itself never imports torch/sklearn.  The net is
deliberately bias-free -- without biases, ReLU/max-pool commute with positive
scaling, so folding weights onto the [-1, 1) fixed-point grid with
power-of-two layer scales preserves the float argmax exactly (up to
quantization and saturation).

Usage: python scripts/train_toy_model.py [--epochs 300] [--seed 7]
Writes src/scsim/data/{toy_model.json,digits_images.idx,digits_labels.idx}.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from scsim.network import (Conv, FullyConnected, MaxPool, Relu,  # noqa: E402
                           evaluate_fixed, quantize, save_idx_images,
                           save_idx_labels, save_model)

N_EVAL = 1000


def load_split(seed):
    from sklearn.datasets import load_digits
    digits = load_digits()
    images = np.rint(digits.images / 16.0 * 255.0).astype(np.uint8)
    labels = digits.target.astype(np.uint8)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(labels))
    images, labels = images[order], labels[order]
    return (images[N_EVAL:], labels[N_EVAL:],   # train
            images[:N_EVAL], labels[:N_EVAL])   # shipped eval subset


N_CHANNELS = 12
CONV_SCALE_EXP = -2       # fixed power-of-two rescale at the conv boundary
LOSS_TEMPERATURE = 0.35    # CE on scaled logits pushes raw margins wide
ACT_NOISE = 0.30          # stochastic estimate noise at k=128, dot units
LOGIT_NOISE = 2.6


def train(train_x, train_y, epochs, seed):
    """Noise-injected, margin-oriented training: the stochastic datapath
    estimates every dot product with a few counts of noise, so the loss
    sees Gaussian-perturbed activations/logits and a low temperature to
    keep decisions far from the boundary.  Weights are clamped to the
    bipolar range so the fixed-point conversion is lossless."""
    import torch
    import torch.nn as nn
    torch.manual_seed(seed)
    conv = nn.Conv2d(1, N_CHANNELS, 5, bias=False)
    fc = nn.Linear(4 * N_CHANNELS, 10, bias=False)
    pool = nn.MaxPool2d(2)
    x = torch.tensor(train_x[:, None].astype(np.float32) / 255.0 * 2 - 1)
    y = torch.tensor(train_y.astype(np.int64))
    opt = torch.optim.Adam(list(conv.parameters()) + list(fc.parameters()),
                           lr=5e-3)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=epochs)
    loss_fn = nn.CrossEntropyLoss()
    scale = 2.0 ** CONV_SCALE_EXP

    def forward(inp, noisy):
        # mirrors the stochastic datapath: every conv dot product carries
        # estimate noise *before* the max-pool (so the read-out learns to
        # absorb the pool's selection bias), then rescale, saturate, FC.
        z = conv(inp) * scale
        if noisy:
            z = z + ACT_NOISE * torch.randn_like(z)
        act = pool(z).flatten(1).clamp(0, 1)
        logits = fc(act)
        if noisy:
            logits = logits + LOGIT_NOISE * torch.randn(len(inp), 10)
        return logits


    for epoch in range(epochs):
        opt.zero_grad()
        loss = loss_fn(LOSS_TEMPERATURE * forward(x, True), y)
        loss.backward()
        opt.step()
        sched.step()
        with torch.no_grad():
            conv.weight.clamp_(-1, 1)
            fc.weight.clamp_(-1, 1)
        if epoch % 100 == 0:
            with torch.no_grad():
                acc = (forward(x, False).argmax(1) == y).float().mean().item()
            print(f"epoch {epoch}: loss {loss.item():.4f} train acc {acc:.4f}")
    return conv.weight.detach().numpy(), fc.weight.detach().numpy()


def convert(w_conv, w_fc, n_bits=8):
    """Package the clamped weights with the training-time layer scales."""
    layers = [Conv(len(w_conv), (5, 5)), Relu(), MaxPool(2),
              FullyConnected(10)]
    return quantize({0: w_conv, 3: w_fc}, n_bits, (1, 8, 8), layers,
                    scale_exps={0: CONV_SCALE_EXP, 3: 0})


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--epochs", type=int, default=300)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    data_dir = Path(__file__).resolve().parent.parent / "src/scsim/data"
    train_x, train_y, eval_x, eval_y = load_split(args.seed)
    w_conv, w_fc = train(train_x, train_y, args.epochs, args.seed)
    model = convert(w_conv, w_fc)

    save_model(model, data_dir / "toy_model.json")
    save_idx_images(eval_x, data_dir / "digits_images.idx")
    save_idx_labels(eval_y, data_dir / "digits_labels.idx")

    for nb in (8, 3):
        rep = evaluate_fixed(model.requantized(nb), eval_x, eval_y)
        print(f"fixed-point eval accuracy @ {nb} bits: {rep.accuracy:.4f}")
    print(f"wrote model + {len(eval_y)}-image subset to {data_dir}")


if __name__ == "__main__":
    main()
