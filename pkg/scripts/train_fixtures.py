"""Train the two toy fixtures shipped in ``src/css_snn/fixtures``.

Offline helper, not part of the package: needs torch and scikit-learn.

    python scripts/train_fixtures.py
"""

from pathlib import Path

import numpy as np
import torch
from sklearn.datasets import load_digits
from torch import nn

from css_snn.files import save_dataset, save_network
from css_snn.network import Layer, NetworkSpec

OUT = Path(__file__).resolve().parents[1] / "src" / "css_snn" / "fixtures"


def blobs(n, rng):
    """Three overlapping 2-D Gaussian clusters on a ring."""
    centers = np.array([[np.cos(a), np.sin(a)] for a in (0.3, 2.4, 4.4)]) * 1.5
    y = rng.integers(0, 3, n)
    x = centers[y] + rng.normal(0, 0.55, (n, 2))
    return x, y


def fit(model, x, y, epochs, lr=1e-2, seed=0):
    torch.manual_seed(seed)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    xt = torch.tensor(x, dtype=torch.float32)
    yt = torch.tensor(y, dtype=torch.int64)
    for _ in range(epochs):
        perm = torch.randperm(len(xt))
        for k in range(0, len(xt), 64):
            idx = perm[k : k + 64]
            opt.zero_grad()
            loss = nn.functional.cross_entropy(model(xt[idx]), yt[idx])
            loss.backward()
            opt.step()
    with torch.no_grad():
        return (model(xt).argmax(1).numpy() == y).mean()


def to_spec(model, input_shape, meta):
    layers = []
    for m in model:
        if isinstance(m, nn.Linear):
            layers.append(Layer("dense", m.weight.detach().double().numpy(), m.bias.detach().double().numpy()))
        elif isinstance(m, nn.Conv2d):
            layers.append(
                Layer("conv2d", m.weight.detach().double().numpy(), m.bias.detach().double().numpy(), m.stride[0], m.padding[0])
            )
        elif isinstance(m, nn.ReLU):
            layers.append(Layer("relu"))
        elif isinstance(m, nn.AvgPool2d):
            layers.append(Layer("avgpool", size=m.kernel_size))
        elif isinstance(m, nn.Flatten):
            layers.append(Layer("flatten"))
    return NetworkSpec(input_shape, layers, meta)


def main():
    torch.manual_seed(0)
    rng = np.random.default_rng(0)
    x, y = blobs(2400, rng)
    mlp = nn.Sequential(nn.Linear(2, 16), nn.ReLU(), nn.Linear(16, 16), nn.ReLU(), nn.Linear(16, 3))
    acc = fit(mlp, x[:1600], y[:1600], epochs=60)
    spec = to_spec(mlp, (2,), {"name": "toy-mlp", "architecture": "2-16-16-3", "train_accuracy": float(acc)})
    save_network(spec, OUT / "mlp.json")
    save_dataset(x[:1600:4], y[:1600:4], OUT / "mlp_calib.json", {"split": "train subset"})
    save_dataset(x[1600:], y[1600:], OUT / "mlp_test.json", {"split": "test"})

    digits = load_digits()
    xd = (digits.images / 16.0)[:, None].astype(np.float64)
    yd = digits.target
    perm = np.random.default_rng(1).permutation(len(xd))
    xd, yd = xd[perm], yd[perm]
    cnn = nn.Sequential(
        nn.Conv2d(1, 8, 3, padding=1), nn.ReLU(), nn.AvgPool2d(2),
        nn.Conv2d(8, 16, 3, padding=1), nn.ReLU(), nn.AvgPool2d(2),
        nn.Flatten(), nn.Linear(64, 32), nn.ReLU(), nn.Linear(32, 10),
    )
    acc = fit(cnn, xd[:1400], yd[:1400], epochs=40, lr=3e-3)
    spec = to_spec(cnn, (1, 8, 8), {"name": "toy-cnn", "architecture": "c8-p2-c16-p2-d32-d10", "train_accuracy": float(acc)})
    save_network(spec, OUT / "cnn.json")
    save_dataset(np.round(xd[:1400:4], 4), yd[:1400:4], OUT / "cnn_calib.json", {"split": "train subset"})
    save_dataset(np.round(xd[1400:], 4), yd[1400:], OUT / "cnn_test.json", {"split": "test"})


if __name__ == "__main__":
    main()
