#!/usr/bin/env python3
"""Generates the bundled data/ task and tests/fixtures/ files.

Run from the repository root:  python3 scripts/gen_fixtures.py

Everything is seeded; rerunning rewrites identical files. The expected
decoder outputs are computed here, independently of the C++ code, and the
C++ tests must reproduce them to 1e-10.
"""

import json
import os

import numpy as np

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA = os.path.join(ROOT, "data")
FIXTURES = os.path.join(ROOT, "tests", "fixtures")


def fmt(v):
    return float(f"{float(v):.17g}")


def matrix(rows):
    return [[fmt(v) for v in row] for row in rows]


def save_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def save_csv(path, shape, rows):
    c, w, h = shape
    with open(path, "w") as fh:
        fh.write(f"# shape,{c},{w},{h}\n")
        for row in rows:
            fh.write(",".join(f"{float(v):.17g}" for v in row) + "\n")


def layer(weights, bias, activation):
    return {"weights": matrix(weights), "bias": [fmt(v) for v in bias],
            "activation": activation}


# ---------------------------------------------------------------- layered codec
def gen_layered_codec():
    rng = np.random.default_rng(20240601)
    latent, hidden, n = 3, 6, 16
    dec_w1 = rng.normal(0, 0.8, (hidden, latent))
    dec_b1 = rng.normal(0, 0.2, hidden)
    dec_w2 = rng.normal(0, 0.8, (n, hidden))
    dec_b2 = rng.normal(0, 0.2, n)
    enc_w1 = rng.normal(0, 0.8, (hidden, n))
    enc_b1 = rng.normal(0, 0.2, hidden)
    enc_w2 = rng.normal(0, 0.8, (latent, hidden))
    enc_b2 = rng.normal(0, 0.2, latent)
    mean = rng.normal(0.5, 0.1, n)

    def decode(u):
        a = np.tanh(dec_w1 @ u + dec_b1)
        return mean + dec_w2 @ a + dec_b2

    def encode(x):
        a = np.tanh(enc_w1 @ (x - mean) + enc_b1)
        return enc_w2 @ a + enc_b2

    probes = rng.normal(0, 1.0, (16, latent))
    resid = np.stack([decode(encode(decode(u))) - decode(u) for u in probes])
    rmse = float(np.sqrt(np.mean(resid**2)))

    save_json(os.path.join(FIXTURES, "layered_codec.json"), {
        "kind": "layered",
        "input_shape": [1, 4, 4],
        "latent_dim": latent,
        "mean_image": [fmt(v) for v in mean],
        "round_trip_rmse": fmt(rmse),
        "decoder": {"layers": [layer(dec_w1, dec_b1, "tanh"),
                               layer(dec_w2, dec_b2, "identity")]},
        "encoder": {"layers": [layer(enc_w1, enc_b1, "tanh"),
                               layer(enc_w2, enc_b2, "identity")]},
    })

    codes = np.array([
        [0.0, 0.0, 0.0],
        [0.5, -0.3, 0.2],
        [1.0, 1.0, -1.0],
        [-0.7, 0.1, 0.9],
    ])
    save_csv(os.path.join(FIXTURES, "layered_codec_codes.csv"), (1, latent, 1), codes)
    decoded = np.stack([decode(u) for u in codes])
    save_csv(os.path.join(FIXTURES, "layered_codec_decoded.csv"), (1, 4, 4), decoded)


# ------------------------------------------------------------- synthetic task
# Images live on a 16-dim manifold inside 1x8x8: component p is flat over its
# own 4-pixel block (orthonormal, disjoint supports) with variance decaying in
# p. The classifier's logit direction loads mostly on the high-index (low
# variance) components, so a principal-subspace codec needs many dimensions
# before the explanation can see what the model actually uses. Components 0
# and 1 carry zero weight: dead features for the unrelated-allocation checks.
RANK = 16
SIDE = 8
N_PIX = SIDE * SIDE
N_TRAIN = 48


def task_basis():
    basis = np.zeros((N_PIX, RANK))
    for p in range(RANK):
        basis[4 * p:4 * p + 4, p] = 0.5
    return basis


def task_sigmas():
    return 1.1 * (0.78 ** np.arange(RANK))


def task_weights():
    # Mixed-sign component weights. Each 4x4 block of a 2x2 occlusion grid
    # holds the components {0,2,4,6}, {1,3,5,7}, {8,10,12,14}, {9,11,13,15},
    # and the weights within every block sum to zero (dyadic fractions, exact
    # in binary floats): coarse occlusion sees no net evidence, while a codec
    # that captures a component resolves its signed contribution.
    # Components 0 and 1 carry no weight at all (dead coordinates).
    # Cumulative weight mass vs capture order: ~43% by dim 4, ~70% by dim 8.
    a = 0.0928
    b = 0.0663
    c = np.zeros(RANK)
    c[2] = c[3] = a
    c[4] = c[5] = -0.75 * a
    c[6] = c[7] = -0.25 * a
    c[8] = b
    c[10] = -0.5 * b
    c[12] = c[14] = -0.25 * b
    c[9] = b
    c[11] = -0.25 * b
    c[13] = c[15] = -0.375 * b
    return c


def gen_task():
    rng = np.random.default_rng(77)
    basis = task_basis()
    sigmas = task_sigmas()
    mean = np.full(N_PIX, 0.5)

    z = rng.normal(0, 1.0, (N_TRAIN, RANK)) * sigmas
    z -= z.mean(axis=0)  # dataset mean is exactly the flat background
    images = mean + z @ basis.T
    save_csv(os.path.join(DATA, "task_dataset.csv"), (1, SIDE, SIDE), images)

    c = task_weights()
    w_pix = basis @ c  # logit direction in pixel space
    # uniform code: every component present with the same magnitude, so the
    # per-coordinate attribution spread over a component's pixels equals the
    # model gradient there, and block sums still cancel
    z_star = 2.0 * np.ones(RANK)
    image = mean + basis @ z_star
    save_csv(os.path.join(DATA, "task_image.csv"), (1, SIDE, SIDE), [image])

    # bias so the explained image sits at confidence ~0.82 for class 0
    target = 0.82
    logit_gap = float(w_pix @ image)  # (w - (-w)) . x = 2 w.x, handled below
    b0 = 0.5 * (np.log(target / (1 - target)) - 2 * logit_gap)
    weights = np.stack([w_pix, -w_pix])
    bias = np.array([b0, -b0])
    save_json(os.path.join(DATA, "task_model.json"), {
        "input_shape": [1, SIDE, SIDE],
        "layers": [layer(weights, bias, "softmax-final")],
    })

    # bundled codec: the true leading manifold components, so the composed
    # model's dead coordinates are exact zeros rather than sampling noise
    latent = 8
    top = basis[:, :latent]
    centered = (images - images.mean(axis=0)).T  # pixels x samples
    resid = centered - top @ (top.T @ centered)
    rmse = float(np.sqrt(np.sum(resid**2) / centered.size))
    save_json(os.path.join(DATA, "task_codec.json"), {
        "kind": "linear",
        "input_shape": [1, SIDE, SIDE],
        "latent_dim": latent,
        "mean_image": [fmt(v) for v in images.mean(axis=0)],
        "round_trip_rmse": fmt(rmse),
        "decoder": {"layers": [layer(top, np.zeros(N_PIX), "identity")]},
        "encoder": {"layers": [layer(top.T, np.zeros(latent), "identity")]},
    })


# ------------------------------------------------------ linear surrogate model
def gen_linear_model():
    rng = np.random.default_rng(13)
    n = 16  # 1x4x4
    weights = rng.normal(0, 0.3, (2, n))
    save_json(os.path.join(DATA, "linear_model.json"), {
        "input_shape": [1, 4, 4],
        "layers": [layer(weights, np.zeros(2), "identity")],
    })
    image = rng.uniform(0, 1, n)
    save_csv(os.path.join(DATA, "linear_image.csv"), (1, 4, 4), [image])


def main():
    os.makedirs(DATA, exist_ok=True)
    os.makedirs(FIXTURES, exist_ok=True)
    gen_layered_codec()
    gen_task()
    gen_linear_model()
    print("fixtures written to", DATA, "and", FIXTURES)


if __name__ == "__main__":
    main()
