#!/usr/bin/env python3
"""Regenerates the seeded scenario suites under scenarios/.

Output is deterministic: every case draws from random.Random(seed) with a
fixed per-case seed, so re-running leaves the files byte-identical.
"""
import argparse
import json
import random
from pathlib import Path


def mixture(rng, dim, max_components, mean_range, var_range, weight_range):
    comps = []
    for _ in range(rng.randint(1, max_components)):
        comps.append({
            "weight": round(rng.uniform(*weight_range), 6),
            "mean": [round(rng.uniform(*mean_range), 6) for _ in range(dim)],
            "variance": [round(rng.uniform(*var_range), 6) for _ in range(dim)],
        })
    return comps


def write(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


def random_1d(root):
    for s in range(50):
        rng = random.Random(s)
        comps = mixture(rng, 1, 4, (-2.0, 2.0), (0.25, 1.5), (0.2, 1.0))
        write(root / "random_1d" / f"mix_{s:03d}.json", {
            "case_id": f"random-1d-{s:03d}",
            "dim": 1,
            "density": {"family": "gaussian_mixture", "components": comps},
            "method": "quantile",
            "seed": s,
            "checks": ["proposition", "identities", "theorem", {"discriminant": [1]}],
        })


def entropic_2d(root):
    for s in range(10):
        rng = random.Random(1000 + s)
        comps = []
        for _ in range(2):
            comps.append({
                "weight": round(rng.uniform(0.2, 1.0), 6),
                "mean": [round(rng.uniform(-1.0, 1.0), 6) for _ in range(2)],
                "variance": [round(rng.uniform(0.5, 1.5), 6) for _ in range(2)],
            })
        write(root / "entropic_2d" / f"mix_{s:02d}.json", {
            "case_id": f"entropic-2d-{s:02d}",
            "dim": 2,
            "density": {"family": "gaussian_mixture", "components": comps},
            "method": "entropic",
            "seed": 1000 + s,
            "sinkhorn": {"source": "monte_carlo", "source_samples": 400, "target_samples": 400,
                         "epsilon_final": 0.005},
            "checks": ["proposition", "identities", "theorem"],
        })


def examples(root):
    d = root / "examples"
    write(d / "shift_entropic_2d.json", {
        "case_id": "shift-entropic-2d",
        "dim": 2,
        "density": {"family": "wick_shift", "h": [1, 0]},
        "method": "entropic",
        "checks": ["identities", "theorem", "wasserstein"],
    })
    for tag, scale in (("1", 1), ("7_3", 7.3)):
        write(d / f"scale_{tag}_1d.json", {
            "case_id": f"scale-{tag}-1d",
            "dim": 1,
            "density": {"family": "gaussian_mixture", "scale": scale, "components": [
                {"weight": 0.3, "mean": [-1.2], "variance": [0.6]},
                {"weight": 0.7, "mean": [0.8], "variance": [1.3]}]},
            "checks": ["proposition", "identities", "theorem", {"discriminant": [1]}],
        })
    write(root / "negative" / "fake_kernel_fails.json", {
        "case_id": "fake-kernel-fails",
        "dim": 1,
        "density": {"family": "uniform"},
        "checks": [{"convexity": {"kernel": [[-2]], "r": 1}}],
    })


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--root", type=Path, default=Path(__file__).resolve().parent.parent / "scenarios")
    args = ap.parse_args()
    random_1d(args.root)
    entropic_2d(args.root)
    examples(args.root)


if __name__ == "__main__":
    main()
