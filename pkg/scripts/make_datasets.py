"""Regenerate the bundled example datasets under datasets/.

Each is a small, clearly separable classification problem so a short search
run has headroom over the majority-class baseline. Deterministic: fixed seeds.
"""

import csv
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "datasets"


def write_csv(name, header, rows):
    OUT.mkdir(exist_ok=True)
    with open(OUT / name, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    print(f"wrote {OUT / name} ({len(rows)} rows)")


def make_clusters():
    """Three Gaussian blobs in 4 dimensions, n=300."""
    rng = np.random.RandomState(11)
    centers = np.array([[0, 0, 0, 0], [4, 4, 0, 1], [0, 4, 4, -1]], dtype=float)
    rows = []
    for label, center in zip("abc", centers):
        pts = rng.normal(center, 0.9, size=(100, 4))
        for p in pts:
            rows.append([f"{v:.4f}" for v in p] + [f"class_{label}"])
    rng.shuffle(rows)
    write_csv("clusters.csv", ["f1", "f2", "f3", "f4", "label"], rows)


def make_rings():
    """Two concentric rings plus two noise columns, n=400."""
    rng = np.random.RandomState(23)
    rows = []
    for label, (r_lo, r_hi), n in (("inner", (0.0, 1.0), 200),
                                   ("outer", (2.0, 3.0), 200)):
        radius = rng.uniform(r_lo, r_hi, n)
        angle = rng.uniform(0, 2 * np.pi, n)
        x = radius * np.cos(angle)
        y = radius * np.sin(angle)
        noise = rng.normal(0, 1, (n, 2))
        for i in range(n):
            rows.append([f"{x[i]:.4f}", f"{y[i]:.4f}", f"{noise[i, 0]:.4f}",
                         f"{noise[i, 1]:.4f}", label])
    rng.shuffle(rows)
    write_csv("rings.csv", ["x", "y", "n1", "n2", "label"], rows)


def make_shapes():
    """n=600, 3 classes; two informative numerics, one informative categorical,
    one noise column, and a sprinkle of missing cells to exercise imputation."""
    rng = np.random.RandomState(37)
    rows = []
    shapes = {"square": 0, "circle": 1, "triangle": 2}
    for label, cls in shapes.items():
        for _ in range(200):
            u = rng.normal(3.0 * cls, 1.0)
            v = rng.normal(-2.0 * cls, 1.2)
            noise = rng.normal(0, 1)
            # Categorical correlates with the class but is noisy.
            material = label if rng.random() < 0.7 else \
                list(shapes)[rng.randint(3)]
            u_txt = "" if rng.random() < 0.03 else f"{u:.4f}"
            v_txt = "" if rng.random() < 0.03 else f"{v:.4f}"
            rows.append([u_txt, v_txt, f"{noise:.4f}", material, label])
    rng.shuffle(rows)
    write_csv("shapes.csv", ["u", "v", "noise", "material", "shape"], rows)


if __name__ == "__main__":
    make_clusters()
    make_rings()
    make_shapes()
