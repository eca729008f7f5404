"""Regenerate the bundled 50-dim word-vector fixture.

Vectors are seeded and clustered: words in a semantic group share a center
plus scaled noise, so related words (man/boy, news/press, ...) have high
cosine similarity while unrelated words sit near zero. The output file is
committed at src/sgmm/resources/word_vectors_50d.txt; rerunning this script
reproduces it byte for byte.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from sgmm.rng import stream  # noqa: E402

DIM = 50
SEED = 20240331

# (cluster name, noise scale, words); scale 0 keeps the raw center
CLUSTERS = [
    ("person", 0.50, ["man", "boy", "woman", "girl", "person", "child",
                      "speaker", "reporter"]),
    ("media", 0.55, ["news", "fox", "tv", "radio", "press", "media"]),
    ("place", 0.60, ["city", "street", "building", "park", "stage", "square",
                     "hall", "market"]),
    ("object", 0.85, ["podium", "microphone", "flag", "sign", "car", "banner",
                      "camera", "table", "chair", "phone", "paper", "screen"]),
    ("story", 0.55, ["story", "rumor", "claim", "report", "article", "headline"]),
    ("agent", 0.70, ["robot", "bot", "crowd", "panel", "witness", "official"]),
    ("animal", 0.55, ["cat", "dog", "bird", "horse", "cow", "sheep"]),
    ("color", 0.60, ["red", "blue", "green", "yellow", "bright", "dark",
                     "pale", "gray"]),
    ("size", 0.60, ["tall", "short", "old", "young", "large", "small",
                    "wide", "narrow"]),
    ("mood", 0.60, ["angry", "happy", "calm", "loud", "quiet", "serious"]),
    ("talk", 0.55, ["speaking", "quoting", "reporting", "reports"]),
    ("mediaact", 0.55, ["interviews", "films", "fabricates", "spreads"]),
    ("physical", 0.55, ["holding", "wearing", "waving", "standing"]),
    ("spatial", 0.55, ["near", "behind", "facing", "watching"]),
    ("function", 0.00, ["the", "a", "on", "in", "at", "with"]),
]


def main() -> None:
    lines = []
    for name, scale, words in CLUSTERS:
        center_rng = stream(SEED, "center", name)
        center = center_rng.standard_normal(DIM)
        center /= np.linalg.norm(center)
        for word in words:
            if scale == 0.0:
                vec = stream(SEED, "solo", word).standard_normal(DIM)
            else:
                noise = stream(SEED, "noise", word).standard_normal(DIM)
                vec = center + scale * noise / np.linalg.norm(noise)
            vec = vec / np.linalg.norm(vec)
            lines.append(word + " " + " ".join(f"{v:.6f}" for v in vec))
    out = Path(__file__).resolve().parents[1] / "src" / "sgmm" / "resources" / "word_vectors_50d.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines)} vectors of dim {DIM} to {out}")


if __name__ == "__main__":
    main()
