"""Image preprocessing: resize, center/random 224x224 crops, normalization.

Normalization constants are the ones published with the CLIP release.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

CROP_SIZE = 224
CLIP_MEAN = np.array([0.48145466, 0.4578275, 0.40821073], dtype=np.float32)
CLIP_STD = np.array([0.26862954, 0.26130258, 0.27577711], dtype=np.float32)


def load_image(path: str) -> Image.Image:
    with Image.open(path) as img:
        return img.convert("RGB")


def resize_shortest_side(img: Image.Image, target: int = CROP_SIZE) -> Image.Image:
    w, h = img.size
    scale = target / min(w, h)
    return img.resize((max(target, round(w * scale)), max(target, round(h * scale))),
                      Image.Resampling.BICUBIC)


def center_crop(img: Image.Image, size: int = CROP_SIZE) -> Image.Image:
    w, h = img.size
    left = (w - size) // 2
    top = (h - size) // 2
    return img.crop((left, top, left + size, top + size))


def random_crop(img: Image.Image, rng: np.random.Generator,
                size: int = CROP_SIZE) -> Image.Image:
    w, h = img.size
    left = int(rng.integers(0, w - size + 1))
    top = int(rng.integers(0, h - size + 1))
    return img.crop((left, top, left + size, top + size))


def normalize(img: Image.Image) -> np.ndarray:
    """(3, 224, 224) float32, scaled to [0,1] then standardized."""
    arr = np.asarray(img, dtype=np.float32) / 255.0
    arr = (arr - CLIP_MEAN) / CLIP_STD
    return arr.transpose(2, 0, 1)


def prepare_crops(img: Image.Image, n_random: int,
                  rng: np.random.Generator) -> list[np.ndarray]:
    """Center crop first, then `n_random` random crops; all normalized."""
    resized = resize_shortest_side(img)
    crops = [normalize(center_crop(resized))]
    for _ in range(n_random):
        crops.append(normalize(random_crop(resized, rng)))
    return crops
