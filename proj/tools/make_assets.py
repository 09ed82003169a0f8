#!/usr/bin/env python3
"""Regenerate the bundled benchmark images.

Three public-domain photographs from the scikit-image data collection,
reduced to 256x256 with a bicubic filter. Color images keep their channels;
the benchmark converts to luma on load.
"""
import numpy as np
from PIL import Image
from skimage import data

OUT = {
    "camera.png": lambda: data.camera(),        # 512x512 gray
    "astronaut.png": lambda: data.astronaut(),  # 512x512 rgb
    "coffee.png": lambda: data.coffee(),        # 400x600 rgb
}


def to_square(a: np.ndarray) -> np.ndarray:
    h, w = a.shape[:2]
    side = min(h, w)
    r0, c0 = (h - side) // 2, (w - side) // 2
    return a[r0:r0 + side, c0:c0 + side]


def main() -> None:
    import os
    out_dir = os.path.join(os.path.dirname(__file__), "..", "assets")
    os.makedirs(out_dir, exist_ok=True)
    for name, fn in OUT.items():
        img = Image.fromarray(to_square(fn()))
        img = img.resize((256, 256), Image.BICUBIC)
        path = os.path.join(out_dir, name)
        img.save(path)
        print(f"{path}: {img.size[0]}x{img.size[1]} {img.mode}")


if __name__ == "__main__":
    main()
