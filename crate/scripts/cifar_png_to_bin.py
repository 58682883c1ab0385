#!/usr/bin/env python3
"""Convert the PNG sprite-sheet CIFAR-10 layout shipped by the `tfjs-cifar10`
npm package into the standard CIFAR-10 binary batch format.

Each sheet is 1024x10000 RGB: one image per row, pixels in row-major HWC
order. Output records are 1 label byte followed by the R, G and B planes.
"""
import json
import sys
from pathlib import Path

from PIL import Image


def convert(sheet: Path, labels: list, out: Path) -> None:
    img = Image.open(sheet).convert("RGB")
    width, height = img.size
    assert width == 1024 and height == len(labels), (sheet, img.size, len(labels))
    raw = img.tobytes()
    with out.open("wb") as f:
        for row, label in enumerate(labels):
            px = raw[row * 3072:(row + 1) * 3072]
            f.write(bytes([label]))
            for c in range(3):
                f.write(px[c::3])


def main() -> None:
    src, dst = Path(sys.argv[1]), Path(sys.argv[2])
    dst.mkdir(parents=True, exist_ok=True)
    train = json.loads((src / "train_lables.json").read_text())
    for i in range(5):
        convert(src / f"data_batch_{i + 1}.png", train[i * 10000:(i + 1) * 10000],
                dst / f"data_batch_{i + 1}.bin")
    test = json.loads((src / "test_lables.json").read_text())
    convert(src / "test_batch.png", test, dst / "test_batch.bin")


if __name__ == "__main__":
    main()
