"""Synthetic phantoms and binary PGM (P5) image I/O."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .linops import ImageGrid

BACKGROUND = 0.1


def phantom(dims, seed: int, index: int) -> ImageGrid:
    """Piecewise-smooth image in [0, 1]: 3-8 rectangles and Gaussian bumps.

    Deterministic in ``(seed, index)``.
    """
    h, w, c = dims
    rng = np.random.default_rng([int(seed), int(index)])
    img = np.full((h, w, c), BACKGROUND)
    rr, cc = np.mgrid[0:h, 0:w]
    for _ in range(rng.integers(3, 9)):
        amp = rng.uniform(0.15, 0.75, size=c)
        if rng.random() < 0.5:
            rh = max(1, int(round(rng.uniform(0.1, 0.5) * h)))
            rw = max(1, int(round(rng.uniform(0.1, 0.5) * w)))
            r0 = rng.integers(0, h - rh + 1)
            c0 = rng.integers(0, w - rw + 1)
            img[r0:r0 + rh, c0:c0 + rw, :] += amp
        else:
            cy, cx = rng.uniform(0, h), rng.uniform(0, w)
            s = rng.uniform(0.04, 0.15) * min(h, w)
            bump = np.exp(-((rr - cy) ** 2 + (cc - cx) ** 2) / (2 * s * s))
            img += 1.6 * bump[:, :, None] * amp
    return ImageGrid.from_array(np.clip(img, 0.0, 1.0))


def generate_phantoms(count: int, dims, seed: int, start: int = 0) -> list[ImageGrid]:
    if count < 1:
        raise ValueError("count must be at least 1")
    return [phantom(dims, seed, start + i) for i in range(count)]


class PGMError(ValueError):
    pass


def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        ch = buf[pos:pos + 1]
        if ch == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise PGMError("truncated PGM header")
    return buf[start:pos], pos


def load_image_pgm(path) -> ImageGrid:
    """Read a binary P5 PGM, scaling intensities to [0, 1] by maxval."""
    buf = Path(path).read_bytes()
    magic, pos = _read_token(buf, 0)
    if magic != b"P5":
        raise PGMError(f"{path}: not a binary PGM (magic {magic!r})")
    fields = []
    for _ in range(3):
        tok, pos = _read_token(buf, pos)
        try:
            fields.append(int(tok))
        except ValueError as exc:
            raise PGMError(f"{path}: malformed header field {tok!r}") from exc
    width, height, maxval = fields
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise PGMError(f"{path}: invalid header values {fields}")
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise PGMError(f"{path}: missing whitespace after header")
    pos += 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    nbytes = width * height * dtype.itemsize
    payload = buf[pos:pos + nbytes]
    if len(payload) < nbytes:
        raise PGMError(f"{path}: truncated payload ({len(payload)} of {nbytes} bytes)")
    pixels = np.frombuffer(payload, dtype=dtype).astype(float).reshape(height, width)
    if np.any(pixels > maxval):
        raise PGMError(f"{path}: pixel values exceed maxval")
    return ImageGrid.from_array(pixels / maxval)


def save_image_pgm(image: ImageGrid, path, maxval: int = 255) -> None:
    if image.channels != 1:
        raise ValueError("PGM holds grayscale images only")
    if not 0 < maxval < 65536:
        raise ValueError("maxval must be in [1, 65535]")
    q = np.rint(np.clip(image.array[:, :, 0], 0.0, 1.0) * maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{image.width} {image.height}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + q.astype(dtype).tobytes())


MANIFEST = "manifest.txt"


def load_directory(path) -> list[ImageGrid]:
    """Images listed (relative paths, one per line) in ``<path>/manifest.txt``."""
    root = Path(path)
    lines = (root / MANIFEST).read_text().splitlines()
    names = [ln.strip() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    return [load_image_pgm(root / name) for name in names]


def write_directory(images, path, maxval: int = 255) -> list[str]:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    names = []
    for i, img in enumerate(images):
        name = f"img_{i:05d}.pgm"
        save_image_pgm(img, root / name, maxval)
        names.append(name)
    (root / MANIFEST).write_text("".join(n + os.linesep for n in names))
    return names
