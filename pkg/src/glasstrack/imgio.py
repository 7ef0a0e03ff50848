"""Binary PPM (P6) / PGM (P5) image IO and a small bilinear resampler.

Codec-free formats keep rendered frames bit-exact and diffable; conversion to
compressed formats is left to the `convert-bg` CLI convenience.
"""

import numpy as np

from .errors import GlasstrackError


def write_ppm(path, rgb: np.ndarray) -> None:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("expected (H, W, 3) uint8 array")
    h, w = rgb.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(rgb.tobytes())


def write_pgm(path, gray: np.ndarray) -> None:
    gray = np.ascontiguousarray(gray, dtype=np.uint8)
    if gray.ndim != 2:
        raise ValueError("expected (H, W) uint8 array")
    h, w = gray.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(gray.tobytes())


def _read_pnm_header(f, path):
    magic = f.read(2)
    if magic not in (b"P5", b"P6"):
        raise GlasstrackError(f"{path}: not a binary PGM/PPM file")
    fields = []
    while len(fields) < 3:
        tok = b""
        ch = f.read(1)
        while ch.isspace():
            ch = f.read(1)
        if ch == b"#":
            f.readline()
            continue
        while ch and not ch.isspace():
            tok += ch
            ch = f.read(1)
        if not tok:
            raise GlasstrackError(f"{path}: truncated header")
        fields.append(int(tok))
    width, height, maxval = fields
    if maxval != 255:
        raise GlasstrackError(f"{path}: only maxval 255 supported")
    return magic, width, height


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic, w, h = _read_pnm_header(f, path)
        if magic != b"P6":
            raise GlasstrackError(f"{path}: expected P6, got {magic.decode()}")
        data = f.read(w * h * 3)
    if len(data) != w * h * 3:
        raise GlasstrackError(f"{path}: truncated pixel data")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3).copy()


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic, w, h = _read_pnm_header(f, path)
        if magic != b"P5":
            raise GlasstrackError(f"{path}: expected P5, got {magic.decode()}")
        data = f.read(w * h)
    if len(data) != w * h:
        raise GlasstrackError(f"{path}: truncated pixel data")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w).copy()


def resize_bilinear(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Resample an (H, W, 3) uint8 image to (height, width, 3).

    Identity when the size already matches (returns the input untouched),
    which keeps background passthrough byte-exact for same-size corpora.
    """
    h, w = img.shape[:2]
    if (w, h) == (width, height):
        return img
    xs = (np.arange(width) + 0.5) * (w / width) - 0.5
    ys = (np.arange(height) + 0.5) * (h / height) - 0.5
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]
    fy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    img = img.astype(np.float64)
    top = img[y0[:, None], x0[None, :]] * (1 - fx) + img[y0[:, None], x1[None, :]] * fx
    bot = img[y1[:, None], x0[None, :]] * (1 - fx) + img[y1[:, None], x1[None, :]] * fx
    out = top * (1 - fy) + bot * fy
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
