"""Image ingestion, vectorization, block decomposition and dataset manifests."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import DataError, ValidationError


@dataclass(frozen=True)
class GrayImage:
    """Grayscale raster with intensities in [0, 1].

    ``pixels`` is stored as a read-only ``(height, width)`` float64 array;
    row-major flattening gives the lexicographic vector.
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.array(self.pixels, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.size == 0:
            raise ValidationError(f"GrayImage needs a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValidationError("GrayImage intensities must lie in [0, 1]")
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


def as_array(img) -> np.ndarray:
    """Accept a GrayImage or a plain 2-D array and return the float array."""
    if isinstance(img, GrayImage):
        return img.pixels
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"expected a 2-D image, got shape {arr.shape}")
    return arr


# ---------------------------------------------------------------- reading

def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if c == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise DataError("truncated PGM header")
    return buf[start:pos], pos


def _read_pgm(path: Path) -> np.ndarray:
    buf = path.read_bytes()
    magic, pos = _read_token(buf, 0)
    if magic in (b"P3", b"P6"):
        raise DataError(f"{path}: color PPM images are not supported")
    if magic not in (b"P2", b"P5"):
        raise DataError(f"{path}: not a PGM file (magic {magic!r})")
    try:
        w_tok, pos = _read_token(buf, pos)
        h_tok, pos = _read_token(buf, pos)
        m_tok, pos = _read_token(buf, pos)
        width, height, maxval = int(w_tok), int(h_tok), int(m_tok)
    except ValueError as exc:
        raise DataError(f"{path}: malformed PGM header") from exc
    if not 0 < maxval < 65536:
        raise DataError(f"{path}: unsupported PGM maxval {maxval}")
    count = width * height
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = buf[pos:pos + count * dtype.itemsize]
        if len(raw) != count * dtype.itemsize:
            raise DataError(f"{path}: truncated PGM raster")
        data = np.frombuffer(raw, dtype=dtype).astype(np.float64)
    else:
        try:
            data = np.array(buf[pos:].split(), dtype=np.float64)
        except ValueError as exc:
            raise DataError(f"{path}: malformed ASCII PGM raster") from exc
        if data.size < count:
            raise DataError(f"{path}: truncated PGM raster")
        data = data[:count]
    if data.max(initial=0.0) > maxval:
        raise DataError(f"{path}: pixel value exceeds maxval {maxval}")
    return data.reshape(height, width) / maxval


def _read_png(path: Path) -> np.ndarray:
    from PIL import Image

    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("RGB", "RGBA", "P", "CMYK", "YCbCr", "LAB", "HSV", "LA", "PA", "RGBX"):
                raise DataError(f"{path}: color image (mode {mode}) is not supported")
            if mode == "L":
                return np.asarray(im, dtype=np.float64) / 255.0
            if mode.startswith("I;16") or mode == "I":
                arr = np.asarray(im).astype(np.float64)
                if arr.max(initial=0.0) > 65535:
                    raise DataError(f"{path}: unsupported bit depth")
                return arr / 65535.0
            raise DataError(f"{path}: unsupported image mode {mode}")
    except DataError:
        raise
    except Exception as exc:  # PIL raises a zoo of types
        raise DataError(f"{path}: unreadable image ({exc})") from exc


def load_image(path) -> GrayImage:
    """Read an 8/16-bit grayscale PGM (P2/P5) or PNG into a GrayImage."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such image file")
    with path.open("rb") as fh:
        head = fh.read(8)
    if head[:1] == b"P" and head[1:2] in b"123456":
        arr = _read_pgm(path)
    elif head.startswith(b"\x89PNG"):
        arr = _read_png(path)
    else:
        raise DataError(f"{path}: unsupported image format")
    return GrayImage(arr)


def save_pgm(path, img, bits: int = 16) -> None:
    """Write a binary PGM; intensities are rounded to the chosen depth."""
    arr = as_array(img)
    maxval = 65535 if bits == 16 else 255
    q = np.rint(np.clip(arr, 0.0, 1.0) * maxval)
    dtype = ">u2" if bits == 16 else "u1"
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(q.astype(dtype).tobytes())


# ---------------------------------------------------------- vector layout

def to_vector(img) -> np.ndarray:
    """Lexicographic (row-major) vector; element i*q + j is pixel (i, j)."""
    return np.array(as_array(img), dtype=np.float64).reshape(-1)


def from_vector(vec, height: int, width: int) -> GrayImage:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.size != height * width:
        raise ValidationError(f"vector of length {vec.size} cannot fill {height}x{width}")
    return GrayImage(vec.reshape(height, width))


@dataclass(frozen=True)
class BlockGrid:
    block_width: int
    block_height: int
    blocks: tuple = field(repr=False)

    @property
    def nb(self) -> int:
        return len(self.blocks)


def block_slices(shape, m: int, n: int) -> list[tuple[slice, slice]]:
    """Row-major list of (row slice, col slice) for m-wide, n-tall blocks."""
    height, width = shape
    if m <= 0 or n <= 0:
        raise ValidationError("block dimensions must be positive")
    if m > width or n > height:
        raise ValidationError(f"block {m}x{n} does not fit a {width}x{height} image")
    out = []
    for r in range(height // n):
        for c in range(width // m):
            out.append((slice(r * n, (r + 1) * n), slice(c * m, (c + 1) * m)))
    return out


def block_decompose(img, m: int, n: int) -> BlockGrid:
    """Split into non-overlapping m x n blocks; partial trailing blocks are dropped."""
    arr = as_array(img)
    blocks = tuple(GrayImage(arr[rs, cs]) for rs, cs in block_slices(arr.shape, m, n))
    return BlockGrid(m, n, blocks)


def block_vectors(img, m: int, n: int) -> np.ndarray:
    """Blocks of an image as rows of an ``(NB, m*n)`` matrix (grid order)."""
    arr = as_array(img)
    return np.stack([arr[rs, cs].reshape(-1) for rs, cs in block_slices(arr.shape, m, n)])


# ------------------------------------------------------------ undersample

def parse_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"bad fraction {value!r}") from exc
    return Fraction(value).limit_denominator(10**6)


def downsample(img, keep_fraction, mode: str = "average") -> np.ndarray:
    """Undersample the lexicographic vector of ``img``.

    ``img`` may be an image or an already flattened vector. With
    ``mode="average"`` each output element is the mean of a contiguous run of
    ``round(1/keep_fraction)`` input elements; ``mode="decimate"`` keeps the
    first element of each run instead.
    """
    if mode not in ("average", "decimate"):
        raise ValidationError(f"unknown downsample mode {mode!r}")
    frac = parse_fraction(keep_fraction)
    if frac <= 0 or frac > 1:
        raise ValidationError(f"keep_fraction must lie in (0, 1], got {frac}")
    arr = np.asarray(img.pixels if isinstance(img, GrayImage) else img, dtype=np.float64)
    vec = arr.reshape(-1)
    if frac == 1:
        return vec.copy()
    l = vec.size
    run = max(1, round(1 / frac))
    out_len = max(1, round(l * frac))
    starts = np.arange(out_len) * run
    # runs that start past the end repeat the last element
    out = np.full(out_len, vec[-1])
    ok = starts < l
    st = starts[ok]
    if mode == "decimate":
        out[ok] = vec[st]
    else:
        end = min(int(st[-1]) + run, l)
        out[ok] = np.add.reduceat(vec[:end], st) / (np.minimum(st + run, l) - st)
    return out


# --------------------------------------------------------------- manifest

@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple  # ((Path, label), ...)
    classes: tuple
    counts: tuple
    root: Path = Path(".")

    @property
    def k(self) -> int:
        return len(self.classes)

    @property
    def s(self) -> int:
        return len(self.entries)

    @property
    def paths(self) -> list[Path]:
        return [p for p, _ in self.entries]

    @property
    def labels(self) -> list[str]:
        return [lab for _, lab in self.entries]

    def label_indices(self) -> np.ndarray:
        lookup = {c: i for i, c in enumerate(self.classes)}
        return np.array([lookup[lab] for lab in self.labels], dtype=int)


def manifest_from_entries(entries, root=".") -> DatasetManifest:
    classes: list[str] = []
    counts: dict[str, int] = {}
    seen = set()
    norm = []
    for path, label in entries:
        path = Path(path)
        if path in seen:
            raise DataError(f"duplicate manifest path {path}")
        seen.add(path)
        if label not in counts:
            classes.append(label)
            counts[label] = 0
        counts[label] += 1
        norm.append((path, label))
    if not norm:
        raise DataError("manifest has no entries")
    return DatasetManifest(tuple(norm), tuple(classes), tuple(counts[c] for c in classes), Path(root))


def load_manifest(path) -> DatasetManifest:
    """Parse a ``path,label`` CSV; paths resolve against the manifest's directory."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: manifest not found")
    text = path.read_text(encoding="utf-8")
    rows = list(csv.reader(text.splitlines()))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: empty manifest")
    header = [c.strip() for c in rows[0]]
    if header[:2] != ["path", "label"]:
        raise DataError(f"{path}: header must be 'path,label'")
    root = path.parent
    entries = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) < 2 or not row[1].strip():
            raise DataError(f"{path}:{lineno}: label field missing")
        entries.append((root / row[0].strip(), row[1].strip()))
    return manifest_from_entries(entries, root)


def write_manifest(path, manifest: DatasetManifest) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("path,label\n")
        for p, lab in manifest.entries:
            try:
                rel = Path(p).relative_to(path.parent)
            except ValueError:
                rel = Path(p)
            fh.write(f"{rel.as_posix()},{lab}\n")


def load_dataset(manifest: DatasetManifest) -> list[GrayImage]:
    """Load every image of a manifest, failing with the offending path."""
    return [load_image(p) for p in manifest.paths]
