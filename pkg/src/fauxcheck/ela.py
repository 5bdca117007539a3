"""Error level analysis for JPEG images.

Re-encodes a decoded JPEG at a fixed quality and maps the absolute per-pixel
difference against the input. Regions recompressed for the first time show a
larger error level than regions already at their quality equilibrium, which
makes pasted-in patches stand out.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ElaError

DEFAULT_QUALITY = 95
# 0 = 4:4:4 chroma subsampling; pinned so difference maps are reproducible.
DEFAULT_SUBSAMPLING = 0

_SUPPORTED_MODES = ("L", "RGB")


@dataclass(frozen=True)
class ElaResult:
    """Absolute per-channel difference map plus summary statistics."""

    diff: np.ndarray  # HxW (grayscale) or HxWx3, dtype uint8
    mean: float
    max_value: int
    quality: int

    def region_mean(self, box: tuple[int, int, int, int]) -> float:
        """Mean difference inside (left, top, right, bottom)."""
        left, top, right, bottom = box
        return float(self.diff[top:bottom, left:right].mean())

    def to_image(self, scale: float | None = None) -> Image.Image:
        """Render the difference map, brightened so the max difference is white."""
        if scale is None:
            scale = 255.0 / self.max_value if self.max_value > 0 else 1.0
        data = np.clip(self.diff.astype(np.float64) * scale, 0, 255).astype(np.uint8)
        return Image.fromarray(data)


def compute_ela(
    image_bytes: bytes,
    quality: int = DEFAULT_QUALITY,
    subsampling: int = DEFAULT_SUBSAMPLING,
) -> ElaResult:
    """Re-encode at ``quality`` and return the absolute difference map.

    Deterministic for a fixed codec configuration (quality + subsampling are
    pinned here, the rest comes from the linked libjpeg build).
    """
    if not 1 <= quality <= 100:
        raise ValueError(f"quality must be in 1..100, got {quality}")
    try:
        original = Image.open(io.BytesIO(image_bytes))
        original.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise ElaError(f"input does not decode as an image: {exc}")
    if (original.format or "").upper() != "JPEG":
        raise ElaError(f"input is {original.format or 'unknown'}, not JPEG")
    if original.mode not in _SUPPORTED_MODES:
        raise ElaError(f"unsupported color space: {original.mode}")

    buffer = io.BytesIO()
    original.save(buffer, "JPEG", quality=quality, subsampling=subsampling)
    buffer.seek(0)
    resaved = Image.open(buffer)
    resaved.load()

    a = np.asarray(original, dtype=np.int16)
    b = np.asarray(resaved, dtype=np.int16)
    diff = np.abs(a - b).astype(np.uint8)
    return ElaResult(
        diff=diff,
        mean=float(diff.mean()),
        max_value=int(diff.max()) if diff.size else 0,
        quality=quality,
    )
