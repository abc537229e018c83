"""Render the bundled glyph templates from an Ethiopic TrueType/WOFF font.

One-off asset build step; the package itself never rasterizes fonts.

    python tools/render_templates.py NotoSansEthiopic-Regular.woff src/geeznum/templates
"""
import sys
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFont

FIRST_CODEPOINT = 0x1369
N_CLASSES = 20
FONT_SIZE = 56
PAD = 2
MIN_SIDE = 32


def render(font, ch):
    canvas = Image.new("L", (3 * FONT_SIZE, 3 * FONT_SIZE), 0)
    ImageDraw.Draw(canvas).text((FONT_SIZE // 2, FONT_SIZE // 2), ch, font=font, fill=255)
    ink = np.asarray(canvas) > 127
    rows = np.flatnonzero(ink.any(axis=1))
    cols = np.flatnonzero(ink.any(axis=0))
    ink = ink[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
    h, w = ink.shape
    ph = max(PAD, (MIN_SIDE - h + 1) // 2)
    pw = max(PAD, (MIN_SIDE - w + 1) // 2)
    return np.pad(ink, ((ph, ph), (pw, pw))).astype(np.uint8)


def write_pbm(path, raster):
    h, w = raster.shape
    lines = ["P1", f"# U+{path.stem.split('_')[1]}", f"{w} {h}"]
    lines += [" ".join(str(v) for v in row) for row in raster]
    path.write_text("\n".join(lines) + "\n")


def main(font_path, out_dir):
    font = ImageFont.truetype(font_path, FONT_SIZE)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(N_CLASSES):
        cp = FIRST_CODEPOINT + k
        write_pbm(out / f"{k:02d}_{cp:04X}.pbm", render(font, chr(cp)))


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
