"""Plain-PGM (P2) contact sheets for visual inspection of samples."""

import numpy as np

from gmm_replay import errors


def write_pgm_sheet(images, path, columns=10, pad=2):
    """Tile an ImageSet into one grayscale P2 file.

    Images must be square; cells are separated by `pad` white pixels.
    """
    side = int(round(np.sqrt(images.dim)))
    if side * side != images.dim:
        raise errors.DimensionMismatch(f"dim {images.dim} is not a square image")
    n = images.count
    cols = min(columns, n)
    rows = -(-n // cols)
    cell = side + pad
    sheet = np.full((rows * cell - pad, cols * cell - pad), 255, dtype=np.int64)
    pixels = np.clip(np.rint(images.samples * 255.0), 0, 255).astype(np.int64)
    for idx in range(n):
        r, c = divmod(idx, cols)
        sheet[r * cell:r * cell + side, c * cell:c * cell + side] = (
            pixels[idx].reshape(side, side)
        )
    with open(path, "w") as f:
        f.write(f"P2\n{sheet.shape[1]} {sheet.shape[0]}\n255\n")
        for row in sheet:
            f.write(" ".join(str(v) for v in row) + "\n")
