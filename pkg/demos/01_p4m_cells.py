"""Generating p4m unit cells.

Walks through the cell generator: random draws, unfolding a hand-made
fundamental domain, majority-vote downsampling, and the symmetry check.
Writes a mosaic of cells to demos/output/.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from phcbands import (
    downsample_mask,
    generate_p4m_cell,
    unfold_fundamental_domain,
    validate_p4m,
    wedge_indices,
)

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

# random cells at the paper's two resolutions
cells64 = [generate_p4m_cell(seed, 64, 4) for seed in range(8)]
cells16 = [downsample_mask(c, 4) for c in cells64]
print("all 64x64 draws p4m-symmetric:", all(validate_p4m(c) for c in cells64))
print("downsampling preserves p4m:  ", all(validate_p4m(c) for c in cells16))
print("air fractions:", [round(c.air_fraction(), 2) for c in cells64])

# a cell built by hand from its 1/8 wedge: one alumina pixel on the
# diagonal has orbit size 4, one interior pixel has orbit size 8
fd = {ij: 1 for ij in wedge_indices(16)}
fd[(4, 4)] = 0
fd[(6, 2)] = 0
handmade = unfold_fundamental_domain(fd, 16)
print("handmade cell alumina pixels:", int((handmade.cells == 0).sum()),
      "(4 from the diagonal orbit + 8 from the interior orbit)")

fig, axes = plt.subplots(3, 8, figsize=(16, 6.6))
for col, (big, small) in enumerate(zip(cells64, cells16)):
    axes[0, col].imshow(big.cells.T, origin="lower", cmap="gray_r")
    axes[0, col].set_title(f"seed {big.seed} (64)")
    axes[1, col].imshow(small.cells.T, origin="lower", cmap="gray_r")
    axes[1, col].set_title("downsampled (16)")
for ax in axes.ravel():
    ax.set_xticks([]), ax.set_yticks([])
axes[2, 0].imshow(handmade.cells.T, origin="lower", cmap="gray_r")
axes[2, 0].set_title("unfolded wedge")
for ax in axes[2, 1:]:
    ax.axis("off")
fig.tight_layout()
path = os.path.join(OUT, "p4m_cells.png")
fig.savefig(path, dpi=110)
print("wrote", path)
