"""Band structures of one photonic crystal cell.

Computes the first 10 TE and TM bands of a p4m cell on the 16x16
k-grid, draws the classic dispersion plot along the IBZ path
Gamma-X-M-Gamma, and das imagesc-style band-surface panels over the
full Brillouin zone.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from phcbands import CellOperator, LatticeSpec, band_surfaces, build_kgrid, generate_p4m_cell
from phcbands.bandsweep import RealPencilFamily
from phcbands.eigensolve import clamp_lambdas

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

cell = generate_p4m_cell(seed=23, m=16, feature_count=3)
print(f"cell {cell.cell_id}: air fraction {cell.air_fraction():.2f}")

# dispersion along the IBZ path, 30 samples per leg
vertices = LatticeSpec().ibz_vertices()
path_pts, ticks = [], [0]
for a, b in [("Gamma", "X"), ("X", "M"), ("M", "Gamma")]:
    leg = np.linspace(vertices[a], vertices[b], 30, endpoint=False)
    path_pts.extend(leg)
    ticks.append(len(path_pts))
path_pts.append(vertices["Gamma"])

fig, axes = plt.subplots(1, 2, figsize=(11, 4), sharey=True)
for ax, mode in zip(axes, ("TE", "TM")):
    fam = RealPencilFamily(CellOperator(cell, mode))
    bands = np.array(
        [np.sqrt(np.maximum(clamp_lambdas(fam.eigenvalues(k, 10)), 0.0))
         for k in path_pts]
    )
    ax.plot(bands, lw=1.2)
    ax.set_xticks(ticks, ["$\\Gamma$", "X", "M", "$\\Gamma$"])
    for t in ticks[1:-1]:
        ax.axvline(t, color="0.8", lw=0.8)
    ax.set_title(f"{mode} bands 1-10")
    ax.set_ylabel("omega a / (2 pi c)" if mode == "TE" else "")
fig.tight_layout()
line_path = os.path.join(OUT, "ibz_path_bands.png")
fig.savefig(line_path, dpi=110)
print("wrote", line_path)

# full-BZ band surfaces as images, like the dataset samples
surf = band_surfaces(cell, "TE", build_kgrid(16), L=10)
fig, axes = plt.subplots(3, 4, figsize=(12, 8.5))
axes[0, 0].imshow(cell.cells.T, origin="lower", cmap="gray_r")
axes[0, 0].set_title("unit cell")
for n in range(10):
    ax = axes.ravel()[n + 1]
    im = ax.imshow(surf.omega[n].T, origin="lower", cmap="viridis")
    ax.set_title(f"band {n + 1}")
for ax in axes.ravel():
    ax.set_xticks([]), ax.set_yticks([])
axes.ravel()[-1].axis("off")
fig.colorbar(im, ax=axes, shrink=0.7)
surf_path = os.path.join(OUT, "band_surfaces.png")
fig.savefig(surf_path, dpi=110)
print("wrote", surf_path)
print("omega_1(Gamma) =", surf.omega[0, 0, 0], "(zero mode)")
