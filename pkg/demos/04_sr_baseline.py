"""Classical super-resolution baseline on the band surfaces.

Upsamples 16x16 band surfaces to 64x64 with torus-aware bilinear
interpolation and scores them against the FEM truth with the mean
relative error, per band and pooled - the table any learned
super-resolution model has to beat (paper-scale analogue: 6.88%).

Expects demos/03_dataset_pipeline.py to have produced desk_f2.pcbd.
"""

import os

import numpy as np

from phcbands import bilinear_upsample, mre, read_pcbd

OUT = os.path.join(os.path.dirname(__file__), "output")
f2_path = os.path.join(OUT, "desk_f2.pcbd")
if not os.path.exists(f2_path):
    raise SystemExit("run demos/03_dataset_pipeline.py first")

meta, records = read_pcbd(f2_path)
low, high = meta.resolutions
pred = np.stack(
    [bilinear_upsample(r.surfaces[low].omega.astype(float), high // low)
     for r in records]
)
truth = np.stack([r.surfaces[high].omega.astype(float) for r in records])
report = mre(pred, truth, dataset=os.path.basename(f2_path), split="all")

print(f"bilinear {low}->{high} baseline over {len(records)} cells")
print("band   MRE")
for n, value in enumerate(report.per_band_mre, start=1):
    print(f"{n:4d}   {100 * value:5.2f}%")
print(f"pooled {100 * report.aggregate_mre:5.2f}%  "
      f"({report.excluded_total} near-zero entries excluded)")
report.save(os.path.join(OUT, "baseline_report.json"))
report.to_csv(os.path.join(OUT, "baseline_table.csv"))
print("wrote", os.path.join(OUT, "baseline_report.json"))
