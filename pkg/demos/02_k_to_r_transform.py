"""Transform a spectrum from k-space to r-space and locate the shell peaks.

The windowed transform of a two-shell model should show magnitude peaks
near the (phase-shifted) half-path distances.

Run:  python demos/02_k_to_r_transform.py
"""

import numpy as np

from exafsga import (
    Chromosome,
    FTConfig,
    KGrid,
    PathParams,
    PathSet,
    evaluate_model,
    synth_path,
    transform_k_to_r,
)

grid = KGrid(k_min=0.5, k_max=13.0, delta_k=0.05)
paths = PathSet(
    paths=(
        synth_path(r_eff=2.3, degeneracy=6.0, grid=grid, label="near"),
        synth_path(r_eff=4.1, degeneracy=12.0, grid=grid, label="far"),
    )
)
chrom = Chromosome(
    delta_e0=0.0,
    per_path=(
        PathParams(s02=0.8, sigma2=0.003, delta_r=0.0),
        PathParams(s02=0.8, sigma2=0.003, delta_r=0.0),
    ),
)
spec = evaluate_model(paths, chrom, grid)

config = FTConfig(k_range=(2.5, 12.5), r_range=(0.0, 6.0), k_weight=2)
rspec = transform_k_to_r(spec, config)

mag = rspec.magnitude
print(f"r grid: {rspec.r[0]:.2f} .. {rspec.r[-1]:.2f} A, {len(rspec.r)} points")

# report the two highest local maxima of |chi(r)|
interior = (mag[1:-1] > mag[:-2]) & (mag[1:-1] > mag[2:])
peaks = np.where(interior)[0] + 1
top = peaks[np.argsort(mag[peaks])[::-1][:2]]
for m in sorted(top):
    print(f"peak at r = {rspec.r[m]:.2f} A  (|chi(r)| = {mag[m]:.4f})")
print("true half-path distances: 2.30 and 4.10 A (peaks sit lower by the "
      "scattering phase shift)")
