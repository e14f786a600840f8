"""Point-cloud metrics and the NURBS-or-primitive decision.

Samples a reference plate and increasingly lifted copies of it, reports the
metrics, and shows where the representation choice flips from keeping the
NURBS face to falling back to analytic primitives.
"""

import math

import numpy as np

from hybridcad.curation import EPSILON, select_representation
from hybridcad.mesh import sample_points, tessellate_document
from hybridcad.metrics import chamfer_distance, hausdorff_distance, jsd, mmd
from hybridcad.nurbs import surface_grid
from hybridcad.shapes import bilinear_patch, box_document, cube_document, sphere_document

# Whole-shape comparison after mapping each mesh into the unit cube.
clouds = {name: sample_points(tessellate_document(doc), 4096, 0).points for name, doc in
          {"cube": cube_document(), "sphere": sphere_document(),
           "slab": box_document((0, 0, 0), (1, 1, 0.2))}.items()}
for a in clouds:
    for b in clouds:
        if a < b:
            print(f"{a:6} vs {b:6}  CD {chamfer_distance(clouds[a], clouds[b]):.4f}  "
                  f"HD {hausdorff_distance(clouds[a], clouds[b]):.4f}  "
                  f"JSD {jsd([clouds[a]], [clouds[b]]):.4f}")
refs = [clouds["cube"], clouds["sphere"]]
print("MMD(refs, refs) =", mmd(refs, refs), " MMD(refs, [slab]) =", round(mmd(refs, [clouds["slab"]]), 4))

# The face-level decision: a planar face against a lifted reconstruction.
grid = np.linspace(0, 1, 8)


def lifted(d):
    return surface_grid(bilinear_patch([0, 0, d], [1, 0, d], [0, 1, d], [1, 1, d]),
                        grid, grid).reshape(-1, 3)


face = lifted(0.0)
print(f"\nepsilon = {EPSILON}")
for cd_target in (1e-5, 1e-4, 5e-4, 6e-4, 7e-4, 1e-3, 1e-2):
    d = select_representation(lifted(math.sqrt(cd_target / 2)), face)
    print(f"offset for CD~{cd_target:.0e}: CD={d.cd:.3e} -> {d.choice}")
