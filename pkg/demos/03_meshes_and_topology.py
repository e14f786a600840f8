"""Tessellating solids and measuring them.

Each shape is meshed at the default chord tolerance, welded, and measured:
bounding box, area, volume and genus.  The cube is also written as OBJ and
binary STL to a temporary directory.
"""

import math
import tempfile
from pathlib import Path

from hybridcad.mesh import export_mesh, tessellate_document
from hybridcad.shapes import (cube_document, cylinder_document, frame_document, open_patch_document,
                              slab_with_holes, sphere_document, torus_document, washer_document)
from hybridcad.topology import mesh_metadata

shapes = {
    "cube": cube_document(),
    "cylinder r=1 h=2": cylinder_document(1.0, 2.0),
    "sphere r=1": sphere_document(1.0),
    "torus": torus_document(),
    "washer": washer_document(),
    "frame": frame_document(),
    "slab, 3 holes": slab_with_holes(7, 3, [(1, 1), (3, 1), (5, 1)]),
    "open patch": open_patch_document(),
}

print(f"{'shape':18} {'tris':>6} {'area':>9} {'volume':>9} {'genus':>5}")
for name, doc in shapes.items():
    mesh = tessellate_document(doc)
    meta = mesh_metadata(mesh)
    vol = "-" if meta.volume is None else f"{meta.volume:9.4f}"
    genus = "-" if meta.genus is None else meta.genus
    print(f"{name:18} {mesh.n_triangles:6d} {meta.surface_area:9.4f} {vol:>9} {genus!s:>5}")

print(f"analytic: cylinder area {6 * math.pi:.4f} volume {2 * math.pi:.4f}, "
      f"sphere area {4 * math.pi:.4f} volume {4 * math.pi / 3:.4f}")

out = Path(tempfile.mkdtemp())
cube = tessellate_document(cube_document())
(out / "cube.obj").write_bytes(export_mesh(cube, "obj"))
(out / "cube.stl").write_bytes(export_mesh(cube, "stl"))
print("wrote", sorted(p.name for p in out.iterdir()), "to", out)
