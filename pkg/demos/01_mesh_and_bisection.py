"""Space-time meshes and adaptive bisection.

The space-time cylinder Q = (0,1)^(d+1) is meshed with simplices; time is
just the last coordinate.  Marked elements are bisected at their refinement
edge and the closure keeps the mesh conforming, with shape quality bounded
by the finitely many similarity classes of newest-vertex bisection.
"""

import numpy as np

from stfem import build_box_mesh, refine, uniform_refine, write_vtk

mesh = build_box_mesh(d=1, n=2)
print(f"initial mesh: {mesh.n_elements} triangles, {mesh.n_vertices} vertices, "
      f"area {mesh.volumes().sum():.15f}")

# refine wherever elements touch the top-right corner of the cylinder
for step in range(8):
    bc = mesh.barycenters()
    marked = np.where(np.linalg.norm(bc - [1.0, 1.0], axis=1) < 0.4)[0]
    mesh = refine(mesh, marked)
    mesh.check_conforming()
print(f"after corner refinement: {mesh.n_elements} triangles, "
      f"area {mesh.volumes().sum():.15f}, "
      f"worst quality {mesh.quality().min():.4f}")

write_vtk("corner_refined.vtk", mesh,
          cell_data={"generation": mesh.generation.astype(float)})
print("wrote corner_refined.vtk (legacy VTK, view with paraview)")

# the same machinery in d=2: tetrahedra of the unit cube
tet = build_box_mesh(d=2, n=1)
print(f"\nd=2 initial mesh: {tet.n_elements} tetrahedra")
tet = uniform_refine(tet, 3)
print(f"after one uniform halving of h: {tet.n_elements} tetrahedra, "
      f"volume {tet.volumes().sum():.15f}, "
      f"worst quality {tet.quality().min():.4f}")
