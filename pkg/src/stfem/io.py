"""Legacy-VTK mesh export and CSV convergence tables."""

from __future__ import annotations

import numpy as np

from .adaptivity import ConvergenceRecord
from .mesh import SimplicialMesh

_VTK_CELL_TYPES = {2: 5, 3: 10}  # triangle, tetrahedron


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if np.isnan(x):
        return ""
    return format(x, ".17g")


def write_vtk(path: str, mesh: SimplicialMesh, point_data: dict = None,
              cell_data: dict = None) -> None:
    """Write the mesh as a legacy-VTK ASCII unstructured grid.

    2D space-time meshes are embedded in 3D with a zero third coordinate.
    """
    D = mesh.dim
    if D not in _VTK_CELL_TYPES:
        raise ValueError(f"cannot export meshes of dimension {D}")
    pts = mesh.vertices
    if D == 2:
        pts = np.hstack([pts, np.zeros((len(pts), 1))])
    elems = mesh.elements_oriented()
    with open(path, "w", encoding="utf-8") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write("space-time mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {len(pts)} double\n")
        for p in pts:
            f.write(" ".join(_fmt(v) for v in p) + "\n")
        ncell = mesh.n_elements
        f.write(f"CELLS {ncell} {ncell * (D + 2)}\n")
        for elem in elems:
            f.write(f"{D + 1} " + " ".join(str(v) for v in elem) + "\n")
        f.write(f"CELL_TYPES {ncell}\n")
        for _ in range(ncell):
            f.write(f"{_VTK_CELL_TYPES[D]}\n")
        if point_data:
            f.write(f"POINT_DATA {len(pts)}\n")
            for name, values in point_data.items():
                f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                for v in np.asarray(values):
                    f.write(_fmt(v) + "\n")
        if cell_data:
            f.write(f"CELL_DATA {ncell}\n")
            for name, values in cell_data.items():
                f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                for v in np.asarray(values):
                    f.write(_fmt(v) + "\n")


def records_to_csv(records: list, path: str = None, footer: list = None) -> str:
    """Serialize convergence records with a fixed column order.

    Floats are written with 17 significant digits so reading them back is
    exact; optional footer lines are appended as '#' comments.
    """
    fields = ConvergenceRecord.CSV_FIELDS
    lines = [",".join(fields)]
    for rec in records:
        lines.append(",".join(_fmt(getattr(rec, name)) for name in fields))
    for note in footer or []:
        lines.append("# " + note)
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    return text
