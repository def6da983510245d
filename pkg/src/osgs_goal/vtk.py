"""Legacy ASCII VTK unstructured-grid writer."""
import numpy as np

VTK_LINE = 3
VTK_QUAD = 9


def write_vtk(path, mesh, point_data=None, cell_data=None, title="osgs_goal"):
    """Write ``mesh`` with optional scalar point/cell fields (dicts of name -> array)."""
    point_data = point_data or {}
    cell_data = cell_data or {}
    if mesh.n_elements == 0:
        raise ValueError("cannot export an empty mesh")
    pts = np.zeros((mesh.n_nodes, 3))
    pts[:, : mesh.dim] = mesh.nodes
    nen = mesh.elements.shape[1]
    ctype = VTK_LINE if mesh.dim == 1 else VTK_QUAD
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_nodes} double",
    ]
    lines += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in pts]
    lines.append(f"CELLS {mesh.n_elements} {mesh.n_elements * (nen + 1)}")
    lines += [f"{nen} " + " ".join(map(str, el)) for el in mesh.elements]
    lines.append(f"CELL_TYPES {mesh.n_elements}")
    lines += [str(ctype)] * mesh.n_elements

    def block(header, count, fields):
        out = [f"{header} {count}"]
        for name, values in fields.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (count,):
                raise ValueError(f"field {name!r} has shape {values.shape}, expected ({count},)")
            out.append(f"SCALARS {name} double 1")
            out.append("LOOKUP_TABLE default")
            out += [f"{v:.17g}" for v in values]
        return out

    if point_data:
        lines += block("POINT_DATA", mesh.n_nodes, point_data)
    if cell_data:
        lines += block("CELL_DATA", mesh.n_elements, cell_data)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vtk_cell_data(path):
    """Cell scalars of a file written by :func:`write_vtk`, as name -> array."""
    with open(path) as fh:
        tokens = fh.read().split("\n")
    fields = {}
    i = 0
    in_cells = False
    while i < len(tokens):
        line = tokens[i].strip()
        if line.startswith("CELL_DATA"):
            in_cells = True
            count = int(line.split()[1])
        elif line.startswith("POINT_DATA"):
            in_cells = False
            count = int(line.split()[1])
        elif line.startswith("SCALARS") and in_cells:
            name = line.split()[1]
            values = np.array([float(v) for v in tokens[i + 2: i + 2 + count]])
            fields[name] = values
            i += 2 + count
            continue
        i += 1
    return fields
