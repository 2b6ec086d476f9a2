"""Plain-text field dumps, legacy VTK, sweep CSV and run summaries.

Floats are written with ``repr`` (shortest round-trip decimal), so files are
byte-identical across reruns of the same configuration.
"""
import numpy as np

__all__ = ["fmt", "write_field_dump", "read_field_dump", "write_vtk", "write_sweep_csv",
           "write_summary"]

HEADER = "machzero-field v1"


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_field_dump(path, phi, state):
    mesh = phi.mesh
    lines = [f"{HEADER} {mesh.n_nodes} {mesh.n_elements}"]
    lines += [f"{fmt(x)} {fmt(y)} {fmt(v)}" for (x, y), v in zip(mesh.nodes, phi.values)]
    lines += [" ".join(str(int(n)) for n in el) for el in mesh.elements]
    u = state.u.reshape(-1, 2)
    lines.append(f"u {u.shape[0]}")
    lines += [f"{fmt(a)} {fmt(b)}" for a, b in u]
    for label in ("rho", "p", "mach"):
        vals = getattr(state, label).ravel()
        lines.append(f"{label} {vals.size}")
        lines += [fmt(v) for v in vals]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field_dump(path):
    """Parse a field dump back into numpy arrays (dict keyed by block)."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    head = lines[0].split()
    if " ".join(head[:2]) != HEADER:
        raise ValueError(f"not a machzero field dump: {lines[0]!r}")
    nn, ne = int(head[2]), int(head[3])
    pos = 1
    nodal = np.array([[float(t) for t in ln.split()] for ln in lines[pos:pos + nn]])
    pos += nn
    elements = np.array([[int(t) for t in ln.split()] for ln in lines[pos:pos + ne]])
    pos += ne
    out = {"nodes": nodal[:, :2], "values": nodal[:, 2], "elements": elements}
    while pos < len(lines):
        label, count = lines[pos].split()
        count = int(count)
        block = lines[pos + 1:pos + 1 + count]
        out[label] = np.array([[float(t) for t in ln.split()] for ln in block]).squeeze(-1) \
            if label != "u" else np.array([[float(t) for t in ln.split()] for ln in block])
        pos += 1 + count
    return out


def write_vtk(path, phi, state):
    """Legacy ASCII VTK with nodal potential and element-averaged derived fields."""
    mesh = phi.mesh
    lines = ["# vtk DataFile Version 3.0", "machzero field", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_nodes} double"]
    lines += [f"{fmt(x)} {fmt(y)} 0.0" for x, y in mesh.nodes]
    lines.append(f"CELLS {mesh.n_elements} {5 * mesh.n_elements}")
    lines += ["4 " + " ".join(str(int(n)) for n in el) for el in mesh.elements]
    lines.append(f"CELL_TYPES {mesh.n_elements}")
    lines += ["9"] * mesh.n_elements
    lines += [f"POINT_DATA {mesh.n_nodes}", "SCALARS phi double 1", "LOOKUP_TABLE default"]
    lines += [fmt(v) for v in phi.values]
    lines.append(f"CELL_DATA {mesh.n_elements}")
    lines.append("VECTORS u double")
    lines += [f"{fmt(a)} {fmt(b)} 0.0" for a, b in state.u.mean(axis=1)]
    for label in ("rho", "p", "mach"):
        lines += [f"SCALARS {label} double 1", "LOOKUP_TABLE default"]
        lines += [fmt(v) for v in getattr(state, label).mean(axis=1)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_sweep_csv(path, report):
    from .limit_lab import CSV_COLUMNS
    lines = [", ".join(CSV_COLUMNS)]
    lines += [", ".join(fmt(v) for v in row) for row in report.rows()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary(path, items):
    text = "".join(f"{k} = {fmt(v)}\n" for k, v in items)
    with open(path, "w") as fh:
        fh.write(text)
    return text
