"""Reference profiles, error norms, and 1D shock diagnostics.

Tabulated references live in a small text format: '#'-prefixed header
lines carrying ``key = value`` pairs (``system``, ``time``, ``columns``),
then whitespace-separated numeric rows whose first column is a strictly
increasing x coordinate.  Free-form '#' comments (no '=') are allowed and
preserved on write, so files can document how they were generated.
"""

import os

import numpy as np

__all__ = [
    "ReferenceProfile", "load_reference_profile", "error_norm",
    "total_variation", "shock_position", "observed_orders",
    "cell_averages_1d", "cell_averages_2d",
]

_Q3 = 0.5 + np.sqrt(15.0) / 10.0 * np.array([-1.0, 0.0, 1.0])
_W3 = np.array([5.0, 8.0, 5.0]) / 18.0


class ReferenceProfile:
    """1D sampled reference: x plus named value columns.

    ``data`` has shape (n, len(columns)); ``columns`` names the value
    columns (x itself is held separately).  x must be strictly increasing.
    """

    def __init__(self, x, data, columns, system="", time=0.0, comments=()):
        x = np.asarray(x, dtype=np.float64).ravel()
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 1:
            data = data[:, None]
        if data.shape[0] != x.size:
            raise ValueError("x and data row counts differ")
        if len(columns) != data.shape[1]:
            raise ValueError(f"{len(columns)} column names for "
                             f"{data.shape[1]} data columns")
        if x.size >= 2 and np.any(np.diff(x) <= 0.0):
            raise ValueError("profile x must be strictly increasing")
        self.x = x
        self.data = data
        self.columns = list(columns)
        self.system = str(system)
        self.time = float(time)
        self.comments = list(comments)

    def column(self, name):
        return self.data[:, self.columns.index(name)]

    def __call__(self, xq, name=None):
        """Linearly interpolate one column (or all) at query points."""
        xq = np.asarray(xq, dtype=np.float64)
        if name is not None:
            return np.interp(xq, self.x, self.column(name))
        out = np.empty(xq.shape + (len(self.columns),))
        for j in range(len(self.columns)):
            out[..., j] = np.interp(xq, self.x, self.data[:, j])
        return out

    def write(self, path):
        tmp = f"{path}.tmp{os.getpid()}"
        with open(tmp, "w", encoding="ascii", newline="\n") as fh:
            for line in self.comments:
                fh.write(f"# {line}\n")
            fh.write(f"# system = {self.system}\n")
            fh.write(f"# time = {self.time:.17g}\n")
            fh.write(f"# columns = x {' '.join(self.columns)}\n")
            for i in range(self.x.size):
                row = " ".join(f"{v:.17g}" for v in self.data[i])
                fh.write(f"{self.x[i]:.17g} {row}\n")
        os.replace(tmp, path)


def load_reference_profile(path):
    """Parse a profile file; validates monotone x and column count."""
    headers, comments, rows = {}, [], []
    with open(path, "r", encoding="ascii") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    headers[key.strip()] = val.strip()
                elif body:
                    comments.append(body)
                continue
            rows.append([float(tok) for tok in line.split()])
    if "columns" not in headers:
        raise ValueError(f"{path}: missing 'columns' header")
    names = headers["columns"].split()
    if not names or names[0] != "x":
        raise ValueError(f"{path}: first column must be x")
    if not rows:
        raise ValueError(f"{path}: no data rows")
    width = len(names)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"{path}: row {i + 1} has {len(row)} fields, "
                             f"expected {width}")
    arr = np.asarray(rows, dtype=np.float64)
    return ReferenceProfile(arr[:, 0], arr[:, 1:], names[1:],
                            system=headers.get("system", ""),
                            time=float(headers.get("time", 0.0)),
                            comments=comments)


# ----------------------------------------------------------------- averages

def _quad_nodes(npts):
    if npts == 3:
        return _Q3, _W3
    x, w = np.polynomial.legendre.leggauss(int(npts))
    return 0.5 + 0.5 * x, 0.5 * w


def cell_averages_1d(func, edges, npts=3):
    """Per-cell averages of ``func(x) -> (...,)`` on 1D cells."""
    edges = np.asarray(edges, dtype=np.float64)
    qn, qw = _quad_nodes(npts)
    lo, d = edges[:-1], np.diff(edges)
    pts = lo[:, None] + qn[None, :] * d[:, None]
    vals = np.asarray(func(pts), dtype=np.float64)
    return np.einsum("q,xq...->x...", qw, vals)


def cell_averages_2d(func, xedges, yedges, npts=3):
    """Per-cell averages of ``func(x, y) -> (...,)`` on a 2D grid."""
    xedges = np.asarray(xedges, dtype=np.float64)
    yedges = np.asarray(yedges, dtype=np.float64)
    qn, qw = _quad_nodes(npts)
    xs = xedges[:-1, None] + qn[None, :] * np.diff(xedges)[:, None]
    ys = yedges[:-1, None] + qn[None, :] * np.diff(yedges)[:, None]
    nx, ny = xs.shape[0], ys.shape[0]
    shape = (nx, ny, qn.size, qn.size)
    X = np.broadcast_to(xs[:, None, :, None], shape)
    Y = np.broadcast_to(ys[None, :, None, :], shape)
    vals = np.asarray(func(X, Y), dtype=np.float64)
    return np.einsum("p,q,xypq...->xy...", qw, qw, vals)


# -------------------------------------------------------------- diagnostics

def error_norm(values, reference, volumes, norm="L1"):
    """Continuous L1/L2 norm of (values - reference) over cells."""
    diff = np.abs(np.asarray(values) - np.asarray(reference))
    vol = np.broadcast_to(np.asarray(volumes, dtype=np.float64), diff.shape)
    if norm.upper() == "L1":
        return float(np.sum(vol * diff))
    if norm.upper() == "L2":
        return float(np.sqrt(np.sum(vol * diff * diff)))
    raise ValueError(f"unknown norm {norm!r}")


def total_variation(values):
    """Sum of absolute first differences of a 1D profile."""
    v = np.asarray(values, dtype=np.float64).ravel()
    return float(np.sum(np.abs(np.diff(v))))


def shock_position(x, values):
    """Steepest-gradient front locator with parabolic refinement.

    Returns the x of the interface with the largest |jump| between
    neighbouring cells, refined by the vertex of the parabola through the
    three surrounding interface jumps.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    v = np.asarray(values, dtype=np.float64).ravel()
    if x.size < 2:
        raise ValueError("need at least two samples")
    g = np.abs(np.diff(v))
    j = int(np.argmax(g))
    xi = 0.5 * (x[j] + x[j + 1])
    if 0 < j < g.size - 1:
        gm, g0, gp = g[j - 1], g[j], g[j + 1]
        den = gm - 2.0 * g0 + gp
        if den < 0.0:
            xi += 0.5 * (x[j + 1] - x[j]) * (gm - gp) / den
    return float(xi)


def observed_orders(ns, errors):
    """Pairwise convergence orders log(e1/e2)/log(N2/N1)."""
    ns = np.asarray(ns, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    return [float(np.log(errors[i] / errors[i + 1])
                  / np.log(ns[i + 1] / ns[i]))
            for i in range(len(ns) - 1)]
