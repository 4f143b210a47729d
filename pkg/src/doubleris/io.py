"""Plain-text dumps for matrices and per-trial rates.

Matrix dump layout::

    # doubleris-matrix v1
    name T3
    shape 8 8
    <row 0: re im re im ...>
    ...

Values are row-major, each complex entry written as its real and imaginary
part with ``%.17g`` so a read-back is bit-exact.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import ConfigError

MAGIC = "# doubleris-matrix v1"


def write_matrix(path, A, name: str = "A") -> None:
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    if A.ndim != 2:
        raise ValueError("only 2-D arrays can be dumped")
    rows, cols = A.shape
    inter = np.empty((rows, 2 * cols))
    inter[:, 0::2] = A.real
    inter[:, 1::2] = A.imag
    with open(path, "w") as fh:
        fh.write(f"{MAGIC}\nname {name}\nshape {rows} {cols}\n")
        np.savetxt(fh, inter, fmt="%.17g")


def read_matrix(path):
    """Return ``(name, matrix)`` from a dump written by :func:`write_matrix`."""
    lines = Path(path).read_text().splitlines()
    if len(lines) < 3 or lines[0].strip() != MAGIC:
        raise ConfigError("not a matrix dump", line=1)
    name = lines[1].split(maxsplit=1)[1] if lines[1].startswith("name ") else None
    try:
        _, rows, cols = lines[2].split()
        rows, cols = int(rows), int(cols)
    except ValueError:
        raise ConfigError("malformed shape header", line=3) from None
    body = [ln for ln in lines[3:] if ln.strip()]
    if len(body) != rows:
        raise ConfigError(f"expected {rows} rows, found {len(body)}", line=4)
    vals = np.array([[float(v) for v in ln.split()] for ln in body]).reshape(rows, 2 * cols)
    return name, vals[:, 0::2] + 1j * vals[:, 1::2]


def write_trial_rates(path, samples, seed: int) -> None:
    """One row per Monte-Carlo trial: ``trial,seed,rate_nats``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "seed", "rate_nats"])
        for i, r in enumerate(np.asarray(samples)):
            w.writerow([i, seed, repr(float(r))])
