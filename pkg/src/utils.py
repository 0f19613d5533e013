"""
Shared helpers: console logging and SVD-based rank and kernel
"""
import logging
import os
from typing import NamedTuple

import numpy as np
import scipy.linalg
from rich.console import Console
from rich.logging import RichHandler

from errors import GridSpecError

_HANDLER_INSTALLED = False

# diagnostics go to stderr; stdout is reserved for report payloads
stderr_console = Console(stderr=True)


def get_logger(name: str) -> logging.Logger:
    """Logger under the 'geoscope' namespace, rich-formatted on stderr"""
    global _HANDLER_INSTALLED
    root = logging.getLogger("geoscope")
    if not _HANDLER_INSTALLED:
        handler = RichHandler(console=stderr_console, show_path=False, markup=False)
        handler.setFormatter(logging.Formatter("%(message)s"))
        root.addHandler(handler)
        root.setLevel(os.getenv("GEOSCOPE_LOG_LEVEL", "WARNING").upper())
        root.propagate = False
        _HANDLER_INSTALLED = True
    return root.getChild(name)


def set_log_level(level: str):
    get_logger("utils")
    logging.getLogger("geoscope").setLevel(level.upper())


class KernelResult(NamedTuple):
    rank: int
    kernel: np.ndarray          # columns span the numerical kernel
    singular_values: np.ndarray


def rank_threshold(singular_values: np.ndarray, rank_tol: float, scale: float = 0.0) -> float:
    """
    Cutoff rank_tol * max(sigma_max, scale)

    scale is the magnitude the matrix entries would have if nothing cancelled;
    roundoff stays far below rank_tol * scale, so a matrix of pure noise keeps
    rank 0 while small genuine entries survive.
    """
    sigma_max = float(singular_values[0]) if singular_values.size else 0.0
    return rank_tol * max(sigma_max, scale)


def numerical_rank(matrix: np.ndarray, rank_tol: float, scale: float = 0.0) -> int:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.size == 0:
        return 0
    s = scipy.linalg.svd(matrix, compute_uv=False)
    return int(np.sum(s > rank_threshold(s, rank_tol, scale)))


def numerical_kernel(matrix: np.ndarray, rank_tol: float, scale: float = 0.0) -> KernelResult:
    """
    Rank and orthonormal kernel basis of a matrix via SVD

    Args:
        matrix: (rows, cols) array; rows may be zero
        rank_tol: relative singular value cutoff
        scale: noise-free magnitude reference of the entries (see rank_threshold)

    Returns:
        KernelResult with kernel columns sign-normalized so the entry of
        largest magnitude is positive
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    cols = matrix.shape[1]
    if matrix.shape[0] == 0:
        return KernelResult(0, np.eye(cols), np.zeros(0))

    _, s, vh = scipy.linalg.svd(matrix, full_matrices=True)
    rank = int(np.sum(s > rank_threshold(s, rank_tol, scale)))
    kernel = vh[rank:].T.copy()
    for j in range(kernel.shape[1]):
        column = kernel[:, j]
        pivot = int(np.argmax(np.abs(column)))
        if column[pivot] < 0:
            kernel[:, j] = -column
    return KernelResult(rank, kernel, s)


def parse_point(text: str, n: int = None) -> list:
    """Parse '1.0,2.5' into a list of floats"""
    try:
        point = [float(part) for part in text.split(",")]
    except ValueError as exc:
        raise GridSpecError(f"cannot parse point '{text}': {exc}") from exc
    if n is not None and len(point) != n:
        raise GridSpecError(f"point '{text}' has {len(point)} coordinates, chart has {n}")
    return point
