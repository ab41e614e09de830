import os
from pathlib import Path
from tempfile import mkstemp

import numpy as np

from dcrelax.model import ProblemInstance
from dcrelax.prox import SeparableLoss


__all__ = [
    'clean_textfile',
    'make_tmptextfile',
    'delete_tmpfile',
    'finite_difference',
    'random_unit_columns',
    'small_l1_instance',
]


def clean_textfile(text):
    text = "\n".join(line.strip() for line in text.split("\n"))
    return text


def make_tmptextfile(text, suffix, prefix=None, encoding='ascii'):
    text = clean_textfile(text)
    fd, filename = mkstemp(text=True, suffix=suffix, prefix=prefix)
    os.write(fd, bytes(text, encoding=encoding))
    os.close(fd)
    return filename


def delete_tmpfile(filename):
    Path(filename).unlink(missing_ok=True)


def finite_difference(function, x, h=1e-6):
    "Central differences of a scalar function of an array of any shape"
    x = np.array(x, dtype=float)
    gradient = np.zeros_like(x)
    for index in np.ndindex(*x.shape):
        step = np.zeros_like(x)
        step[index] = h
        gradient[index] = (function(x + step) - function(x - step)) / (2 * h)
    return gradient


def random_unit_columns(m, p, rng):
    V = rng.standard_normal((m, p))
    return V / np.linalg.norm(V, axis=0)


def small_l1_instance(rows, cols, seed, loss=None):
    rng = np.random.default_rng(seed)
    return ProblemInstance(
        A=rng.standard_normal((rows, cols)),
        b=rng.standard_normal(rows),
        loss=loss or SeparableLoss.l1(rows),
        label=f"test-{rows}x{cols}-{seed}",
    )
