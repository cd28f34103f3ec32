"""Small shared helpers: error types, digests, deterministic serialization."""

import hashlib
import json

import numpy as np


class InputError(ValueError):
    """Raised for malformed or inconsistent user-supplied inputs."""


class NumericalError(RuntimeError):
    """Raised when a numerical procedure fails beyond recovery."""


def nmse(estimate: np.ndarray, reference: np.ndarray) -> float:
    """Normalized mean squared error ||estimate - reference||^2 / ||reference||^2."""
    ref_energy = float(np.dot(reference, reference))
    if ref_energy == 0.0:
        return float(np.dot(estimate, estimate))
    diff = estimate - reference
    return float(np.dot(diff, diff)) / ref_energy


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def array_digest(*arrays: np.ndarray) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.dtype).encode())
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def dump_json(obj, path: str) -> None:
    """Write JSON with sorted keys and no trailing whitespace, byte-reproducibly."""
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_json(path: str):
    with open(path) as fh:
        return json.load(fh)
