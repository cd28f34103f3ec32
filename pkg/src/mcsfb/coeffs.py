"""Per-band analysis coefficients and their CSV round-trip."""

from dataclasses import dataclass, field

import numpy as np

from .util import InputError


@dataclass
class AnalysisCoefficients:
    """Downsampled band coefficients: (vertices, values) per band.

    ``mean`` holds the stored signal mean in signal-adapted mode; it counts
    as one stored value toward critical sampling.
    """

    bands: list = field(default_factory=list)
    mean: float | None = None

    @property
    def n_bands(self) -> int:
        return len(self.bands)

    def n_stored(self) -> int:
        return sum(len(v) for v, _ in self.bands) + (self.mean is not None)


def write_coefficients_csv(coeffs: AnalysisCoefficients, path: str,
                           graph_digest: str = "") -> None:
    """CSV rows band,vertex,value with 1-based indices; the mean rides as band 0."""
    with open(path, "w") as fh:
        if graph_digest:
            fh.write(f"# graph={graph_digest}\n")
        fh.write("band,vertex,value\n")
        if coeffs.mean is not None:
            fh.write(f"0,0,{coeffs.mean!r}\n")
        for m, (vertices, values) in enumerate(coeffs.bands):
            for v, y in zip(vertices, values):
                fh.write(f"{m + 1},{int(v) + 1},{float(y)!r}\n")


def read_coefficients_csv(path: str, n_bands: int) -> AnalysisCoefficients:
    per_band = [([], []) for _ in range(n_bands)]
    mean = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith("band,"):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise InputError(f"{path}:{lineno}: expected band,vertex,value")
            try:
                band, vertex, value = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: could not parse {line!r}") from exc
            if band == 0:
                mean = value
                continue
            if not 1 <= band <= n_bands:
                raise InputError(f"{path}:{lineno}: band {band} out of range 1..{n_bands}")
            per_band[band - 1][0].append(vertex - 1)
            per_band[band - 1][1].append(value)
    bands = [(np.array(v, dtype=int), np.array(y, dtype=np.float64))
             for v, y in per_band]
    return AnalysisCoefficients(bands=bands, mean=mean)
