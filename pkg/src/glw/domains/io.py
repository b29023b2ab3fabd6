"""CSV exchange for worlds and rendered domains (one sample per row, header of dim names)."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from glw.domains.world import DomainData, DomainSpec, World
from glw.errors import ConfigError


def _write(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if not isinstance(v, (int, np.integer)) else int(v) for v in row])


def _read(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty CSV file") from None
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    return header, data


def export_world_csv(world: World, path) -> None:
    header = [f"z{j}" for j in range(world.k)] + ["label"]
    rows = ([*z, int(lbl)] for z, lbl in zip(world.samples, world.labels))
    _write(path, header, rows)


def import_world_csv(path, seed: int = 0) -> World:
    """Load samples and labels; cluster parameters are re-estimated from them."""
    header, data = _read(path)
    if not header or header[-1] != "label":
        raise ConfigError(f"{path}: last column must be 'label'")
    z = data[:, :-1]
    labels = data[:, -1].astype(np.int64)
    ids = np.unique(labels)
    if ids.size and not np.array_equal(ids, np.arange(ids.size)):
        raise ConfigError(f"{path}: labels must be 0..c-1, got {ids.tolist()}")
    means = np.array([z[labels == c].mean(axis=0) for c in ids]).reshape(ids.size, z.shape[1])
    scales = np.array([z[labels == c].std(axis=0) for c in ids]).reshape(ids.size, z.shape[1])
    return World(k=z.shape[1], samples=z, labels=labels, means=means, scales=scales, seed=seed)


def export_domain_csv(data: DomainData, path) -> None:
    _write(path, [f"x{j}" for j in range(data.spec.obs_dim)], data.x)


def import_domain_csv(path, domain_id: str | None = None) -> DomainData:
    """External embeddings enter as a domain with no known generative map."""
    header, x = _read(path)
    spec = DomainSpec(id=domain_id or Path(path).stem, obs_dim=len(header), rendering="pure-noise")
    return DomainData(spec=spec, x=x, renderer=None)
