"""CSV/JSON emission with stable schemas and reproducibility metadata.

Every CSV starts with a schema comment line; every run writes a JSON sidecar
carrying the full configuration, its hash, the code version, and the seed, so
a run can be reproduced bit-identically.
"""

import hashlib
import json
import time

import numpy as np

CSV_SCHEMA = "resetsim-csv v1"


def config_hash(config):
    """sha256 over the canonical JSON serialization of a config dict."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def array_hash(arr):
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()[:16]


def write_csv(path, columns, table):
    """Write columns (list of names) and table (2-d array-like) with the
    schema header."""
    table = np.asarray(table)
    with open(path, "w") as fh:
        fh.write(f"# {CSV_SCHEMA}\n")
        fh.write(",".join(columns) + "\n")
        for row in table:
            fh.write(",".join(f"{v:.12g}" for v in np.atleast_1d(row)) + "\n")


def read_csv(path):
    """Read a schema-tagged CSV back into (columns, array)."""
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ValueError(f"{path} missing schema header")
        columns = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return columns, data


def write_metadata(path, config, seed=None, extra=None):
    from . import __version__

    record = {
        "schema": "resetsim-meta v1",
        "code_version": __version__,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "seed": seed,
        "config": config,
        "config_sha256": config_hash(config),
    }
    if extra:
        record.update(extra)
    with open(path, "w") as fh:
        json.dump(record, fh, indent=2, default=_jsonable)
        fh.write("\n")
    return record


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not JSON serializable: {type(obj)}")
