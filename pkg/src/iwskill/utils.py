"""Small shared helpers: atomic file writes and deterministic JSON dumps."""

import json
import os
import tempfile


def atomic_write_text(path: str, text: str) -> None:
    """Write `text` to `path` via a temp file + rename, so readers never see
    a partially written file and failed writes leave the old content intact."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    """Deterministic JSON text: fixed indentation, insertion order preserved."""
    return json.dumps(obj, indent=2) + "\n"


def write_json(path: str, obj) -> None:
    atomic_write_text(path, dump_json(obj))


def read_json(path: str):
    with open(path) as fh:
        return json.load(fh)
