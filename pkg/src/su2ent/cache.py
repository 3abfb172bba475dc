"""On-disk persistence for the multiplicity and CG tables.

The file is JSON with a format tag and a version number.  Rationals are stored
as ``"num/den"`` decimal strings so a round trip is exact.  Anything that does
not parse cleanly, or carries another version, is ignored with a warning.
"""

from __future__ import annotations

import json
import os
import tempfile
import warnings
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import cg
from .sectors import MULTIPLICITIES

CACHE_FORMAT = "su2ent-cache"
CACHE_VERSION = 1
ENV_VAR = "SU2ENT_CACHE_DIR"
FILENAME = "tables.json"


class CacheWarning(UserWarning):
    pass


def default_path() -> Optional[Path]:
    root = os.environ.get(ENV_VAR)
    return Path(root) / FILENAME if root else None


def _fraction_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _parse_fraction(s: str) -> Fraction:
    num, den = s.split("/")
    value = Fraction(int(num), int(den))
    if value < 0:
        raise ValueError("negative squared coefficient")
    return value


def dump_tables(version: int = CACHE_VERSION) -> dict:
    mult = sorted(MULTIPLICITIES.items())
    cgs = sorted(cg.cache_items())
    return {
        "format": CACHE_FORMAT,
        "version": version,
        "multiplicities": [[V, t, str(n)] for (V, t), n in mult],
        "cg": [[*key, _fraction_str(v.value), v.sign] for key, v in cgs],
    }


def store(path: Optional[Path] = None, version: int = CACHE_VERSION) -> Optional[Path]:
    """Write the in-memory tables; atomic replace so readers never see half a file."""
    path = Path(path) if path is not None else default_path()
    if path is None:
        return None
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tables-", suffix=".json")
    with os.fdopen(fd, "w") as fh:
        json.dump(dump_tables(version), fh, separators=(",", ":"))
    os.replace(tmp, path)
    return path


def parse_tables(data: dict):
    if not isinstance(data, dict) or data.get("format") != CACHE_FORMAT:
        raise ValueError("not a cache file")
    if data.get("version") != CACHE_VERSION:
        raise ValueError(f"cache version {data.get('version')!r} != {CACHE_VERSION}")
    mult = [((int(V), int(t)), int(n)) for V, t, n in data["multiplicities"]]
    cgs = []
    for a, m, b, J, frac, sign in data["cg"]:
        value = _parse_fraction(frac)
        cgs.append(((int(a), int(m), int(b), int(J)), cg.CGSquared(value, int(sign))))
    return mult, cgs


def load(path: Optional[Path] = None) -> bool:
    """Merge a cache file into memory; returns False (after warning) if it was unusable."""
    path = Path(path) if path is not None else default_path()
    if path is None or not path.exists():
        return False
    try:
        with open(path) as fh:
            mult, cgs = parse_tables(json.load(fh))
    except (OSError, ValueError, TypeError, KeyError) as exc:
        warnings.warn(f"ignoring cache {path}: {exc}", CacheWarning, stacklevel=2)
        return False
    MULTIPLICITIES.update(mult)
    cg.cache_update(cgs)
    return True
