"""
File IO - measure files, data files and flat key = value config files
"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from core.errors import ConfigError, InvalidSpec
from core.families import as_data
from utils.formatting import format_measure
from utils.spec_validator import looks_inline, parse_inline_measure, parse_measure_lines
import config

logger = logging.getLogger(__name__)


def read_measure(source):
    """
    Load a measure from a file path or an inline '0.5 -1; 0.5 1' spec

    Raises:
        OSError if the file cannot be read, InvalidSpec / MixfitError if malformed
    """
    if looks_inline(source) and not Path(source).exists():
        return parse_inline_measure(source)
    with open(source, 'r') as f:
        return parse_measure_lines(f.read().splitlines())


def write_measure(G, path):
    Path(path).write_text(format_measure(G))
    logger.info(f"Wrote {G.k}-atom measure to {path}")


def read_data(path, fam):
    """
    One observation per line, coordinates separated by whitespace

    Returns:
        array of shape (n,) or (n, d)
    """
    try:
        frame = pd.read_csv(path, sep=r'\s+', header=None, comment='#', dtype=float)
    except pd.errors.EmptyDataError:
        frame = pd.DataFrame()
    except ValueError as exc:
        raise InvalidSpec(f"unreadable data file {path}: {exc}") from exc
    values = frame.to_numpy(dtype=float)
    if values.size and values.shape[1] != fam.dim:
        raise InvalidSpec(f"data file {path} has {values.shape[1]} columns, {fam.spec()} needs {fam.dim}")
    data = as_data(fam, values)
    fam.check_support(data)
    return data


def write_data(data, path, fam):
    """Write observations; discrete families are written as integers"""
    frame = pd.DataFrame(np.asarray(data).reshape(len(data), -1))
    if fam.is_discrete:
        frame = frame.astype(np.int64)
    frame.to_csv(path, sep=' ', header=False, index=False,
                 float_format=f"%.{config.FILE_DIGITS}g", lineterminator='\n')
    logger.info(f"Wrote {len(frame)} observations to {path}")


def read_config(path):
    """
    Flat 'key = value' file -> dict of raw strings

    Keys are normalized to lowercase with '-' replaced by '_'; '#' starts a
    comment; a repeated key keeps its last value
    """
    values = {}
    with open(path, 'r') as f:
        for number, line in enumerate(f, start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigError(f"{path}:{number}: expected 'key = value', got '{line}'")
            key, value = (part.strip() for part in line.split('=', 1))
            if not key:
                raise ConfigError(f"{path}:{number}: empty key")
            values[key.lower().replace('-', '_')] = value
    return values
