import functools
import json
import math
import os
import sys

import yaml
from beartype import beartype, BeartypeConf
from ml_collections import ConfigDict
from tqdm.auto import tqdm


CONFIG_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'configs', 'default.yaml')
# log-values above this are written as exp(-L) strings, exp underflows near 745
EXP_STRING_THRESHOLD = 700.0

# int is accepted wherever float is annotated, float wherever complex is
typechecked = beartype(conf=BeartypeConf(is_pep484_tower=True))


@functools.lru_cache(maxsize=8)
def _load_config_cached(config_path):
    with open(config_path) as f:
        return ConfigDict(yaml.load(f, Loader=yaml.FullLoader))


def load_config(config_path=None):
    """
    Load the toolkit configuration.

    Parameters
    ----------
    config_path : str, optional
        YAML file to read (default is the bundled configs/default.yaml).

    Returns
    -------
    ConfigDict
        Nested configuration with the caps and tolerances.
    """
    if config_path is None:
        config_path = os.environ.get('POLYDISK_SPECTRA_CONFIG', CONFIG_PATH)
    return _load_config_cached(os.path.abspath(config_path))


def use_config(config_path):
    """Make `config_path` the default for every later `load_config()` call."""
    if config_path:
        os.environ['POLYDISK_SPECTRA_CONFIG'] = os.path.abspath(config_path)


def option(value, section, key, kind=float):
    """Return `value` unless it is None, else the configured `section.key`, cast to `kind`."""
    if value is None:
        value = load_config()[section][key]
    return kind(value)


def format_real(x):
    """
    Format a real number with 17 significant digits.

    Parameters
    ----------
    x : float
        Number to format.

    Returns
    -------
    str
        Round-trip decimal representation.
    """
    if math.isnan(x):
        return 'nan'
    if math.isinf(x):
        return 'inf' if x > 0 else '-inf'
    return '{:.17g}'.format(x)


def format_log_value(log_value):
    """Format exp(-L), keeping it symbolic when L is too large for a double."""
    if abs(log_value) > EXP_STRING_THRESHOLD:
        return 'exp({})'.format(format_real(-log_value))
    return format_real(math.exp(-log_value))


def format_complex(z):
    """Format a complex number as `re+imi`."""
    z = complex(z)
    imag = format_real(z.imag)
    if not imag.startswith('-'):
        imag = '+' + imag
    return '{}{}i'.format(format_real(z.real), imag)


def write_table(frame, path=None, comment=None):
    """
    Write a DataFrame as CSV (header row, LF endings, UTF-8).

    Parameters
    ----------
    frame : pandas.DataFrame
        Rows to write. Float columns use 17 significant digits.
    path : str, optional
        Output file; stdout when omitted.
    comment : str, optional
        Single line written first as `# comment`.
    """
    if path is None:
        if comment:
            sys.stdout.write('# {}\n'.format(comment))
        frame.to_csv(sys.stdout, index=False, float_format='%.17g', lineterminator='\n')
        return

    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        if comment:
            handle.write('# {}\n'.format(comment))
        frame.to_csv(handle, index=False, float_format='%.17g', lineterminator='\n')


def write_json(data, path=None):
    """Write a JSON document to `path`, or stdout when omitted."""
    text = json.dumps(data, indent=2, sort_keys=False)
    if path is None:
        sys.stdout.write(text + '\n')
        return
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        handle.write(text + '\n')


def progress(iterable=None, total=None, desc=None, enabled=True):
    """tqdm bar on stderr that disappears when done."""
    return tqdm(iterable, total=total, desc=desc, leave=False, disable=not enabled, file=sys.stderr)


def status(message, quiet=False):
    """Print a status line to stderr."""
    if not quiet:
        print(message, file=sys.stderr)
