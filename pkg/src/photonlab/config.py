"""Structured key-value configuration files.

Plain INI text with one section per model block; keys mirror the
dataclass field names and units are fixed as documented there.  Example:

    [emitter]
    lifetime_ns = 1.0
    n_inf_kcps = 29.0
    i_sat = 130.0

    [detection]
    jitter_fwhm_ps = 300
    filter_pass_nm = 727, 752
"""

import configparser
from dataclasses import fields as dataclass_fields

from .errors import DataFormatError
from .fiber import CollectionBudget, FiberSpec
from .models import BackgroundContext, DetectionChain, EmitterModel, ExcitationField
from .simulate import ScanConfig

SECTION_TYPES = {
    "emitter": EmitterModel,
    "excitation": ExcitationField,
    "background": BackgroundContext,
    "detection": DetectionChain,
    "fiber": FiberSpec,
    "budget": CollectionBudget,
    "scan": ScanConfig,
}

_TUPLE_KEYS = {"filter_pass_nm", "extent_um"}
_INT_KEYS = {"guided_ends_counted"}


def _convert(key, raw):
    if key in _TUPLE_KEYS:
        return tuple(float(p) for p in raw.replace("x", ",").split(","))
    if key in _INT_KEYS:
        return int(raw)
    return float(raw)


def _build(section_name, cls, items):
    known = {f.name for f in dataclass_fields(cls)}
    kwargs = {}
    for key, raw in items:
        if key not in known:
            raise DataFormatError(f"[{section_name}] unknown key {key!r}")
        try:
            kwargs[key] = _convert(key, raw)
        except ValueError as exc:
            raise DataFormatError(f"[{section_name}] {key}: {exc}") from exc
    try:
        return cls(**kwargs)
    except Exception as exc:
        raise DataFormatError(f"[{section_name}] {exc}") from exc


def load_config(path):
    """Parse a config file into a dict of constructed model objects.

    Only the sections present in the file appear in the result; every
    section must be one of the known names.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise DataFormatError(f"config file not found: {path}")
    out = {}
    for section in parser.sections():
        if section not in SECTION_TYPES:
            raise DataFormatError(f"unknown config section [{section}]")
        out[section] = _build(section, SECTION_TYPES[section], parser.items(section))
    return out
