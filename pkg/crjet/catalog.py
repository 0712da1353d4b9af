"""
Built-in catalog of model manifolds and anchor jets with the invariants
they are expected to have.  Annotation values double as golden values for
the test suite.
"""

import os
import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache, partial
from typing import Any, Dict, List

from .manifold import ManifoldModel, DEFAULT_KAPPA, parse_model, load_model
from .jets import MapJet, read_jet

__all__ = ['DATA', 'CatalogEntry', 'JetEntry', 'entries', 'jet_entries', 'catalog_entry', 'jet_entry',
           'load_catalog_model', 'load_catalog_jet', 'resolve_model', 'resolve_jet']


logger = logging.getLogger(__name__)


DATA = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data')


PROVENANCE_TAGS = ('literature', 'derived', 'trivial')


@lru_cache(maxsize=1)
def _catalog() -> Dict[str, Any]:
    with open(os.path.join(DATA, 'catalog.json'), 'r', encoding='utf-8') as fh:
        catalog = json.load(fh)
    for kind in ('models', 'jets'):
        for name,entry in catalog[kind].items():
            for key,note in entry.get('annotations', {}).items():
                if note.get('provenance') not in PROVENANCE_TAGS:
                    raise ValueError(f"Catalog annotation '{name}.{key}' has unknown provenance {note.get('provenance')!r}")
    return catalog


def _split(annotations: Dict[str, dict]):
    values = {key: note['value'] for key,note in annotations.items()}
    provenance = {key: note['provenance'] for key,note in annotations.items()}
    return values, provenance


@dataclass
class CatalogEntry:
    """
    A catalog model: its file text and the expected invariants.
    """

    name: str
    text: str
    description: str = ''
    annotations: Dict[str, Any] = field(default_factory=dict)
    provenance: Dict[str, str] = field(default_factory=dict)

    def model(self, kappa_trunc: int=DEFAULT_KAPPA) -> ManifoldModel:
        return load_catalog_model(self.name, kappa_trunc)


@dataclass
class JetEntry:
    name: str
    source: str
    target: str
    path: str
    map: List[str] = field(default_factory=list)
    annotations: Dict[str, Any] = field(default_factory=dict)
    provenance: Dict[str, str] = field(default_factory=dict)

    def jet(self, kappa_trunc: int=DEFAULT_KAPPA) -> MapJet:
        return load_catalog_jet(self.name, kappa_trunc)


def catalog_entry(name: str) -> CatalogEntry:
    models = _catalog()['models']
    if name not in models:
        raise ValueError(f"Unknown catalog model '{name}'; choose one of {', '.join(sorted(models))}")
    entry = models[name]
    with open(os.path.join(DATA, entry['file']), 'r', encoding='utf-8') as fh:
        text = fh.read()
    values, provenance = _split(entry.get('annotations', {}))
    return CatalogEntry(name, text, entry.get('description', ''), values, provenance)


def jet_entry(name: str) -> JetEntry:
    jets = _catalog()['jets']
    if name not in jets:
        raise ValueError(f"Unknown catalog jet '{name}'; choose one of {', '.join(sorted(jets))}")
    entry = jets[name]
    path = os.path.join(DATA, entry['file'])
    with open(path, 'r', encoding='utf-8') as fh:
        header = json.load(fh)
    values, provenance = _split(entry.get('annotations', {}))
    return JetEntry(name, header['source_model'], header['target_model'], path, list(entry.get('map', [])),
                    values, provenance)


def entries() -> List[CatalogEntry]:
    return [catalog_entry(name) for name in _catalog()['models']]


def jet_entries() -> List[JetEntry]:
    return [jet_entry(name) for name in _catalog()['jets']]


@lru_cache(maxsize=32)
def _load(name: str, kappa_trunc: int) -> ManifoldModel:
    return parse_model(catalog_entry(name).text, kappa_trunc=kappa_trunc)


def load_catalog_model(name: str, kappa_trunc: int=DEFAULT_KAPPA) -> ManifoldModel:
    """
    Parse a catalog model at the given truncation order.  Models are cached
    per (name, kappa_trunc).
    """

    return _load(name, int(kappa_trunc))


def resolve_model(name_or_path: str, kappa_trunc: int=DEFAULT_KAPPA) -> ManifoldModel:
    """
    A model given either as a path to a model file or as a catalog name.
    """

    if os.path.exists(name_or_path):
        return load_model(name_or_path, kappa_trunc=kappa_trunc)
    if name_or_path in _catalog()['models']:
        return load_catalog_model(name_or_path, kappa_trunc)
    raise FileNotFoundError(f"'{name_or_path}' is neither a model file nor a catalog model")


def load_catalog_jet(name: str, kappa_trunc: int=DEFAULT_KAPPA) -> MapJet:
    return read_jet(jet_entry(name).path, partial(resolve_model, kappa_trunc=kappa_trunc))


def resolve_jet(name_or_path: str, kappa_trunc: int=DEFAULT_KAPPA,
                resolver=None) -> MapJet:
    """
    A jet given either as a path to a jet file or as a catalog name.  Model
    names inside jet files go through `resolver` (default: resolve_model).
    """

    resolver = resolver or partial(resolve_model, kappa_trunc=kappa_trunc)
    if os.path.exists(name_or_path):
        return read_jet(name_or_path, resolver)
    if name_or_path in _catalog()['jets']:
        return read_jet(jet_entry(name_or_path).path, resolver)
    raise FileNotFoundError(f"'{name_or_path}' is neither a jet file nor a catalog jet")
