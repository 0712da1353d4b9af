"""
Pipeline orchestration behind the command line front end: one function per
subcommand, each taking a RunConfig and returning a Report.
"""

import os
import json
import logging
from dataclasses import dataclass, asdict, fields
from typing import Any, Dict, List, Optional

from .errors import BudgetError, StageError
from .series import gauss
from .manifold import ManifoldModel, DEFAULT_KAPPA
from .jets import MapJet, check_cr_jet, parse_gauss
from .invariants import (levi_form, levi_nondegenerate, hoermander_numbers, finite_nondegeneracy,
                         jet_nondegeneracy, nondeg_in_dimension_1, bounds)
from .segre import segre_chain, segre_ranks, reflection_identity_check, build_V, delta_and_eta0
from .reflection import basic_reflection, parametrize
from .system import complete_system, grid_points, reconstruct_map, MAX_DENOMINATOR
from .catalog import (CatalogEntry, JetEntry, entries, jet_entries, catalog_entry, resolve_model,
                      resolve_jet)
from .report import Report, exact, series_json, series_from_json

__all__ = ['RunConfig', 'SYSTEM_SCHEMA', 'cmd_analyze', 'cmd_segre', 'cmd_parametrize', 'cmd_reconstruct',
           'cmd_catalog', 'cmd_selftest', 'check_entry', 'check_jet_entry', 'COMMANDS']


logger = logging.getLogger(__name__)


SYSTEM_SCHEMA = 'crjet-system/1'


@dataclass(frozen=True)
class RunConfig:
    """
    Everything a command needs; the defaults are the command line defaults.
    """

    command: str = 'analyze'
    model: Optional[str] = None
    target: Optional[str] = None
    kappa_trunc: int = DEFAULT_KAPPA
    l_max: Optional[int] = None
    s: Optional[int] = None
    k: Optional[int] = None
    jet: Optional[str] = None
    system: Optional[str] = None
    point: Optional[str] = None
    grid: float = 0.1
    grid_points: int = 2
    step: float = 0.05
    tol: float = 1e-8
    accept: float = 1e-6
    seed: int = 0
    out: Optional[str] = None
    format: str = 'json'

    def __post_init__(self):
        if self.kappa_trunc < 2:
            raise ValueError(f"kappa_trunc must be at least 2, got {self.kappa_trunc}")
        if self.format not in ('json', 'text'):
            raise ValueError(f"Unknown output format '{self.format}'")
        if self.step <= 0 or self.tol <= 0:
            raise ValueError(f"step and tol must be positive, got {self.step} and {self.tol}")

    @classmethod
    def from_args(cls, args) -> 'RunConfig':
        values = {}
        for f in fields(cls):
            if hasattr(args, f.name):
                values[f.name] = getattr(args, f.name)
        return cls(**values)

    @property
    def effective_l_max(self) -> int:
        return self.kappa_trunc - 1 if self.l_max is None else self.l_max

    def real_point(self, dimension: int) -> List[float]:
        """
        The --point option as real coordinates (Re z, Im z, Re w); the origin
        when unset.
        """

        if self.point is None:
            return [0.0]*dimension
        values = [float(v) for v in self.point.split(',')]
        if len(values) != dimension:
            raise ValueError(f"--point needs {dimension} comma separated values, got {len(values)}")
        return values

    def require_kappa(self, needed: int, reason: str):
        if self.kappa_trunc < needed:
            raise BudgetError(f"kappa_trunc {self.kappa_trunc} is below {needed} needed for {reason}; "
                              f"rerun with --kappa {needed}")

    def as_dict(self) -> Dict[str, Any]:
        return {key: value for key,value in asdict(self).items() if key not in ('out', 'format')}


def _base_model(config: RunConfig) -> ManifoldModel:
    if config.model is None:
        raise ValueError(f"'{config.command}' needs --model")
    model = resolve_model(config.model, config.kappa_trunc)
    if config.point is not None:
        if not model.graph:
            raise ValueError("--point needs a model given in the 'im w' form")
        x = [gauss(v, MAX_DENOMINATOR) for v in config.real_point(model.real_dimension)]
        model = model.translate(model.point_from_real(x))
        logger.info("moved the base point to x = %s", config.point)
    return model


## analyze

def _analysis(model: ManifoldModel, config: RunConfig, diagnostics: List[str]) -> Dict[str, Any]:
    results = {}
    form = levi_form(model)
    results['levi'] = {'rank': form.rank(), 'nondegenerate': levi_nondegenerate(form)}

    hoermander = hoermander_numbers(model, config.kappa_trunc - 1)
    results['hoermander'] = hoermander.as_dict()
    if not hoermander.finite_type:
        diagnostics.append(f"no finite type within the bracket budget {config.kappa_trunc}")

    nondeg = finite_nondegeneracy(model, config.effective_l_max)
    results['nondegeneracy'] = {'l': nondeg.verdict(), 'span_dims': nondeg.span_dims, 'absolute': nondeg.absolute}

    if model.n >= 2:
        dim1 = nondeg_in_dimension_1(model, config.effective_l_max)
        results['dim1_nondeg'] = {'verdict': dim1.verdict, 'l': dim1.l}

    if hoermander.finite_type and nondeg.l is not None:
        results['bounds'] = bounds(model.d, max(nondeg.l, 1), hoermander).as_dict()
    else:
        results['bounds'] = None
        diagnostics.append("bounds need finite type and finite nondegeneracy")
    return results


def cmd_analyze(config: RunConfig) -> Report:
    """
    Levi form, Hörmander numbers, finite nondegeneracy and the r, k, m
    bounds of a model at its base point.
    """

    model = _base_model(config)
    report = Report('analyze', config.model, config=config.as_dict())
    report.results = _analysis(model, config, report.diagnostics)
    return report


## segre

def cmd_segre(config: RunConfig) -> Report:
    """
    Rank table of the Segre maps, the palindrome check, δ, η₀ and the
    vanishing order m compared with the Hörmander prediction.
    """

    model = _base_model(config)
    report = Report('segre', config.model, config=config.as_dict())
    s = model.d + 1 if config.s is None else config.s
    hoermander = hoermander_numbers(model, config.kappa_trunc - 1)
    ranks = segre_ranks(model, s, seed=config.seed)
    results = {'s': s, 'N': model.N, 'ranks': ranks, 'hoermander': hoermander.as_dict()}
    report.results = results

    if ranks[-1] < model.N or not hoermander.finite_type:
        results['verdict'] = 'infinite type suspected'
        report.diagnostics.append(f"Segre map ranks {ranks} stay below N = {model.N}")
        return report

    short = segre_chain(model, s)
    results['segre_map'] = [series_json(c) for c in short.segre_map]
    chain = segre_chain(model, 2*s)
    results['palindrome'] = reflection_identity_check(chain)
    vmap = build_V(chain, seed=config.seed)
    delta = delta_and_eta0(vmap, hoermander=hoermander, seed=config.seed)
    results.update({'delta_valuation': delta.delta.valuation(),
                    'eta0': [exact(e) for e in delta.eta0],
                    'm': delta.m,
                    'm_predicted': delta.m_predicted,
                    'verdict': delta.verdict})
    if delta.verdict == 'FAIL':
        report.diagnostics.append(f"vanishing order {delta.m} differs from the predicted {delta.m_predicted}")
    return report


## parametrize

def _load_jet(config: RunConfig) -> MapJet:
    if config.jet is None:
        raise ValueError(f"'{config.command}' needs --jet")
    jet = resolve_jet(config.jet, config.kappa_trunc)
    source = resolve_model(config.model, config.kappa_trunc) if config.model else jet.source
    target = resolve_model(config.target, config.kappa_trunc) if config.target else jet.target
    if source is not jet.source or target is not jet.target:
        jet = MapJet(source, target, jet.order, jet.coefficients)
    return jet


def _jet_degeneracy(jet: MapJet, l_max: int) -> int:
    l_max = min(l_max, jet.order)
    report = jet_nondegeneracy(jet.source, jet.target, jet, l_max)
    if report.l is None:
        raise StageError(f"span deficiency: the jet is not l-nondegenerate for any l ≤ {l_max} "
                         f"(span dimensions {report.span_dims})", stage='reflection')
    return max(report.l, 1)


def _build_system(source: ManifoldModel, target: ManifoldModel, anchor: MapJet, l: int, config: RunConfig,
                  k: Optional[int]=None, s: Optional[int]=None):
    hoermander = hoermander_numbers(source, config.kappa_trunc - 1)
    if not hoermander.finite_type:
        raise BudgetError(f"the source is not of finite type within the budget {config.kappa_trunc}",
                          stage='invariants')
    s = source.d + 1 if s is None else s
    r = 2*s*l
    config.require_kappa(max(hoermander.nu, bounds(source.d, l, hoermander).m_bound + r + 2),
                         f"m + r + 2 with r = {r}")
    par = parametrize(source, target, anchor, l, k=k, s=s, seed=config.seed, hoermander=hoermander)
    system = None
    if par.guaranteed_order >= par.r + 1:
        system = complete_system(par, x_radius=config.grid, seed=config.seed)
    return par, system


def cmd_parametrize(config: RunConfig) -> Report:
    """
    Ψᵏ for the anchor jet and the complete system Φ.  With --system the
    artifact needed by `reconstruct` is written to that path.
    """

    jet = _load_jet(config)
    source, target = jet.source, jet.target
    l = _jet_degeneracy(jet, config.effective_l_max)
    s = source.d + 1 if config.s is None else config.s
    par, system = _build_system(source, target, jet, l, config, k=config.k, s=s)

    report = Report('parametrize', config.model or source.label, config=config.as_dict())
    report.results = par.to_json()
    if system is None:
        report.diagnostics.append(f"guaranteed order {par.guaranteed_order} < r + 1; no complete system")
    else:
        report.results['box'] = {'x_radius': system.x_radius, 'jet_radius': system.jet_radius}

    if config.system is not None:
        if system is None:
            raise BudgetError(f"no complete system to write: guaranteed order {par.guaranteed_order} "
                              f"< r + 1 = {par.r + 1}; increase --k", stage='reflection')
        artifact = {'schema': SYSTEM_SCHEMA,
                    'source_model': config.model or source.label,
                    'target_model': config.target or target.label,
                    'kappa_trunc': config.kappa_trunc,
                    'anchor': par.anchor.to_json(config.model, config.target),
                    'system': system.to_json()}
        with open(config.system, 'w', encoding='utf-8') as fh:
            json.dump(artifact, fh, indent=2)
            fh.write('\n')
        logger.info("wrote the system artifact to %s", config.system)
    return report


## reconstruct

def _load_system(config: RunConfig):
    if config.system is None or not os.path.exists(config.system):
        raise FileNotFoundError(f"system artifact '{config.system}' does not exist")
    with open(config.system, 'r', encoding='utf-8') as fh:
        artifact = json.load(fh)
    if artifact.get('schema') != SYSTEM_SCHEMA:
        raise ValueError(f"'{config.system}' is not a {SYSTEM_SCHEMA} artifact")

    kappa = max(config.kappa_trunc, int(artifact['kappa_trunc']))
    source = resolve_model(artifact['source_model'], kappa)
    target = resolve_model(artifact['target_model'], kappa)
    anchor = MapJet.from_json(artifact['anchor'], source, target)
    stored = artifact['system']
    run = RunConfig(command=config.command, kappa_trunc=kappa, grid=float(stored['x_radius']),
                    seed=int(stored['seed']))
    par, system = _build_system(source, target, anchor, int(stored['l']), run, k=int(stored['k']),
                                s=int(stored['s']))
    if system is None or par.to_json()['psi'] != stored['psi']:
        raise StageError("the rebuilt parametrization does not match the artifact", stage='reconstruct')
    if 'expansion' in stored:
        expansion = [series_from_json(f) for f in stored['expansion']]
        if any(f.vars != source.Z for f in expansion):
            raise ValueError(f"'{config.system}' holds an expansion in the wrong variables")
        system.remember([0]*source.real_dimension, anchor, expansion)
    system.jet_radius = float(stored['jet_radius'])
    return artifact, system


def cmd_reconstruct(config: RunConfig) -> Report:
    """
    Sample the map with the given r-jet on a grid around the base point by
    integrating the complete system.
    """

    artifact, system = _load_system(config)
    source, target = system.source, system.target
    names = {artifact['source_model']: source, artifact['target_model']: target}
    jet = resolve_jet(config.jet, config.kappa_trunc,
                      resolver=lambda name: names.get(name) or resolve_model(name, config.kappa_trunc))
    jet = MapJet(source, target, jet.order, jet.coefficients)

    dimension = source.real_dimension
    p = config.real_point(dimension)
    grid = grid_points(p, config.grid, config.grid_points)
    samples = reconstruct_map(system, p, jet, grid, h=config.step, tol=config.tol)

    report = Report('reconstruct', artifact['source_model'], config=config.as_dict())
    worst = max(s.target_residual for s in samples)
    gaps = [s.path_gap for s in samples if s.path_gap is not None]
    report.results = {'r': system.r,
                      'base_point': p,
                      'samples': [s.to_json() for s in samples],
                      'max_target_residual': worst,
                      'max_path_gap': max(gaps) if gaps else None,
                      'accepted': bool(worst <= config.accept)}
    if worst > config.accept:
        report.diagnostics.append(f"target residual {worst:.3g} exceeds the acceptance {config.accept:.3g}")
    return report


## catalog

def cmd_catalog(config: RunConfig) -> Report:
    """
    The catalog models and jets with their annotations.
    """

    report = Report('catalog', config.model or 'all', config=config.as_dict())
    chosen = [catalog_entry(config.model)] if config.model else entries()
    report.results = {'models': [{'name': e.name, 'description': e.description, 'annotations': e.annotations,
                                  'provenance': e.provenance} for e in chosen],
                      'jets': [{'name': j.name, 'source': j.source, 'target': j.target, 'map': j.map,
                                'annotations': j.annotations} for j in jet_entries()
                               if config.model is None or config.model in (j.source, j.target)]}
    return report


## selftest

def _check(key: str, expected, got) -> Dict[str, Any]:
    return {'key': key, 'expected': expected, 'got': got, 'ok': expected == got}


def check_entry(entry: CatalogEntry, kappa_trunc: int=DEFAULT_KAPPA, seed: int=0) -> List[Dict[str, Any]]:
    """
    Recompute every annotated invariant of a catalog model.
    """

    notes = entry.annotations
    model = entry.model(kappa_trunc)
    out = []
    hoermander = None
    if notes.keys() & {'finite_type', 'nu', 'mu', 'm', 'm_bound', 'r', 'k'}:
        hoermander = hoermander_numbers(model, kappa_trunc - 1)
    nondeg = None
    if notes.keys() & {'l', 'absolute', 'r', 'k'}:
        nondeg = finite_nondegeneracy(model, kappa_trunc - 1)

    for key,expected in notes.items():
        if key == 'levi':
            got = levi_nondegenerate(levi_form(model))
        elif key == 'finite_type':
            got = hoermander.finite_type
        elif key == 'nu':
            got = hoermander.nu
        elif key == 'mu':
            got = hoermander.mu
        elif key == 'l':
            got = nondeg.l
        elif key == 'absolute':
            got = nondeg.absolute
        elif key in ('r', 'k'):
            got = getattr(bounds(model.d, nondeg.l, hoermander), key)
        elif key == 'm_bound':
            got = bounds(model.d, 1, hoermander).m_bound
        elif key in ('dim1', 'dim1_l'):
            report = nondeg_in_dimension_1(model, kappa_trunc - 1)
            got = report.verdict if key == 'dim1' else report.l
        elif key == 'm':
            vmap = build_V(segre_chain(model, 2*(model.d + 1)), seed=seed)
            got = delta_and_eta0(vmap, hoermander=hoermander, seed=seed).m
        elif key == 'segre_rank':
            got = segre_ranks(model, model.d + 1, seed=seed)[-1]
        elif key == 'l_at_point':
            moved = model.translate([parse_gauss(p) for p in expected['point']])
            vmap = build_V(segre_chain(moved, 2*(moved.d + 1)), seed=seed)
            got = {'point': expected['point'],
                   'l': finite_nondegeneracy(moved, kappa_trunc - 1).l,
                   'm': delta_and_eta0(vmap, seed=seed).m}
        else:
            raise ValueError(f"Unknown catalog annotation '{key}' on '{entry.name}'")
        out.append(_check(key, expected, got))
    return out


def check_jet_entry(entry: JetEntry, kappa_trunc: int=DEFAULT_KAPPA) -> List[Dict[str, Any]]:
    jet = entry.jet(kappa_trunc)
    out = []
    for key,expected in entry.annotations.items():
        if key == 'cr':
            got = check_cr_jet(jet).is_cr
        elif key == 'l':
            got = jet_nondegeneracy(jet.source, jet.target, jet, min(kappa_trunc - 1, jet.order)).l
        elif key == 'span_error':
            try:
                basic_reflection(jet.source, jet.target, jet, 1, 1)
                got = False
            except StageError:
                got = True
        else:
            raise ValueError(f"Unknown jet annotation '{key}' on '{entry.name}'")
        out.append(_check(key, expected, got))
    return out


def cmd_selftest(config: RunConfig) -> Report:
    """
    Check the catalog annotations against the pipeline; `passed` is False
    on the first disagreement.
    """

    report = Report('selftest', config.model or 'all', config=config.as_dict())
    chosen = [catalog_entry(config.model)] if config.model else entries()
    checks = []
    for entry in chosen:
        for item in check_entry(entry, config.kappa_trunc, config.seed):
            checks.append(dict(item, name=entry.name))
    for entry in jet_entries():
        if config.model is None or config.model == entry.source:
            for item in check_jet_entry(entry, config.kappa_trunc):
                checks.append(dict(item, name=entry.name))
    failed = [c for c in checks if not c['ok']]
    for c in failed:
        report.diagnostics.append(f"{c['name']}.{c['key']}: expected {c['expected']!r}, got {c['got']!r}")
    report.results = {'checks': checks, 'failed': len(failed), 'passed': not failed}
    return report


COMMANDS = {'analyze': cmd_analyze,
            'segre': cmd_segre,
            'parametrize': cmd_parametrize,
            'reconstruct': cmd_reconstruct,
            'catalog': cmd_catalog,
            'selftest': cmd_selftest}
