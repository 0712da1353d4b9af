"""
Versioned JSON/text reports.  Exact quantities are exported as rational
strings; only ODE output is written as floats.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from sympy.polys.domains import QQ_I

from .series import TruncSeries, GaussRational
from .jets import format_gauss, parse_gauss

__all__ = ['SCHEMA', 'Report', 'exact', 'series_json', 'series_from_json', 'write_report']


logger = logging.getLogger(__name__)


SCHEMA = 'crjet-report/1'


def exact(value: GaussRational) -> str:
    """
    A Gaussian rational as an exact string, e.g. "1/2 + 3*I".
    """

    return str(QQ_I.to_sympy(value))


def series_json(series: TruncSeries) -> Dict[str, Any]:
    """
    {vars, order, exact, terms: [{exponents, value: [re, im]}]} with terms in
    graded-lex order.
    """

    terms = [{'exponents': list(monom), 'value': format_gauss(c)}
             for monom,c in sorted(series.coeffs.items(), key=lambda t: (sum(t[0]), t[0]))]
    return {'vars': list(series.vars),
            'order': series.order,
            'exact': series.exact,
            'terms': terms}


def series_from_json(data: Dict[str, Any]) -> TruncSeries:
    """
    Inverse of series_json().
    """

    for key in ('vars', 'order', 'exact', 'terms'):
        if key not in data:
            raise ValueError(f"Series is missing '{key}'")
    terms = {tuple(int(e) for e in t['exponents']): parse_gauss(t['value']) for t in data['terms']}
    return TruncSeries(tuple(data['vars']), terms, order=data['order'], exact=bool(data['exact']))


@dataclass
class Report:
    command: str
    model: str
    results: Dict[str, Any] = field(default_factory=dict)
    diagnostics: List[str] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> Dict[str, Any]:
        return {'schema': SCHEMA,
                'command': self.command,
                'model': self.model,
                'config': self.config,
                'results': self.results,
                'diagnostics': self.diagnostics}

    def to_text(self) -> str:
        lines = [f"{self.command}: {self.model}"]
        _text_lines(self.results, 1, lines)
        for diag in self.diagnostics:
            lines.append(f"  ! {diag}")
        return '\n'.join(lines) + '\n'


def _text_lines(value, depth: int, lines: List[str]):
    pad = '  '*depth
    for key,item in value.items():
        if isinstance(item, dict):
            lines.append(f"{pad}{key}:")
            _text_lines(item, depth + 1, lines)
        elif isinstance(item, list) and item and isinstance(item[0], dict):
            lines.append(f"{pad}{key}: [{len(item)} entries]")
        else:
            lines.append(f"{pad}{key}: {item}")


def write_report(report: Report, path: Optional[str]=None, format: str='json') -> str:
    """
    Render the report and write it to `path` (stdout is the caller's job
    when `path` is None).  Returns the rendered text.
    """

    if format == 'json':
        text = json.dumps(report.to_json(), indent=2, ensure_ascii=False) + '\n'
    elif format == 'text':
        text = report.to_text()
    else:
        raise ValueError(f"Unknown report format '{format}'")
    if path is not None:
        with open(path, 'w', encoding='utf-8') as fh:
            fh.write(text)
        logger.info("wrote %s report to %s", format, path)
    return text
