#!/usr/bin/env python3

import sys
import logging
import argparse

from crjet.errors import CRJetError
from crjet.manifold import DEFAULT_KAPPA
from crjet.commands import RunConfig, COMMANDS
from crjet.report import write_report


class _Parser(argparse.ArgumentParser):
    # Usage errors exit with 1, not argparse's 2 (reserved for invalid models)
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def main(args):
    level = logging.WARNING
    if args.verbose:
        level = logging.INFO
    if args.debug:
        level = logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr,
                        format='%(asctime)s %(name)s %(levelname)s %(message)s')

    try:
        config = RunConfig.from_args(args)
        report = COMMANDS[config.command](config)
    except CRJetError as e:
        print(f"crjet {args.command}: {e}", file=sys.stderr)
        return e.exit_code
    except (ValueError, FileNotFoundError) as e:
        print(f"crjet {args.command}: {e}", file=sys.stderr)
        return 1

    text = write_report(report, path=config.out, format=config.format)
    if config.out is None:
        sys.stdout.write(text)
    if config.command == 'selftest' and not report.results['passed']:
        return 4
    return 0


if __name__ == '__main__':
    common = _Parser(add_help=False)
    common.add_argument('--model', type=str,
                        help='model file or catalog name')
    common.add_argument('--kappa', dest='kappa_trunc', type=int, default=DEFAULT_KAPPA,
                        help='truncation order of the defining functions')
    common.add_argument('--lmax', dest='l_max', type=int,
                        help='nondegeneracy search budget, kappa - 1 when unset')
    common.add_argument('--seed', type=int, default=0,
                        help='seed for every random choice')
    common.add_argument('--out', type=str,
                        help='write the report here instead of stdout')
    common.add_argument('--format', type=str, default='json', choices=('json', 'text'),
                        help='report format')
    common.add_argument('-v', '--verbose', action='store_true',
                        help='log pipeline stages')
    common.add_argument('--debug', action='store_true',
                        help='log everything')

    parser = _Parser(
        description='exact jet determination and complete systems for CR maps between model manifolds',
        formatter_class=argparse.ArgumentDefaultsHelpFormatter
        )
    commands = parser.add_subparsers(dest='command', required=True)

    analyze = commands.add_parser('analyze', parents=[common], formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                                  help='Levi form, Hörmander numbers, finite nondegeneracy and bounds')
    analyze.add_argument('--point', type=str,
                         help='base point as comma separated real coordinates Re z, Im z, Re w')

    segre = commands.add_parser('segre', parents=[common], formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                                help='Segre map ranks, δ, η₀ and the vanishing order m')
    segre.add_argument('--s', type=int,
                       help='chain half length, d + 1 when unset')
    segre.add_argument('--point', type=str,
                       help='base point as comma separated real coordinates Re z, Im z, Re w')

    param = commands.add_parser('parametrize', parents=[common], formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                                help='jet parametrization and complete system for an anchor jet')
    param.add_argument('--jet', type=str, required=True,
                       help='anchor jet file or catalog name')
    param.add_argument('--target', type=str,
                       help='target model, taken from the jet file when unset')
    param.add_argument('--s', type=int,
                       help='chain half length, d + 1 when unset')
    param.add_argument('--k', type=int,
                       help='reflection depth, smallest value giving order r + 1 when unset')
    param.add_argument('--system', type=str,
                       help='write the complete system artifact here')
    param.add_argument('--grid', type=float, default=0.1,
                       help='radius of the validity box in x')

    recon = commands.add_parser('reconstruct', parents=[common], formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                                help='sample a map from its jet by integrating the complete system')
    recon.add_argument('--system', type=str, required=True,
                       help='complete system artifact written by parametrize')
    recon.add_argument('--jet', type=str, required=True,
                       help='r-jet at the base point, file or catalog name')
    recon.add_argument('--point', type=str,
                       help='base point as comma separated real coordinates')
    recon.add_argument('--grid', type=float, default=0.1,
                       help='grid radius around the base point')
    recon.add_argument('--grid-points', dest='grid_points', type=int, default=2,
                       help='grid points per axis')
    recon.add_argument('--step', type=float, default=0.05,
                       help='maximal integration step')
    recon.add_argument('--tol', type=float, default=1e-8,
                       help='integrator tolerance')
    recon.add_argument('--accept', type=float, default=1e-6,
                       help='largest accepted target residual')

    commands.add_parser('catalog', parents=[common], formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                        help='list the built-in models and jets')
    commands.add_parser('selftest', parents=[common], formatter_class=argparse.ArgumentDefaultsHelpFormatter,
                        help='check the catalog annotations against the pipeline')

    args = parser.parse_args()
    sys.exit(main(args))
