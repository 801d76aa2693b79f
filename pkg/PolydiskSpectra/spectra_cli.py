import argparse
import datetime
import sys
import warnings
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

import bounds
import matrixlab
import schatten
from errors import SpectraError, WeightSpecError
from helper import format_log_value, option, status, use_config, write_json, write_table
from rearrange import EigenvalueStream
from weights import make_weights


@dataclass
class RunManifest:
    """Reproducibility record written next to every output file."""

    subcommand: str
    parameters: dict
    schema_version: int
    started: str
    finished: Optional[str] = None
    status: str = 'running'
    error: Optional[str] = None
    outputs: List[str] = field(default_factory=list)

    def finish(self, status_, error=None):
        self.finished = _now()
        self.status = status_
        self.error = error

    def save(self):
        for path in self.outputs:
            write_json(asdict(self), path + '.manifest.json')


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    return value


def _records(frame):
    return [{key: _plain(value) for key, value in row.items()} for row in frame.to_dict(orient='records')]


def parse_complex(text):
    """Accepts `0.5`, `0.5+0.25j` or `0.5+0.25i`."""
    try:
        return complex(text.strip().replace('i', 'j'))
    except ValueError:
        raise argparse.ArgumentTypeError('not a complex number: {!r}'.format(text)) from None


def parse_matrix_spec(text):
    """
    Matrix spec for `matrix kron`.

    `affine:s=S,c=C,m=M` | `moebius:u=U,m=M` | `diag:v1,v2,...`
    """
    kind, sep, body = text.partition(':')
    if not sep:
        raise argparse.ArgumentTypeError('bad matrix spec {!r}'.format(text))
    try:
        if kind == 'diag':
            values = np.array([parse_complex(v) for v in body.split(',')], dtype=np.complex128)
            return matrixlab.TruncatedOperator(np.diag(values), text)
        fields = dict(item.split('=', 1) for item in body.split(','))
        if kind == 'affine':
            return matrixlab.affine_symbol_matrix(parse_complex(fields['s']), parse_complex(fields['c']), int(fields['m']))
        if kind == 'moebius':
            return matrixlab.moebius_symbol_matrix(parse_complex(fields['u']), int(fields['m']))
    except (KeyError, ValueError) as error:
        raise argparse.ArgumentTypeError('bad matrix spec {!r}: {}'.format(text, error)) from None
    raise argparse.ArgumentTypeError('unknown matrix kind {!r} in {!r}'.format(kind, text))


# ---------------------------------------------------------------- handlers


def run_rearrange(args):
    w = make_weights(args.weights)
    stream = EigenvalueStream(w)
    points = stream.take(args.take, show_progress=not args.quiet)
    if args.save_state:
        stream.save_to_file(args.save_state)
    frame = pd.DataFrame({
        'n': np.arange(1, len(points) + 1),
        'multi_index': [point.index.to_text() for point in points],
        'log_value': [point.log_value for point in points],
        'value': [format_log_value(point.log_value) for point in points],
    })
    return frame, 'weights={}'.format(w.spec)


def run_schatten(args):
    w = make_weights(args.weights)
    report = schatten.partial_sum_vs_product(w, args.p, args.N, show_progress=not args.quiet)
    return pd.DataFrame([report.to_dict()]), 'weights={} p={}'.format(w.spec, args.p)


def _report(report):
    return report.to_frame(), report.constants_comment()


def run_bounds_linear(args):
    return _report(bounds.linear_bound_report(args.N))


def run_bounds_general(args):
    return _report(bounds.general_bound_report(make_weights(args.weights), args.N, show_progress=not args.quiet))


def run_bounds_supscha(args):
    return _report(bounds.supscha_profile(args.alpha, args.N_list, show_progress=not args.quiet))


def run_bounds_diverge(args):
    w = make_weights(args.weights)
    if args.power_b is not None:
        return _report(bounds.power_decay_comparison(w, args.p, args.N, args.power_b))
    return _report(bounds.divergence_report(w, args.p, args.N, show_progress=not args.quiet))


def run_bounds_cruci(args):
    return _report(bounds.cruci_report(make_weights(args.weights), args.p, args.M))


def run_matrix_affine(args):
    T = matrixlab.affine_symbol_matrix(args.s, args.c, args.m)
    if args.weyl is not None:
        result = matrixlab.weyl_check(T, args.weyl)
        return pd.DataFrame([{'n': args.weyl, **result._asdict()}]), T.provenance
    if args.svd:
        values = matrixlab.singular_values(T)
        return pd.DataFrame({'rank': np.arange(1, len(values) + 1), 'singular_value': values}), T.provenance
    return T.to_frame(), T.provenance


def run_matrix_kron(args):
    if args.batch:
        frame = matrixlab.kron_batch(args.batch, args.seed, tol=args.tol, show_progress=not args.quiet)
        return frame, 'seed={} generator=PCG64 tol={}'.format(args.seed, args.tol)
    if args.spec1 is None or args.spec2 is None:
        raise ValueError('--spec1 and --spec2 are required without --batch')
    result = matrixlab.kron_spectrum_check(args.spec1, args.spec2, args.tol)
    return pd.DataFrame([result._asdict()]), '{} (x) {}'.format(args.spec1.provenance, args.spec2.provenance)


def run_matrix_normbound(args):
    if args.batch:
        frame = matrixlab.norm_bound_batch(args.batch, args.seed, args.m, show_progress=not args.quiet)
        return frame, 'seed={} generator=PCG64'.format(args.seed)
    norm, bound, ok = matrixlab.norm_bound_check(args.s, args.c, args.m)
    return pd.DataFrame([{'norm': norm, 'bound': bound, 'ok': ok}]), 'm={}'.format(args.m)


def run_matrix_spectrum(args):
    spectrum = matrixlab.spectrum_points(make_weights(args.weights), args.take)
    return spectrum.to_frame(), 'source={}'.format(spectrum.source)


def run_matrix_weyl(args):
    frame = matrixlab.weyl_batch(args.count, args.seed, args.m_max, show_progress=not args.quiet)
    return frame, 'seed={} generator=PCG64'.format(args.seed)


# ---------------------------------------------------------------- parser


# the result each subcommand computes or checks, shown in its help
RESULTS = {
    'rearrange': 'spectral theorem for diagonal symbols: a_n is the rearrangement of lambda^alpha',
    'schatten': 'Euler product theorem for Schatten classes',
    'bounds linear': 'partition function bound, eta(e^(-r)) <= e^(D/r)',
    'bounds general': 'general Euler product bound, inf over x > 1',
    'bounds supscha': 'superexponential decay theorem',
    'bounds diverge': 'logarithmic divergence theorem, sum_n 1/log^p(1/a_n) = oo',
    'bounds cruci': 'lower bound lemma for single lattice terms',
    'matrix affine': "Weyl's product inequality",
    'matrix kron': 'tensor spectrum lemma for commuting elements',
    'matrix normbound': 'composition operator norm inequality',
    'matrix spectrum': 'spectral theorem for diagonal symbols: spectrum {lambda^alpha} with 0 and 1',
    'matrix weyl': "Weyl's product inequality and its consequence |lambda_2n|^2 <= a_1 a_n",
}


def _describe(key, text):
    text = '{} [{}]'.format(text, RESULTS[key])
    return {'help': text, 'description': text}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--csv", type=str, default=None, help="Write the table as CSV to this path (stdout when omitted)")
    common.add_argument("--json", type=str, default=None, help="Write the table as JSON to this path")
    common.add_argument("--seed", type=int, default=0, help="Seed for randomized checks (numpy PCG64)")
    common.add_argument("--quiet", action='store_true', help="No progress bars, status lines or warnings")
    common.add_argument("--config", type=str, default=None, help="YAML file overriding the bundled caps and tolerances")

    parser = argparse.ArgumentParser(
        prog='spectra_cli',
        description="Spectra of diagonal composition operators on the Hardy space of the infinite polydisk.",
    )
    commands = parser.add_subparsers(dest='command', required=True)

    p = commands.add_parser('rearrange', parents=[common],
                            **_describe('rearrange', "Non-increasing rearrangement of lambda^alpha; these are the approximation numbers of a diagonal symbol"))
    p.add_argument("--weights", type=str, required=True, help="list:v1,... | geometric:rho=R | linear:beta=B | tower:alpha=A")
    p.add_argument("--take", type=int, required=True, help="Number of points")
    p.add_argument("--save-state", dest='save_state', type=str, default=None, help="Save the stream state as JSON")
    p.set_defaults(handler=run_rearrange)

    p = commands.add_parser('schatten', parents=[common],
                            **_describe('schatten', "Euler product sum_n a_n^p = prod_j (1 - lambda_j^p)^-1 against streamed partial sums"))
    p.add_argument("--weights", type=str, required=True)
    p.add_argument("--p", type=float, required=True, help="Schatten exponent")
    p.add_argument("--N", type=int, default=1000, help="Number of streamed terms")
    p.set_defaults(handler=run_schatten)

    b = commands.add_parser('bounds', help="Decay bounds for approximation numbers")
    bcommands = b.add_subparsers(dest='bounds_command', required=True)

    p = bcommands.add_parser('linear', parents=[common],
                             **_describe('bounds linear', "a_N <= exp(-(log N)^2 / 4D), D = pi^2/6, for lambda_j = e^-j (partition-function bound)"))
    p.add_argument("--N", type=int, nargs='+', required=True)
    p.set_defaults(handler=run_bounds_linear)

    p = bcommands.add_parser('general', parents=[common],
                             **_describe('bounds general', "a_N <= inf_x exp[x (log F(1/x) - log N)] with F the Euler product"))
    p.add_argument("--weights", type=str, required=True)
    p.add_argument("--N", type=int, nargs='+', required=True)
    p.set_defaults(handler=run_bounds_general)

    p = bcommands.add_parser('supscha', parents=[common],
                             **_describe('bounds supscha', "a_n <= C exp(-c e^{b (log n)^delta}), delta = alpha/(alpha+1), for A_j = exp(j^alpha)"))
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--N-list", dest='N_list', type=int, nargs='+', required=True)
    p.set_defaults(handler=run_bounds_supscha)

    p = bcommands.add_parser('diverge', parents=[common],
                             **_describe('bounds diverge', "Partial sums of 1/log^p(1/a_n), divergent for truly infinite-dimensional symbols"))
    p.add_argument("--weights", type=str, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--power-b", dest='power_b', type=float, default=None,
                   help="Compare with the convergent sums of a_n = exp(-n^b) (why delta = 1 is impossible)")
    p.set_defaults(handler=run_bounds_diverge)

    p = bcommands.add_parser('cruci', parents=[common],
                             **_describe('bounds cruci', "Term-wise lower bound 1/(sum alpha_j A_j)^p >= C_q^-p / ||alpha||^2p over {1..M}^2p"))
    p.add_argument("--weights", type=str, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--M", type=int, nargs='+', required=True)
    p.set_defaults(handler=run_bounds_cruci)

    mtx = commands.add_parser('matrix', help="Finite sections of composition operators")
    mcommands = mtx.add_subparsers(dest='matrix_command', required=True)

    p = mcommands.add_parser('affine', parents=[common],
                             **_describe('matrix affine', "Section of C_phi, phi(z) = s z + c; optional singular values or Weyl's product inequality"))
    p.add_argument("--s", type=parse_complex, required=True)
    p.add_argument("--c", type=parse_complex, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--svd", action='store_true', help="Emit singular values")
    p.add_argument("--weyl", type=int, default=None, help="Check prod |lambda_j| <= prod a_j up to this n")
    p.set_defaults(handler=run_matrix_affine)

    p = mcommands.add_parser('kron', parents=[common],
                             **_describe('matrix kron', "Spectrum of a tensor product lies in the products of the factor spectra (commuting elements)"))
    p.add_argument("--spec1", type=parse_matrix_spec, default=None, help="affine:s=S,c=C,m=M | moebius:u=U,m=M | diag:v1,...")
    p.add_argument("--spec2", type=parse_matrix_spec, default=None)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--batch", type=int, default=0, help="Run this many seeded random triangular pairs instead")
    p.set_defaults(handler=run_matrix_kron)

    p = mcommands.add_parser('normbound', parents=[common],
                             **_describe('matrix normbound', "||C_phi|| <= sqrt((1 + |phi(0)|) / (1 - |phi(0)|)) on sections"))
    p.add_argument("--s", type=parse_complex, default=0.5)
    p.add_argument("--c", type=parse_complex, default=0.25)
    p.add_argument("--m", type=int, default=40)
    p.add_argument("--batch", type=int, default=0, help="Run this many seeded random symbols instead")
    p.set_defaults(handler=run_matrix_normbound)

    p = mcommands.add_parser('spectrum', parents=[common],
                             **_describe('matrix spectrum', "Spectrum of C_phi: the numbers lambda^alpha, with 1 and the accumulation point 0"))
    p.add_argument("--weights", type=str, required=True)
    p.add_argument("--take", type=int, required=True)
    p.set_defaults(handler=run_matrix_spectrum)

    p = mcommands.add_parser('weyl', parents=[common],
                             **_describe('matrix weyl', "Weyl's inequality and |lambda_2n|^2 <= a_1 a_n on seeded random affine sections"))
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--m-max", dest='m_max', type=int, default=20)
    p.set_defaults(handler=run_matrix_weyl)

    return parser


def _subcommand(args):
    return ' '.join(part for part in (args.command, getattr(args, 'bounds_command', None), getattr(args, 'matrix_command', None)) if part)


def _parameters(args):
    skip = {'handler', 'command', 'bounds_command', 'matrix_command'}
    out = {}
    for key, value in vars(args).items():
        if key in skip:
            continue
        if isinstance(value, matrixlab.TruncatedOperator):
            value = value.provenance
        elif isinstance(value, complex):
            value = str(value)
        out[key] = value
    return out


def emit(frame, comment, args):
    """Write the result table to --csv/--json, or CSV on stdout."""
    outputs = []
    if args.csv:
        write_table(frame, args.csv, comment=comment)
        outputs.append(args.csv)
    if args.json:
        write_json({'comment': comment, 'rows': _records(frame)}, args.json)
        outputs.append(args.json)
    if not outputs:
        write_table(frame, None, comment=comment)
    return outputs


def dispatch(argv=None):
    """
    Run one subcommand.

    Returns
    -------
    int
        0 on success, 1 on domain or resource errors, 2 on usage errors (malformed weight specs included).
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return exit_.code if isinstance(exit_.code, int) else 0

    use_config(args.config)
    manifest = RunManifest(_subcommand(args), _parameters(args), option(None, 'cli', 'schema_version', int), _now())
    manifest.outputs = [path for path in (args.csv, args.json) if path]

    with warnings.catch_warnings():
        if args.quiet:
            warnings.simplefilter('ignore')
        try:
            frame, comment = args.handler(args)
            emit(frame, comment, args)
        except WeightSpecError as error:
            # malformed --weights text is a usage error, not a domain error
            print('usage error: {}'.format(error), file=sys.stderr)
            manifest.finish('error', str(error))
            manifest.save()
            return 2
        except SpectraError as error:
            print('error: {}'.format(error), file=sys.stderr)
            manifest.finish('error', str(error))
            manifest.save()
            return 1
        except ValueError as error:
            print('usage error: {}'.format(error), file=sys.stderr)
            manifest.finish('error', str(error))
            manifest.save()
            return 2

    manifest.finish('ok')
    manifest.save()
    status('{}: done'.format(manifest.subcommand), args.quiet)
    return 0


if __name__ == '__main__':
    sys.exit(dispatch())
