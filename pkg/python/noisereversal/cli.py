"""
command-line entry point

    noisereversal generate  -> truth CSV + sidecar
    noisereversal corrupt   -> noisy CSV + sidecar with lambda and true total
    noisereversal denoise   -> recovered CSV, noise CSV, solve report JSON
    noisereversal evaluate  -> metrics JSON
    noisereversal sweep     -> generate/corrupt/denoise/evaluate per
                               (fraction, seed), one aggregate CSV

every flag may also come from `--config file.json`; flags win over the file.
exit codes: 0 ok, 1 some sweep runs failed, 2 bad usage or input, 3 I/O
failure, 4 the solver aborted every restart.
"""

import argparse
from concurrent.futures import ThreadPoolExecutor
import dataclasses
import logging
import math
import os
import sys
import time

import numpy as np

from . import datagen, metrics, pipeline, serialization, smoothness
from .errors import (ContractViolation, InputError, InvalidDocument,
        NoiseReversalError, SolverError)
from .schemas import (Message, OPTIONAL, UNION, FINITE, NONNEGATIVE_INT,
        RULE)
from .solver import SolverConfig, report_to_document


__all__ = ["main", "ExperimentConfig", "PRESETS"]

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_SOLVER = 4

PRESETS = {
    'levels-1d': {'kind': 'sin1d', 'fractions': [0.1, 0.2, 0.4, 0.8],
        'relative_to': 'peak'},
    'levels-2d': {'kind': 'sin2d', 'fractions': [0.5, 1.0, 2.0],
        'relative_to': 'peak'},
}

DEFAULTS = {
    'kind': 'sin1d',
    'length': 200,
    'rows': 100,
    'cols': 200,
    'amplitude': 100.0,
    'omega': 0.4,
    'gamma': 0.02,
    'omega_r': 0.4,
    'omega_c': 0.2,
    'gamma_r': 0.02,
    'gamma_c': 0.01,
    'floor': 0.0,
    'relative_to': 'peak',
    'boundary': 'interior',
    'passes': 1,
    'sweeps': 3,
    'budget_policy': 'proportional',
    'cross_column_weight': 1.0,
    'budget_mode': 'exact',
    'off_period_samples': 10000,
    'hardware_profile_check': False,
    'record_timings': False,
    'seed': 0,
    'trim': 0,
}

_POSITIVE_INT = RULE(lambda n: isinstance(n, int) and not isinstance(n, bool)
        and n >= 1, "positive integer")
_NONNEGATIVE = RULE(lambda x: isinstance(x, (int, float)) and
        not isinstance(x, bool) and math.isfinite(x) and x >= 0,
        "nonnegative number")


class ExperimentConfig(Message):
    "everything a run can be told, as accepted by --config"
    SCHEMA = {
        OPTIONAL('kind'): UNION('sin1d', 'sin2d'),
        OPTIONAL('preset'): UNION(*PRESETS),
        OPTIONAL('length'): _POSITIVE_INT,
        OPTIONAL('rows'): _POSITIVE_INT,
        OPTIONAL('cols'): _POSITIVE_INT,
        OPTIONAL('amplitude'): _NONNEGATIVE,
        OPTIONAL('omega'): FINITE,
        OPTIONAL('gamma'): _NONNEGATIVE,
        OPTIONAL('omega_r'): FINITE,
        OPTIONAL('omega_c'): FINITE,
        OPTIONAL('gamma_r'): _NONNEGATIVE,
        OPTIONAL('gamma_c'): _NONNEGATIVE,
        OPTIONAL('floor'): FINITE,
        OPTIONAL('noise_frac'): _NONNEGATIVE,
        OPTIONAL('fractions'): [OPTIONAL(_NONNEGATIVE)],
        OPTIONAL('seeds'): UNION(_POSITIVE_INT, [OPTIONAL(NONNEGATIVE_INT)]),
        OPTIONAL('relative_to'): UNION('peak', 'mean'),
        OPTIONAL('boundary'): UNION('periodic', 'interior'),
        OPTIONAL('block_size'): _POSITIVE_INT,
        OPTIONAL('passes'): _POSITIVE_INT,
        OPTIONAL('sweeps'): _POSITIVE_INT,
        OPTIONAL('budget_policy'): UNION('uniform', 'proportional'),
        OPTIONAL('cross_column_weight'): _NONNEGATIVE,
        OPTIONAL('budget_mode'): UNION('exact', 'off_period'),
        OPTIONAL('off_period_samples'): _POSITIVE_INT,
        OPTIONAL('hardware_profile_check'): bool,
        OPTIONAL('record_timings'): bool,
        OPTIONAL('trim'): NONNEGATIVE_INT,
        OPTIONAL('restarts'): _POSITIVE_INT,
        OPTIONAL('max_iterations'): _POSITIVE_INT,
        OPTIONAL('step_size'): _NONNEGATIVE,
        OPTIONAL('noise_initial'): _NONNEGATIVE,
        OPTIONAL('noise_decay'): _NONNEGATIVE,
        OPTIONAL('convergence_tol'): _NONNEGATIVE,
        OPTIONAL('convergence_window'): _POSITIVE_INT,
        OPTIONAL('local_search_moves'): NONNEGATIVE_INT,
        OPTIONAL('dirichlet_concentration'): _NONNEGATIVE,
        OPTIONAL('step_normalization'): bool,
        OPTIONAL('seed'): NONNEGATIVE_INT,
        OPTIONAL('input'): str,
        OPTIONAL('output'): str,
        OPTIONAL('truth'): str,
        OPTIONAL('measured'): str,
        OPTIONAL('recovered'): str,
    }


_SOLVER_KEYS = {
    'restarts': 'restarts',
    'max_iterations': 'max_iterations',
    'step_size': 'step_size',
    'noise_initial': 'noise_initial',
    'noise_decay': 'noise_decay',
    'convergence_tol': 'convergence_tol',
    'convergence_window': 'convergence_window',
    'local_search_moves': 'local_search_moves',
    'dirichlet_concentration': 'dirichlet_concentration',
    'step_normalization': 'step_normalization',
    'seed': 'seed',
}


def _settings(args):
    """defaults, then the --config file, then explicit flags"""
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        with open(args.config) as fp:
            text = fp.read()
        try:
            doc = serialization.loads(text)
        except ValueError as exc:
            raise InputError("%s is not JSON: %s" % (args.config, exc))
        ExperimentConfig(doc).validate()
        if 'preset' in doc:
            settings.update(PRESETS[doc['preset']])
        settings.update(doc)
    if getattr(args, "preset", None):
        settings.update(PRESETS[args.preset])
    for key, value in vars(args).items():
        if key in ("config", "handler", "verbose", "quiet", "preset"):
            continue
        if value is not None:
            settings[key] = value
    return settings


def _require(settings, *keys):
    missing = [k for k in keys if settings.get(k) is None]
    if missing:
        raise InputError("missing required option(s): %s" %
                ", ".join("--" + k.replace("_", "-") for k in missing))


def _solver_config(settings):
    values = dict((field, settings[key]) for key, field in
            _SOLVER_KEYS.items() if settings.get(key) is not None)
    return SolverConfig(**values).validate()


##
## generate
##

def _make_truth(settings):
    if settings['kind'] == 'sin1d':
        return datagen.decaying_sinusoid_1d(settings['length'],
                settings['amplitude'], settings['omega'], settings['gamma'],
                settings['floor'])
    return datagen.decaying_sinusoid_2d(settings['rows'], settings['cols'],
            settings['amplitude'], settings['omega_r'], settings['omega_c'],
            settings['gamma_r'], settings['gamma_c'], settings['floor'])


def cmd_generate(settings):
    _require(settings, 'output')
    truth = _make_truth(settings)
    serialization.dump_csv(settings['output'], truth.counts)
    meta = dict(truth.meta, seed=settings['seed'],
            shape=list(truth.counts.shape))
    serialization.dump_meta(settings['output'], meta)
    log.info("wrote %s %s", settings['output'], truth.counts.shape)
    return EXIT_OK


##
## corrupt
##

def _as_data(counts, meta=None):
    counts = np.asarray(counts)
    if counts.ndim == 1:
        return smoothness.MeasuredFrame(counts, meta or {})
    return pipeline.Image2D(counts, meta or {})


def _read_meta_if_present(path):
    if os.path.exists(serialization.meta_path(path)):
        return serialization.load_meta(path)
    return {}


def cmd_corrupt(settings):
    _require(settings, 'input', 'output', 'noise_frac')
    truth = _as_data(serialization.load_csv(settings['input']),
            _read_meta_if_present(settings['input']))
    spec = datagen.CorruptionSpec(settings['noise_frac'], settings['seed'],
            datagen.RelativeTo(settings['relative_to']))
    record = datagen.poisson_corrupt(truth, spec)
    serialization.dump_csv(settings['output'], record.measured.counts)
    meta = dict(record.meta(), noise_frac=settings['noise_frac'],
            truth=settings['input'], generator_meta=truth.meta,
            shape=list(record.measured.counts.shape))
    serialization.dump_meta(settings['output'], meta)
    log.info("wrote %s, lambda %.4g, true total %d", settings['output'],
            record.lambda_used, record.true_total)
    return EXIT_OK


##
## denoise
##

def _noise_total(settings, pixels):
    if settings.get('noise_total') is not None:
        if settings['noise_total'] < 0:
            raise InputError("--noise-total must be nonnegative")
        return settings['noise_total']
    meta_file = settings.get('from_meta')
    estimate = settings.get('estimate')
    if meta_file is None:
        raise InputError("supply --noise-total, --from-meta or --estimate "
                "with --from-meta")
    meta = serialization.load_meta(meta_file)
    if estimate:
        mode, _, samples = estimate.partition(":")
        if mode != "off-period" or not samples.isdigit():
            raise InputError("--estimate takes off-period:K")
        return datagen.estimate_from_off_period(meta['lambda'], pixels,
                int(samples), meta['seed'])
    if settings['budget_mode'] == 'off_period':
        return datagen.estimate_from_off_period(meta['lambda'], pixels,
                settings['off_period_samples'], meta['seed'])
    return int(meta['true_total'])


def _run_denoise(measured, total, settings, config):
    if isinstance(measured, pipeline.Image2D):
        return pipeline.denoise_2d(measured, total, settings['sweeps'],
                settings['budget_policy'], settings['cross_column_weight'],
                config, settings['boundary'])
    if settings.get('block_size'):
        return pipeline.denoise_1d_blocked(measured, total,
                settings['block_size'], settings['passes'], config,
                settings['budget_policy'])
    return pipeline.denoise_1d(measured, total, settings['boundary'], config)


def cmd_denoise(settings):
    _require(settings, 'input', 'output')
    config = _solver_config(settings)
    measured = _as_data(serialization.load_csv(settings['input']))
    total = _noise_total(settings, measured.counts.size)

    if settings.get('dump_energy'):
        if not isinstance(measured, smoothness.MeasuredFrame):
            raise InputError("--dump-energy applies to 1d input")
        poly = smoothness.build_cost_form(measured, settings['boundary'],
                total)
        serialization.write_text(settings['dump_energy'],
                serialization.dumps(poly))

    started = time.perf_counter()
    result = _run_denoise(measured, total, settings, config)
    elapsed = time.perf_counter() - started

    out = settings['output']
    serialization.dump_csv(os.path.join(out, "recovered.csv"),
            result.recovered)
    serialization.dump_csv(os.path.join(out, "noise.csv"), result.noise_field)
    serialization.write_text(os.path.join(out, "solve_report.json"),
            serialization.dumps(_report_document(result, settings)))
    meta = {
        'input': settings['input'],
        'noise_total': int(total),
        'final_cost': result.final_cost,
        'passes_completed': result.passes_completed,
        'objective_trace': result.objective_trace,
        'diagnostics': result.diagnostics,
        'solver_config': config,
        'boundary': settings['boundary'],
        'shape': list(result.recovered.shape),
    }
    if settings['record_timings']:
        meta['wall_time'] = elapsed
    serialization.dump_meta(os.path.join(out, "recovered.csv"), meta)

    if settings.get('trace_csv') and result.last_report is not None:
        serialization.dump_trace_csv(settings['trace_csv'],
                result.last_report.energy_trace)
    if settings.get('pgm'):
        if result.recovered.ndim != 2:
            raise InputError("--pgm applies to 2d input")
        clamped = serialization.dump_pgm(settings['pgm'], result.recovered)
        log.info("wrote %s, %d negative pixels clamped", settings['pgm'],
                clamped)
    if settings['hardware_profile_check']:
        pipeline.check_hardware_profile(result)

    log.info("recovered %s with budget %d, final cost %.6g", out, total,
            result.final_cost)
    return EXIT_OK


def _report_document(result, settings):
    return report_to_document(result.last_report,
            with_timing=settings['record_timings'])


##
## evaluate
##

class _Recovered(object):
    "just enough of a DenoiseResult for compute_metrics"
    def __init__(self, recovered, noise_field, final_cost):
        self.recovered = recovered
        self.noise_field = noise_field
        self.final_cost = final_cost


def _final_cost(measured, noise, settings):
    boundary = smoothness.BoundaryPolicy(settings['boundary'])
    if measured.ndim == 1:
        return smoothness.residual_cost(smoothness.MeasuredFrame(measured),
                boundary, noise)
    image = pipeline.Image2D(measured)
    weight = settings['cross_column_weight'] if image.cols > 1 else 0.0
    return pipeline._objective(image, noise, boundary, weight)


def cmd_evaluate(settings):
    _require(settings, 'truth', 'measured', 'recovered')
    truth = serialization.load_csv(settings['truth'])
    measured = serialization.load_csv(settings['measured'])
    recovered = serialization.load_csv(settings['recovered'])
    if not truth.shape == measured.shape == recovered.shape:
        raise ContractViolation("truth %s, measured %s and recovered %s "
                "shapes differ" % (truth.shape, measured.shape,
                    recovered.shape))
    noise = measured - recovered
    result = _Recovered(recovered, noise,
            _final_cost(measured, noise, settings))
    scores = metrics.compute_metrics(truth, measured, result,
            settings['trim'])
    text = serialization.dumps(scores)
    if settings.get('output'):
        serialization.write_text(settings['output'], text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


##
## sweep
##

def _seed_list(seeds):
    if isinstance(seeds, int):
        return list(range(seeds))
    return list(seeds)


def _one_run(fraction, seed, settings, out):
    started = time.perf_counter()
    truth = _make_truth(settings)
    spec = datagen.CorruptionSpec(fraction, seed,
            datagen.RelativeTo(settings['relative_to']))
    record = datagen.poisson_corrupt(truth, spec)
    total = datagen.estimate_noise_total(record,
            settings['budget_mode'], settings['off_period_samples'])
    config = dataclasses.replace(_solver_config(settings), seed=seed)
    result = _run_denoise(record.measured, total, settings, config)
    scores = metrics.compute_metrics(truth, record.measured, result,
            settings['trim'])
    elapsed = time.perf_counter() - started

    run_dir = os.path.join(out, "f%s_s%d" % (fraction, seed))
    serialization.dump_csv(os.path.join(run_dir, "truth.csv"), truth.counts)
    serialization.dump_csv(os.path.join(run_dir, "noisy.csv"),
            record.measured.counts)
    serialization.dump_csv(os.path.join(run_dir, "recovered.csv"),
            result.recovered)
    report = metrics.build_report("%s-f%s" % (settings['kind'], fraction),
            seed, truth.meta, record.meta(), config, scores,
            {'wall_time': elapsed} if settings['record_timings'] else None)
    serialization.write_text(os.path.join(run_dir, "report.json"),
            serialization.dumps(report))
    return scores, elapsed


def cmd_sweep(settings):
    _require(settings, 'output', 'fractions', 'seeds')
    fractions = list(settings['fractions'])
    seeds = _seed_list(settings['seeds'])
    if not fractions or not seeds:
        raise InputError("a sweep needs at least one fraction and one seed")
    out = settings['output']
    runs = [(f, s) for f in fractions for s in seeds]

    def attempt(run):
        try:
            return _one_run(run[0], run[1], settings, out), None
        except (NoiseReversalError, OSError) as exc:
            log.error("run fraction=%s seed=%d failed: %s", run[0], run[1],
                    exc)
            return None, exc

    with ThreadPoolExecutor(max_workers=pipeline.worker_count()) as pool:
        outcomes = list(pool.map(attempt, runs))

    lines = ["fraction,seed,rmse_noisy,rmse_recovered,improvement_factor,"
            "wall_time,status"]
    failed = 0
    for (fraction, seed), (done, exc) in zip(runs, outcomes):
        if exc is not None:
            failed += 1
            lines.append("%s,%d,,,,,failed: %s" % (fraction, seed,
                str(exc).replace(",", ";")))
            continue
        scores, elapsed = done
        lines.append("%s,%d,%r,%r,%s,%s,ok" % (fraction, seed,
            scores.rmse_noisy, scores.rmse_recovered,
            "inf" if math.isinf(scores.improvement_factor)
                else repr(scores.improvement_factor),
            repr(elapsed) if settings['record_timings'] else ""))
    serialization.write_text(os.path.join(out, "aggregate.csv"),
            "\n".join(lines) + "\n")
    log.info("sweep of %d runs, %d failed", len(runs), failed)
    return EXIT_PARTIAL if failed else EXIT_OK


##
## argument parsing
##

def _fraction_list(text):
    try:
        return [float(f) for f in text.split(",") if f.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated numbers")


def _seeds(text):
    if "," in text:
        return [int(s) for s in text.split(",") if s.strip()]
    return int(text)


def _add_solver_flags(parser):
    group = parser.add_argument_group("solver")
    group.add_argument("--restarts", type=int)
    group.add_argument("--max-iterations", type=int)
    group.add_argument("--step-size", type=float)
    group.add_argument("--noise-initial", type=float)
    group.add_argument("--noise-decay", type=float)
    group.add_argument("--convergence-tol", type=float)
    group.add_argument("--convergence-window", type=int)
    group.add_argument("--local-search-moves", type=int)
    group.add_argument("--dirichlet-concentration", type=float)
    group.add_argument("--raw-step", dest="step_normalization",
            action="store_const", const=False)


def _add_pipeline_flags(parser):
    group = parser.add_argument_group("pipeline")
    group.add_argument("--boundary", choices=("periodic", "interior"))
    group.add_argument("--block-size", type=int)
    group.add_argument("--passes", type=int)
    group.add_argument("--sweeps", type=int)
    group.add_argument("--budget-policy", choices=("uniform", "proportional"))
    group.add_argument("--cross-weight", dest="cross_column_weight",
            type=float)
    group.add_argument("--check-hardware", dest="hardware_profile_check",
            action="store_const", const=True)
    group.add_argument("--record-timings", action="store_const", const=True)


def _add_generator_flags(parser):
    group = parser.add_argument_group("ground truth")
    group.add_argument("--kind", choices=("sin1d", "sin2d"))
    group.add_argument("--len", dest="length", type=int)
    group.add_argument("--rows", type=int)
    group.add_argument("--cols", type=int)
    group.add_argument("--amp", dest="amplitude", type=float)
    group.add_argument("--omega", type=float)
    group.add_argument("--gamma", type=float)
    group.add_argument("--omega-r", type=float)
    group.add_argument("--omega-c", type=float)
    group.add_argument("--gamma-r", type=float)
    group.add_argument("--gamma-c", type=float)
    group.add_argument("--floor", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="noisereversal",
            description="noise reversal by emulated mean-field photon loops")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, handler, help):
        p = sub.add_parser(name, help=help)
        p.set_defaults(handler=handler)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int)
        return p

    p = command("generate", cmd_generate, "write a ground-truth CSV")
    _add_generator_flags(p)
    p.add_argument("-o", dest="output")

    p = command("corrupt", cmd_corrupt, "add Poisson background counts")
    p.add_argument("-i", dest="input")
    p.add_argument("--noise-frac", type=float)
    p.add_argument("--relative-to", choices=("peak", "mean"))
    p.add_argument("-o", dest="output")

    p = command("denoise", cmd_denoise, "reverse the noise of a CSV")
    p.add_argument("-i", dest="input")
    p.add_argument("-o", dest="output", help="output directory")
    budget = p.add_mutually_exclusive_group()
    budget.add_argument("--noise-total", type=int)
    budget.add_argument("--from-meta")
    p.add_argument("--estimate", help="off-period:K, needs --from-meta")
    p.add_argument("--dump-energy")
    p.add_argument("--trace-csv")
    p.add_argument("--pgm")
    _add_solver_flags(p)
    _add_pipeline_flags(p)

    p = command("evaluate", cmd_evaluate, "score a recovery")
    p.add_argument("--truth")
    p.add_argument("--measured")
    p.add_argument("--recovered")
    p.add_argument("--trim", type=int)
    p.add_argument("--boundary", choices=("periodic", "interior"))
    p.add_argument("--cross-weight", dest="cross_column_weight", type=float)
    p.add_argument("-o", dest="output")

    p = command("sweep", cmd_sweep, "run a grid of noise levels and seeds")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--fractions", type=_fraction_list)
    p.add_argument("--seeds", type=_seeds,
            help="a count, or comma-separated seeds")
    p.add_argument("--relative-to", choices=("peak", "mean"))
    p.add_argument("--budget-mode", choices=("exact", "off_period"))
    p.add_argument("--off-period-samples", type=int)
    p.add_argument("--trim", type=int)
    p.add_argument("-o", dest="output")
    _add_generator_flags(p)
    _add_solver_flags(p)
    _add_pipeline_flags(p)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, stream=sys.stderr,
            format="%(levelname)s %(name)s: %(message)s")

    try:
        settings = _settings(args)
        return args.handler(settings)
    except (InputError, InvalidDocument, ContractViolation) as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write("error: %s\n" % exc)
        return EXIT_USAGE
    except SolverError as exc:
        sys.stderr.write("solver failed: %s\n" % exc)
        return EXIT_SOLVER
    except OSError as exc:
        sys.stderr.write("i/o error: %s\n" % exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
