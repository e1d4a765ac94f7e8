"""
recovery quality and experiment reports

improvement_factor = rmse(measured, truth) / rmse(recovered, truth); a
perfect recovery reports infinity, which JSON documents carry as "inf",
unless the measurement was already perfect, which scores 1.
"""

from dataclasses import asdict, dataclass
import math

import numpy as np

from .errors import ContractViolation, InputError
from .schemas import Message, ANY, FINITE, NONNEGATIVE_INT, OPTIONAL, UNION


__all__ = ["RecoveryMetrics", "rmse", "compute_metrics", "trim_border",
        "build_report", "ReportMessage", "MetricsMessage", "metrics_from_document",
        "REPORT_VERSION"]

REPORT_VERSION = "1"


@dataclass
class RecoveryMetrics:
    rmse_noisy: float
    rmse_recovered: float
    improvement_factor: float
    residual_cost: float
    budget_used: int
    trim: int = 0

    def to_document(self):
        return asdict(self)


def trim_border(values, k):
    "drop `k` pixels from every border of a 1d or 2d array"
    values = np.asarray(values)
    if k < 0:
        raise InputError("trim must be nonnegative")
    if k == 0:
        return values
    if any(2 * k >= n for n in values.shape):
        raise InputError("trim of %d leaves nothing of shape %s" %
                (k, values.shape))
    return values[tuple(slice(k, n - k) for n in values.shape)]


def rmse(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractViolation("shapes %s and %s differ" % (a.shape, b.shape))
    if not a.size:
        return 0.0
    diff = a - b
    return math.sqrt(float(np.mean(diff * diff)))


def compute_metrics(truth, measured, result, trim=0):
    """score a DenoiseResult against the ground truth

    `truth` and `measured` are arrays (or frames/images) of the result's
    shape; `trim` restricts both rmse values to the interior.
    """
    truth = np.asarray(getattr(truth, "counts", truth))
    measured = np.asarray(getattr(measured, "counts", measured))
    recovered = np.asarray(result.recovered)
    if not truth.shape == measured.shape == recovered.shape:
        raise ContractViolation("truth %s, measured %s and recovered %s "
                "shapes differ" % (truth.shape, measured.shape,
                    recovered.shape))
    noisy = rmse(trim_border(measured, trim), trim_border(truth, trim))
    recov = rmse(trim_border(recovered, trim), trim_border(truth, trim))
    if recov == 0:
        factor = 1.0 if noisy == 0 else math.inf
    else:
        factor = noisy / recov
    return RecoveryMetrics(noisy, recov, factor, float(result.final_cost),
            int(np.asarray(result.noise_field).sum()), int(trim))


_NUMBER_OR_SENTINEL = UNION(FINITE, "inf")


class MetricsMessage(Message):
    SCHEMA = {
        'rmse_noisy': FINITE,
        'rmse_recovered': FINITE,
        'improvement_factor': _NUMBER_OR_SENTINEL,
        'residual_cost': FINITE,
        'budget_used': NONNEGATIVE_INT,
        'trim': NONNEGATIVE_INT,
    }


def metrics_from_document(doc):
    MetricsMessage(doc).validate()
    doc = dict(doc)
    if doc['improvement_factor'] == "inf":
        doc['improvement_factor'] = math.inf
    return RecoveryMetrics(**doc)


class ReportMessage(Message):
    SCHEMA = {
        'version': REPORT_VERSION,
        'experiment': str,
        'seed': NONNEGATIVE_INT,
        'generator_meta': ANY,
        'corruption_meta': ANY,
        'solver_config': {str: ANY},
        'metrics': MetricsMessage.SCHEMA,
        OPTIONAL('timings'): {str: FINITE},
    }


def build_report(experiment, seed, generator_meta, corruption_meta,
        solver_config, metrics, timings=None):
    "the report document; timings are only included when given"
    doc = {
        'version': REPORT_VERSION,
        'experiment': experiment,
        'seed': int(seed),
        'generator_meta': generator_meta,
        'corruption_meta': corruption_meta,
        'solver_config': asdict(solver_config),
        'metrics': metrics.to_document(),
    }
    if timings is not None:
        doc['timings'] = dict(timings)
    return doc
