from celery import shared_task
import logging

from .config_utils import build_models
from .exceptions import ProbingError
from .oracle_utils import oracle_compare
from .sweep_utils import evaluate_point

logger = logging.getLogger(__name__)


@shared_task
def evaluate_point_task(point):
    """
    Evaluate one sweep point in a worker

    Args:
        point: resolved point document (core-model keys, optional dalpha)

    Returns:
        dict: sweep row; failures carry success=False and the error message
    """
    return evaluate_point(point)


@shared_task
def oracle_compare_task(document, steps=None):
    """Compare the Fock oracle with the closed-form pipeline for one desk-scale document"""
    try:
        models = build_models(document)
        result = oracle_compare(models.state, models.probe, models.qubit, models.cavity, steps=steps)
        result['success'] = True
        logger.info(f"Oracle comparison finished: phase mismatch {result['phase_mismatch']:.3e}")
        return result
    except ProbingError as e:
        logger.error(f"Oracle comparison failed: {e}")
        return {
            'success': False,
            'error': str(e),
        }
