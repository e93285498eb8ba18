import logging

logger = logging.getLogger('probing.runs')


class RunLogger:
    """Structured events for sweeps and oracle runs"""

    @staticmethod
    def log(level, event, message, run_id=None, details=None):
        """Emit one structured record; the event fields travel in `extra`."""
        try:
            extra = {'event': event}
            if run_id is not None:
                extra['run_id'] = run_id
            if details:
                extra.update({f"detail_{key}": value for key, value in details.items()})
            logger.log(getattr(logging, level), message, extra=extra)
            return extra
        except Exception as e:
            logging.getLogger(__name__).error(f"Failed to emit run log: {e}")
            return None

    @staticmethod
    def run_started(run_id, experiment, points, workers=1, use_celery=False):
        return RunLogger.log('INFO', 'run_started',
                             f"Sweep {experiment} started with {points} points",
                             run_id=run_id,
                             details={'experiment': experiment, 'points': points,
                                      'workers': workers, 'celery': use_celery})

    @staticmethod
    def row_failed(run_id, index, error):
        return RunLogger.log('WARNING', 'row_failed', f"Sweep row {index} failed: {error}",
                             run_id=run_id, details={'index': index, 'error': str(error)})

    @staticmethod
    def run_finished(run_id, experiment, rows, failed, wall_time):
        level = 'WARNING' if failed else 'INFO'
        return RunLogger.log(level, 'run_finished',
                             f"Sweep {experiment} finished: {rows} rows, {failed} failed in {wall_time:.2f}s",
                             run_id=run_id,
                             details={'rows': rows, 'failed': failed, 'wall_time': wall_time})

    @staticmethod
    def oracle_step(steps, change, dimension):
        return RunLogger.log('DEBUG', 'oracle_step',
                             f"Fock oracle refined to {steps} steps (overlap change {change:.3e})",
                             details={'steps': steps, 'change': change, 'dimension': dimension})
