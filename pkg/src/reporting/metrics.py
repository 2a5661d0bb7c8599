import csv
import json
import logging
import os

import psutil

METRICS_HEADER = ["iter", "outcome", "loss", "accuracy", "coarse_time", "comm_time", "comp_time", "rollbacks"]


def _num(value):
    return "" if value is None else format(value, ".17g")


class MetricsWriter:
    """Streams one metrics.csv row per executed training step."""

    def __init__(self, path):
        self.logger = logging.getLogger(__name__)
        self.path = path
        self._file = None
        self._writer = None
        self._last_iter = 0

    def __enter__(self):
        try:
            self._file = open(self.path, "w", newline="")
        except OSError as e:
            self.logger.error(f"Error opening metrics file: {e}")
            raise
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._writer.writerow(METRICS_HEADER)
        return self

    def __exit__(self, *exc):
        if self._file:
            self._file.close()
            self._file = None
        return False

    def write(self, row):
        if row.iter <= self._last_iter:
            raise ValueError(f"metrics rows must have increasing iter, got {row.iter} after {self._last_iter}")
        self._last_iter = row.iter
        self._writer.writerow([row.iter, row.outcome, _num(row.loss), _num(row.accuracy),
                               _num(row.coarse_time), _num(row.comm_time), _num(row.comp_time), row.rollbacks])


def resource_footprint():
    """Resident memory and CPU seconds of this process."""
    proc = psutil.Process(os.getpid())
    mem = proc.memory_info()
    cpu = proc.cpu_times()
    return {
        "rss_bytes": int(mem.rss),
        "cpu_user_seconds": cpu.user,
        "cpu_system_seconds": cpu.system,
    }


def write_run_report(path, report):
    try:
        with open(path, "w") as f:
            json.dump(report, f, indent=4, sort_keys=True, default=str)
        logging.getLogger(__name__).info(f"Run report written to {path}")
    except OSError as e:
        logging.getLogger(__name__).error(f"Error writing run report: {e}")
        raise
