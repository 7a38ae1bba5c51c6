"""
Stopwatch for wall-time accounting
"""

import time
from typing import List, Optional


class Stopwatch:
    """
    Wall-clock stopwatch

    Usable as a context manager:

        with Stopwatch() as watch:
            ...
        watch.elapsed
    """

    def __init__(self):
        self.start_time: Optional[float] = None
        self.end_time: Optional[float] = None
        self.is_running = False

    def start(self) -> 'Stopwatch':
        """Start (or restart) timing"""
        self.start_time = time.perf_counter()
        self.end_time = None
        self.is_running = True
        return self

    def stop(self) -> float:
        """
        Stop the stopwatch

        Returns:
            Elapsed time in seconds
        """
        if not self.is_running:
            return self.elapsed
        self.end_time = time.perf_counter()
        self.is_running = False
        return self.elapsed

    @property
    def elapsed(self) -> float:
        """Seconds since start (0 if never started)"""
        if self.start_time is None:
            return 0.0
        end = self.end_time if self.end_time is not None else time.perf_counter()
        return end - self.start_time

    def __enter__(self) -> 'Stopwatch':
        return self.start()

    def __exit__(self, *exc_info):
        self.stop()


class LapStats:
    """Per-item durations (e.g. seconds per defended image)"""

    def __init__(self):
        self.times: List[float] = []

    def add(self, seconds: float):
        self.times.append(seconds)

    @property
    def total(self) -> float:
        return sum(self.times)

    @property
    def mean(self) -> float:
        return self.total / len(self.times) if self.times else 0.0
