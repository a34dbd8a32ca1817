"""
Process Management Utility for delayshare

Runs indexed work chunks (permutation blocks, study runs) on a pool of worker
processes and merges the results strictly in chunk order, so the outcome never
depends on how many workers took part.
"""

import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

import psutil

from utils.logger_config import get_logger

# Context installed in each worker process by the pool initializer
_WORKER_CONTEXT: Any = None


def _install_context(context: Any) -> None:
    global _WORKER_CONTEXT
    _WORKER_CONTEXT = context


def _run_chunk(fn: Callable[[Any, int], Any], index: int) -> Any:
    return fn(_WORKER_CONTEXT, index)


@dataclass
class TrackedProcess:
    """A worker process started for the current pool."""
    pid: int
    name: str
    start_time: float


class ProcessManager:
    """Dispatches chunked work to worker processes with reliable cleanup."""

    def __init__(self):
        self.tracked_processes: Dict[int, TrackedProcess] = {}
        self.logger = get_logger(__name__)

    def run_chunks(self, fn: Callable[[Any, int], Any], context: Any,
                   n_chunks: int, workers: int = 1, label: str = "chunks") -> List[Any]:
        """
        Evaluate fn(context, i) for i in range(n_chunks).

        Args:
            fn: Module-level function (it must be picklable for the pool)
            context: Read-only data shared by every chunk
            n_chunks: Number of chunks
            workers: Worker processes; 1 runs everything in this process
            label: Name used in log messages

        Returns:
            Chunk results ordered by chunk index
        """
        if n_chunks <= 0:
            return []
        workers = max(1, min(workers, n_chunks))
        if workers == 1:
            self.logger.debug(f"Running {n_chunks} {label} inline")
            return [fn(context, i) for i in range(n_chunks)]

        self.logger.info(f"Running {n_chunks} {label} on {workers} worker processes")
        results: List[Optional[Any]] = [None] * n_chunks
        executor = ProcessPoolExecutor(max_workers=workers, initializer=_install_context,
                                       initargs=(context,))
        try:
            futures = {executor.submit(_run_chunk, fn, i): i for i in range(n_chunks)}
            self.track_pool_workers()
            for future in as_completed(futures):
                results[futures[future]] = future.result()
        except BaseException as e:
            self.logger.error(f"Aborting {label}: {e!r}")
            executor.shutdown(wait=False, cancel_futures=True)
            self.cleanup_all_tracked(force_kill=True)
            raise
        else:
            executor.shutdown(wait=True)
        finally:
            self.tracked_processes.clear()
        return results

    def track_pool_workers(self) -> List[int]:
        """Start tracking the worker processes forked for the running pool."""
        found = []
        for child in psutil.Process().children():
            if child.pid in self.tracked_processes:
                continue
            try:
                self.tracked_processes[child.pid] = TrackedProcess(
                    pid=child.pid, name=child.name(), start_time=time.time()
                )
                found.append(child.pid)
            except (psutil.NoSuchProcess, psutil.AccessDenied):
                continue
        if found:
            self.logger.debug(f"Tracking worker processes {found}")
        return found

    def cleanup_all_tracked(self, force_kill: bool = False, timeout: float = 5.0) -> int:
        """
        Terminate every tracked worker that is still alive.

        Returns:
            int: Number of processes terminated
        """
        terminated = 0
        for pid, tracked in list(self.tracked_processes.items()):
            try:
                process = psutil.Process(pid)
                if force_kill:
                    process.kill()
                else:
                    process.terminate()
                    try:
                        process.wait(timeout=timeout)
                    except psutil.TimeoutExpired:
                        process.kill()
                terminated += 1
                self.logger.info(f"Terminated worker {tracked.name} (PID: {pid})")
            except (psutil.NoSuchProcess, psutil.AccessDenied):
                pass
            del self.tracked_processes[pid]
        return terminated


# Global process manager instance for easy access
process_manager = ProcessManager()
