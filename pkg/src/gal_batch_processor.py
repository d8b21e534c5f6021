#!/usr/bin/env python
# coding: utf-8

import gc
import time
import threading
import logging
import traceback
import concurrent.futures
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import psutil

logger = logging.getLogger('galloping_prediction')


class BatchProcessor:
    """
    Evaluates functions over large arrays in row blocks.

    Kernel blocks between a large query set and the support vectors, and
    neighbour distance blocks, are built one block at a time so memory stays
    bounded by batch_size rows.
    """

    def __init__(self, batch_size: int = 2048):
        """
        Initialize the batch processor.

        Args:
            batch_size: Rows per block
        """
        if batch_size < 1:
            raise ValueError("batch_size must be positive")
        self.batch_size = batch_size
        self.processing_stats = {
            'total_batches': 0,
            'total_records': 0
        }

    def map_batches(self, array: np.ndarray, process_func: Callable[..., np.ndarray],
                    **kwargs) -> np.ndarray:
        """
        Apply process_func to consecutive row blocks and concatenate.

        Args:
            array: Array whose first axis is split into blocks
            process_func: Function mapping a block (and its start offset) to a result block
            **kwargs: Additional arguments to pass to process_func

        Returns:
            Results concatenated along the first axis, in block order
        """
        total_rows = len(array)
        if total_rows == 0:
            return process_func(array, 0, **kwargs)

        batch_count = (total_rows + self.batch_size - 1) // self.batch_size
        self.processing_stats['total_batches'] += batch_count
        self.processing_stats['total_records'] += total_rows

        processed = []
        for i in range(batch_count):
            batch_start = i * self.batch_size
            batch_end = min((i + 1) * self.batch_size, total_rows)
            processed.append(process_func(array[batch_start:batch_end], batch_start, **kwargs))

        return processed[0] if batch_count == 1 else np.concatenate(processed, axis=0)

    def get_processing_stats(self) -> Dict[str, Any]:
        """Get current processing statistics."""
        return self.processing_stats.copy()


class ParallelProcessor:
    """
    Handles parallel execution of independent experiment tasks.

    This class provides functionality to:
    1. Execute multiple functions in parallel
    2. Return results in task order, independent of completion order
    3. Handle task failures gracefully
    4. Pause submission while memory is under pressure
    """

    def __init__(self, max_workers: int = 2, memory_pause_percent: float = 85.0):
        """
        Initialize the parallel processor.

        Args:
            max_workers: Maximum number of worker threads
            memory_pause_percent: Memory usage (%) above which submission waits
        """
        self.max_workers = max(1, int(max_workers))
        self.memory_pause_percent = memory_pause_percent
        self._lock = threading.Lock()
        self.execution_stats = {
            'total_tasks': 0,
            'completed_tasks': 0,
            'failed_tasks': 0,
            'total_execution_time': 0
        }

    def _wait_for_memory(self):
        memory_percent = psutil.virtual_memory().percent
        if memory_percent > self.memory_pause_percent:
            logger.warning(f"Memory usage is high ({memory_percent:.1f}%), pausing for 2 seconds")
            gc.collect()
            time.sleep(2)

    def _run_task(self, task_idx: int, func: Callable, args: Tuple, kwargs: Dict) -> Any:
        try:
            result = func(*args, **kwargs)
            with self._lock:
                self.execution_stats['completed_tasks'] += 1
            return result
        except Exception as e:
            logger.error(f"Error in task {task_idx+1}: {str(e)}")
            logger.debug(traceback.format_exc())
            with self._lock:
                self.execution_stats['failed_tasks'] += 1
            return None

    def execute_parallel(self, tasks: List[Tuple[Callable, Tuple, Dict]]) -> List[Any]:
        """
        Execute multiple tasks in parallel.

        Args:
            tasks: List of tuples containing (function, args, kwargs)

        Returns:
            List of results, results[i] belonging to tasks[i]; None where a task failed
        """
        if not tasks:
            logger.warning("No tasks to execute")
            return []

        start_time = time.time()
        results: List[Optional[Any]] = [None] * len(tasks)

        self.execution_stats['total_tasks'] = len(tasks)
        self.execution_stats['completed_tasks'] = 0
        self.execution_stats['failed_tasks'] = 0

        if self.max_workers == 1:
            for i, (func, args, kwargs) in enumerate(tasks):
                self._wait_for_memory()
                results[i] = self._run_task(i, func, args, kwargs)
        else:
            logger.debug(f"Executing {len(tasks)} tasks using {self.max_workers} workers")
            with concurrent.futures.ThreadPoolExecutor(max_workers=self.max_workers) as executor:
                future_to_task = {}
                for i, (func, args, kwargs) in enumerate(tasks):
                    self._wait_for_memory()
                    future_to_task[executor.submit(self._run_task, i, func, args, kwargs)] = i

                for future in concurrent.futures.as_completed(future_to_task):
                    results[future_to_task[future]] = future.result()

        self.execution_stats['total_execution_time'] = time.time() - start_time
        logger.debug(f"Parallel execution stats: {self.execution_stats}")
        return results

    def get_execution_stats(self) -> Dict[str, Any]:
        """Get current execution statistics."""
        return self.execution_stats.copy()


def get_batch_processor(batch_size: Optional[int] = None) -> BatchProcessor:
    """
    Create a batch processor.

    Args:
        batch_size: Rows per block (optional, read from configuration if not provided)
    """
    if batch_size is None:
        from gal_config_manager import get_config
        batch_size = get_config('batch_size', 2048)
    return BatchProcessor(batch_size=batch_size)


def get_parallel_processor(max_workers: Optional[int] = None) -> ParallelProcessor:
    """
    Create a parallel processor.

    Args:
        max_workers: Maximum number of workers (optional, read from configuration if not provided)
    """
    from gal_config_manager import get_config

    if max_workers is None:
        max_workers = get_config('max_workers', 2)
    return ParallelProcessor(max_workers=max_workers,
                             memory_pause_percent=get_config('memory_pause_percent', 85.0))
