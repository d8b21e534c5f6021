#!/usr/bin/env python
# coding: utf-8

import os
import sys
import time
import uuid
import logging
import datetime
import functools
import threading
from dataclasses import dataclass, field
from typing import Dict, Any, List, Optional

logger = logging.getLogger('galloping_prediction')

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'
LOG_DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


@dataclass
class PerformanceEntry:
    """One timed call recorded by time_execution."""
    function: str
    execution_time_ms: int
    execution_id: Optional[str]
    parameters: Dict[str, Any] = field(default_factory=dict)
    result: str = 'success'
    timestamp: datetime.datetime = field(default_factory=datetime.datetime.now)


class LogManager:
    """
    Manages application logging.

    This class provides functionality to:
    1. Setup logging to console (stderr) and dated files
    2. Track execution performance per execution ID
    3. Summarize an execution
    """

    def __init__(self):
        self.current_execution_id: Optional[str] = None
        self.performance_log: List[PerformanceEntry] = []
        self.loggers: Dict[str, logging.Logger] = {}
        self._lock = threading.Lock()

    def setup_logging(self, console: bool = True, file: bool = False, level: str = 'INFO',
                      log_directory: str = 'logs') -> logging.Logger:
        """
        Setup logging configuration.

        Args:
            console: Enable console logging (stderr, stdout stays free for results)
            file: Enable file logging
            level: Logging level
            log_directory: Directory for dated log files

        Returns:
            Configured logger
        """
        numeric_level = getattr(logging, str(level).upper(), None)
        if not isinstance(numeric_level, int):
            raise ValueError(f"Unknown log level '{level}'")

        root_logger = logging.getLogger('galloping_prediction')
        root_logger.setLevel(numeric_level)
        root_logger.propagate = False

        for handler in list(root_logger.handlers):
            root_logger.removeHandler(handler)
            handler.close()

        formatter = logging.Formatter(LOG_FORMAT, datefmt=LOG_DATE_FORMAT)

        if console:
            console_handler = logging.StreamHandler(sys.stderr)
            console_handler.setLevel(numeric_level)
            console_handler.setFormatter(formatter)
            root_logger.addHandler(console_handler)

        if file:
            os.makedirs(log_directory, exist_ok=True)
            log_file = os.path.join(
                log_directory, f'galloping_prediction_{datetime.datetime.now().strftime("%Y%m%d")}.log')
            file_handler = logging.FileHandler(log_file, encoding='utf-8')
            file_handler.setLevel(numeric_level)
            file_handler.setFormatter(formatter)
            root_logger.addHandler(file_handler)

        if not root_logger.handlers:
            root_logger.addHandler(logging.NullHandler())

        self.loggers['root'] = root_logger
        return root_logger

    def get_execution_id(self) -> str:
        """Generate a new execution ID."""
        self.current_execution_id = str(uuid.uuid4())
        return self.current_execution_id

    def log_performance(self, function_name: str, execution_time_ms: int, execution_id: Optional[str] = None,
                        parameters: Optional[Dict[str, Any]] = None, result: str = 'success'):
        """
        Log performance metrics.

        Args:
            function_name: Name of the function
            execution_time_ms: Execution time in milliseconds
            execution_id: Execution ID (optional)
            parameters: Function parameters (optional)
            result: Result status (success, error)
        """
        entry = PerformanceEntry(
            function=function_name,
            execution_time_ms=execution_time_ms,
            execution_id=execution_id or self.current_execution_id,
            parameters=parameters or {},
            result=result
        )
        with self._lock:
            self.performance_log.append(entry)
        logger.debug(f"{function_name} finished in {execution_time_ms} ms ({result})")

    def get_execution_summary(self, execution_id: Optional[str] = None) -> Dict[str, Any]:
        """
        Get summary of a specific execution.

        Args:
            execution_id: Execution ID (defaults to the current one)

        Returns:
            Dictionary with execution summary
        """
        execution_id = execution_id or self.current_execution_id
        with self._lock:
            entries = [e for e in self.performance_log if e.execution_id == execution_id]

        summary = {
            'execution_id': execution_id,
            'total_performance_logs': len(entries),
            'total_execution_time': sum(e.execution_time_ms for e in entries),
            'functions_called': [e.function for e in entries],
            'result_summary': {}
        }
        for entry in entries:
            summary['result_summary'][entry.result] = summary['result_summary'].get(entry.result, 0) + 1
        return summary


# Global log manager instance
_log_manager = None


def get_log_manager() -> LogManager:
    """Get the global log manager instance."""
    global _log_manager
    if _log_manager is None:
        _log_manager = LogManager()
    return _log_manager


def setup_logging(console: bool = True, file: bool = False, level: str = 'INFO',
                  log_directory: str = 'logs') -> logging.Logger:
    """Setup logging through the global log manager."""
    return get_log_manager().setup_logging(console, file, level, log_directory)


def time_execution(function_name: Optional[str] = None):
    """
    Decorator to time function execution and log performance.

    Args:
        function_name: Custom function name (optional)

    Returns:
        Decorated function
    """
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            log_manager = get_log_manager()
            start_time = time.perf_counter()
            func_name = function_name or func.__name__
            params = {
                'args_count': len(args),
                'kwargs_keys': sorted(kwargs.keys())
            }

            try:
                result = func(*args, **kwargs)
            except Exception:
                log_manager.log_performance(
                    func_name, int((time.perf_counter() - start_time) * 1000),
                    log_manager.current_execution_id, params, 'error')
                raise

            log_manager.log_performance(
                func_name, int((time.perf_counter() - start_time) * 1000),
                log_manager.current_execution_id, params, 'success')
            return result

        return wrapper
    return decorator
