"""
stablelab decorators

Timing and call tracing for study runners and estimators. Messages go
through the ``stablelab`` logger hierarchy; handlers are configured by the
command-line entry point only.
"""

import functools
import logging
import time

logger = logging.getLogger("stablelab")


def _short(value, limit: int = 80) -> str:
    text = repr(value)
    return text if len(text) <= limit else text[: limit - 3] + "..."


def profile_execution(level=logging.INFO):
    """
    Measure execution time with ``time.perf_counter`` and log it.

    The wrapped function's result is returned unchanged; the last duration
    is kept on the wrapper as ``last_walltime``.
    """
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            result = func(*args, **kwargs)
            duration = time.perf_counter() - start
            wrapper.last_walltime = duration
            logger.log(level, "[PROFILE] %s ran in %.4fs", func.__name__, duration)
            return result
        wrapper.last_walltime = None
        return wrapper
    return decorator


def log_calls(level=logging.INFO):
    """
    Log function calls and arguments.

    Args:
        level (int): Logging level
    """
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            if logger.isEnabledFor(level):
                logger.log(
                    level,
                    "[CALL] %s called with args=%s, kwargs=%s",
                    func.__name__,
                    [_short(a) for a in args],
                    {k: _short(v) for k, v in kwargs.items()},
                )
            return func(*args, **kwargs)
        return wrapper
    return decorator
