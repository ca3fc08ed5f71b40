import functools
import logging
from typing import Any, Callable

from invofactor.core.errors import BuilderStuck

logger = logging.getLogger(__name__)


def retry_with_seed(max_retries: int = 4, exceptions: tuple = (BuilderStuck,), seed_kwarg: str = "seed"):
    """
    Decorator for seeded pipelines: on failure, re-run with the next seed.
    The final exception carries the list of attempted seeds in `detail["attempts"]`.
    """
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs) -> Any:
            start = kwargs.pop(seed_kwarg, 0) or 0
            attempts = []
            for attempt in range(max_retries):
                seed = start + attempt
                try:
                    return func(*args, **{**kwargs, seed_kwarg: seed})
                except exceptions as e:
                    attempts.append({"seed": seed, "error": str(e)})
                    if attempt == max_retries - 1:
                        logger.error(f"Function {func.__name__} failed after {max_retries} seeds. Error: {e}")
                        if hasattr(e, "detail"):
                            e.detail["attempts"] = attempts
                        raise e
                    logger.warning(
                        f"Function {func.__name__} failed (Attempt {attempt+1}/{max_retries}, seed {seed}). "
                        f"Retrying with seed {seed + 1}... Error: {e}"
                    )
        return wrapper
    return decorator
