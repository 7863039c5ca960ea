import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    """Worker cap from MODEKIT_THREADS; defaults to the cores this process may use."""
    raw = os.environ.get("MODEKIT_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"MODEKIT_THREADS must be an integer, got {raw!r}") from None
    if hasattr(os, "sched_getaffinity"):
        return len(os.sched_getaffinity(0)) or 1
    return os.cpu_count() or 1


def pmap(func, items):
    """Order-preserving map; threads only when MODEKIT_THREADS (or cores) > 1."""
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
