"""Ordered fan-out of independent tasks over a bounded process pool."""

from concurrent.futures import ProcessPoolExecutor


def run_tasks(fn, tasks, workers=1):
    """Return ``[fn(*t) for t in tasks]``, optionally evaluated in parallel.

    Results come back in task order whatever the completion order, so the
    reduction done by the caller is deterministic.
    """
    tasks = list(tasks)
    if workers is None or workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as ex:
        futures = [ex.submit(fn, *t) for t in tasks]
        return [f.result() for f in futures]
