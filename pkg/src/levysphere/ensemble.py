"""
Parallel execution of independent ensemble members.

Members are keyed; results are assembled in key order so that the output
does not depend on the thread count or completion order.
"""

import concurrent.futures
import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Hashable, List, Optional, Sequence, Tuple

from levysphere.errors import BlowUpError

logger = logging.getLogger(__name__)

_lock = threading.Lock()


@dataclass
class MemberResult:
    key: Hashable
    value: Any = None
    error: Optional[str] = None
    blow_up_time: Optional[float] = None
    elapsed: float = 0.0

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class EnsembleResult:
    """Ordered member results plus run metadata."""
    members: List[MemberResult] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def successes(self) -> List[MemberResult]:
        return [m for m in self.members if m.ok]

    @property
    def blow_ups(self) -> List[MemberResult]:
        return [m for m in self.members if m.blow_up_time is not None]

    @property
    def blow_up_fraction(self) -> float:
        return len(self.blow_ups) / len(self.members) if self.members else 0.0

    def values(self) -> List[Any]:
        return [m.value for m in self.successes]


def _run_member(key: Hashable, func: Callable[..., Any], args: Tuple[Any, ...]) -> MemberResult:
    start = time.time()
    try:
        value = func(*args)
        return MemberResult(key=key, value=value, elapsed=time.time() - start)
    except BlowUpError as e:
        logger.info("member %s blew up at t=%.6g", key, e.time)
        return MemberResult(key=key, error=str(e), blow_up_time=e.time, elapsed=time.time() - start)


def run_ensemble(
    tasks: Sequence[Tuple[Hashable, Callable[..., Any], Tuple[Any, ...]]],
    max_workers: int = 1,
    progress_callback: Optional[Callable[[str, str], None]] = None,
    label: str = 'ensemble'
) -> EnsembleResult:
    """
    Run (key, func, args) tasks in a thread pool.

    Blow-ups are recorded on the member; any other exception propagates.

    Args:
        tasks: Keyed work items; keys must be sortable and unique
        max_workers: Thread count (1 runs inline)
        progress_callback: Optional callback(label, status)
        label: Name reported to the callback

    Returns:
        EnsembleResult with members sorted by key
    """
    keys = [k for k, _, _ in tasks]
    if len(set(keys)) != len(keys):
        raise ValueError(f"{label}: duplicate member keys")
    start_time = time.time()
    results: Dict[Hashable, MemberResult] = {}
    completed = 0

    def on_complete(result: MemberResult) -> None:
        nonlocal completed
        with _lock:
            results[result.key] = result
            completed += 1
            if progress_callback:
                progress_callback(label, f"{completed}/{len(tasks)} members")

    if max_workers <= 1:
        for key, func, args in tasks:
            on_complete(_run_member(key, func, args))
    else:
        futures_map = {}
        with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
            for key, func, args in tasks:
                future = executor.submit(_run_member, key, func, args)
                futures_map[future] = key
            for future in concurrent.futures.as_completed(futures_map):
                on_complete(future.result())

    members = [results[k] for k in sorted(keys)]
    elapsed_time = time.time() - start_time
    n_blow = sum(1 for m in members if m.blow_up_time is not None)
    if n_blow:
        logger.warning("%s: %d of %d members blew up", label, n_blow, len(members))
    return EnsembleResult(
        members=members,
        metadata={
            'label': label,
            'timestamp': time.strftime('%Y-%m-%d %H:%M:%S UTC', time.gmtime()),
            'duration_seconds': round(elapsed_time, 2),
            'member_count': len(members),
            'blow_up_count': n_blow,
            'workers': max_workers,
        },
    )
