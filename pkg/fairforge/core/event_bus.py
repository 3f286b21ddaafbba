"""
FairForge Event Bus
===================
In-process publish/subscribe used to stream training and attack progress to
observers (attack logs, the experiment engine, tests).
"""

import threading
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

from fairforge.utils.logger import get_logger


@dataclass
class Event:
    """One emitted event; ``sequence`` orders events within a bus."""
    name: str
    args: tuple
    kwargs: dict
    sequence: int
    source: Optional[str] = None


class EventBus:
    """
    Synchronous event bus.

    Features:
    - Exact and wildcard subscriptions ("attack.*", "*")
    - One-shot subscriptions
    - Bounded event history for inspection
    - Handler errors are logged, never propagated to the emitter
    - Thread-safe: seed workers may emit concurrently
    """

    def __init__(self, history_size: int = 1000, record: bool = True):
        self.logger = get_logger("EventBus")
        self.history_size = history_size
        self.record = record

        self._subscribers: Dict[str, List[Callable]] = defaultdict(list)
        self._once_subscribers: Dict[str, List[Callable]] = defaultdict(list)
        self._history: List[Event] = []
        self._sequence = 0
        self._lock = threading.RLock()

    def subscribe(self, event_name: str, callback: Callable):
        """
        Subscribe to an event.

        Args:
            event_name: Name of the event (supports wildcards like "attack.*")
            callback: Function to call when the event is emitted
        """
        with self._lock:
            self._subscribers[event_name].append(callback)
        self.logger.debug(f"Subscribed to: {event_name}")

    def subscribe_once(self, event_name: str, callback: Callable):
        with self._lock:
            self._once_subscribers[event_name].append(callback)

    def unsubscribe(self, event_name: str, callback: Callable):
        with self._lock:
            try:
                self._subscribers[event_name].remove(callback)
            except ValueError:
                pass

    def emit(self, event_name: str, *args, source: str = None, **kwargs):
        """
        Emit an event to every matching subscriber.

        Args:
            event_name: Name of the event
            *args: Positional arguments for handlers
            source: Optional source identifier
            **kwargs: Keyword arguments for handlers
        """
        with self._lock:
            self._sequence += 1
            event = Event(event_name, args, kwargs, self._sequence, source)
            if self.record:
                self._history.append(event)
                if len(self._history) > self.history_size:
                    self._history = self._history[-self.history_size:]
        self._dispatch_event(event)

    def _dispatch_event(self, event: Event):
        with self._lock:
            handlers = list(self._subscribers.get(event.name, []))
            for pattern, callbacks in self._subscribers.items():
                if self._matches_pattern(event.name, pattern):
                    handlers.extend(callbacks)
            handlers.extend(self._once_subscribers.pop(event.name, []))

        for handler in handlers:
            try:
                handler(*event.args, **event.kwargs)
            except Exception as e:
                self.logger.error(f"Handler error for {event.name}: {e}", exc_info=True)

    @staticmethod
    def _matches_pattern(event_name: str, pattern: str) -> bool:
        """Wildcard match; exact names are dispatched separately."""
        if pattern == event_name:
            return False
        if pattern == "*":
            return True
        if pattern.endswith(".*"):
            return event_name.startswith(pattern[:-2] + ".")
        return False

    def get_history(self, event_name: str = None, limit: int = 50) -> List[Event]:
        """Most recent events, optionally filtered by name."""
        with self._lock:
            events = [e for e in self._history if event_name is None or e.name == event_name]
            return events[-limit:]

    def clear_history(self):
        with self._lock:
            self._history.clear()

