"""Byte-budgeted LRU response cache with single-flight computation."""

import threading
from collections import OrderedDict


class ResponseCache:
    """Maps string keys to bytes. Concurrent identical requests share one
    computation; eviction only ever drops finished entries, so in-flight
    responses are never corrupted.
    """

    def __init__(self, max_bytes=256 * 1024 * 1024):
        self.max_bytes = max_bytes
        self._lock = threading.Lock()
        self._entries = OrderedDict()
        self._bytes = 0
        self._inflight = {}
        self.hits = 0
        self.misses = 0

    def get_or_compute(self, key, compute, force=False):
        if force:
            # forced recompute bypasses both the cache read and single-flight
            value = compute()
            self._store(key, value)
            return value
        while True:
            with self._lock:
                if key in self._entries:
                    self._entries.move_to_end(key)
                    self.hits += 1
                    return self._entries[key]
                event = self._inflight.get(key)
                if event is None:
                    self._inflight[key] = threading.Event()
                    break
            event.wait()
        try:
            value = compute()
        except BaseException:
            self._release(key)
            raise
        self._store(key, value)
        self._release(key)
        return value

    def _store(self, key, value):
        with self._lock:
            self.misses += 1
            if key in self._entries:
                self._bytes -= len(self._entries.pop(key))
            self._entries[key] = value
            self._bytes += len(value)
            while self._bytes > self.max_bytes and len(self._entries) > 1:
                _, dropped = self._entries.popitem(last=False)
                self._bytes -= len(dropped)

    def _release(self, key):
        with self._lock:
            event = self._inflight.pop(key, None)
        if event is not None:
            event.set()

    def stats(self):
        with self._lock:
            return {
                "entries": len(self._entries),
                "bytes": self._bytes,
                "hits": self.hits,
                "misses": self.misses,
            }
