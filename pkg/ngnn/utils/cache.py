import os
from datetime import datetime
from typing import Dict, Any, Optional

from ngnn.utils.system import read_json, write_json, ensure_dir

__all__ = ['RunCache', 'RunCacheOperator']


class RunCacheOperator:
    """
    RunCacheOperator handles storing and resuming the record of a single run.
    """

    def __init__(self, cache: 'RunCache', key: str):
        """
        Args:
            cache: The cache instance to which this operator belongs.
            key (str): The run key, e.g. "<config hash>-seed<seed>".
        """
        self.cache = cache
        self.key = key
        self.content: Optional[Dict[str, Any]] = None

    def resume(self) -> Optional[Dict[str, Any]]:
        """
        Resume the stored record of this run.

        Returns:
            dict: The stored record, or None if the run has not finished before (or caching is off).
        """
        if not self.cache.enabled:
            return None
        path = self.cache.path(self.key)
        if os.path.exists(path):
            return read_json(path)
        return None

    def store(self, value: Dict[str, Any]) -> None:
        """
        Stage a record; it is written when the context exits without an error.
        """
        self.content = dict(value)
        self.content.setdefault('stored_at', datetime.now().strftime("%Y-%m-%d %H:%M:%S"))

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if exc_type is None and self.content is not None:
            write_json(self.cache.path(self.key), self.content)


class RunCache:
    """
    RunCache keeps one JSON file per finished run under `<out_dir>/runs`. The files are both the per-run
    result artifacts and the cache that lets an interrupted sweep resume.
    """

    def __init__(self, out_dir: str, enabled: bool = True):
        """
        Args:
            out_dir (str): The output directory of the command.
            enabled (bool): When False, `resume` never hits but records are still written.
        """
        self.run_dir = ensure_dir(os.path.join(out_dir, 'runs'))
        self.enabled = enabled

    def path(self, key: str) -> str:
        return os.path.join(self.run_dir, f"{key}.json")

    def keys(self):
        return sorted(f[:-5] for f in os.listdir(self.run_dir) if f.endswith('.json'))

    def __call__(self, key: str) -> RunCacheOperator:
        return RunCacheOperator(self, key)

    def __str__(self) -> str:
        return "\n".join(self.keys())
