"""
Module for the persistent log stash.
"""

import json
from datetime import datetime, timezone

import yaml

from .errors import ConfigError


def datetime_hack(x):
    """
    JSON dumper hack, as the base implementation of datetime doesn't understand how to convert it to JSON. Also handles numpy scalars.

    Parameters
    ----------
    x : object
        The object the JSON dumper could not handle.

    Returns
    -------
    str or float or int
        A JSON-representable form of the object.

    Raises
    ------
    TypeError
        If x is of an unsupported type.
    """
    if isinstance(x, datetime):
        return x.isoformat()
    if hasattr(x, "item"):
        return x.item()
    if hasattr(x, "tolist"):
        return x.tolist()
    raise TypeError("Unknown type")


class LogHolder:
    """
    Log stash object. Contains a list of log message from this and past runs. Interacts with the log storage yaml file to store and reload
    log messages.

    Does not need to be instantiated, Common holds an instance of this.

    Attributes
    ----------
    file_path : pathlib.Path
        The log storage yaml file.
    retention : dict
        The log retention settings, with the keys "max_lines" and "max_age". Non-positive values disable the limit.
    raw_entries : list(dict)
        A list of raw log entries, newest first.
    """

    def __init__(self, file_path, retention):
        self.file_path = file_path
        self.retention = retention
        self.raw_entries = []
        self.parse_log_messages()

    def parse_log_messages(self):
        """
        Reads all raw entries from the disk storage and loads it into raw_entries.
        """
        if self.file_path.exists():
            with self.file_path.open("r", encoding="utf-8") as file:
                try:
                    self.raw_entries = yaml.safe_load(file.read())
                except yaml.YAMLError as error:
                    raise ConfigError(f"Cannot parse the log stash {self.file_path}: {error}") from error
        if self.raw_entries is None:
            self.raw_entries = []

    def write_raw_entries(self):
        """
        Writes the loaded raw entries to disk. Expunges log entries that go over log retention limits on lines or age.
        """
        limit = self.retention.get("max_lines", -1)
        max_idx = limit if limit > 0 else len(self.raw_entries)
        age_limit = self.retention.get("max_age", -1)
        now = datetime.now(timezone.utc).timestamp()
        if age_limit > 0:
            for idx, raw_entry in enumerate(self.raw_entries):
                if now - raw_entry["timestamp"] > age_limit:
                    max_idx = min(max_idx, idx)
                    break

        self.raw_entries = self.raw_entries[:max_idx]

        with self.file_path.open("w", encoding="utf-8") as file:
            file.write(yaml.dump(self.raw_entries))

    def entries(self, limit=None, category=None):
        """
        Lists stored entries, newest first, with their context decoded.

        Parameters
        ----------
        limit : int, optional
            The maximum number of entries to return.
        category : str, optional
            Only return entries of this category.

        Returns
        -------
        list(dict)
            The matching entries.
        """
        ret = []
        for entry in self.raw_entries:
            if category is not None and entry["category"] != category:
                continue
            decoded = dict(entry)
            decoded["context"] = json.loads(entry.get("context", "{}"))
            decoded["time"] = datetime.fromtimestamp(
                entry["timestamp"], timezone.utc
            ).strftime("%Y-%m-%d %H:%M:%S UTC")
            ret.append(decoded)
            if limit is not None and len(ret) >= limit:
                break
        return ret

    def log(
        self,
        message,
        summary,
        category,
        message_type,
        subcategory=None,
        resource=None,
        **kwargs,
    ):
        """
        Adds a new log message to the log stash.

        See the documentation of Common.log() for the documentation of the parameters.

        Returns
        -------
        dict
            The stored raw entry.
        """
        self.raw_entries.insert(
            0,
            {
                "summary": summary,
                "category": category,
                "subcategory": subcategory,
                "type": message_type,
                "message": message,
                "resource": resource,
                "timestamp": datetime.now(timezone.utc).timestamp(),
                "context": json.dumps(kwargs, default=datetime_hack, sort_keys=True),
            },
        )
        self.write_raw_entries()
        return self.raw_entries[0]
