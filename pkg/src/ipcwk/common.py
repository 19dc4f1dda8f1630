"""
Module for common storage and functions.
"""

import os
import sys
import traceback

from .config.config import Config
from .log import LogHolder


class Common:
    """
    Namespace class for common features used by ipcwk.

    Attributes
    ----------
    Configuration : ipcwk.config.config.Config
        The ipcwk configuration. None until initialized.
    _logholder : ipcwk.log.LogHolder
        The log stash object.
    initialized : bool
        Whether Common was initialized.
    quiet : bool
        Whether logged messages are also echoed to stderr.
    """

    Configuration = None
    _logholder = None
    initialized = False
    quiet = False

    @classmethod
    def initialize(cls, path=None):
        """
        Initialize Common. Loads and upgrades the configuration, and opens the log stash.

        Parameters
        ----------
        path : str or pathlib.Path, optional
            The configuration directory, if not default.
        """
        if cls.initialized:
            return
        cls.Configuration = Config(path)
        warnings = cls.Configuration.initialize()
        cls._logholder = LogHolder(
            cls.Configuration.path / "log.yaml",
            cls.Configuration["log_retention"],
        )
        cls.initialized = True
        for warning in warnings:
            cls.warning(warning, "Configuration version", "Core")

    @classmethod
    def reset(cls):
        """
        Forget the loaded configuration and log stash, so that the next use re-initializes from disk.
        """
        cls.Configuration = None
        cls._logholder = None
        cls.initialized = False

    @classmethod
    def confdir(cls):
        """
        Returns the path to the configuration directory.

        Returns
        -------
        pathlib.Path
            The path of the configuration directory.
        """
        cls.initialize()
        return cls.Configuration.path

    @classmethod
    def threads(cls):
        """
        Returns the default number of parallel workers. The IPCWK_THREADS environment variable wins over the configuration file.

        Returns
        -------
        int
            The number of workers, at least 1.
        """
        env = os.environ.get("IPCWK_THREADS")
        if env:
            try:
                return max(int(env), 1)
            except ValueError:
                cls.warning(
                    f"Ignoring IPCWK_THREADS={env!r}, not an integer.",
                    "Thread count",
                    "Core",
                )
        cls.initialize()
        return max(int(cls.Configuration.config.get("threads", 1)), 1)

    @staticmethod
    def textlog(message):
        """
        Logs text to stderr, for instances where internal logging doesn't cut it.

        Parameters
        ----------
        message : str
            The message to log.
        """
        print(message, file=sys.stderr)

    @classmethod
    def log(
        cls,
        message,
        summary,
        category,
        message_type,
        subcategory=None,
        resource=None,
        echo=True,
        **kwargs,
    ):
        """
        Logs a message to the log stash and saves it to disk.

        Parameters
        ----------
        message : str
            The full message to log.
        summary : str
            A short summary of the event being logged.
        category : str
            The category of the logged event.
        message_type : str
            The message type. Severity, but simpler. Expects one of "success", "info", "warning" or "error".
        subcategory : str
            The subcategory of the logged event.
        resource : str
            The file or object which triggered the event.
        echo : bool
            Whether to also print the message to stderr, unless Common.quiet is set.
        kwargs : dict
            Any additional keyword arguments will be logged as context for the event.
        """
        cls.initialize()
        if echo and not cls.quiet:
            cls.textlog(f"[{message_type}] {summary}: {message}")
        cls._logholder.log(
            message,
            summary,
            category,
            message_type,
            subcategory=subcategory,
            resource=resource,
            **kwargs,
        )

    @classmethod
    def error(cls, message, summary, category, **kwargs):
        """
        Shorthand for log(message_type="error").

        See documentation of Common.log() for parameter descriptions.
        """
        cls.log(message, summary, category, "error", **kwargs)

    @classmethod
    def warning(cls, message, summary, category, **kwargs):
        """
        Shorthand for log(message_type="warning").

        See documentation of Common.log() for parameter descriptions.
        """
        cls.log(message, summary, category, "warning", **kwargs)

    @classmethod
    def success(cls, message, summary, category, **kwargs):
        """
        Shorthand for log(message_type="success").

        See documentation of Common.log() for parameter descriptions.
        """
        cls.log(message, summary, category, "success", **kwargs)

    @classmethod
    def info(cls, message, summary, category, **kwargs):
        """
        Shorthand for log(message_type="info").

        See documentation of Common.log() for parameter descriptions.
        """
        cls.log(message, summary, category, "info", **kwargs)

    @classmethod
    def log_exception(cls, exception, category, **kwargs):
        """
        Shorthand for error(message=str(exception), summary=type(exception)). Also logs traceback.

        See documentation of Common.log() for parameter descriptions.

        Parameters
        ----------
        exception : Exception
            Any exception object.
        """
        trace = "".join(traceback.format_tb(exception.__traceback__))
        cls.error(
            f"{str(exception)}\nTraceback:\n{trace}",
            type(exception).__name__,
            category,
            echo=False,
            **kwargs,
        )

    @classmethod
    def entries(cls, limit=None, category=None):
        """
        Lists stored log entries, newest first.

        See documentation of LogHolder.entries() for parameter descriptions.

        Returns
        -------
        list(dict)
            The matching entries.
        """
        cls.initialize()
        return cls._logholder.entries(limit=limit, category=category)
