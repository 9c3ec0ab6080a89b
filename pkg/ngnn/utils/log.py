import logging

from rich.logging import RichHandler

LOGGER_NAME = 'ngnn'


def setup_logging(verbose: bool = False) -> logging.Logger:
    """
    Attach a rich handler to the package logger. Safe to call more than once.
    :param verbose: log DEBUG records (per-epoch lines) when True.
    :return: the package logger.
    """
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        handler = RichHandler(show_path=False, rich_tracebacks=True)
        handler.setFormatter(logging.Formatter("%(message)s"))
        logger.addHandler(handler)
    logger.propagate = False
    return logger
