import logging
from typing import Optional, Union

logger = logging.getLogger(__package__.split(".")[0])


def set_log_level(verbose: Optional[Union[bool, str, int]] = None) -> None:
    """Set the log level of the package logger.

    Parameters
    ----------
    verbose : bool | str | int | None
        The log level. If None or False, the level is set to WARNING; True sets
        INFO. Strings and integers are passed to :meth:`logging.Logger.setLevel`.
    """
    if verbose is None or verbose is False:
        verbose = "WARNING"
    elif verbose is True:
        verbose = "INFO"
    if isinstance(verbose, str):
        verbose = verbose.upper().strip()
    logger.setLevel(verbose)
    if not any(getattr(h, "_gpshield", False) for h in logger.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(
            logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
        )
        handler._gpshield = True
        logger.addHandler(handler)
