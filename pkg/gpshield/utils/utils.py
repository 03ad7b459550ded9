"""
Utilities for the :mod:`gpshield` module.
"""
from pathlib import Path
from typing import Dict, Tuple, Union

import pandas as pd

#: Float format giving bitwise round trips of doubles through text.
FLOAT_FORMAT: str = "%.17g"


def validate_file(path: Union[str, Path], description: str = "input") -> Path:
    """
    Checks an input file exists.

    Parameters
    ----------
    path : Path
        File to check.
    description : str, optional
        What the file holds, used in the error message.

    Returns
    -------
    Path
        The path.

    Raises
    ------
    FileNotFoundError
        The file does not exist.
    """
    path = Path(path)
    if not path.is_file():
        message = "The {description} file at {path} does not exist!".format(
            description=description, path=path
        )
        raise FileNotFoundError(message)
    return path


def create_output_path(destination: Union[str, Path]) -> Path:
    """
    Creates the parent directory of an output file.

    Parameters
    ----------
    destination : Path
        Output file.

    Returns
    -------
    Path
        The output file path.
    """
    destination = Path(destination)
    destination.parent.mkdir(parents=True, exist_ok=True)
    return destination


def write_commented_csv(
    destination: Union[str, Path],
    header: Dict[str, object],
    frame: pd.DataFrame,
) -> Path:
    """
    Writes a CSV file preceded by ``# key=value`` header lines.

    Parameters
    ----------
    destination : Path
        Output file.
    header : Dict[str, object]
        Header entries, written in insertion order.
    frame : pd.DataFrame
        Records.

    Returns
    -------
    Path
        The written file.
    """
    destination = create_output_path(destination)
    with open(destination, "w", newline="") as f:
        for key, value in header.items():
            if "\n" in str(value):
                raise ValueError(
                    "Header entry {key} must fit on one line.".format(key=key)
                )
            f.write("# {key}={value}\n".format(key=key, value=value))
        frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return destination


def read_commented_csv(path: Union[str, Path]) -> Tuple[Dict[str, str], pd.DataFrame]:
    """
    Reads a file written by :func:`write_commented_csv`.

    Parameters
    ----------
    path : Path
        Input file.

    Returns
    -------
    Tuple[Dict[str, str], pd.DataFrame]
        Header entries as strings and the records.
    """
    header = {}
    skip = 0
    with open(path, "r") as f:
        for line in f:
            if not line.startswith("#"):
                break
            skip += 1
            key, sep, value = line[1:].strip().partition("=")
            if not sep:
                raise ValueError(
                    "Malformed header line {n} in {path}.".format(n=skip, path=path)
                )
            header[key.strip()] = value.strip()
    frame = pd.read_csv(
        path, skiprows=skip, float_precision="round_trip", keep_default_na=False
    )
    return header, frame
