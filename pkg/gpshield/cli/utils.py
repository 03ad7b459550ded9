"""
Extended help of the :mod:`gpshield.cli` module, whole or by section.
"""
import re
from typing import Dict, Optional

from . import help_text

# a title line framed by two rules of "=" signs
_SECTION = re.compile(r"^=+\n([A-Z][A-Z ]*)\n=+\n", re.MULTILINE)


def help_sections() -> Dict[str, str]:
    """Section bodies of the extended help, keyed by lower-case title."""
    text = help_text.HELPTEXT
    matches = list(_SECTION.finditer(text))
    sections = {}
    for match, following in zip(matches, matches[1:] + [None]):
        end = len(text) if following is None else following.start()
        sections[match.group(1).lower()] = text[match.end() : end].strip("\n")
    return sections


def get_help(section: Optional[str] = None, print_help: bool = True):
    """
    Extended help text, or the body of one of its sections.

    Parameters
    ----------
    section : str, optional
        Section title such as "formulas" or "exit status", case-insensitive.
        None selects the whole text.
    print_help : bool, optional
        Print the text instead of returning it.

    Raises
    ------
    ValueError
        Unknown section title.
    """
    if section is None:
        text = help_text.HELPTEXT
    else:
        sections = help_sections()
        try:
            text = sections[section.strip().lower()] + "\n"
        except KeyError:
            message = "Unknown help section '{s}', expected one of {known}.".format(
                s=section, known=sorted(sections)
            )
            raise ValueError(message) from None
    if print_help:
        print(text)
    else:
        return text
