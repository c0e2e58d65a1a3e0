from pathlib import Path

import questionary
import rich
from questionary import Style

from .utils.utils import _is_populated_

custom_style = Style([
    ('qmark', 'fg:#673ab7 bold'),
    ('question', 'bold'),
    ('answer', 'fg:#f44336 bold'),
    ('pointer', 'fg:#673ab7 bold'),
    ('highlighted', 'fg:#673ab7 bold'),
    ('selected', 'fg:#cc5454'),
    ('separator', 'fg:#cc5454'),
    ('instruction', ''),
    ('text', ''),
])


def confirm_output_dir(directory: Path, force: bool = False) -> bool:
    """
    True when it is fine to write into `directory`.

    Empty or missing directories need no confirmation; populated ones need
    --force or an explicit yes.
    """
    if force or not _is_populated_(directory):
        return True
    rich.print(f"[yellow]{directory} already contains files.[/yellow]")
    answer = questionary.confirm(
        "Overwrite files in this directory?", default=False, style=custom_style
    ).ask()
    return bool(answer)
