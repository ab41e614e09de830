from os import environ
from pathlib import Path
from typing import List, Optional, Sequence


DEFAULT_CONFIG_FILENAME = 'dcrelax.toml'
SYSTEM_LOCATIONS = [Path('/usr/local/etc'), Path('/etc')]


def hidden_locations() -> List[Path]:
    "Directories where the config file is a dot-file"
    return [Path.cwd(), Path.home()]


def config_directories() -> List[Path]:
    "Search order, read from the environment on every call"
    xdg_config_home = Path(environ.get('XDG_CONFIG_HOME', Path.home() / '.config'))
    return hidden_locations() + [xdg_config_home] + SYSTEM_LOCATIONS


def make_filename_safe(filename) -> str:
    return Path(filename).name


def find_config_file(filename=None, directories: Optional[Sequence] = None) -> Path:
    """
    Look for filename in ``directories`` in order

    Only the bare name of ``filename`` is used, a leading dot is dropped. In
    the current and home directory the file is expected to be hidden, so
    ``dcrelax.toml`` is looked up as ``.dcrelax.toml`` there.

    If the file isn't found in any of them, raise FileNotFoundError
    """
    if directories is None:
        directories = config_directories()
    name = make_filename_safe(str(filename or DEFAULT_CONFIG_FILENAME)).lstrip('.')
    hidden = hidden_locations()
    tried = []
    for directory in map(Path, directories):
        path = directory / (f'.{name}' if directory in hidden else name)
        if path.is_file():
            return path
        tried.append(str(path))
    raise FileNotFoundError(f"Looked for config in {tried}, none found")
