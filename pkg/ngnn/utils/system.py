import os
import json
import hashlib
from pathlib import Path
from typing import Dict, Any, Optional

import yaml
from rich.panel import Panel
from rich.console import Console

from ngnn.utils.errors import ConfigError

__all__ = [
    'load_config',
    'write_config',
    'canonical_json',
    'config_hash',
    'file_digest',
    'write_json',
    'read_json',
    'ensure_dir',
    'dict_to_markdown',
    'print_in_box',
]


def load_config(path: str) -> Dict[str, Any]:
    """
    Load an experiment configuration file. JSON documents are valid YAML, so both work.
    :param path: the configuration file path.
    :return: the configuration dictionary.
    """
    if not os.path.exists(path):
        raise ConfigError(f"configuration file not found: {path}", field='config')

    with open(path, 'r', encoding='utf-8') as file:
        try:
            data = yaml.safe_load(file)
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse configuration: {e}", field='config') from e

    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping", field='config')
    return data


def write_config(path: str, value: Dict[str, Any]) -> None:
    """
    Write a configuration dictionary as YAML.
    """
    with open(path, 'w', encoding='utf-8') as file:
        yaml.dump(value, file, default_flow_style=False, sort_keys=False)


def canonical_json(value: Any) -> str:
    """
    Canonical JSON: sorted keys, no insignificant whitespace.
    """
    return json.dumps(value, sort_keys=True, separators=(',', ':'))


def config_hash(value: Dict[str, Any]) -> str:
    """
    A short stable fingerprint of a configuration dictionary.
    """
    return hashlib.sha256(canonical_json(value).encode('utf-8')).hexdigest()[:12]


def file_digest(path: str, chunk_size: int = 1 << 20) -> str:
    """
    The sha256 of a file's contents, read in chunks.
    """
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(chunk_size), b''):
            digest.update(chunk)
    return digest.hexdigest()


def write_json(path: str, value: Any) -> None:
    """
    Write a JSON document (sorted keys, indented) and create parent directories.
    """
    ensure_dir(os.path.dirname(path) or '.')
    with open(path, 'w', encoding='utf-8') as file:
        json.dump(value, file, sort_keys=True, indent=2)
        file.write('\n')


def read_json(path: str) -> Any:
    with open(path, 'r', encoding='utf-8') as file:
        return json.load(file)


def ensure_dir(path: str) -> str:
    Path(path).mkdir(parents=True, exist_ok=True)
    return path


def dict_to_markdown(data: Dict[str, Any], file_path: str) -> None:
    """
    Write a dictionary to a markdown file. Nested dictionaries become sub-sections, lists become bullets,
    and a value that is already a markdown table (a string starting with '|') is written verbatim.
    :param data: the dictionary to write.
    :param file_path: the file path to write the dictionary to.
    :return:
    """

    def write_item(k, v, indent_level=0):
        md_file.write(f"{'#' * (indent_level + 1)} {k}\n\n")
        if isinstance(v, dict):
            for sub_key, sub_value in v.items():
                write_item(sub_key, sub_value, indent_level + 1)
        elif isinstance(v, list):
            for item in v:
                md_file.write(f"- {item}\n")
            md_file.write("\n")
        else:
            md_file.write(f"{v}\n\n")

    with open(file_path, 'w', encoding='utf-8') as md_file:
        for key, value in data.items():
            write_item(key, value)


def print_in_box(text: str, console: Optional[Console] = None, title: str = "", color: str = "white") -> None:
    """
    Print the text in a box.
    :param text: the text to print.
    :param console: the console to print the text.
    :param title: the title of the box.
    :param color: the border color.
    :return:
    """
    console = console or Console()

    panel = Panel(text, title=title, border_style=color, expand=False)
    console.print(panel)
