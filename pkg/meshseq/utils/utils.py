"""Small file helpers shared by the commands and IO modules."""

import json
from pathlib import Path

from ..errors import FeatureFormatError, MeshSeqError
from ..geometry.mesh import Mesh, load_obj


def _write_json_file_(file_path: Path, data) -> None:
    """Write `data` as indented JSON, creating parent directories."""
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    file_path.write_text(json.dumps(data, indent=2))


def _read_json_file_(file_path: Path, error: type[MeshSeqError] = FeatureFormatError):
    """Read a JSON file, raising `error` when it is missing or malformed."""
    try:
        return json.loads(Path(file_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise error(f"cannot read {file_path}: {exc}") from exc


def _is_populated_(directory: Path) -> bool:
    directory = Path(directory)
    return directory.is_dir() and any(directory.iterdir())


def _list_obj_files_(directory: Path) -> list[Path]:
    """OBJ files of a directory in name order."""
    return sorted(Path(directory).glob("*.obj"))


def _load_obj_dir_(directory: Path) -> list[Mesh]:
    return [load_obj(path) for path in _list_obj_files_(directory)]
