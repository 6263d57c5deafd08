"""
Checkpoint storage for parameters and pruning masks.

This module provides the CheckpointStorage class, which writes named
collections of arrays as a JSON manifest plus a flat binary blob.

On-disk layout for a checkpoint called ``round3``::

    <output_dir>/checkpoints/round3.json   manifest (UTF-8 JSON)
    <output_dir>/checkpoints/round3.bin    little-endian payload

Manifest fields: ``version``, ``kind``, ``blob``, ``metadata`` and one
entry per array with ``name``, ``shape``, ``dtype``, ``offset`` and
``nbytes``. Weights use dtype ``f32`` (little-endian float32); masks use
dtype ``bit`` (packed with ``numpy.packbits``, little bit order).
"""

import json
import logging
from pathlib import Path

import numpy as np

from iskra.exceptions import CheckpointError

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class CheckpointStorage:
    """
    Manages checkpoint files under an output directory.

    Attributes
    ----------
    output_dir : Path
        Base directory of the run; checkpoints go to ``checkpoints/``.

    Examples
    --------
    >>> storage = CheckpointStorage("./runs/seed0")
    >>> storage.save_arrays("init", model.state_dict())
    PosixPath('runs/seed0/checkpoints/init.json')
    >>> weights = storage.load_arrays("init")

    Notes
    -----
    All write operations use atomic writes (temp file → rename) to prevent
    partial files in case of errors. The blob is written before the
    manifest, so an existing manifest always refers to a complete blob.
    """

    SUPPORTED_KINDS = ["weights", "masks"]
    SUBDIR = "checkpoints"

    def __init__(self, output_dir: str | Path = "./runs"):
        """
        Initialize checkpoint storage.

        Parameters
        ----------
        output_dir : str or Path
            Base directory of the run. Will be created on first write.
        """
        self._output_dir = Path(output_dir)

    @property
    def output_dir(self) -> Path:
        """Return the base output directory."""
        return self._output_dir

    def get_path(self, name: str, ext: str = ".json") -> Path:
        """
        Generate the file path of a checkpoint component.

        Parameters
        ----------
        name : str
            Checkpoint name, e.g. "round3" or "ticket/round3".
        ext : str, optional
            ".json" for the manifest or ".bin" for the blob (default: ".json").

        Returns
        -------
        Path
            Full path to the file.
        """
        if not name or name.startswith("/") or ".." in Path(name).parts:
            raise CheckpointError(f"Invalid checkpoint name: '{name}'")
        return self._output_dir / self.SUBDIR / f"{name}{ext}"

    def exists(self, name: str) -> bool:
        """Return True if both manifest and blob exist."""
        return self.get_path(name).exists() and self.get_path(name, ".bin").exists()

    def write_atomic(self, name: str, content: bytes, ext: str) -> Path:
        """
        Write content to file atomically.

        Uses a temporary file and atomic rename to prevent partial files.

        Parameters
        ----------
        name : str
            Checkpoint name.
        content : bytes
            Content to write.
        ext : str
            File extension including dot.

        Returns
        -------
        Path
            Path to the written file.
        """
        target_path = self.get_path(name, ext)
        target_path.parent.mkdir(parents=True, exist_ok=True)

        temp_path = target_path.with_suffix(target_path.suffix + ".tmp")

        try:
            with open(temp_path, "wb") as f:
                f.write(content)

            # Atomic rename
            temp_path.replace(target_path)
            return target_path

        except Exception:
            # Clean up temp file on error
            if temp_path.exists():
                temp_path.unlink()
            raise

    def _save(
        self,
        name: str,
        kind: str,
        arrays: dict[str, np.ndarray],
        metadata: dict | None,
    ) -> Path:
        entries = []
        chunks = []
        offset = 0
        for key, array in arrays.items():
            array = np.asarray(array)
            if kind == "masks":
                payload = np.packbits(
                    array.astype(bool).ravel(), bitorder="little"
                ).tobytes()
                dtype = "bit"
            else:
                payload = np.ascontiguousarray(array, dtype="<f4").tobytes()
                dtype = "f32"
            entries.append(
                {
                    "name": key,
                    "shape": list(array.shape),
                    "dtype": dtype,
                    "offset": offset,
                    "nbytes": len(payload),
                }
            )
            chunks.append(payload)
            offset += len(payload)

        manifest = {
            "version": CHECKPOINT_VERSION,
            "kind": kind,
            "blob": f"{Path(name).name}.bin",
            "metadata": metadata or {},
            "entries": entries,
        }
        self.write_atomic(name, b"".join(chunks), ".bin")
        path = self.write_atomic(
            name, (json.dumps(manifest, indent=2) + "\n").encode("utf-8"), ".json"
        )
        logger.info(f"Saved {kind} checkpoint '{name}' ({len(entries)} arrays)")
        return path

    def save_arrays(
        self, name: str, arrays: dict[str, np.ndarray], metadata: dict | None = None
    ) -> Path:
        """
        Save float arrays as a ``weights`` checkpoint.

        Parameters
        ----------
        name : str
            Checkpoint name.
        arrays : dict[str, np.ndarray]
            Arrays keyed by parameter name; stored as little-endian float32.
        metadata : dict, optional
            JSON-serialisable extra information.

        Returns
        -------
        Path
            Path to the manifest.
        """
        return self._save(name, "weights", arrays, metadata)

    def save_masks(
        self, name: str, masks: dict[str, np.ndarray], metadata: dict | None = None
    ) -> Path:
        """Save boolean masks as a packed-bit ``masks`` checkpoint."""
        return self._save(name, "masks", masks, metadata)

    def read_manifest(self, name: str) -> dict:
        """
        Read and validate a manifest.

        Raises
        ------
        CheckpointError
            If the manifest is missing, malformed or of another version.
        """
        path = self.get_path(name)
        if not path.exists():
            raise CheckpointError(f"Checkpoint manifest not found: {path}")
        try:
            manifest = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise CheckpointError(f"Malformed manifest {path}: {e}")
        for key in ("version", "kind", "entries"):
            if key not in manifest:
                raise CheckpointError(f"Manifest {path} lacks the '{key}' field")
        if manifest["version"] != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"Unsupported checkpoint version {manifest['version']} "
                f"(expected {CHECKPOINT_VERSION})"
            )
        if manifest["kind"] not in self.SUPPORTED_KINDS:
            raise CheckpointError(f"Unknown checkpoint kind: '{manifest['kind']}'")
        return manifest

    def load(self, name: str) -> tuple[str, dict[str, np.ndarray], dict]:
        """
        Load a checkpoint.

        Returns
        -------
        tuple[str, dict[str, np.ndarray], dict]
            Kind, arrays (float32 or bool) keyed by name, and metadata.

        Raises
        ------
        CheckpointError
            If the blob is missing or shorter than the manifest claims.
        """
        manifest = self.read_manifest(name)
        blob_path = self.get_path(name, ".bin")
        if not blob_path.exists():
            raise CheckpointError(f"Checkpoint blob not found: {blob_path}")
        blob = blob_path.read_bytes()

        arrays = {}
        for entry in manifest["entries"]:
            shape = tuple(entry["shape"])
            start, nbytes = entry["offset"], entry["nbytes"]
            if start + nbytes > len(blob):
                raise CheckpointError(
                    f"entry '{entry['name']}' needs bytes {start}..{start + nbytes} "
                    f"but the blob has {len(blob)}"
                )
            if nbytes:
                raw = np.frombuffer(blob, dtype=np.uint8, count=nbytes, offset=start)
            else:
                raw = np.zeros(0, dtype=np.uint8)
            size = int(np.prod(shape, dtype=np.int64))
            if entry["dtype"] == "bit":
                bits = np.unpackbits(raw, count=size, bitorder="little")
                arrays[entry["name"]] = bits.astype(bool).reshape(shape)
            elif entry["dtype"] == "f32":
                if nbytes != 4 * size:
                    raise CheckpointError(
                        f"entry '{entry['name']}' has {nbytes} bytes for shape {shape}"
                    )
                values = raw.view("<f4").astype(np.float32)
                arrays[entry["name"]] = values.reshape(shape)
            else:
                raise CheckpointError(f"Unknown entry dtype: '{entry['dtype']}'")
        return manifest["kind"], arrays, manifest.get("metadata", {})

    def _load_kind(self, name: str, kind: str) -> dict[str, np.ndarray]:
        found, arrays, _ = self.load(name)
        if found != kind:
            raise CheckpointError(f"Checkpoint '{name}' holds {found}, not {kind}")
        return arrays

    def load_arrays(self, name: str) -> dict[str, np.ndarray]:
        """Load a ``weights`` checkpoint."""
        return self._load_kind(name, "weights")

    def load_masks(self, name: str) -> dict[str, np.ndarray]:
        """Load a ``masks`` checkpoint."""
        return self._load_kind(name, "masks")

    def delete(self, name: str) -> bool:
        """
        Delete a checkpoint.

        Returns
        -------
        bool
            True if anything was deleted, False if it didn't exist.
        """
        deleted = False
        for ext in (".json", ".bin"):
            path = self.get_path(name, ext)
            if path.exists():
                path.unlink()
                deleted = True
        return deleted

    def list_files(self, pattern: str = "**/*.json") -> list[Path]:
        """
        List manifests matching pattern in the checkpoint directory.

        Parameters
        ----------
        pattern : str, optional
            Glob pattern for matching files (default: "**/*.json").

        Returns
        -------
        list[Path]
            Sorted list of matching file paths.
        """
        directory = self._output_dir / self.SUBDIR
        if not directory.exists():
            return []
        return sorted(directory.glob(pattern))

    def get_size(self, name: str) -> int | None:
        """
        Get the blob size of a checkpoint.

        Returns
        -------
        int or None
            Blob size in bytes, or None if it doesn't exist.
        """
        path = self.get_path(name, ".bin")
        if path.exists():
            return path.stat().st_size
        return None

    def __repr__(self) -> str:
        """Return string representation."""
        return f"CheckpointStorage(output_dir='{self._output_dir}')"
