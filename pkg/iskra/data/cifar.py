"""
Readers for the CIFAR-10 and CIFAR-100 binary distributions.

A CIFAR-10 batch file is a sequence of 3073-byte records: one label byte
followed by 1024 red, 1024 green and 1024 blue bytes, each channel a
row-major 32x32 plane. CIFAR-100 records are 3074 bytes: a coarse
(superclass) label byte and a fine label byte precede the same pixels.
"""

import logging
from pathlib import Path

import numpy as np

from iskra.data.dataset import Dataset
from iskra.exceptions import FormatError

logger = logging.getLogger(__name__)

CIFAR_SIDE = 32
CIFAR_CHANNELS = 3
CIFAR_CLASSES = 10
PIXEL_BYTES = CIFAR_CHANNELS * CIFAR_SIDE * CIFAR_SIDE
RECORD_BYTES = 1 + PIXEL_BYTES
TRAIN_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)]
TEST_FILES = ["test_batch.bin"]

CIFAR100_RECORD_BYTES = 2 + PIXEL_BYTES
CIFAR100_TRAIN_FILES = ["train.bin"]
CIFAR100_TEST_FILES = ["test.bin"]
# label byte position and class count per granularity
CIFAR100_LABELS = {"coarse": (0, 20), "fine": (1, 100)}


def _parse_records(
    payload: bytes, label_classes: list[int], source: str
) -> np.ndarray:
    record_bytes = len(label_classes) + PIXEL_BYTES
    complete, remainder = divmod(len(payload), record_bytes)
    if remainder:
        offset = complete * record_bytes
        raise FormatError(
            f"{source}: truncated record at byte {offset} "
            f"({remainder} of {record_bytes} bytes)",
            offset=offset,
        )
    records = np.frombuffer(payload, dtype=np.uint8).reshape(complete, record_bytes)
    for position, classes in enumerate(label_classes):
        bad = np.flatnonzero(records[:, position] >= classes)
        if bad.size:
            offset = int(bad[0]) * record_bytes
            raise FormatError(
                f"{source}: label {records[bad[0], position]} at byte {offset} "
                f"exceeds {classes - 1}",
                offset=offset,
            )
    return records


def _images(records: np.ndarray, label_bytes: int) -> np.ndarray:
    images = records[:, label_bytes:].reshape(
        len(records), CIFAR_CHANNELS, CIFAR_SIDE, CIFAR_SIDE
    )
    return images.astype(np.float32) / 255.0


def parse_cifar10_records(
    payload: bytes, source: str = "<bytes>"
) -> tuple[np.ndarray, np.ndarray]:
    """
    Decode CIFAR-10 records.

    Parameters
    ----------
    payload : bytes
        Concatenated records.
    source : str, optional
        Name used in error messages.

    Returns
    -------
    tuple[np.ndarray, np.ndarray]
        Images [M, 3, 32, 32] scaled to [0, 1] and labels [M].

    Raises
    ------
    FormatError
        If the payload ends inside a record or a label exceeds 9; the
        error's ``offset`` is the byte position of the offending record.
    """
    records = _parse_records(payload, [CIFAR_CLASSES], source)
    return _images(records, 1), records[:, 0].astype(np.int64)


def parse_cifar100_records(
    payload: bytes, label: str = "fine", source: str = "<bytes>"
) -> tuple[np.ndarray, np.ndarray]:
    """
    Decode CIFAR-100 records.

    Both label bytes are validated; ``label`` picks the one returned.

    Parameters
    ----------
    payload : bytes
        Concatenated 3074-byte records.
    label : str, optional
        "fine" (100 classes) or "coarse" (20 superclasses).
    source : str, optional
        Name used in error messages.

    Returns
    -------
    tuple[np.ndarray, np.ndarray]
        Images [M, 3, 32, 32] scaled to [0, 1] and labels [M].

    Raises
    ------
    ValueError
        If ``label`` is neither "fine" nor "coarse".
    FormatError
        If the payload ends inside a record or a label byte is out of
        range.
    """
    if label not in CIFAR100_LABELS:
        raise ValueError(f"label must be one of {list(CIFAR100_LABELS)}, got {label}")
    classes = [CIFAR100_LABELS["coarse"][1], CIFAR100_LABELS["fine"][1]]
    records = _parse_records(payload, classes, source)
    position = CIFAR100_LABELS[label][0]
    return _images(records, 2), records[:, position].astype(np.int64)


def _batch_paths(
    directory: Path, files: list[str] | None, train: list[str], test: list[str]
) -> list[Path]:
    if files is None:
        files = [f for f in train if (directory / f).exists()]
        if not files:
            files = [f for f in test if (directory / f).exists()]
    paths = [directory / f for f in files]
    missing = [str(p) for p in paths if not p.exists()]
    if not paths or missing:
        raise FormatError(f"CIFAR batches not found in {directory}: {missing}")
    return paths


def _concatenate(
    batches: list[tuple[np.ndarray, np.ndarray]], classes: int, name: str
) -> Dataset:
    return Dataset(
        np.concatenate([images for images, _ in batches]),
        np.concatenate([labels for _, labels in batches]),
        classes,
        name=name,
    )


def load_cifar10_binary(
    directory: str | Path, files: list[str] | None = None
) -> Dataset:
    """
    Load CIFAR-10 binary batches from a directory.

    Parameters
    ----------
    directory : str or Path
        Directory holding the ``*.bin`` batches.
    files : list[str], optional
        Batch file names; defaults to the training batches that exist,
        falling back to ``test_batch.bin``.

    Returns
    -------
    Dataset

    Raises
    ------
    FormatError
        If no batch file is found or a file is malformed.
    """
    directory = Path(directory)
    batches = []
    for path in _batch_paths(directory, files, TRAIN_FILES, TEST_FILES):
        batches.append(parse_cifar10_records(path.read_bytes(), str(path)))
        logger.debug(f"Read {len(batches[-1][1])} records from {path.name}")
    dataset = _concatenate(batches, CIFAR_CLASSES, "cifar10_binary")
    logger.info(f"Loaded {len(dataset)} CIFAR-10 images from {directory}")
    return dataset


def load_cifar100_binary(
    directory: str | Path, files: list[str] | None = None, label: str = "fine"
) -> Dataset:
    """
    Load CIFAR-100 binary files from a directory.

    Parameters
    ----------
    directory : str or Path
        Directory holding ``train.bin`` and ``test.bin``.
    files : list[str], optional
        File names; defaults to ``train.bin``, falling back to ``test.bin``.
    label : str, optional
        "fine" (100 classes) or "coarse" (20 superclasses).

    Returns
    -------
    Dataset

    Raises
    ------
    ValueError
        If ``label`` is unknown.
    FormatError
        If no file is found or a file is malformed.
    """
    directory = Path(directory)
    if label not in CIFAR100_LABELS:
        raise ValueError(f"label must be one of {list(CIFAR100_LABELS)}, got {label}")
    batches = []
    for path in _batch_paths(
        directory, files, CIFAR100_TRAIN_FILES, CIFAR100_TEST_FILES
    ):
        batches.append(parse_cifar100_records(path.read_bytes(), label, str(path)))
        logger.debug(f"Read {len(batches[-1][1])} records from {path.name}")
    dataset = _concatenate(batches, CIFAR100_LABELS[label][1], "cifar100_binary")
    logger.info(
        f"Loaded {len(dataset)} CIFAR-100 images ({label} labels) from {directory}"
    )
    return dataset
