import logging
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

from config.config import settings

logger = logging.getLogger(f"{settings.app_name}.{__name__}")


@contextmanager
def atomic_open(path: Path | str, mode: str = "w", encoding: str | None = "utf-8"):
    """
    Open a temporary file next to ``path`` and move it over ``path`` when the block succeeds.

    Readers see either the old file or the complete new one. On error the temporary file is removed.

    :param path: final destination.
    :type path: Path | str
    :param mode: ``"w"`` for text or ``"wb"`` for bytes.
    :type mode: str
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, mode, encoding=None if "b" in mode else encoding, newline=None if "b" in mode else "") as handle:
            yield handle
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    logger.debug(f"wrote {path}")


def atomic_write(path: Path | str, content: str | bytes) -> None:
    mode = "wb" if isinstance(content, bytes) else "w"
    with atomic_open(path, mode) as handle:
        handle.write(content)
