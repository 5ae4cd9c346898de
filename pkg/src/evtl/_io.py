"""Shared output plumbing: write CSV to a path or an open stream."""

from __future__ import annotations

import sys
from contextlib import contextmanager
from typing import IO, Iterator


@contextmanager
def open_sink(dest: "str | IO[str] | None") -> Iterator[IO[str]]:
    """Yield a writable text stream for a path, an open file, or stdout."""
    if dest is None:
        yield sys.stdout
    elif hasattr(dest, "write"):
        yield dest  # type: ignore[misc]
    else:
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            yield fh
