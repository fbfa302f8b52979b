"""An ordered list of remote objects treated as one logical byte stream."""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Iterator

from .cache import BlockKey
from .errors import InvalidFileSetError
from .store import ObjectRef, ObjectStore


@dataclass
class FileSet:
    """Shard list plus block geometry.

    ``cumulative_offsets[i]`` is the logical offset of file ``i``; the last
    entry is the total stream length. Blocks never span files: file ``i`` is
    cut into ``ceil(sizes[i] / blocksize)`` blocks and only the final block
    of a file may be short.
    """

    refs: list[ObjectRef]
    sizes: list[int]
    blocksize: int
    cumulative_offsets: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.refs:
            raise InvalidFileSetError("file set has no files")
        if len(self.refs) != len(self.sizes):
            raise InvalidFileSetError("refs and sizes differ in length")
        if self.blocksize < 1:
            raise InvalidFileSetError(f"blocksize must be >= 1, got {self.blocksize}")
        if any(s < 0 for s in self.sizes):
            raise InvalidFileSetError("negative file size")
        offsets = [0]
        for s in self.sizes:
            offsets.append(offsets[-1] + s)
        self.cumulative_offsets = offsets

    @classmethod
    def resolve(cls, store: ObjectStore, keys: list[str], blocksize: int) -> "FileSet":
        """Build a file set from keys, querying each object's size."""
        refs = store.refs(keys)
        sizes = [store.object_size(r) for r in refs]
        return cls(refs, sizes, blocksize)

    @property
    def n_files(self) -> int:
        return len(self.refs)

    @property
    def total_size(self) -> int:
        return self.cumulative_offsets[-1]

    def block_count(self, file_index: int) -> int:
        size = self.sizes[file_index]
        return -(-size // self.blocksize)

    @property
    def total_blocks(self) -> int:
        return sum(self.block_count(i) for i in range(self.n_files))

    def block_size_of(self, key: BlockKey) -> int:
        size = self.sizes[key.file_index]
        start = key.block_index * self.blocksize
        if key.block_index >= self.block_count(key.file_index):
            raise IndexError(f"{key} outside file of size {size}")
        return min(self.blocksize, size - start)

    def block_span(self, key: BlockKey) -> tuple[int, int]:
        """Logical [start, end) offsets of a block in the concatenated stream."""
        start = self.cumulative_offsets[key.file_index] + key.block_index * self.blocksize
        return start, start + self.block_size_of(key)

    def file_at(self, position: int) -> tuple[int, int]:
        """(file_index, offset within that file) covering ``position``."""
        if not 0 <= position < self.total_size:
            raise IndexError(f"position {position} outside [0, {self.total_size})")
        i = bisect.bisect_right(self.cumulative_offsets, position) - 1
        while self.sizes[i] == 0:
            i += 1
        return i, position - self.cumulative_offsets[i]

    def key_at(self, position: int) -> BlockKey:
        i, file_off = self.file_at(position)
        return BlockKey(i, file_off // self.blocksize)

    def first_key(self) -> BlockKey | None:
        return self._skip_empty(0, 0)

    def next_key(self, key: BlockKey) -> BlockKey | None:
        """Successor in strict (file, block) order, skipping empty files."""
        if key.block_index + 1 < self.block_count(key.file_index):
            return BlockKey(key.file_index, key.block_index + 1)
        return self._skip_empty(key.file_index + 1, 0)

    def _skip_empty(self, file_index: int, block_index: int) -> BlockKey | None:
        while file_index < self.n_files and self.block_count(file_index) == 0:
            file_index += 1
        if file_index >= self.n_files:
            return None
        return BlockKey(file_index, block_index)

    def iter_block_keys(self) -> Iterator[BlockKey]:
        key = self.first_key()
        while key is not None:
            yield key
            key = self.next_key(key)
