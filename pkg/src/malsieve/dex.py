"""DEX (Dalvik executable) method-reference extraction.

A .dex file carries flat identifier tables in its header: string_ids
(offsets to length-prefixed MUTF-8 data), type_ids (indices into strings)
and method_ids (class type index, prototype index, name string index).
Every method an app calls or defines appears in method_ids, so reading
that one table gives the full API-reference surface without touching
bytecode. References are rendered "<class-descriptor>-><method-name>",
e.g. "Landroid/telephony/SmsManager;->sendTextMessage".

All offsets and sizes are bounds-checked against the payload before use;
violations raise MalformedDex.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import MalformedDex

_MAGIC = b"dex\n"
_HEADER_SIZE = 0x70


@dataclass(frozen=True)
class DexFeatures:
    """Method references in method-table order, deduplicated."""

    api_refs: tuple[str, ...] = ()


class _Dex:
    def __init__(self, payload: bytes):
        self.data = payload
        self._string_cache: dict[int, str] = {}
        if len(payload) < _HEADER_SIZE:
            raise MalformedDex("payload shorter than the header")
        if payload[:4] != _MAGIC or payload[7:8] != b"\x00":
            raise MalformedDex("bad magic")
        (
            self.string_ids_size,
            self.string_ids_off,
            self.type_ids_size,
            self.type_ids_off,
        ) = struct.unpack_from("<IIII", payload, 56)
        self.method_ids_size, self.method_ids_off = struct.unpack_from("<II", payload, 88)
        self._check_table("string_ids", self.string_ids_off, self.string_ids_size, 4)
        self._check_table("type_ids", self.type_ids_off, self.type_ids_size, 4)
        self._check_table("method_ids", self.method_ids_off, self.method_ids_size, 8)

    def _check_table(self, name: str, off: int, size: int, width: int) -> None:
        if size and off + size * width > len(self.data):
            raise MalformedDex(f"{name} table out of bounds")

    def string(self, idx: int) -> str:
        if idx >= self.string_ids_size:
            raise MalformedDex(f"string index {idx} out of range")
        cached = self._string_cache.get(idx)
        if cached is not None:
            return cached
        data_off = struct.unpack_from("<I", self.data, self.string_ids_off + 4 * idx)[0]
        if data_off >= len(self.data):
            raise MalformedDex(f"string {idx} data offset out of bounds")
        pos = self._skip_uleb128(data_off)
        end = self.data.find(b"\x00", pos)
        if end == -1:
            raise MalformedDex(f"string {idx} unterminated")
        # MUTF-8: plain UTF-8 for everything we care about; surrogate byte
        # sequences from supplementary characters decode to replacement chars
        value = self.data[pos:end].decode("utf-8", errors="replace")
        self._string_cache[idx] = value
        return value

    def _skip_uleb128(self, pos: int) -> int:
        for _ in range(5):
            if pos >= len(self.data):
                raise MalformedDex("uleb128 runs past end of payload")
            byte = self.data[pos]
            pos += 1
            if not byte & 0x80:
                return pos
        raise MalformedDex("uleb128 longer than 5 bytes")

    def type_descriptor(self, idx: int) -> str:
        if idx >= self.type_ids_size:
            raise MalformedDex(f"type index {idx} out of range")
        desc_idx = struct.unpack_from("<I", self.data, self.type_ids_off + 4 * idx)[0]
        return self.string(desc_idx)

    def method_refs(self) -> tuple[str, ...]:
        refs: list[str] = []
        seen: set[str] = set()
        for i in range(self.method_ids_size):
            class_idx, _proto_idx, name_idx = struct.unpack_from(
                "<HHI", self.data, self.method_ids_off + 8 * i
            )
            ref = f"{self.type_descriptor(class_idx)}->{self.string(name_idx)}"
            if ref not in seen:
                seen.add(ref)
                refs.append(ref)
        return tuple(refs)


def parse_dex(payload: bytes) -> DexFeatures:
    """Extract all method references from one DEX payload."""
    return DexFeatures(api_refs=_Dex(payload).method_refs())
