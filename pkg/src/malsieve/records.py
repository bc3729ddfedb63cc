"""Per-app feature records and their on-disk line format.

One record per app: app id, optional label, manifest features, DEX
features. The text serialization is one tab-separated line per record,

    app_id<TAB>label<TAB>perm:<name>...<TAB>action:<name>...<TAB>api:<name>...

with label +1 (malicious), -1 (benign) or ? (unlabeled), features in
perm/action/api block order and each feature carrying its block prefix.
The vectorizer keys on those prefixes, so they are part of the format.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import IO, Iterable, Iterator

from .archive import ApkArchive
from .axml import ManifestFeatures, parse_manifest
from .dex import DexFeatures, parse_dex
from .errors import FormatError, MissingManifest

PERM_PREFIX = "perm:"
ACTION_PREFIX = "action:"
API_PREFIX = "api:"

_LABEL_TO_TEXT = {1: "+1", -1: "-1", None: "?"}
_TEXT_TO_LABEL = {"+1": 1, "-1": -1, "?": None}


@dataclass(frozen=True)
class FeatureRecord:
    app_id: str
    label: int | None
    manifest: ManifestFeatures
    dex: DexFeatures

    def __post_init__(self):
        if not self.app_id:
            raise ValueError("app_id must be non-empty")
        if self.label not in (1, -1, None):
            raise ValueError("label must be +1, -1 or None")

    def prefixed_features(self) -> list[str]:
        """All features with block prefixes, in block order."""
        out = [PERM_PREFIX + p for p in self.manifest.permissions]
        out += [ACTION_PREFIX + a for a in self.manifest.intent_actions]
        out += [API_PREFIX + a for a in self.dex.api_refs]
        return out


def extract_features(
    archive: ApkArchive, app_id: str, label: int | None = None
) -> FeatureRecord:
    """Run both parsers over an archive and combine their output.

    The manifest is mandatory; DEX entries are optional and their method
    references are unioned in classes.dex, classes2.dex, ... order.
    """
    entry = archive.manifest_entry
    if entry is None:
        raise MissingManifest("archive has no AndroidManifest.xml")
    manifest = parse_manifest(archive.read(entry))

    api_refs: list[str] = []
    seen: set[str] = set()
    for dex_entry in archive.dex_entries:
        for ref in parse_dex(archive.read(dex_entry)).api_refs:
            if ref not in seen:
                seen.add(ref)
                api_refs.append(ref)

    return FeatureRecord(
        app_id=app_id,
        label=label,
        manifest=manifest,
        dex=DexFeatures(api_refs=tuple(api_refs)),
    )


def _printable(name: str) -> bool:
    # tab/newline would corrupt the line format; such names only occur in
    # deliberately broken inputs and are dropped
    return not any(c in name for c in "\t\n\r")


def format_record(record: FeatureRecord) -> str:
    fields = [record.app_id, _LABEL_TO_TEXT[record.label]]
    fields += [f for f in record.prefixed_features() if _printable(f)]
    return "\t".join(fields)


def write_records(records: Iterable[FeatureRecord], fh: IO[str]) -> int:
    n = 0
    for record in records:
        fh.write(format_record(record) + "\n")
        n += 1
    return n


def save_records(records: Iterable[FeatureRecord], path: str | os.PathLike) -> int:
    with open(path, "w", encoding="utf-8") as fh:
        return write_records(records, fh)


def parse_record_line(line: str, lineno: int | None = None) -> FeatureRecord:
    fields = line.rstrip("\n").split("\t")
    if len(fields) < 2:
        raise FormatError("record needs at least app_id and label", lineno)
    app_id, label_text = fields[0], fields[1]
    if not app_id:
        raise FormatError("empty app_id", lineno)
    if label_text not in _TEXT_TO_LABEL:
        raise FormatError(f"bad label {label_text!r}", lineno)
    return _build_record(app_id, _TEXT_TO_LABEL[label_text], fields[2:], lineno)


def _build_record(
    app_id: str, label: int | None, feature_fields: list[str], lineno: int | None
) -> FeatureRecord:
    perms: list[str] = []
    actions: list[str] = []
    apis: list[str] = []
    seen: set[str] = set()
    for field in feature_fields:
        if field in seen:
            continue
        seen.add(field)
        if field.startswith(PERM_PREFIX):
            perms.append(field[len(PERM_PREFIX):])
        elif field.startswith(ACTION_PREFIX):
            actions.append(field[len(ACTION_PREFIX):])
        elif field.startswith(API_PREFIX):
            apis.append(field[len(API_PREFIX):])
        else:
            raise FormatError(f"feature without a known prefix: {field!r}", lineno)
    return FeatureRecord(
        app_id=app_id,
        label=label,
        manifest=ManifestFeatures(tuple(perms), tuple(actions)),
        dex=DexFeatures(tuple(apis)),
    )


def read_records(fh: IO[str]) -> Iterator[FeatureRecord]:
    for lineno, line in enumerate(fh, start=1):
        if line.strip():
            yield parse_record_line(line, lineno)


def load_records(path: str | os.PathLike) -> list[FeatureRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        return list(read_records(fh))
