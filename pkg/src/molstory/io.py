"""Dataset ingestion and the plain-text vocabulary format.

Vocabulary grammar, one record per line::

    molstory-vocab 1
    fragment <smiles> count=<n> size=<k> std=<i,j,...>
    attachment <smiles> <representative> key=<orbit key> count=<n>
    action <index> <smiles> <representative>
    action <index> CAUTERIZE

Fragments are ordered by corpus frequency (descending) then SMILES; their
attachments follow by representative tuple. Actions enumerate every
registered attachment in that order.
"""
import csv
import logging
import math
from collections import Counter
from dataclasses import dataclass

from .canon import AttachmentRegistry, fragment_from_smiles
from .molgraph import MoleculeError, parse_smiles, write_canonical_smiles
from .story import decompose

log = logging.getLogger(__name__)

COLUMNS = ("smiles", "logS", "redox", "sascore")
HEADER = "molstory-vocab 1"


@dataclass(frozen=True)
class DatasetRecord:
    smiles: str
    log_solubility: float
    redox_potential: float
    sa_score: float

    @property
    def conditions(self):
        return (self.log_solubility, self.redox_potential, self.sa_score)


def ingest_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file")
        missing = [c for c in COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing columns {', '.join(missing)}")
        records, skipped = [], 0
        for line, row in enumerate(reader, 2):
            try:
                parse_smiles(row["smiles"])
                vals = [float(row[c]) for c in COLUMNS[1:]]
                if not all(math.isfinite(v) for v in vals):
                    raise ValueError("non-finite property")
            except (MoleculeError, ValueError, TypeError) as exc:
                skipped += 1
                log.warning("%s:%d skipped: %s", path, line, exc)
                continue
            records.append(DatasetRecord(row["smiles"], *vals))
    if skipped:
        log.warning("%s: skipped %d of %d rows", path, skipped, skipped + len(records))
    return records


def _tup(t):
    return ",".join(str(x) for x in t)


def _parse_tup(s):
    return tuple(int(x) for x in s.split(",")) if s else ()


class Vocabulary:
    """Fragment counts plus the attachment registry, with a canonical text form."""

    def __init__(self, fragment_counts=None, registry=None):
        self.fragment_counts = dict(fragment_counts or {})
        self.registry = registry or AttachmentRegistry()

    @property
    def fragments(self):
        return sorted(self.fragment_counts, key=lambda s: (-self.fragment_counts[s], s))

    def attachments(self, smiles):
        reps = [(rep, key) for (s, key), rep in self.registry.items() if s == smiles]
        return sorted(reps)

    def actions(self):
        return [(s, rep) for s in self.fragments for rep, _ in self.attachments(s)]

    def action_vocabulary(self):
        from .model import ActionVocabulary

        return ActionVocabulary(self.fragments, self.actions())

    def dumps(self):
        lines = [HEADER]
        for s in self.fragments:
            cf = fragment_from_smiles(s)
            lines.append(f"fragment {s} count={self.fragment_counts[s]} size={cf.size} std={_tup(cf.std_map)}")
            for rep, key in self.attachments(s):
                n = self.registry.counts.get((s, key), 0)
                lines.append(f"attachment {s} {_tup(rep)} key={_tup(key)} count={n}")
        actions = self.actions()
        for i, (s, rep) in enumerate(actions):
            lines.append(f"action {i} {s} {_tup(rep)}")
        lines.append(f"action {len(actions)} CAUTERIZE")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text):
        lines = text.splitlines()
        if not lines or lines[0] != HEADER:
            raise ValueError("not a vocabulary file")
        vocab = cls()
        actions = []
        for n, line in enumerate(lines[1:], 2):
            parts = line.split()
            fields = dict(p.split("=", 1) for p in parts if "=" in p)
            try:
                if parts[0] == "fragment":
                    cf = fragment_from_smiles(parts[1])
                    if _parse_tup(fields["std"]) != cf.std_map:
                        raise ValueError("stored std map disagrees with the fragment")
                    vocab.fragment_counts[parts[1]] = int(fields["count"])
                elif parts[0] == "attachment":
                    vocab.registry.set_representative(parts[1], _parse_tup(fields["key"]),
                                                      _parse_tup(parts[2]), int(fields["count"]))
                elif parts[0] == "action":
                    actions.append(tuple(parts[2:]))
                else:
                    raise ValueError(f"unknown record {parts[0]!r}")
            except (KeyError, IndexError, ValueError, MoleculeError) as exc:
                raise ValueError(f"vocabulary line {n}: {exc}") from None
        expected = [(s, _tup(r)) for s, r in vocab.actions()] + [("CAUTERIZE",)]
        if actions != expected:
            raise ValueError("action table does not match the fragments and attachments")
        return vocab

    def save(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.loads(fh.read())


def build_vocabulary(records):
    """Decompose every molecule and register its fragments and attachment orbits.

    Molecules are visited in canonical-SMILES order so the first-seen
    representatives do not depend on the input order.
    """
    mols = {}
    for r in records:
        smiles = r.smiles if isinstance(r, DatasetRecord) else r
        m = parse_smiles(smiles)
        mols.setdefault(write_canonical_smiles(m), m)
    counts = Counter()
    registry = AttachmentRegistry()
    for key in sorted(mols):
        dec = decompose(mols[key])
        for cf, _ in dec.placements:
            counts[cf.smiles] += 1
        for att in dec.attachments:
            for side in att.fragment_pair:
                cf, fmap = dec.placements[side]
                local = dec.fragments[side].global_to_local
                registry.register(cf, tuple(fmap[local[g]] for g in att.shared_atoms))
    return Vocabulary(counts, registry)
