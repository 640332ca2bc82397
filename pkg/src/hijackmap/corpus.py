"""Tweet records, line-delimited ingestion, splits, and a synthetic corpus.

A record travels as one JSON object per line::

    {"id": "...", "text": "...", "created_at": "2022-03-01T08:00:00Z", "label": 1}

``label`` is optional (1 = relevant hijacking report, 0 = irrelevant).
Storage files use the same format, append-only, UTF-8 with LF endings.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

import numpy as np

KEYWORD = "hijacking"


class IngestError(ValueError):
    """A malformed input line, carrying its 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class TweetRecord:
    """One ingested post."""

    id: str
    text: str
    created_at: str
    label: int | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("record id must be non-empty")
        if not self.text.strip():
            raise ValueError(f"record {self.id!r}: text empty after trimming")
        if len(self.text) > 1000:
            raise ValueError(f"record {self.id!r}: text longer than 1000 chars")
        if self.label is not None and self.label not in (0, 1):
            raise ValueError(f"record {self.id!r}: label must be 0 or 1")

    def to_json(self) -> str:
        obj = {"id": self.id, "text": self.text, "created_at": self.created_at}
        if self.label is not None:
            obj["label"] = self.label
        return json.dumps(obj, ensure_ascii=False)


class Dataset:
    """An ordered, id-unique collection of tweet records.

    Immutable after construction; iteration follows insertion order.
    """

    def __init__(self, records: Iterable[TweetRecord], provenance: str = ""):
        self.records: tuple[TweetRecord, ...] = tuple(records)
        self.provenance = provenance
        seen: set[str] = set()
        for rec in self.records:
            if rec.id in seen:
                raise ValueError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[TweetRecord]:
        return iter(self.records)

    def __getitem__(self, i: int) -> TweetRecord:
        return self.records[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, Dataset) and self.records == other.records

    def ids(self) -> set[str]:
        return {rec.id for rec in self.records}

    def labels(self) -> list[int | None]:
        return [rec.label for rec in self.records]

    def class_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for rec in self.records:
            if rec.label is not None:
                counts[rec.label] = counts.get(rec.label, 0) + 1
        return counts


@dataclass
class SplitSpec:
    """Train/test partition request.

    When ``stratified`` and per-class counts are given, each part receives
    exactly the requested number of records per label; without explicit
    counts the totals are allocated across labels by largest remainder.
    """

    train_count: int
    test_count: int
    seed: int = 0
    stratified: bool = False
    train_by_class: dict[int, int] | None = None
    test_by_class: dict[int, int] | None = None


@dataclass
class IngestResult:
    dataset: Dataset
    read: int = 0
    added: int = 0
    dedup_events: int = 0
    skipped: list[str] = field(default_factory=list)


def parse_record_line(line: str, line_no: int) -> TweetRecord:
    """Parse one JSON record line; raises IngestError on any defect."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise IngestError(line_no, f"invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise IngestError(line_no, "record is not an object")
    for key in ("id", "text", "created_at"):
        if key not in obj:
            raise IngestError(line_no, f"missing field {key!r}")
    label = obj.get("label")
    if label is not None and label not in (0, 1):
        raise IngestError(line_no, f"label must be 0 or 1, got {label!r}")
    try:
        return TweetRecord(
            id=str(obj["id"]),
            text=str(obj["text"]),
            created_at=str(obj["created_at"]),
            label=label,
        )
    except ValueError as exc:
        raise IngestError(line_no, str(exc)) from exc


def ingest_records(
    source: IO[str] | Iterable[str],
    provenance: str = "",
    lenient: bool = False,
) -> IngestResult:
    """Read line-delimited records into a Dataset.

    Duplicate ids keep the first occurrence and count one dedup event.
    Malformed lines raise IngestError, or are skipped (and recorded) when
    ``lenient`` is set. An empty source yields an empty Dataset.
    """
    result = IngestResult(dataset=Dataset([], provenance))
    records: list[TweetRecord] = []
    seen: set[str] = set()
    for line_no, line in enumerate(source, start=1):
        if not line.strip():
            continue
        result.read += 1
        try:
            rec = parse_record_line(line, line_no)
        except IngestError as exc:
            if not lenient:
                raise
            result.skipped.append(str(exc))
            continue
        if rec.id in seen:
            result.dedup_events += 1
            continue
        seen.add(rec.id)
        records.append(rec)
        result.added += 1
    result.dataset = Dataset(records, provenance)
    return result


def write_records(dataset: Dataset | Iterable[TweetRecord], sink: IO[str]) -> int:
    """Serialize records one JSON object per line; returns the line count."""
    n = 0
    for rec in dataset:
        sink.write(rec.to_json() + "\n")
        n += 1
    return n


def _allocate_by_class(total: int, available: dict[int, int]) -> dict[int, int]:
    """Largest-remainder allocation of ``total`` across class pools."""
    pool = sum(available.values())
    if pool == 0:
        return {label: 0 for label in available}
    quotas = {label: total * count / pool for label, count in available.items()}
    alloc = {label: int(q) for label, q in quotas.items()}
    leftover = total - sum(alloc.values())
    by_remainder = sorted(available, key=lambda lb: (quotas[lb] - alloc[lb], lb), reverse=True)
    for label in by_remainder[:leftover]:
        alloc[label] += 1
    return alloc


def split_dataset(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Partition ``ds`` into (train, test), deterministically per seed.

    Stratified splits draw per-class counts from seeded per-class shuffles;
    requesting more records than a class holds is an error naming the class.
    """
    if spec.train_count + spec.test_count > len(ds):
        raise ValueError(
            f"requested {spec.train_count}+{spec.test_count} records "
            f"from a dataset of {len(ds)}"
        )
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(len(ds))

    if not spec.stratified:
        picked = [ds[i] for i in order]
        train = picked[: spec.train_count]
        test = picked[spec.train_count : spec.train_count + spec.test_count]
        return (
            Dataset(train, f"{ds.provenance}/train"),
            Dataset(test, f"{ds.provenance}/test"),
        )

    if any(rec.label is None for rec in ds):
        raise ValueError("stratified split requires every record to be labeled")
    available = ds.class_counts()
    train_alloc = dict(spec.train_by_class) if spec.train_by_class else _allocate_by_class(
        spec.train_count, available
    )
    test_alloc = dict(spec.test_by_class) if spec.test_by_class else _allocate_by_class(
        spec.test_count, available
    )
    for label in set(train_alloc) | set(test_alloc):
        want = train_alloc.get(label, 0) + test_alloc.get(label, 0)
        have = available.get(label, 0)
        if want > have:
            raise ValueError(f"class {label}: requested {want} records, only {have} available")

    by_class: dict[int, list[TweetRecord]] = {}
    for i in order:
        by_class.setdefault(ds[i].label, []).append(ds[i])
    train: list[TweetRecord] = []
    test: list[TweetRecord] = []
    for label in sorted(by_class):
        rows = by_class[label]
        k_train = train_alloc.get(label, 0)
        k_test = test_alloc.get(label, 0)
        train.extend(rows[:k_train])
        test.extend(rows[k_train : k_train + k_test])
    return (
        Dataset(train, f"{ds.provenance}/train"),
        Dataset(test, f"{ds.provenance}/test"),
    )


def validation_partition(
    train: Dataset, fraction: float, seed: int = 0
) -> tuple[Dataset, Dataset]:
    """Split a training set into (fit, val).

    The validation part is the trailing ceil(fraction * n) records after a
    seeded shuffle, so e.g. 296 records at fraction 0.2 give a fit set of
    236 and a validation set of 60.
    """
    if len(train) == 0:
        raise ValueError("cannot partition an empty training set")
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"validation fraction must be in [0, 1), got {fraction}")
    n = len(train)
    n_val = math.ceil(fraction * n)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    shuffled = [train[i] for i in order]
    fit = shuffled[: n - n_val]
    val = shuffled[n - n_val :]
    return (
        Dataset(fit, f"{train.provenance}/fit"),
        Dataset(val, f"{train.provenance}/val"),
    )


# Sentence templates for the synthetic corpus. Relevant templates mention the
# keyword plus exactly one {place} slot; irrelevant templates either use the
# keyword in a non-incident sense or omit it, and never name a place.
_RELEVANT_TEMPLATES = [
    "armed {kw} reported near the {place} taxi rank this morning",
    "{kw} incident at the {place} petrol station, suspects fled on foot",
    "attempted {kw} outside the {place} shopping centre, driver unharmed",
    "another {kw} in {place} last night, bakkie taken at gunpoint",
    "warning: {kw} hotspot by the {place} off-ramp, avoid after dark",
    "my neighbour survived a {kw} close to {place} station yesterday",
    "{kw} alert for {place}: grey sedan forced a driver out at the robots",
    "police confirm a {kw} case opened after the {place} attack on friday",
    "two men arrested for the {kw} spree around {place} this week",
    "witnessed a {kw} at the {place} intersection, registration noted",
    "delivery van taken in a {kw} by the {place} depot entrance",
    "{kw} followed a smash and grab near {place} mall parking",
]

_IRRELEVANT_KEYWORD_TEMPLATES = [
    "that movie about a plane {kw} was honestly a masterpiece",
    "my browser home page got a {kw} from some adware again",
    "reading a thriller novel where the {kw} twist made no sense",
    "the dj pulled off a total {kw} of the playlist at the party",
    "lecture today covered dns {kw} and other network attacks",
    "feels like a {kw} of the meeting agenda by the sales team",
    "the {kw} documentary from the seventies is on tv tonight",
    "someone called the referee decision a {kw} of the whole match",
    "new podcast episode unpacks the history of aircraft {kw} cases",
    "my sourdough starter staged a {kw} of the entire fridge shelf",
]

_IRRELEVANT_PLAIN_TEMPLATES = [
    "traffic on the highway is crawling again this evening",
    "load shedding schedule moved to stage four tomorrow",
    "best coffee of the week from the corner bakery, no contest",
    "looking for a reliable mechanic for an old hatchback",
    "the sunset over the bay tonight was absolutely unreal",
    "anyone know when the farmers market opens on saturday",
    "finally finished the marathon training block, legs are done",
    "bookshop haul: three novels and a field guide to fynbos",
    "rain forecast all weekend so the hike is postponed again",
    "new tyres fitted and the car finally drives straight",
]

# Place names used by relevant templates; kept in sync with the packaged
# gazetteer so map-path tests can resolve every mention.
SYNTHETIC_PLACES = [
    "claremont",
    "khayelitsha",
    "gugulethu",
    "bellville",
    "mitchells plain",
    "sea point",
    "wynberg",
    "parow",
    "durbanville",
    "muizenberg",
    "athlone",
    "rondebosch",
]


def generate_synthetic_corpus(
    seed: int, relevant_count: int, irrelevant_count: int
) -> Dataset:
    """Deterministic stand-in corpus for tests and demos.

    Relevant records are template incident sentences containing the keyword
    and exactly one known place name; irrelevant records use the keyword in
    a non-incident context or omit it entirely. Labels are set accordingly.
    """
    if relevant_count < 0 or irrelevant_count < 0:
        raise ValueError("counts must be non-negative")
    rng = np.random.default_rng(seed)
    records: list[TweetRecord] = []
    base_minute = 0
    for i in range(relevant_count):
        template = _RELEVANT_TEMPLATES[rng.integers(len(_RELEVANT_TEMPLATES))]
        place = SYNTHETIC_PLACES[rng.integers(len(SYNTHETIC_PLACES))]
        text = template.format(kw=KEYWORD, place=place)
        records.append(
            TweetRecord(
                id=f"synth-{seed}-r{i:05d}",
                text=text,
                created_at=_timestamp(base_minute + i),
                label=1,
            )
        )
    base_minute += relevant_count
    for i in range(irrelevant_count):
        if rng.random() < 0.5:
            template = _IRRELEVANT_KEYWORD_TEMPLATES[
                rng.integers(len(_IRRELEVANT_KEYWORD_TEMPLATES))
            ]
            text = template.format(kw=KEYWORD)
        else:
            text = _IRRELEVANT_PLAIN_TEMPLATES[
                rng.integers(len(_IRRELEVANT_PLAIN_TEMPLATES))
            ]
        records.append(
            TweetRecord(
                id=f"synth-{seed}-i{i:05d}",
                text=text,
                created_at=_timestamp(base_minute + i),
                label=0,
            )
        )
    return Dataset(records, provenance=f"synthetic(seed={seed})")


def _timestamp(minute: int) -> str:
    hour, minute = divmod(minute, 60)
    day, hour = divmod(hour, 24)
    return f"2022-03-{day % 28 + 1:02d}T{hour:02d}:{minute:02d}:00Z"
