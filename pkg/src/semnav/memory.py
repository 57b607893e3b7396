"""Tiered knowledge store: STM working memory backed by on-demand, network,
and cloud tiers.

Lookups probe tiers from fastest to slowest, pay each probed tier's simulated
latency, and promote hits into every faster tier so repeated access gets
cheaper. Each tier evicts least-recently-used entries when its capacity is
exceeded. Learned knowledge written to the on-demand tier is queued and
flushed to the cloud at mission end.
"""

from __future__ import annotations

from collections import OrderedDict, deque
from dataclasses import dataclass, field, replace
from enum import IntEnum

from .world import WorldError

NAMESPACES = ("env", "behavior", "knowledge", "map")


class TierId(IntEnum):
    """Probe order: lower value = faster tier, searched first."""

    STM = 0
    ONDEMAND = 1
    NETWORK = 2
    CLOUD = 3


class UnknownSymbolError(KeyError):
    """Prefetch goal symbol absent from every tier."""


class OversizeEntryError(ValueError):
    """Entry larger than the target tier's total capacity."""


class SnapshotError(ValueError):
    """Malformed snapshot document; the tier is left unchanged."""


@dataclass(frozen=True)
class MapTile:
    """Grid patch payload for the map namespace. Rows are strings over
    {F, O, U} (free/occupied/unknown), row 0 = lowest y."""

    col0: int
    row0: int
    rows: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.rows:
            raise ValueError("map tile needs at least one row")
        width = len(self.rows[0])
        if width == 0 or any(len(r) != width for r in self.rows):
            raise ValueError("map tile rows must be non-empty and equal length")
        if any(set(r) - set("FOU") for r in self.rows):
            raise ValueError("map tile cells must be F, O, or U")

    def to_text(self) -> str:
        return f"{self.col0},{self.row0};" + "|".join(self.rows)

    @staticmethod
    def from_text(text: str) -> "MapTile":
        head, _, body = text.partition(";")
        parts = head.split(",")
        if len(parts) != 2 or not body:
            raise ValueError(f"bad map tile text '{text}'")
        try:
            col0, row0 = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"bad map tile origin '{head}'") from None
        return MapTile(col0, row0, tuple(body.split("|")))


@dataclass(frozen=True)
class StoredEntry:
    key: str
    payload: object
    version: int = 1
    size_units: int = 1
    provenance: str = "authored"

    def __post_init__(self) -> None:
        namespace, _, rest = self.key.partition("/")
        if namespace not in NAMESPACES or not rest:
            raise ValueError(f"key '{self.key}' must look like <namespace>/<name>")
        if self.size_units <= 0:
            raise ValueError("size_units must be positive")
        if self.version < 1:
            raise ValueError("version must be >= 1")
        if self.provenance not in ("authored", "learned"):
            raise ValueError(f"unknown provenance '{self.provenance}'")

    @property
    def namespace(self) -> str:
        return self.key.partition("/")[0]

    @property
    def name(self) -> str:
        return self.key.partition("/")[2]


@dataclass(frozen=True)
class TierConfig:
    capacity: int | None  # None = unbounded (cloud)
    latency: int  # simulated ticks charged per probe

    def __post_init__(self) -> None:
        if self.capacity is not None and self.capacity <= 0:
            raise ValueError("capacity must be positive (or None for unbounded)")
        if self.latency < 0:
            raise ValueError("latency must be >= 0")


DEFAULT_CONFIGS: dict[TierId, TierConfig] = {
    TierId.STM: TierConfig(capacity=16, latency=0),
    TierId.ONDEMAND: TierConfig(capacity=64, latency=1),
    TierId.NETWORK: TierConfig(capacity=256, latency=5),
    TierId.CLOUD: TierConfig(capacity=None, latency=50),
}


@dataclass(frozen=True)
class FetchResult:
    entry: StoredEntry
    served_from: TierId
    accumulated_latency: int


@dataclass
class TierStatEntry:
    hits: int = 0
    misses: int = 0
    evictions: int = 0
    latency: int = 0


@dataclass
class TierStats:
    per_tier: dict[TierId, TierStatEntry] = field(
        default_factory=lambda: {tier: TierStatEntry() for tier in TierId}
    )

    def as_dict(self) -> dict[str, dict[str, int]]:
        return {
            tier.name: {
                "hits": s.hits,
                "misses": s.misses,
                "evictions": s.evictions,
                "latency": s.latency,
            }
            for tier, s in sorted(self.per_tier.items())
        }


# --- payload text codecs, dispatched by key namespace ---

def encode_payload(namespace: str, payload: object) -> str:
    if namespace == "env":
        from .world import serialize_element

        return serialize_element(payload)
    if namespace == "behavior":
        from .planner import format_action_template

        return format_action_template(payload)
    if namespace == "knowledge":
        from .planner import format_fact

        return format_fact(payload)
    if namespace == "map":
        return payload.to_text()  # type: ignore[union-attr]
    raise ValueError(f"unknown namespace '{namespace}'")


def decode_payload(namespace: str, text: str) -> object:
    if namespace == "env":
        from .world import parse_element

        return parse_element(text)
    if namespace == "behavior":
        from .planner import parse_action_template

        return parse_action_template(text)
    if namespace == "knowledge":
        from .planner import parse_fact

        return parse_fact(text)
    if namespace == "map":
        return MapTile.from_text(text)
    raise ValueError(f"unknown namespace '{namespace}'")


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def _unescape(text: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            if i + 1 >= len(text):
                raise SnapshotError("dangling escape at end of payload")
            nxt = text[i + 1]
            if nxt == "\\":
                out.append("\\")
            elif nxt == "t":
                out.append("\t")
            elif nxt == "n":
                out.append("\n")
            else:
                raise SnapshotError(f"unknown escape '\\{nxt}' in payload")
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


class TierStore:
    """Four-tier LRU store with probe/promote lookup semantics."""

    def __init__(self, configs: dict[TierId, TierConfig] | None = None):
        self.configs = dict(DEFAULT_CONFIGS)
        if configs:
            self.configs.update(configs)
        for faster, slower in zip(sorted(TierId), sorted(TierId)[1:]):
            if self.configs[faster].latency > self.configs[slower].latency:
                raise ValueError("latencies must be non-decreasing from STM to CLOUD")
        # key -> entry, insertion order = recency (first = least recent)
        self._tiers: dict[TierId, OrderedDict[str, StoredEntry]] = {
            tier: OrderedDict() for tier in TierId
        }
        self._writeback: set[str] = set()
        self.stats = TierStats()

    # -- inspection helpers --

    def entries(self, tier: TierId) -> list[StoredEntry]:
        """Entries in recency order, least recent first."""
        return list(self._tiers[tier].values())

    def contains(self, key: str, tier: TierId) -> bool:
        return key in self._tiers[tier]

    def used_units(self, tier: TierId) -> int:
        return sum(e.size_units for e in self._tiers[tier].values())

    def keys_anywhere(self) -> set[str]:
        out: set[str] = set()
        for tier in TierId:
            out.update(self._tiers[tier])
        return out

    # -- core operations --

    def get(self, key: str) -> FetchResult | None:
        latency = 0
        for tier in sorted(TierId):
            stat = self.stats.per_tier[tier]
            latency += self.configs[tier].latency
            stat.latency += self.configs[tier].latency
            entry = self._tiers[tier].get(key)
            if entry is None:
                stat.misses += 1
                continue
            stat.hits += 1
            self._tiers[tier].move_to_end(key)
            for faster in sorted(TierId):
                if faster >= tier:
                    break
                self._insert(faster, entry)
            return FetchResult(entry=entry, served_from=tier, accumulated_latency=latency)
        return None

    def put(self, entry: StoredEntry, tier: TierId) -> None:
        capacity = self.configs[tier].capacity
        if capacity is not None and entry.size_units > capacity:
            raise OversizeEntryError(
                f"entry '{entry.key}' ({entry.size_units} units) exceeds "
                f"{tier.name} capacity {capacity}"
            )
        versions = [
            t[entry.key].version for t in self._tiers.values() if entry.key in t
        ]
        stored = replace(entry, version=max(versions) + 1 if versions else 1)
        # drop stale copies so no tier can serve an outdated version
        for other in TierId:
            if other is not tier:
                self._tiers[other].pop(entry.key, None)
        self._insert(tier, stored)
        if stored.provenance == "learned" and tier is TierId.ONDEMAND:
            self._writeback.add(stored.key)

    def _insert(self, tier: TierId, entry: StoredEntry) -> None:
        """Place entry as most-recent in tier, evicting LRU entries to fit.
        Entries wider than the whole tier are skipped (promotion must not
        fail a successful lookup)."""
        capacity = self.configs[tier].capacity
        if capacity is not None and entry.size_units > capacity:
            return
        bucket = self._tiers[tier]
        bucket.pop(entry.key, None)
        bucket[entry.key] = entry
        if capacity is None:
            return
        used = self.used_units(tier)
        while used > capacity:
            victim_key, victim = next(iter(bucket.items()))
            bucket.popitem(last=False)
            used -= victim.size_units
            self.stats.per_tier[tier].evictions += 1

    # -- prefetch --

    def _relation_edges(self) -> dict[str, set[str]]:
        """Undirected symbol adjacency from every env record's relations."""
        edges: dict[str, set[str]] = {}
        seen: set[str] = set()
        for tier in TierId:
            for key, entry in self._tiers[tier].items():
                if entry.namespace != "env" or key in seen:
                    continue
                seen.add(key)
                record = entry.payload
                for rel in record.implicit:  # type: ignore[attr-defined]
                    if rel.predicate not in ("inside", "adjacent", "connected"):
                        continue
                    edges.setdefault(rel.subject, set()).add(rel.object)
                    edges.setdefault(rel.object, set()).add(rel.subject)
        return edges

    def prefetch_mission(self, goal_symbol: str, depth: int | None = None) -> set[str]:
        """Fetch the goal element and everything within `depth` relation hops
        (inside/adjacent/connected, undirected). depth=None means unbounded."""
        goal_key = f"env/{goal_symbol}"
        if goal_key not in self.keys_anywhere():
            raise UnknownSymbolError(goal_symbol)
        edges = self._relation_edges()
        closure = {goal_symbol}
        frontier = deque([(goal_symbol, 0)])
        while frontier:
            symbol, hops = frontier.popleft()
            if depth is not None and hops >= depth:
                continue
            for neighbor in edges.get(symbol, ()):
                if neighbor not in closure:
                    closure.add(neighbor)
                    frontier.append((neighbor, hops + 1))
        fetched: set[str] = set()
        for symbol in sorted(closure):
            key = f"env/{symbol}"
            if self.get(key) is not None:
                fetched.add(key)
        return fetched

    # -- write-back --

    def flush_writeback(self) -> int:
        """Copy queued learned entries still in ONDEMAND to CLOUD, preserving
        versions. Returns the number of entries written."""
        written = 0
        ondemand = self._tiers[TierId.ONDEMAND]
        for key in sorted(self._writeback):
            entry = ondemand.get(key)
            if entry is None or entry.provenance != "learned":
                continue
            self._tiers[TierId.CLOUD].pop(key, None)
            self._tiers[TierId.CLOUD][key] = entry
            written += 1
        self._writeback.clear()
        return written

    # -- persistence --

    def snapshot(self, tier: TierId) -> str:
        bucket = self._tiers[tier]
        lines = [f"SEMNAV-TIER v1 {tier.name} {len(bucket)}"]
        for entry in bucket.values():
            payload_text = encode_payload(entry.namespace, entry.payload)
            lines.append(
                "\t".join(
                    (
                        entry.key,
                        str(entry.version),
                        str(entry.size_units),
                        entry.provenance,
                        _escape(payload_text),
                    )
                )
            )
        return "\n".join(lines) + "\n"

    def load_snapshot(self, document: str, tier: TierId) -> None:
        lines = document.splitlines()
        if not lines:
            raise SnapshotError("empty snapshot document")
        header = lines[0].split(" ")
        if len(header) != 4 or header[0] != "SEMNAV-TIER" or header[1] != "v1":
            raise SnapshotError(f"bad snapshot header '{lines[0]}'")
        if header[2] != tier.name:
            raise SnapshotError(f"snapshot is for tier {header[2]}, not {tier.name}")
        try:
            count = int(header[3])
        except ValueError:
            raise SnapshotError(f"bad entry count '{header[3]}'") from None
        records = lines[1:]
        if len(records) != count:
            raise SnapshotError(f"expected {count} records, found {len(records)}")
        loaded: OrderedDict[str, StoredEntry] = OrderedDict()
        total = 0
        for line in records:
            fields = line.split("\t")
            if len(fields) != 5:
                raise SnapshotError(f"record has {len(fields)} fields, expected 5")
            key, version_text, size_text, provenance, payload_text = fields
            try:
                version = int(version_text)
                size_units = int(size_text)
            except ValueError:
                raise SnapshotError(f"bad numeric field in record for '{key}'") from None
            try:
                payload = decode_payload(key.partition("/")[0], _unescape(payload_text))
                entry = StoredEntry(
                    key=key,
                    payload=payload,
                    version=version,
                    size_units=size_units,
                    provenance=provenance,
                )
            except (ValueError, WorldError) as exc:
                raise SnapshotError(f"bad record for '{key}': {exc}") from None
            if key in loaded:
                raise SnapshotError(f"duplicate key '{key}' in snapshot")
            loaded[key] = entry
            total += size_units
        capacity = self.configs[tier].capacity
        if capacity is not None and total > capacity:
            raise SnapshotError(
                f"snapshot needs {total} units, {tier.name} capacity is {capacity}"
            )
        self._tiers[tier] = loaded
