"""Model of a multi-GPU node: devices, accelerator links, host links.

A topology is immutable after loading and is safe to share read-only
across any number of simulations. Link bandwidth is bytes/second per
direction channel with sublinks aggregated at load time; latency is
seconds per copy operation. Full-duplex links expose two independent
direction channels, half-duplex links a single shared one.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources

ACCELERATOR = "accelerator"
HOST = "host"

FULL = "full"
HALF = "half"

PRESETS = ("beluga", "narval")


class TopologyError(ValueError):
    """Raised for schema or invariant violations in a topology config."""


@dataclass(frozen=True, order=True)
class DeviceId:
    """A device in the node, either an accelerator or the single host."""

    index: int
    kind: str = ACCELERATOR

    def __post_init__(self):
        if self.index < 0:
            raise TopologyError(f"device index must be non-negative, got {self.index}")
        if self.kind not in (ACCELERATOR, HOST):
            raise TopologyError(f"unknown device kind {self.kind!r}")

    @property
    def is_host(self) -> bool:
        return self.kind == HOST

    @property
    def label(self) -> str:
        return "host" if self.is_host else str(self.index)

    def __str__(self):
        return self.label


HOST_DEVICE = DeviceId(0, HOST)


@dataclass(eq=False)
class Channel:
    """One direction channel of a link; the unit of exclusive occupancy."""

    id: str
    bandwidth: float  # bytes/second
    latency: float  # seconds per copy

    def __repr__(self):
        return f"Channel({self.id})"


@dataclass(frozen=True)
class LinkSpec:
    """A physical link between two devices, already aggregated over sublinks."""

    a: DeviceId
    b: DeviceId
    bandwidth: float  # bytes/second per direction channel (sublinks summed)
    latency: float
    duplex: str
    sublinks: int = 1

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise TopologyError(f"link {self.a}-{self.b}: bandwidth must be > 0")
        if self.latency < 0:
            raise TopologyError(f"link {self.a}-{self.b}: latency must be >= 0")
        if self.duplex not in (FULL, HALF):
            raise TopologyError(f"link {self.a}-{self.b}: duplex must be full or half")
        if self.sublinks < 1:
            raise TopologyError(f"link {self.a}-{self.b}: sublinks must be >= 1")
        if self.a == self.b:
            raise TopologyError(f"link endpoints must differ, got {self.a}-{self.b}")


class Topology:
    """An immutable set of devices, links, and their direction channels."""

    def __init__(self, name: str, accelerators: int, links: list[LinkSpec]):
        self.name = name
        if accelerators < 1:
            raise TopologyError("topology needs at least one accelerator")
        self.devices = [DeviceId(i) for i in range(accelerators)] + [HOST_DEVICE]
        self.links = list(links)
        self._channels: dict[tuple[DeviceId, DeviceId], Channel] = {}
        seen_pairs: set[frozenset] = set()
        for link in self.links:
            for dev in (link.a, link.b):
                if dev not in self.devices:
                    raise TopologyError(f"link references unknown device {dev}")
            pair = frozenset((link.a, link.b))
            if pair in seen_pairs:
                raise TopologyError(f"duplicate link for pair {link.a}-{link.b}")
            seen_pairs.add(pair)
            if link.duplex == FULL:
                fwd = Channel(f"{link.a}->{link.b}", link.bandwidth, link.latency)
                rev = Channel(f"{link.b}->{link.a}", link.bandwidth, link.latency)
                self._channels[(link.a, link.b)] = fwd
                self._channels[(link.b, link.a)] = rev
            else:
                shared = Channel(f"{link.a}<->{link.b}", link.bandwidth, link.latency)
                self._channels[(link.a, link.b)] = shared
                self._channels[(link.b, link.a)] = shared

    @property
    def accelerators(self) -> list[DeviceId]:
        return [d for d in self.devices if not d.is_host]

    @property
    def host(self) -> DeviceId:
        return HOST_DEVICE

    def device(self, index: int) -> DeviceId:
        dev = DeviceId(index)
        if dev not in self.devices:
            raise TopologyError(f"no accelerator with index {index} in {self.name!r}")
        return dev

    def channel_for(self, src: DeviceId, dst: DeviceId) -> Channel:
        """Return the direction channel that carries src -> dst traffic."""
        if src == dst:
            raise TopologyError(f"no self-link on device {src}")
        try:
            return self._channels[(src, dst)]
        except KeyError:
            raise TopologyError(f"no link joins {src} and {dst} in {self.name!r}") from None

    def has_link(self, src: DeviceId, dst: DeviceId) -> bool:
        return (src, dst) in self._channels

    def channels(self) -> list[Channel]:
        """All distinct channels, in deterministic creation order."""
        out: list[Channel] = []
        for ch in self._channels.values():
            if ch not in out:
                out.append(ch)
        return out


def _parse_record(line: str, n_fields: int, where: str) -> list[str]:
    fields = line.split()
    if len(fields) != n_fields:
        raise TopologyError(f"{where}: expected {n_fields} fields, got {len(fields)} in {line!r}")
    return fields


def load_topology(source: str, name: str = "topology") -> Topology:
    """Parse a topology config text into a validated Topology.

    The format is line-oriented with three record sections:

        name <label>            optional, before any section
        [device]                index kind
        [link]                  a b bandwidth latency duplex sublinks
        [hostlink]              device bandwidth latency duplex

    Link bandwidth is per sublink per direction; the loaded LinkSpec
    carries the aggregate (bandwidth * sublinks). '#' starts a comment.
    """
    section = None
    accel_indices: list[int] = []
    links: list[LinkSpec] = []
    hostlinked: set[int] = set()
    raw_links: list[tuple] = []
    raw_hostlinks: list[tuple] = []

    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"line {lineno}"
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("device", "link", "hostlink"):
                raise TopologyError(f"{where}: unknown section [{section}]")
            continue
        if section is None:
            fields = line.split()
            if fields[0] == "name" and len(fields) == 2:
                name = fields[1]
                continue
            raise TopologyError(f"{where}: content before any section: {line!r}")
        if section == "device":
            idx_s, kind = _parse_record(line, 2, where)
            if kind != ACCELERATOR:
                raise TopologyError(f"{where}: only accelerator devices are declared; "
                                    f"the host device is implicit")
            accel_indices.append(_parse_int(idx_s, where))
        elif section == "link":
            a, b, bw, lat, duplex, subs = _parse_record(line, 6, where)
            raw_links.append((_parse_int(a, where), _parse_int(b, where),
                              _parse_float(bw, where), _parse_float(lat, where),
                              duplex, _parse_int(subs, where), where))
        else:
            dev, bw, lat, duplex = _parse_record(line, 4, where)
            raw_hostlinks.append((_parse_int(dev, where), _parse_float(bw, where),
                                  _parse_float(lat, where), duplex, where))

    if sorted(accel_indices) != list(range(len(accel_indices))):
        raise TopologyError(f"accelerator indices must be dense 0..N-1, got {sorted(accel_indices)}")
    if not accel_indices:
        raise TopologyError("no [device] entries found")

    n = len(accel_indices)
    for a, b, bw, lat, duplex, subs, where in raw_links:
        if not (0 <= a < n and 0 <= b < n):
            raise TopologyError(f"{where}: link endpoint out of range: {a}-{b}")
        try:
            links.append(LinkSpec(DeviceId(a), DeviceId(b), bw * subs, lat, duplex, subs))
        except TopologyError as exc:
            raise TopologyError(f"{where}: {exc}") from None
    for dev, bw, lat, duplex, where in raw_hostlinks:
        if not 0 <= dev < n:
            raise TopologyError(f"{where}: hostlink device out of range: {dev}")
        if dev in hostlinked:
            raise TopologyError(f"{where}: duplicate hostlink for device {dev}")
        hostlinked.add(dev)
        try:
            links.append(LinkSpec(DeviceId(dev), HOST_DEVICE, bw, lat, duplex))
        except TopologyError as exc:
            raise TopologyError(f"{where}: {exc}") from None

    return Topology(name, n, links)


def load_topology_file(path: str) -> Topology:
    with open(path, encoding="utf-8") as fh:
        return load_topology(fh.read())


def preset(name: str) -> Topology:
    """Load one of the shipped node presets by name."""
    if name not in PRESETS:
        raise TopologyError(f"unknown preset {name!r}, available: {', '.join(PRESETS)}")
    text = resources.files("mpsim.presets").joinpath(f"{name}.topo").read_text()
    return load_topology(text)


def resolve(spec: str) -> Topology:
    """Interpret a CLI topology argument: a preset name, a preset file
    name like 'beluga.topo', or a path to a config file."""
    if spec in PRESETS:
        return preset(spec)
    if os.path.exists(spec):
        return load_topology_file(spec)
    stem = os.path.basename(spec)
    if stem.endswith(".topo") and stem[:-5] in PRESETS:
        return preset(stem[:-5])
    raise TopologyError(f"no such topology file or preset: {spec!r}")


def _parse_int(text: str, where: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise TopologyError(f"{where}: expected integer, got {text!r}") from None


def _parse_float(text: str, where: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise TopologyError(f"{where}: expected number, got {text!r}") from None
    return value
