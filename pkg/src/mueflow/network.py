"""Road network model: nodes, directed links, zones, and adjacency.

Internal units are kilometres, minutes, and veh/h throughout.  CSV
ingestion converts miles and mph at the door (1 mile = 1.609 km) so no
other module ever sees imperial units.  Zones couple travel demand to
the graph through generated centroid nodes and connector links.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import _kernels

MILES_TO_KM = 1.609
EARTH_RADIUS_KM = 6371.0

CONNECTOR_CAPACITY = 1.0e6  # veh/h, effectively uncongested
CONNECTOR_SPEED_KMH = 40.0
MIN_LINK_LENGTH_KM = 1.0e-6  # clamp for coincident centroid/node pairs

#: capacity (veh/h) and free-flow speed (km/h) applied when a links CSV
#: leaves capacity/speed blank, keyed by hierarchy tag
DEFAULT_ROAD_ATTRIBUTES = {
    "expressway": (2200.0, 90.0),
    "highway": (2000.0, 60.0),
    "local": (1400.0, 40.0),
}


class NetworkValidationError(ValueError):
    """Raised when a network or its source files violate the schema."""


@dataclass(frozen=True)
class Node:
    id: str
    x: float
    y: float


@dataclass(frozen=True)
class Link:
    id: str
    from_node: str
    to_node: str
    length_km: float
    capacity: float
    speed_kmh: float
    hierarchy: str = ""
    connector: bool = False

    @property
    def free_flow_time(self) -> float:
        """Free-flow traversal time in minutes."""
        return 60.0 * self.length_km / self.speed_kmh


@dataclass
class Zone:
    id: str
    x: float
    y: float
    attached_node: str | None = None
    centroid_node: str | None = None


class Network:
    """Directed network with insertion-ordered nodes, links, and zones."""

    def __init__(self, coord_system: str = "km"):
        if coord_system not in ("km", "lonlat"):
            raise NetworkValidationError(
                f"coord_system must be 'km' or 'lonlat', got {coord_system!r}"
            )
        self.coord_system = coord_system
        self.nodes: dict[str, Node] = {}
        self.links: dict[str, Link] = {}
        self.zones: dict[str, Zone] = {}
        self._csr = None

    # -- construction -------------------------------------------------

    def add_node(self, node: Node) -> None:
        if node.id in self.nodes:
            raise NetworkValidationError(f"duplicate node id {node.id!r}")
        self.nodes[node.id] = node
        self._csr = None

    def add_link(self, link: Link) -> None:
        if link.id in self.links:
            raise NetworkValidationError(f"duplicate link id {link.id!r}")
        self.links[link.id] = link
        self._csr = None

    def add_zone(self, zone: Zone) -> None:
        if zone.id in self.zones:
            raise NetworkValidationError(f"duplicate zone id {zone.id!r}")
        self.zones[zone.id] = zone

    # -- basic views ---------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def link_ids(self) -> list[str]:
        return list(self.links)

    @property
    def node_ids(self) -> list[str]:
        return list(self.nodes)

    def lengths_km(self) -> np.ndarray:
        return np.array([l.length_km for l in self.links.values()])

    def capacities(self) -> np.ndarray:
        return np.array([l.capacity for l in self.links.values()])

    def free_flow_times(self) -> np.ndarray:
        return np.array([l.free_flow_time for l in self.links.values()])

    def connector_mask(self) -> np.ndarray:
        return np.array([l.connector for l in self.links.values()], dtype=bool)

    # -- geometry ------------------------------------------------------

    def distance_km(self, a: tuple[float, float], b: tuple[float, float]) -> float:
        """Straight-line distance between two coordinate pairs in km.

        Planar coordinates are taken as-is; lon/lat pairs go through an
        equirectangular approximation, adequate at city scale.
        """
        if self.coord_system == "km":
            return math.hypot(b[0] - a[0], b[1] - a[1])
        lon1, lat1 = a
        lon2, lat2 = b
        mean_lat = math.radians(0.5 * (lat1 + lat2))
        dx = math.radians(lon2 - lon1) * math.cos(mean_lat) * EARTH_RADIUS_KM
        dy = math.radians(lat2 - lat1) * EARTH_RADIUS_KM
        return math.hypot(dx, dy)

    def zone_distance_km(self, zone_a: str, zone_b: str) -> float:
        za, zb = self.zones[zone_a], self.zones[zone_b]
        return self.distance_km((za.x, za.y), (zb.x, zb.y))

    # -- validation ----------------------------------------------------

    def validate(self) -> None:
        problems = []
        for link in self.links.values():
            if link.from_node not in self.nodes:
                problems.append(
                    f"link {link.id!r}: unknown from node {link.from_node!r}"
                )
            if link.to_node not in self.nodes:
                problems.append(
                    f"link {link.id!r}: unknown to node {link.to_node!r}"
                )
            if link.from_node == link.to_node:
                problems.append(f"link {link.id!r}: self loop")
            if not link.length_km > 0.0:
                problems.append(f"link {link.id!r}: nonpositive length")
            if not link.capacity > 0.0:
                problems.append(f"link {link.id!r}: nonpositive capacity")
            if not link.speed_kmh > 0.0:
                problems.append(f"link {link.id!r}: nonpositive speed")
        for zone in self.zones.values():
            for ref in (zone.attached_node, zone.centroid_node):
                if ref is not None and ref not in self.nodes:
                    problems.append(f"zone {zone.id!r}: unknown node {ref!r}")
        if problems:
            raise NetworkValidationError("; ".join(problems))

    # -- adjacency -----------------------------------------------------

    def csr(self):
        """CSR adjacency (indptr, heads, link slots) plus index maps.

        Outgoing arcs of each node are ordered by link id so that ties
        between equal-cost paths resolve toward the lexicographically
        smallest link id sequence, deterministically.
        """
        if self._csr is None:
            node_index = {nid: i for i, nid in enumerate(self.nodes)}
            link_index = {lid: i for i, lid in enumerate(self.links)}
            out: list[list[tuple[str, str]]] = [[] for _ in self.nodes]
            for link in self.links.values():
                out[node_index[link.from_node]].append((link.id, link.to_node))
            indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
            heads = np.empty(self.n_links, dtype=np.int64)
            slots = np.empty(self.n_links, dtype=np.int64)
            pos = 0
            for i, arcs in enumerate(out):
                arcs.sort(key=lambda item: item[0])
                for lid, head in arcs:
                    heads[pos] = node_index[head]
                    slots[pos] = link_index[lid]
                    pos += 1
                indptr[i + 1] = pos
            self._csr = (indptr, heads, slots, node_index, link_index)
        return self._csr


# -- CSV ingestion -----------------------------------------------------


def _require_columns(fieldnames, required, path):
    missing = [c for c in required if c not in (fieldnames or [])]
    if missing:
        raise NetworkValidationError(
            f"{path}: missing required columns {missing}"
        )


def _parse_positive(raw, what, where):
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise NetworkValidationError(f"{where}: bad {what} {raw!r}") from None
    if not value > 0.0 or not math.isfinite(value):
        raise NetworkValidationError(f"{where}: {what} must be positive, got {raw!r}")
    return value


def load_network(
    nodes_csv,
    links_csv,
    zones_csv=None,
    hierarchy_defaults=None,
) -> Network:
    """Build a validated :class:`Network` from the documented CSV schemas.

    nodes: ``node_id,x,y,coord_system`` with coord_system in {lonlat, km}
    (one consistent value per file).  links: ``link_id,from,to,length,
    length_unit,capacity,free_flow_speed,speed_unit,hierarchy`` with
    units in {km, mi} and {kmh, mph}; blank capacity/speed fall back to
    ``hierarchy_defaults`` (default :data:`DEFAULT_ROAD_ATTRIBUTES`).
    zones: ``zone_id,x,y``.  Raises :class:`NetworkValidationError` on
    any schema or referential problem.
    """
    if hierarchy_defaults is None:
        hierarchy_defaults = DEFAULT_ROAD_ATTRIBUTES

    nodes_path = Path(nodes_csv)
    with open(nodes_path, newline="") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, ["node_id", "x", "y", "coord_system"], nodes_path)
        rows = list(reader)
    if not rows:
        raise NetworkValidationError(f"{nodes_path}: no nodes")
    systems = {row["coord_system"].strip() for row in rows}
    if len(systems) != 1:
        raise NetworkValidationError(
            f"{nodes_path}: mixed coord_system values {sorted(systems)}"
        )
    coord_system = systems.pop()
    if coord_system not in ("km", "lonlat"):
        raise NetworkValidationError(
            f"{nodes_path}: coord_system must be 'km' or 'lonlat', got {coord_system!r}"
        )
    net = Network(coord_system=coord_system)
    for row in rows:
        nid = row["node_id"].strip()
        if not nid:
            raise NetworkValidationError(f"{nodes_path}: empty node_id")
        try:
            x, y = float(row["x"]), float(row["y"])
        except (TypeError, ValueError):
            raise NetworkValidationError(
                f"{nodes_path}: bad coordinates for node {nid!r}"
            ) from None
        net.add_node(Node(nid, x, y))

    links_path = Path(links_csv)
    with open(links_path, newline="") as fh:
        reader = csv.DictReader(fh)
        _require_columns(
            reader.fieldnames,
            [
                "link_id",
                "from",
                "to",
                "length",
                "length_unit",
                "capacity",
                "free_flow_speed",
                "speed_unit",
                "hierarchy",
            ],
            links_path,
        )
        for row in reader:
            lid = row["link_id"].strip()
            where = f"{links_path}: link {lid!r}"
            if not lid:
                raise NetworkValidationError(f"{links_path}: empty link_id")
            length = _parse_positive(row["length"], "length", where)
            unit = row["length_unit"].strip()
            if unit == "mi":
                length *= MILES_TO_KM
            elif unit != "km":
                raise NetworkValidationError(
                    f"{where}: length_unit must be 'km' or 'mi', got {unit!r}"
                )
            hierarchy = row["hierarchy"].strip()
            cap_raw = (row["capacity"] or "").strip()
            speed_raw = (row["free_flow_speed"] or "").strip()
            if cap_raw:
                capacity = _parse_positive(cap_raw, "capacity", where)
            else:
                if hierarchy not in hierarchy_defaults:
                    raise NetworkValidationError(
                        f"{where}: blank capacity and no default for "
                        f"hierarchy {hierarchy!r}"
                    )
                capacity = float(hierarchy_defaults[hierarchy][0])
            if speed_raw:
                speed = _parse_positive(speed_raw, "free_flow_speed", where)
                speed_unit = row["speed_unit"].strip()
                if speed_unit == "mph":
                    speed *= MILES_TO_KM
                elif speed_unit != "kmh":
                    raise NetworkValidationError(
                        f"{where}: speed_unit must be 'kmh' or 'mph', got {speed_unit!r}"
                    )
            else:
                if hierarchy not in hierarchy_defaults:
                    raise NetworkValidationError(
                        f"{where}: blank free_flow_speed and no default for "
                        f"hierarchy {hierarchy!r}"
                    )
                speed = float(hierarchy_defaults[hierarchy][1])
            net.add_link(
                Link(
                    id=lid,
                    from_node=row["from"].strip(),
                    to_node=row["to"].strip(),
                    length_km=length,
                    capacity=capacity,
                    speed_kmh=speed,
                    hierarchy=hierarchy,
                )
            )

    if zones_csv is not None:
        zones_path = Path(zones_csv)
        with open(zones_path, newline="") as fh:
            reader = csv.DictReader(fh)
            _require_columns(reader.fieldnames, ["zone_id", "x", "y"], zones_path)
            for row in reader:
                zid = row["zone_id"].strip()
                if not zid:
                    raise NetworkValidationError(f"{zones_path}: empty zone_id")
                try:
                    x, y = float(row["x"]), float(row["y"])
                except (TypeError, ValueError):
                    raise NetworkValidationError(
                        f"{zones_path}: bad coordinates for zone {zid!r}"
                    ) from None
                net.add_zone(Zone(zid, x, y))

    net.validate()
    return net


def bundled_road_attributes(city: str | None = None):
    """Per-city hierarchy defaults shipped with the package.

    Returns the {hierarchy: (capacity veh/h, speed km/h)} mapping for
    ``city``, or the full {city: mapping} table when ``city`` is None.
    """
    ref = resources.files("mueflow.configs").joinpath("road_attributes.json")
    table = json.loads(ref.read_text())
    out = {
        name: {h: tuple(v) for h, v in attrs.items()}
        for name, attrs in table.items()
    }
    if city is None:
        return out
    try:
        return out[city]
    except KeyError:
        raise KeyError(
            f"unknown city {city!r}; available: {sorted(out)}"
        ) from None


# -- connectors --------------------------------------------------------


def centroid_node_id(zone_id: str) -> str:
    return f"centroid:{zone_id}"


def generate_connectors(
    network: Network,
    capacity: float = CONNECTOR_CAPACITY,
    speed_kmh: float = CONNECTOR_SPEED_KMH,
) -> Network:
    """Attach every zone to the graph through a centroid + connector pair.

    Each zone gets one new centroid node at its coordinates and a
    bidirectional pair of connector links to the nearest non-connector
    node (straight-line distance, ties broken by smallest node id).
    Zero distances are clamped to 1e-6 km so free-flow times stay
    positive.  Idempotent: zones that already have a centroid are left
    alone.  Returns the network for chaining.
    """
    road_nodes = [
        n for n in network.nodes.values() if not n.id.startswith("centroid:")
    ]
    if not road_nodes:
        raise NetworkValidationError("cannot generate connectors: no nodes")
    for zone in network.zones.values():
        if zone.centroid_node is not None:
            continue
        best = None
        for node in road_nodes:
            d = network.distance_km((zone.x, zone.y), (node.x, node.y))
            if best is None or d < best[0] or (d == best[0] and node.id < best[1]):
                best = (d, node.id)
        dist, nearest = best
        dist = max(dist, MIN_LINK_LENGTH_KM)
        cid = centroid_node_id(zone.id)
        network.add_node(Node(cid, zone.x, zone.y))
        network.add_link(
            Link(
                id=f"connector:{zone.id}:out",
                from_node=cid,
                to_node=nearest,
                length_km=dist,
                capacity=capacity,
                speed_kmh=speed_kmh,
                hierarchy="connector",
                connector=True,
            )
        )
        network.add_link(
            Link(
                id=f"connector:{zone.id}:in",
                from_node=nearest,
                to_node=cid,
                length_km=dist,
                capacity=capacity,
                speed_kmh=speed_kmh,
                hierarchy="connector",
                connector=True,
            )
        )
        zone.attached_node = nearest
        zone.centroid_node = cid
    network.validate()
    return network


# -- shortest paths ----------------------------------------------------


def shortest_path(network: Network, origin: str, destination: str, link_costs=None):
    """Cheapest path between two nodes.

    ``link_costs`` is an array aligned to ``network.link_ids`` or a
    {link_id: cost} mapping; free-flow times are used when omitted.
    Returns ``(total_cost, [link ids])``; ``(inf, [])`` when no path
    exists.
    """
    indptr, heads, slots, node_index, link_index = network.csr()
    if link_costs is None:
        cost = network.free_flow_times()
    elif isinstance(link_costs, dict):
        cost = np.array([link_costs[lid] for lid in network.links])
    else:
        cost = np.asarray(link_costs, dtype=float)
        if cost.shape != (network.n_links,):
            raise ValueError(
                f"link_costs has shape {cost.shape}, expected ({network.n_links},)"
            )
    if np.any(cost < 0.0):
        raise ValueError("link costs must be nonnegative")
    src = node_index[origin]
    dst = node_index[destination]
    dist, pred = _kernels.dijkstra(indptr, heads, slots, cost, src)
    if not np.isfinite(dist[dst]):
        return math.inf, []
    ids = network.link_ids
    link_list = list(network.links.values())
    # walk arc slots back to the origin
    path = []
    node = dst
    while node != src:
        li = int(slots[pred[node]])
        path.append(ids[li])
        node = node_index[link_list[li].from_node]
    path.reverse()
    return float(dist[dst]), path
