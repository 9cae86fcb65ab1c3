"""Network model, CSV ingestion, connector generation, shortest paths."""

from __future__ import annotations

import math

import numpy as np
import pytest

from mueflow.network import (
    DEFAULT_ROAD_ATTRIBUTES,
    MILES_TO_KM,
    Link,
    Network,
    NetworkValidationError,
    Node,
    Zone,
    bundled_road_attributes,
    centroid_node_id,
    generate_connectors,
    load_network,
    shortest_path,
)

NODES_CSV = """node_id,x,y,coord_system
n1,0.0,0.0,km
n2,9.654,0.0,km
"""

LINKS_CSV = """link_id,from,to,length,length_unit,capacity,free_flow_speed,speed_unit,hierarchy
a,n1,n2,6.0,mi,120,30,mph,highway
b,n1,n2,7.5,mi,200,40,mph,highway
"""

ZONES_CSV = """zone_id,x,y
A,0.0,0.0
B,9.654,0.0
"""


def write_inputs(tmp_path, nodes=NODES_CSV, links=LINKS_CSV, zones=ZONES_CSV):
    paths = {}
    for name, text in (("nodes", nodes), ("links", links), ("zones", zones)):
        p = tmp_path / f"{name}.csv"
        p.write_text(text)
        paths[name] = p
    return paths


class TestUnits:
    def test_mile_link_converts_to_km(self, tmp_path):
        paths = write_inputs(tmp_path)
        net = load_network(paths["nodes"], paths["links"], paths["zones"])
        link = net.links["a"]
        assert link.length_km == pytest.approx(6.0 * 1.609)
        assert link.length_km == pytest.approx(9.654)
        assert link.speed_kmh == pytest.approx(30.0 * 1.609)

    def test_free_flow_time_minutes(self, tmp_path):
        paths = write_inputs(tmp_path)
        net = load_network(paths["nodes"], paths["links"], paths["zones"])
        # 6 mi at 30 mph is 12 minutes regardless of unit system
        assert net.links["a"].free_flow_time == pytest.approx(12.0)
        assert net.links["b"].free_flow_time == pytest.approx(11.25)

    def test_km_units_pass_through(self, tmp_path):
        links = LINKS_CSV.replace("6.0,mi", "6.0,km").replace("30,mph", "30,kmh")
        paths = write_inputs(tmp_path, links=links)
        net = load_network(paths["nodes"], paths["links"], paths["zones"])
        assert net.links["a"].length_km == pytest.approx(6.0)
        assert net.links["a"].speed_kmh == pytest.approx(30.0)

    def test_mile_km_factor(self):
        assert MILES_TO_KM == pytest.approx(1.609)


class TestLoadErrors:
    def test_missing_column(self, tmp_path):
        bad = NODES_CSV.replace("coord_system", "system")
        paths = write_inputs(tmp_path, nodes=bad)
        with pytest.raises(NetworkValidationError, match="missing required columns"):
            load_network(paths["nodes"], paths["links"])

    def test_mixed_coord_systems(self, tmp_path):
        bad = NODES_CSV.replace("9.654,0.0,km", "9.654,0.0,lonlat")
        paths = write_inputs(tmp_path, nodes=bad)
        with pytest.raises(NetworkValidationError, match="mixed coord_system"):
            load_network(paths["nodes"], paths["links"])

    def test_unknown_coord_system(self, tmp_path):
        bad = NODES_CSV.replace(",km", ",made_up")
        paths = write_inputs(tmp_path, nodes=bad)
        with pytest.raises(NetworkValidationError, match="coord_system"):
            load_network(paths["nodes"], paths["links"])

    def test_nonpositive_capacity(self, tmp_path):
        bad = LINKS_CSV.replace("6.0,mi,120", "6.0,mi,0")
        paths = write_inputs(tmp_path, links=bad)
        with pytest.raises(NetworkValidationError, match="capacity"):
            load_network(paths["nodes"], paths["links"])

    def test_non_numeric_length(self, tmp_path):
        bad = LINKS_CSV.replace("a,n1,n2,6.0", "a,n1,n2,six")
        paths = write_inputs(tmp_path, links=bad)
        with pytest.raises(NetworkValidationError, match="length"):
            load_network(paths["nodes"], paths["links"])

    def test_unknown_length_unit(self, tmp_path):
        bad = LINKS_CSV.replace("6.0,mi", "6.0,furlong")
        paths = write_inputs(tmp_path, links=bad)
        with pytest.raises(NetworkValidationError, match="length_unit"):
            load_network(paths["nodes"], paths["links"])

    def test_unknown_speed_unit(self, tmp_path):
        bad = LINKS_CSV.replace("30,mph", "30,knots")
        paths = write_inputs(tmp_path, links=bad)
        with pytest.raises(NetworkValidationError, match="speed_unit"):
            load_network(paths["nodes"], paths["links"])

    def test_dangling_link_endpoint(self, tmp_path):
        bad = LINKS_CSV.replace("b,n1,n2", "b,n1,n9")
        paths = write_inputs(tmp_path, links=bad)
        with pytest.raises(NetworkValidationError, match="unknown to node"):
            load_network(paths["nodes"], paths["links"])

    def test_no_nodes(self, tmp_path):
        paths = write_inputs(tmp_path, nodes="node_id,x,y,coord_system\n")
        with pytest.raises(NetworkValidationError, match="no nodes"):
            load_network(paths["nodes"], paths["links"])

    def test_blank_attributes_need_known_hierarchy(self, tmp_path):
        bad = LINKS_CSV.replace("6.0,mi,120,30,mph,highway", "6.0,mi,,,,alley")
        paths = write_inputs(tmp_path, links=bad)
        with pytest.raises(NetworkValidationError, match="hierarchy"):
            load_network(paths["nodes"], paths["links"])

    def test_blank_attributes_fall_back_to_hierarchy(self, tmp_path):
        links = LINKS_CSV.replace("6.0,mi,120,30,mph,highway", "6.0,mi,,,,highway")
        paths = write_inputs(tmp_path, links=links)
        net = load_network(paths["nodes"], paths["links"])
        cap, speed = DEFAULT_ROAD_ATTRIBUTES["highway"]
        assert net.links["a"].capacity == cap
        assert net.links["a"].speed_kmh == speed


class TestNetworkModel:
    def test_duplicate_ids_rejected(self):
        net = Network()
        net.add_node(Node("n1", 0.0, 0.0))
        with pytest.raises(NetworkValidationError, match="duplicate node"):
            net.add_node(Node("n1", 1.0, 1.0))
        net.add_node(Node("n2", 1.0, 0.0))
        net.add_link(Link("e", "n1", "n2", 1.0, 100.0, 60.0))
        with pytest.raises(NetworkValidationError, match="duplicate link"):
            net.add_link(Link("e", "n2", "n1", 1.0, 100.0, 60.0))
        net.add_zone(Zone("z", 0.0, 0.0))
        with pytest.raises(NetworkValidationError, match="duplicate zone"):
            net.add_zone(Zone("z", 1.0, 1.0))

    def test_validate_rejects_self_loop(self):
        net = Network()
        net.add_node(Node("n1", 0.0, 0.0))
        net.add_link(Link("e", "n1", "n1", 1.0, 100.0, 60.0))
        with pytest.raises(NetworkValidationError, match="self loop"):
            net.validate()

    def test_planar_distance(self):
        net = Network()
        assert net.distance_km((0.0, 0.0), (3.0, 4.0)) == pytest.approx(5.0)

    def test_lonlat_distance_equirectangular(self):
        net = Network(coord_system="lonlat")
        # one degree of latitude is ~111.19 km on a 6371 km sphere
        d = net.distance_km((0.0, 0.0), (0.0, 1.0))
        assert d == pytest.approx(6371.0 * math.pi / 180.0, rel=1e-12)

    def test_array_views_align_with_insertion_order(self, dual_case):
        net, _, _ = dual_case
        ids = net.link_ids
        lengths = net.lengths_km()
        for i, lid in enumerate(ids):
            assert lengths[i] == net.links[lid].length_km
        assert net.connector_mask().sum() == 2 * len(net.zones)

    def test_bundled_road_attributes(self):
        table = bundled_road_attributes()
        assert "san_francisco" in table
        sf = bundled_road_attributes("san_francisco")
        assert set(sf) >= {"expressway", "highway", "local"}
        cap, speed = sf["highway"]
        assert cap > 0 and speed > 0
        with pytest.raises(KeyError, match="unknown city"):
            bundled_road_attributes("atlantis")


class TestConnectors:
    def make_net(self):
        net = Network()
        net.add_node(Node("n1", 0.0, 0.0))
        net.add_node(Node("n2", 10.0, 0.0))
        net.add_link(Link("e12", "n1", "n2", 10.0, 1000.0, 60.0))
        net.add_link(Link("e21", "n2", "n1", 10.0, 1000.0, 60.0))
        net.add_zone(Zone("Z1", 1.0, 0.0))
        net.add_zone(Zone("Z2", 9.0, 0.0))
        return net

    def test_two_connectors_per_zone(self):
        net = generate_connectors(self.make_net())
        connectors = [l for l in net.links.values() if l.connector]
        assert len(connectors) == 2 * len(net.zones)
        assert net.zones["Z1"].attached_node == "n1"
        assert net.zones["Z2"].attached_node == "n2"
        assert net.zones["Z1"].centroid_node == centroid_node_id("Z1")

    def test_idempotent(self):
        net = generate_connectors(self.make_net())
        before = set(net.links)
        generate_connectors(net)
        assert set(net.links) == before

    def test_distance_tie_broken_by_node_id(self):
        net = self.make_net()
        net.add_zone(Zone("Zmid", 5.0, 0.0))  # equidistant from n1 and n2
        generate_connectors(net)
        assert net.zones["Zmid"].attached_node == "n1"

    def test_coincident_zone_gets_clamped_length(self):
        net = self.make_net()
        net.add_zone(Zone("Zon", 0.0, 0.0))  # sits exactly on n1
        generate_connectors(net)
        out = net.links["connector:Zon:out"]
        assert out.length_km == pytest.approx(1e-6)
        assert out.free_flow_time > 0.0

    def test_empty_network_rejected(self):
        with pytest.raises(NetworkValidationError, match="no nodes"):
            generate_connectors(Network())


class TestShortestPath:
    def make_net(self):
        net = Network()
        for nid, x in (("n1", 0.0), ("n2", 1.0), ("n3", 2.0)):
            net.add_node(Node(nid, x, 0.0))
        net.add_link(Link("fast", "n1", "n3", 2.0, 100.0, 120.0))  # 1 min
        net.add_link(Link("s1", "n1", "n2", 1.0, 100.0, 60.0))  # 1 min
        net.add_link(Link("s2", "n2", "n3", 1.0, 100.0, 60.0))  # 1 min
        return net

    def test_free_flow_default(self):
        cost, links = shortest_path(self.make_net(), "n1", "n3")
        assert cost == pytest.approx(1.0)
        assert links == ["fast"]

    def test_custom_costs_reroute(self):
        net = self.make_net()
        cost, links = shortest_path(net, "n1", "n3",
                                    {"fast": 10.0, "s1": 1.0, "s2": 1.0})
        assert cost == pytest.approx(2.0)
        assert links == ["s1", "s2"]

    def test_unreachable(self):
        net = self.make_net()
        cost, links = shortest_path(net, "n3", "n1")
        assert math.isinf(cost) and links == []

    def test_equal_cost_tie_prefers_smaller_link_ids(self):
        net = Network()
        net.add_node(Node("n1", 0.0, 0.0))
        net.add_node(Node("n2", 1.0, 0.0))
        net.add_link(Link("z", "n1", "n2", 1.0, 100.0, 60.0))
        net.add_link(Link("a", "n1", "n2", 1.0, 100.0, 60.0))
        cost, links = shortest_path(net, "n1", "n2")
        assert cost == pytest.approx(1.0)
        assert links == ["a"]
