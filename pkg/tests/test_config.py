"""Deployment-description loading, queries, and partition resolution."""
from __future__ import annotations

import pytest

from daqrc import config as cfg

# The part_tst deployment: a partition with four segments, a root
# controller, and a default info destination, plus the referenced objects.
PART_TST_XML = """
<Config>
  <Object type="Partition" id="part_tst">
    <Rel name="Segment" type="segment" id="ros_seg" />
    <Rel name="Segment" type="segment" id="eb_seg" />
    <Rel name="Segment" type="segment" id="dfm_seg" />
    <Rel name="Segment" type="segment" id="setup" />
    <Rel name="IsControlledBy" type="service" id="RootController" />
    <Rel name="InfoDestTo" type="service" id="def_iss"/>
  </Object>
  <Object type="segment" id="ros_seg" />
  <Object type="segment" id="eb_seg" />
  <Object type="segment" id="dfm_seg" />
  <Object type="segment" id="setup" />
  <Object type="service" id="RootController" />
  <Object type="service" id="def_iss" />
</Config>
"""


@pytest.fixture
def db():
    return cfg.load(PART_TST_XML)


class TestLoad:
    def test_part_tst_document(self, db):
        assert len(db.objects) == 7
        part = db.query_by_id("part_tst")
        assert len(part.relations_named("Segment")) == 4
        assert part.first_relation("IsControlledBy").target_id == "RootController"
        assert part.first_relation("InfoDestTo").target_id == "def_iss"

    def test_duplicate_id(self):
        doc = """<Config>
          <Object type="segment" id="x"/>
          <Object type="service" id="x"/>
        </Config>"""
        with pytest.raises(cfg.DuplicateId) as e:
            cfg.load(doc)
        assert e.value.object_id == "x"

    def test_containment_cycle(self):
        doc = """<Config>
          <Object type="segment" id="A"><Rel name="Segment" type="segment" id="B"/></Object>
          <Object type="segment" id="B"><Rel name="Segment" type="segment" id="A"/></Object>
        </Config>"""
        with pytest.raises(cfg.ContainmentCycle) as e:
            cfg.load(doc)
        assert e.value.path == ["A", "B", "A"]

    def test_dangling_relation(self):
        doc = """<Config>
          <Object type="Partition" id="p"><Rel name="Segment" type="segment" id="ghost"/></Object>
        </Config>"""
        with pytest.raises(cfg.DanglingRelation) as e:
            cfg.load(doc)
        assert e.value.target_id == "ghost"

    def test_xml_syntax(self):
        with pytest.raises(cfg.XmlSyntax):
            cfg.load("<Config><Object id=broken</Config>")
        with pytest.raises(cfg.XmlSyntax):
            cfg.load("<Wrong/>")
        with pytest.raises(cfg.XmlSyntax):
            cfg.load("<Config><Object type='t'/></Config>")  # missing id

    def test_controlled_by_must_target_service(self):
        doc = """<Config>
          <Object type="Partition" id="p"><Rel name="IsControlledBy" type="segment" id="s"/></Object>
          <Object type="segment" id="s"/>
        </Config>"""
        with pytest.raises(cfg.InvalidRelation):
            cfg.load(doc)

    def test_single_object_root_accepted(self):
        db = cfg.load('<Object type="segment" id="solo"/>')
        assert db.query_by_id("solo").type == "segment"

    def test_attributes_captured(self):
        db = cfg.load('<Object type="application" id="a" host="h1" binary="/bin/true"/>')
        assert db.query_by_id("a").attributes == {"host": "h1", "binary": "/bin/true"}


class TestQueries:
    def test_by_id(self, db):
        assert db.query_by_id("part_tst").type == "Partition"
        assert db.query_by_id("RootController").type == "service"
        with pytest.raises(cfg.NotFound):
            db.query_by_id("nope")

    def test_by_type(self, db):
        assert [o.id for o in db.query_by_type("segment")] == [
            "ros_seg", "eb_seg", "dfm_seg", "setup"]
        assert [o.id for o in db.query_by_type("Partition")] == ["part_tst"]
        assert db.query_by_type("nonexistent") == []

    def test_by_regex(self, db):
        assert [o.id for o in db.query_by_regex("_seg$")] == ["ros_seg", "eb_seg", "dfm_seg"]
        assert len(db.query_by_regex(".*")) == 7
        with pytest.raises(cfg.BadPattern):
            db.query_by_regex("(")

    def test_regex_universal_equals_type_union(self, db):
        all_ids = {o.id for o in db.query_by_regex(".*")}
        by_types = set()
        for t in {o.type for o in db.objects}:
            by_types |= {o.id for o in db.query_by_type(t)}
        assert all_ids == by_types


class TestSerializeRoundTrip:
    def test_identity_on_object_graph(self, db):
        again = cfg.load(cfg.serialize(db))
        assert again.objects == db.objects

    def test_identity_with_attributes(self):
        doc = """<Config>
          <Object type="application" id="a" host="h" binary="/bin/x" args="-v --n 3">
            <Rel name="IsControlledBy" type="service" id="c"/>
          </Object>
          <Object type="service" id="c"/>
        </Config>"""
        db = cfg.load(doc)
        assert cfg.load(cfg.serialize(db)).objects == db.objects


NESTED_XML = """
<Config>
  <Object type="Partition" id="p">
    <Rel name="Segment" type="segment" id="outer" />
    <Rel name="IsControlledBy" type="service" id="root_ctl" />
    <Rel name="InfoDestTo" type="service" id="def_iss" />
  </Object>
  <Object type="segment" id="outer">
    <Rel name="Segment" type="segment" id="inner" />
    <Rel name="Segment" type="application" id="app_outer" />
    <Rel name="IsControlledBy" type="service" id="outer_ctl" />
  </Object>
  <Object type="segment" id="inner">
    <Rel name="Segment" type="application" id="app_inner1" />
    <Rel name="Segment" type="application" id="app_inner2" />
  </Object>
  <Object type="application" id="app_outer" />
  <Object type="application" id="app_inner1">
    <Rel name="InfoDestTo" type="service" id="alt_iss" />
  </Object>
  <Object type="application" id="app_inner2" />
  <Object type="service" id="root_ctl" />
  <Object type="service" id="outer_ctl" />
  <Object type="service" id="def_iss" />
  <Object type="service" id="alt_iss" />
</Config>
"""


class TestResolvePartition:
    def test_part_tst_view(self, db):
        view = cfg.resolve_partition(db, "part_tst")
        assert view.root_controller == "RootController"
        assert [s.segment_id for s in view.segments] == ["ros_seg", "eb_seg", "dfm_seg", "setup"]
        assert view.info_destinations["RootController"] == "def_iss"
        assert not view.is_initial

    def test_not_a_partition(self, db):
        with pytest.raises(cfg.NotAPartition):
            cfg.resolve_partition(db, "ros_seg")
        with pytest.raises(cfg.NotFound):
            cfg.resolve_partition(db, "missing")

    def test_empty_segment_no_launchables(self):
        doc = """<Config>
          <Object type="Partition" id="p">
            <Rel name="Segment" type="segment" id="empty_seg"/>
            <Rel name="IsControlledBy" type="service" id="ctl"/>
          </Object>
          <Object type="segment" id="empty_seg"/>
          <Object type="service" id="ctl"/>
        </Config>"""
        view = cfg.resolve_partition(cfg.load(doc), "p")
        assert [s.segment_id for s in view.segments] == ["empty_seg"]
        assert view.controller_assignments == {}

    def test_nested_scoping_and_overrides(self):
        view = cfg.resolve_partition(cfg.load(NESTED_XML), "p")
        # controller scoping: outer segment has its own controller, which is
        # itself controlled by the root controller
        assert view.controller_assignments["outer_ctl"] == "root_ctl"
        assert view.controller_assignments["app_outer"] == "outer_ctl"
        assert view.controller_assignments["app_inner1"] == "outer_ctl"
        assert view.controller_assignments["app_inner2"] == "outer_ctl"
        # info destination: object-level override beats the partition default
        assert view.info_destinations["app_inner1"] == "alt_iss"
        assert view.info_destinations["app_inner2"] == "def_iss"
        assert view.info_destinations["app_outer"] == "def_iss"
        # segment tree shape
        assert view.segments[0].segment_id == "outer"
        assert [s.segment_id for s in view.segments[0].subsegments] == ["inner"]
        assert view.segments[0].members == ["app_outer"]
        assert view.segments[0].subsegments[0].members == ["app_inner1", "app_inner2"]

    def test_no_controller_raises(self):
        doc = """<Config>
          <Object type="Partition" id="p">
            <Rel name="Segment" type="segment" id="s"/>
          </Object>
          <Object type="segment" id="s"/>
        </Config>"""
        with pytest.raises(cfg.NoController):
            cfg.resolve_partition(cfg.load(doc), "p")

    def test_single_controller_per_object(self):
        view = cfg.resolve_partition(cfg.load(NESTED_XML), "p")
        # dict by construction holds one controller per object; check the
        # controllers chain to the root
        for oid in view.controller_assignments:
            cur = oid
            hops = 0
            while cur != view.root_controller:
                cur = view.controller_assignments[cur]
                hops += 1
                assert hops < 100
