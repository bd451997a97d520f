"""Deployment description: typed objects, relations, and queries.

The document shape is <Config> wrapping <Object type=.. id=..> elements,
each holding <Rel name=.. type=.. id=..> children. Extra XML attributes on
an Object become its attribute map (host, binary, args, ... for launchable
objects; see docs/config.md). A database is immutable once loaded.
"""
from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

# Relation names with built-in meaning. "Segment" is containment;
# the other two scope control and info routing.
REL_CONTAINS = "Segment"
REL_CONTROLLED_BY = "IsControlledBy"
REL_INFO_DEST = "InfoDestTo"

INITIAL_PARTITION_ID = "initial"


class ConfigError(Exception):
    pass


class XmlSyntax(ConfigError):
    pass


class DuplicateId(ConfigError):
    def __init__(self, object_id: str):
        super().__init__(f"duplicate object id {object_id!r}")
        self.object_id = object_id


class DanglingRelation(ConfigError):
    def __init__(self, source_id: str, target_id: str):
        super().__init__(f"{source_id!r} references missing object {target_id!r}")
        self.source_id = source_id
        self.target_id = target_id


class ContainmentCycle(ConfigError):
    def __init__(self, path: list[str]):
        super().__init__(f"containment cycle: {' -> '.join(path)}")
        self.path = path


class InvalidRelation(ConfigError):
    pass


class NotFound(ConfigError):
    def __init__(self, object_id: str):
        super().__init__(f"no object with id {object_id!r}")
        self.object_id = object_id


class BadPattern(ConfigError):
    pass


@dataclass(frozen=True)
class Relation:
    name: str
    target_type: str
    target_id: str


@dataclass(frozen=True)
class ConfigObject:
    type: str
    id: str
    relations: tuple[Relation, ...] = ()
    attributes: dict[str, str] = field(default_factory=dict)

    def relations_named(self, name: str) -> list[Relation]:
        return [r for r in self.relations if r.name == name]

    def first_relation(self, name: str) -> Relation | None:
        for r in self.relations:
            if r.name == name:
                return r
        return None


class ConfigDatabase:
    """All objects of one document, in document order."""

    def __init__(self, objects: list[ConfigObject]):
        self.objects = tuple(objects)
        self._by_id: dict[str, ConfigObject] = {}
        for obj in objects:
            if obj.id in self._by_id:
                raise DuplicateId(obj.id)
            self._by_id[obj.id] = obj
        self._validate()

    def _validate(self):
        for obj in self.objects:
            for rel in obj.relations:
                target = self._by_id.get(rel.target_id)
                if target is None:
                    raise DanglingRelation(obj.id, rel.target_id)
                if target.type != rel.target_type:
                    raise InvalidRelation(
                        f"{obj.id!r}: relation {rel.name!r} declares type "
                        f"{rel.target_type!r} but {rel.target_id!r} is {target.type!r}")
                if rel.name == REL_CONTROLLED_BY and target.type != "service":
                    raise InvalidRelation(
                        f"{obj.id!r}: {REL_CONTROLLED_BY} must target a service, "
                        f"got {target.type!r}")
        self._check_containment_acyclic()

    def _check_containment_acyclic(self):
        state: dict[str, int] = {}  # 0 visiting, 1 done

        def visit(obj_id: str, path: list[str]):
            mark = state.get(obj_id)
            if mark == 1:
                return
            if mark == 0:
                cycle_start = path.index(obj_id)
                raise ContainmentCycle(path[cycle_start:] + [obj_id])
            state[obj_id] = 0
            path.append(obj_id)
            for rel in self._by_id[obj_id].relations_named(REL_CONTAINS):
                visit(rel.target_id, path)
            path.pop()
            state[obj_id] = 1

        for obj in self.objects:
            visit(obj.id, [])

    def query_by_id(self, object_id: str) -> ConfigObject:
        obj = self._by_id.get(object_id)
        if obj is None:
            raise NotFound(object_id)
        return obj

    def __contains__(self, object_id: str) -> bool:
        return object_id in self._by_id

    def query_by_type(self, type_name: str) -> list[ConfigObject]:
        return [o for o in self.objects if o.type == type_name]

    def query_by_regex(self, pattern: str) -> list[ConfigObject]:
        try:
            rx = re.compile(pattern)
        except re.error as e:
            raise BadPattern(f"invalid pattern {pattern!r}: {e}") from e
        return [o for o in self.objects if rx.search(o.id)]


def load(xml_text: str) -> ConfigDatabase:
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as e:
        raise XmlSyntax(str(e)) from e
    if root.tag == "Object":
        object_elems = [root]
    elif root.tag == "Config":
        object_elems = list(root)
    else:
        raise XmlSyntax(f"unexpected root element <{root.tag}>")

    objects = []
    for elem in object_elems:
        if elem.tag != "Object":
            raise XmlSyntax(f"unexpected element <{elem.tag}> under <Config>")
        attrs = dict(elem.attrib)
        obj_type = attrs.pop("type", None)
        obj_id = attrs.pop("id", None)
        if not obj_type or not obj_id:
            raise XmlSyntax("<Object> needs both type and id")
        relations = []
        for child in elem:
            if child.tag != "Rel":
                raise XmlSyntax(f"unexpected element <{child.tag}> under <Object id={obj_id!r}>")
            extra = set(child.attrib) - {"name", "type", "id"}
            if extra:
                raise XmlSyntax(f"<Rel> in {obj_id!r} has unknown attributes {sorted(extra)}")
            try:
                relations.append(Relation(child.attrib["name"], child.attrib["type"],
                                          child.attrib["id"]))
            except KeyError as e:
                raise XmlSyntax(f"<Rel> in {obj_id!r} missing attribute {e}") from e
        objects.append(ConfigObject(obj_type, obj_id, tuple(relations), attrs))
    return ConfigDatabase(objects)


def serialize(db: ConfigDatabase) -> str:
    """Canonical document for a database; load(serialize(db)) round-trips."""
    root = ET.Element("Config")
    for obj in db.objects:
        elem = ET.SubElement(root, "Object", {"type": obj.type, "id": obj.id})
        for key in sorted(obj.attributes):
            elem.set(key, obj.attributes[key])
        for rel in obj.relations:
            ET.SubElement(elem, "Rel", {"name": rel.name, "type": rel.target_type,
                                        "id": rel.target_id})
    ET.indent(root)
    return ET.tostring(root, encoding="unicode")
