"""Builders for bootable partition fixtures (real spawned processes).

The part_tst deployment mirrors the documented example: four segments
(ros_seg, eb_seg, dfm_seg, setup), a RootController, per-segment
controllers, six dummy leaf applications, and def_iss as the default
info destination.
"""
from __future__ import annotations

import sys

CONTROLLER_ARGS = "-m daqrc.runcontrol.controller_main"
LEAF_ARGS = "-m daqrc.testing.dummy_app"


def controller_object(object_id: str, replicas: int = 1, host: str = "localhost",
                      extra_env: str = "") -> str:
    attrs = f'binary="{sys.executable}" args="{CONTROLLER_ARGS}" host="{host}"'
    if replicas > 1:
        attrs += f' replicas="{replicas}"'
    if extra_env:
        attrs += f' env="{extra_env}"'
    return f'  <Object type="service" id="{object_id}" {attrs} />'


def app_object(object_id: str, host: str = "localhost", extra_env: str = "") -> str:
    attrs = f'binary="{sys.executable}" args="{LEAF_ARGS}" host="{host}"'
    if extra_env:
        attrs += f' env="{extra_env}"'
    return f'  <Object type="application" id="{object_id}" {attrs} />'


def segment_object(segment_id: str, controller_id: str, app_ids: list[str]) -> str:
    rels = "".join(f'\n    <Rel name="Segment" type="application" id="{a}" />'
                   for a in app_ids)
    return (f'  <Object type="segment" id="{segment_id}">{rels}\n'
            f'    <Rel name="IsControlledBy" type="service" id="{controller_id}" />\n'
            f'  </Object>')


PART_TST_SEGMENTS = {
    "ros_seg": ("ros_ctl", ["ros_app1", "ros_app2"]),
    "eb_seg": ("eb_ctl", ["eb_app1", "eb_app2"]),
    "dfm_seg": ("dfm_ctl", ["dfm_app1"]),
    "setup": ("setup_ctl", ["setup_app1"]),
}


def part_tst_xml(partition_id: str = "part_tst", root_replicas: int = 1,
                 app_env: dict[str, str] | None = None,
                 host: str = "localhost") -> str:
    """The documented four-segment partition with six dummy leaves."""
    app_env = app_env or {}
    root_id = "RootController" if partition_id == "part_tst" else f"{partition_id}_root"
    seg_rels = "".join(f'\n    <Rel name="Segment" type="segment" id="{s}" />'
                       for s in PART_TST_SEGMENTS)
    parts = [f'  <Object type="Partition" id="{partition_id}">{seg_rels}\n'
             f'    <Rel name="IsControlledBy" type="service" id="{root_id}" />\n'
             f'    <Rel name="InfoDestTo" type="service" id="def_iss" />\n'
             f'  </Object>']
    for seg, (ctl, apps) in PART_TST_SEGMENTS.items():
        parts.append(segment_object(seg, ctl, apps))
        parts.append(controller_object(ctl, host=host))
        for app in apps:
            parts.append(app_object(app, host=host, extra_env=app_env.get(app, "")))
    parts.append(controller_object(root_id, replicas=root_replicas, host=host))
    parts.append('  <Object type="service" id="def_iss" />')
    return "<Config>\n" + "\n".join(parts) + "\n</Config>\n"


def small_partition_xml(partition_id: str = "mini", host: str = "localhost",
                        app_env: dict[str, str] | None = None,
                        root_replicas: int = 1) -> str:
    """Root controller directly over two leaf apps."""
    app_env = app_env or {}
    root_id = f"{partition_id}_root"
    a1, a2 = f"{partition_id}_a1", f"{partition_id}_a2"
    return "\n".join([
        "<Config>",
        f'  <Object type="Partition" id="{partition_id}">',
        f'    <Rel name="Segment" type="segment" id="{partition_id}_seg" />',
        f'    <Rel name="IsControlledBy" type="service" id="{root_id}" />',
        "  </Object>",
        segment_object(f"{partition_id}_seg", root_id, [a1, a2]),
        app_object(a1, host=host, extra_env=app_env.get(a1, "")),
        app_object(a2, host=host, extra_env=app_env.get(a2, "")),
        controller_object(root_id, host=host, replicas=root_replicas),
        "</Config>",
    ]) + "\n"


def unreachable_host_xml(partition_id: str = "ghostpart") -> str:
    root_id = f"{partition_id}_root"
    return "\n".join([
        "<Config>",
        f'  <Object type="Partition" id="{partition_id}">',
        f'    <Rel name="Segment" type="segment" id="{partition_id}_seg" />',
        f'    <Rel name="IsControlledBy" type="service" id="{root_id}" />',
        "  </Object>",
        segment_object(f"{partition_id}_seg", root_id, [f"{partition_id}_a1"]),
        app_object(f"{partition_id}_a1", host="nowhere"),
        controller_object(root_id, host="localhost"),
        "</Config>",
    ]) + "\n"
