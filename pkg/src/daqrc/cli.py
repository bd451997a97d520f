"""The daqrc command-line interface.

One binary, one global --registry flag (DAQRC_REGISTRY as fallback), and a
subcommand group per service.
"""
from __future__ import annotations

import json
import sys

import click

REGISTRY_OPT = click.option(
    "--registry", envvar="DAQRC_REGISTRY", default="127.0.0.1:4640",
    show_default=True, help="registry address host:port (env DAQRC_REGISTRY)")


@click.group()
def main():
    """Distributed run control for desk-scale DAQ systems."""


# --------------------------------------------------------------------- config

@main.group()
def config():
    """Deployment description tools."""


@config.command("validate")
@click.argument("file", type=click.Path(exists=True))
def config_validate(file):
    from .config import ConfigError, load
    try:
        db = load(open(file, "r", encoding="utf-8").read())
    except ConfigError as e:
        raise click.ClickException(f"{type(e).__name__}: {e}")
    click.echo(f"OK: {len(db.objects)} objects")


@config.command("query")
@click.option("--id", "by_id", default=None, help="exact object id")
@click.option("--type", "by_type", default=None, help="exact type name")
@click.option("--regex", "by_regex", default=None, help="pattern over ids")
@click.argument("file", type=click.Path(exists=True))
def config_query(by_id, by_type, by_regex, file):
    from .config import ConfigError, load
    selected = [v for v in (by_id, by_type, by_regex) if v is not None]
    if len(selected) != 1:
        raise click.ClickException("choose exactly one of --id / --type / --regex")
    try:
        db = load(open(file, "r", encoding="utf-8").read())
        if by_id is not None:
            objects = [db.query_by_id(by_id)]
        elif by_type is not None:
            objects = db.query_by_type(by_type)
        else:
            objects = db.query_by_regex(by_regex)
    except ConfigError as e:
        raise click.ClickException(f"{type(e).__name__}: {e}")
    for obj in objects:
        rels = ", ".join(f"{r.name}->{r.target_id}" for r in obj.relations)
        click.echo(f"{obj.id} [{obj.type}] {rels}")


# ------------------------------------------------------------------- registry

@main.group()
def registry():
    """Coordination service."""


@registry.command("serve")
@click.option("--port", type=int, default=4640, show_default=True)
@click.option("--events-port", type=int, default=0, show_default=True,
              help="watch-event publisher port (0: ephemeral)")
@click.option("--host", default="127.0.0.1", show_default=True)
def registry_serve(port, events_port, host):
    import signal
    import threading
    from .registry.server import RegistryServer
    server = RegistryServer(host=host, port=port, events_port=events_port)
    click.echo(f"registry serving on {server.address} (events {server.events_address})")
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *a: stop.set())
    signal.signal(signal.SIGINT, lambda *a: stop.set())
    stop.wait()
    server.close()


def _registry_client(address):
    from .registry.client import RegistryClient
    return RegistryClient(address).connect()


@registry.command("ls")
@REGISTRY_OPT
@click.argument("path", default="/")
def registry_ls(registry, path):
    client = _registry_client(registry)
    try:
        for name in client.children(path):
            click.echo(name)
    finally:
        client.close()


@registry.command("get")
@REGISTRY_OPT
@click.argument("path")
def registry_get(registry, path):
    client = _registry_client(registry)
    try:
        sys.stdout.buffer.write(client.get(path) + b"\n")
    finally:
        client.close()


@registry.command("set")
@REGISTRY_OPT
@click.argument("path")
@click.argument("data")
def registry_set(registry, path, data):
    client = _registry_client(registry)
    try:
        found, _ = client.exists(path)
        if found:
            client.set(path, data.encode())
        else:
            client.create(path, data=data.encode(), recursive=True)
    finally:
        client.close()


@registry.command("rm")
@REGISTRY_OPT
@click.argument("path")
def registry_rm(registry, path):
    client = _registry_client(registry)
    try:
        client.delete(path)
    finally:
        client.close()


# ------------------------------------------------------------------------ run

@main.group()
def run():
    """Run control: boot partitions and drive the lifecycle."""


@run.command("boot")
@REGISTRY_OPT
@click.option("--partition", required=True)
@click.option("--config", "config_file", required=True, type=click.Path(exists=True))
def run_boot(registry, partition, config_file):
    from .config import load
    from .runcontrol import BootError, boot_partition, render_tree, tree_snapshot
    db = load(open(config_file, "r", encoding="utf-8").read())
    try:
        booted = boot_partition(db, partition, registry, config_file)
    except BootError as e:
        raise click.ClickException(str(e))
    click.echo(render_tree(tree_snapshot(booted.registry, partition)))
    booted.close()  # partition keeps running under its process managers


def _dispatch(registry_address, partition, command_name, run_number=0):
    from .registry.client import NoMaster
    from .runcontrol import CommandRefused, RunCommand, tree_snapshot
    from .runcontrol.boot import RootHandle
    client = _registry_client(registry_address)
    try:
        snapshot = tree_snapshot(client, partition)
        roots = [n for n in snapshot["nodes"] if n["parent"] is None]
        if not roots:
            raise click.ClickException(f"partition {partition!r} has no root node")
        handle = RootHandle(client, partition, roots[0]["id"])
        try:
            report = handle.dispatch(RunCommand[command_name], run_number)
        finally:
            handle.close()
        click.echo(f"{command_name}: {report.state.name} run_number={report.run_number}")
        for entry in report.reports:
            suffix = f"  ERROR: {entry.error}" if entry.error else ""
            click.echo(f"  {entry.path}: {entry.new_state.name}{suffix}")
        if report.errors:
            raise click.ClickException("command completed with errors")
    except (CommandRefused, NoMaster) as e:
        raise click.ClickException(str(e))
    finally:
        client.close()


def _run_command(name):
    @run.command(name.lower())
    @REGISTRY_OPT
    @click.option("--partition", required=True)
    @click.option("--run-number", type=int, default=0,
                  help="run number for START (0: allocate)")
    def cmd(registry, partition, run_number):
        _dispatch(registry, partition, name, run_number)

    cmd.__name__ = f"run_{name.lower()}"
    return cmd


for _name in ("BOOT", "CONFIGURE", "START", "PAUSE", "RESUME", "STOP",
              "UNCONFIGURE", "SHUTDOWN"):
    if _name != "BOOT":  # `run boot` spawns; the rest dispatch commands
        _run_command(_name)


@run.command("status")
@REGISTRY_OPT
@click.option("--partition", required=True)
def run_status(registry, partition):
    from .runcontrol import UnknownPartition, render_tree, tree_snapshot
    client = _registry_client(registry)
    try:
        click.echo(render_tree(tree_snapshot(client, partition)))
    except UnknownPartition:
        raise click.ClickException(f"unknown partition {partition!r}")
    finally:
        client.close()


@run.command("controller", hidden=True)
@click.option("--partition", envvar="DAQRC_PARTITION", required=True)
@click.option("--object", "object_id", envvar="DAQRC_OBJECT", required=True)
@click.option("--config", "config_file", envvar="DAQRC_CONFIG", required=True)
@click.option("--registry", envvar="DAQRC_REGISTRY", required=True)
def run_controller(partition, object_id, config_file, registry):
    from .runcontrol.controller_main import main as controller_main
    sys.exit(controller_main(["--partition", partition, "--object", object_id,
                              "--config", config_file, "--registry", registry]))


# ------------------------------------------------------------------------ pmg

@main.group()
def pmg():
    """Per-node process manager."""


@pmg.command("serve")
@REGISTRY_OPT
@click.option("--port", type=int, default=0, show_default=True)
@click.option("--logdir", required=True, type=click.Path())
@click.option("--host-name", default="localhost", show_default=True,
              help="name this node registers under /nodes/")
@click.option("--info-dest", default=None,
              help="info-service destination for crash records")
def pmg_serve(registry, port, logdir, host_name, info_dest):
    import signal
    import threading
    from .procman.daemon import PmgDaemon
    client = _registry_client(registry)
    crash_sink = None
    if info_dest:
        from .infoservice import InfoClient, InfoRecord, RecordKind, ErrorInfo, Severity
        from .infoservice.client import shard_map_from_registry

        def crash_sink(host, handle):
            info = InfoClient(shard_map_from_registry(client, info_dest))
            try:
                detail = (f"exit code {handle.exit_code}" if handle.exit_code is not None
                          else f"signal {handle.term_signal}")
                info.publish(InfoRecord(
                    f"pmg.{host}.{handle.object_id}", RecordKind.ERROR,
                    ErrorInfo(Severity.ERROR, f"process ended: {detail}"),
                    source=f"pmg.{host}"))
            finally:
                info.close()

    daemon = PmgDaemon(logdir, port=port, host_name=host_name, registry=client,
                       crash_sink=crash_sink)
    click.echo(f"process manager for {host_name!r} on {daemon.address}")
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *a: stop.set())
    signal.signal(signal.SIGINT, lambda *a: stop.set())
    stop.wait()
    daemon.close()
    client.close()


@pmg.command("ps")
@REGISTRY_OPT
@click.argument("host")
def pmg_ps(registry, host):
    from .procman.daemon import PmgClient
    client = _registry_client(registry)
    try:
        pmg_client = PmgClient.for_host(client, host)
        for handle in pmg_client.status():
            detail = handle.status.name
            if handle.exit_code is not None:
                detail += f"({handle.exit_code})"
            click.echo(f"{handle.object_id} pid={handle.os_pid} {detail}")
        pmg_client.close()
    finally:
        client.close()


@pmg.command("stop")
@REGISTRY_OPT
@click.argument("host")
@click.argument("object_id")
@click.option("--grace-ms", type=int, default=5000, show_default=True)
def pmg_stop(registry, host, object_id, grace_ms):
    from .procman.daemon import PmgClient
    client = _registry_client(registry)
    try:
        pmg_client = PmgClient.for_host(client, host)
        handle = pmg_client.stop(object_id, grace_ms)
        click.echo(f"{handle.object_id}: {handle.status.name}")
        pmg_client.close()
    finally:
        client.close()


# ------------------------------------------------------------------------- is

@main.group(name="is")
def infoservice():
    """Information service."""


@infoservice.command("serve")
@REGISTRY_OPT
@click.option("--port", type=int, default=0, show_default=True)
@click.option("--dest", default="def_iss", show_default=True)
@click.option("--shard-index", type=int, default=0, show_default=True)
@click.option("--shard-count", type=int, default=0, show_default=True,
              help="enables ownership checks when > 1")
@click.option("--snapshot", type=click.Path(), default=None,
              help="write records here on shutdown")
@click.option("--restore", type=click.Path(exists=True), default=None,
              help="load a snapshot at startup")
def is_serve(registry, port, dest, shard_index, shard_count, snapshot, restore):
    import signal
    import threading
    from .infoservice.server import InfoServer
    client = _registry_client(registry)
    server = InfoServer(port=port, dest=dest, shard_index=shard_index,
                        shard_count=shard_count, snapshot_path=snapshot,
                        restore_path=restore)
    server.elect(client)
    click.echo(f"info service {dest}[{shard_index}] on {server.address}")
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *a: stop.set())
    signal.signal(signal.SIGINT, lambda *a: stop.set())
    stop.wait()
    server.close()
    client.close()


def _info_client(registry_address, dest, server):
    from .infoservice import InfoClient
    from .infoservice.client import shard_map_from_registry
    if server:
        return InfoClient(server)
    client = _registry_client(registry_address)
    try:
        return InfoClient(shard_map_from_registry(client, dest))
    finally:
        client.close()


@infoservice.command("get")
@REGISTRY_OPT
@click.option("--dest", default="def_iss", show_default=True)
@click.option("--server", default=None, help="bypass discovery: host:port")
@click.option("--prefix", is_flag=True, help="prefix query")
@click.argument("key")
def is_get(registry, dest, server, prefix, key):
    from .gateway.app import record_json
    client = _info_client(registry, dest, server)
    try:
        records = client.query_prefix(key) if prefix else \
            ([client.query(key)] if client.query(key) else [])
        for record in records:
            click.echo(json.dumps(record_json(dest, record)))
    finally:
        client.close()


@infoservice.command("set")
@REGISTRY_OPT
@click.option("--dest", default="def_iss", show_default=True)
@click.option("--server", default=None)
@click.option("--kind", type=click.Choice(["counter", "gauge", "status"]),
              default="counter", show_default=True)
@click.argument("key")
@click.argument("value")
def is_set(registry, dest, server, kind, key, value):
    from .infoservice import InfoClient, InfoRecord, RecordKind
    client = _info_client(registry, dest, server)
    try:
        parsed = {"counter": lambda v: int(v), "gauge": lambda v: float(v),
                  "status": lambda v: v}[kind](value)
        seq = client.publish(InfoRecord(key, RecordKind[kind.upper()], parsed,
                                        source="cli"))
        click.echo(f"seq={seq}")
    finally:
        client.close()


@infoservice.command("watch")
@REGISTRY_OPT
@click.option("--dest", default="def_iss", show_default=True)
@click.option("--server", default=None)
@click.argument("prefix", default="")
def is_watch(registry, dest, server, prefix):
    from .gateway.app import record_json
    client = _info_client(registry, dest, server)
    sub = client.subscribe(prefix)
    click.echo(f"watching {prefix!r} on {dest} (ctrl-c to stop)")
    try:
        while True:
            try:
                record = sub.recv(timeout=1.0)
            except Exception:
                continue
            click.echo(json.dumps(record_json(dest, record)))
    except KeyboardInterrupt:
        pass
    finally:
        sub.close()
        client.close()


@infoservice.command("bench")
@REGISTRY_OPT
@click.option("--clients", default="1,2,4,8,16,32", show_default=True,
              help="client counts to sweep, comma separated")
@click.option("--bytes", "request_bytes", type=int, default=2000, show_default=True)
@click.option("--pipeline", type=int, default=4, show_default=True)
@click.option("--duration", type=float, default=10.0, show_default=True,
              help="seconds per point")
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--server", default=None,
              help="benchmark this server instead of spinning up a local one")
def is_bench(registry, clients, request_bytes, pipeline, duration, csv_path, server):
    from .infoservice.bench import sweep
    counts = [int(c) for c in clients.split(",") if c]
    local = None
    if server is None:
        from .infoservice.server import InfoServer
        local = InfoServer(dest="bench")
        server = local.address
        click.echo(f"benchmarking a dedicated local server on {server}")

    def progress(result):
        click.echo(f"clients={result.clients:>3} pipeline={result.pipeline} "
                   f"-> {result.commands_per_sec:>12,.0f} cmd/s  "
                   f"{result.bytes_per_sec / 1e6:8.1f} MB/s")

    try:
        sweep(server, counts, request_bytes, pipeline, duration, csv_path, progress)
        if csv_path:
            click.echo(f"wrote {csv_path}")
    finally:
        if local is not None:
            local.close()


# -------------------------------------------------------------------- gateway

@main.group()
def gateway():
    """Web gateway for the operator console."""


@gateway.command("serve")
@REGISTRY_OPT
@click.option("--port", type=int, default=8800, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--static", "static_dir", type=click.Path(exists=True), default=None,
              help="serve the console assets from this directory at /")
def gateway_serve(registry, port, host, static_dir):
    import uvicorn
    from .gateway.app import create_app
    if static_dir is None:
        import os
        repo_root = os.path.dirname(os.path.dirname(
            os.path.dirname(os.path.abspath(__file__))))
        bundled = os.path.join(repo_root, "frontend", "dist")
        if os.path.isdir(bundled):
            static_dir = bundled
    app = create_app(registry, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
