"""Controller process entry point (spawned by partition boot)."""
from __future__ import annotations

import argparse
import os
import sys
import time


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="tree controller")
    parser.add_argument("--partition", default=os.environ.get("DAQRC_PARTITION"))
    parser.add_argument("--object", default=os.environ.get("DAQRC_OBJECT"))
    parser.add_argument("--config", default=os.environ.get("DAQRC_CONFIG"))
    parser.add_argument("--registry", default=os.environ.get("DAQRC_REGISTRY"))
    parser.add_argument("--child-timeout", type=float,
                        default=float(os.environ.get("DAQRC_CHILD_TIMEOUT", "10")))
    args = parser.parse_args(argv)
    if not all([args.partition, args.object, args.config, args.registry]):
        parser.error("--partition, --object, --config and --registry are required "
                     "(or their DAQRC_* environment fallbacks)")

    from ..config import load
    from ..registry.client import RegistryClient
    from .controller import Controller

    with open(args.config, "r", encoding="utf-8") as f:
        db = load(f.read())
    registry = RegistryClient(args.registry).connect()
    controller = Controller(db, args.partition, args.object, registry,
                            child_timeout_s=args.child_timeout)
    controller.start()
    controller.wait_for_shutdown()
    time.sleep(0.3)  # let the final reply and state event drain
    controller.close()
    registry.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
