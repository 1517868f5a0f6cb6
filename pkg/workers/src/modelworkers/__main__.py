"""Entry point: ``python3 -m modelworkers --config registry.json``."""

import argparse
import sys

from .registry import RegistryError, load_config
from .serve import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="model-workers",
        description="Serve registered restoration/detection models over the "
        "line-JSON worker protocol.",
    )
    parser.add_argument("--config", required=True, help="registry JSON file")
    parser.add_argument("--device", default=None, help="override device for all tasks")
    args = parser.parse_args(argv)

    try:
        registry = load_config(args.config)
        if args.device:
            from .registry import ModelEntry, ModelRegistry
            import dataclasses

            registry = ModelRegistry(
                dataclasses.replace(registry.entry(t), device=args.device)
                for t in registry.tasks
            )
        return serve(registry)
    except RegistryError as exc:
        print(f"registry error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
