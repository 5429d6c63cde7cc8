"""Shared helpers for the experiment scripts: dataclass configs from argparse."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys


def parse_config(cls, argv=None, description=None):
    """Build an argument parser from the fields of dataclass ``cls`` and parse ``argv``."""
    parser = argparse.ArgumentParser(description=description or cls.__doc__)
    for f in dataclasses.fields(cls):
        default = f.default
        flag = "--" + f.name.replace("_", "-")
        if isinstance(default, bool):
            parser.add_argument(flag, action=argparse.BooleanOptionalAction, default=default)
        elif isinstance(default, tuple):
            parser.add_argument(flag, default=",".join(map(str, default)),
                                type=lambda s, t=type(default[0]): tuple(t(v) for v in s.split(",")))
        else:
            parser.add_argument(flag, type=type(default) if default is not None else str, default=default)
    return cls(**vars(parser.parse_args(argv)))


def dump(config) -> None:
    print(json.dumps(dataclasses.asdict(config)), file=sys.stderr)
