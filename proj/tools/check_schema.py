#!/usr/bin/env python3
"""Validate configuration files against tools/config.schema.json."""
import json
import sys
from pathlib import Path

import jsonschema


def main(argv):
    schema_path = Path(argv[1])
    schema = json.loads(schema_path.read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    failed = False
    for path in argv[2:]:
        cfg = json.loads(Path(path).read_text())
        errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.path))
        for e in errors:
            print(f"{path}: {'/'.join(map(str, e.path))}: {e.message}")
        failed |= bool(errors)
        if not errors:
            print(f"{path}: ok")
    # A misspelled key must be rejected.
    bad = dict(json.loads(Path(argv[2]).read_text()))
    bad["regim"] = {}
    if validator.is_valid(bad):
        print("schema accepts unknown keys")
        failed = True
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
