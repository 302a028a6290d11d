#!/usr/bin/env python3
# Copyright 2026 The Optic Authors
# SPDX-License-Identifier: Apache-2.0

"""Validate detector wire documents against the JSON schemas.

Usage: check_schemas.py SCHEMA_DIR requests.jsonl responses.jsonl

Each input holds one JSON document per line. Exits 1 on the first
violation and prints it.
"""

import json
import pathlib
import sys

import jsonschema


def validate_lines(schema_path, data_path):
    schema = json.loads(pathlib.Path(schema_path).read_text())
    validator = jsonschema.Draft202012Validator(schema)
    count = 0
    for lineno, line in enumerate(pathlib.Path(data_path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        errors = sorted(validator.iter_errors(json.loads(line)), key=str)
        if errors:
            print(f"{data_path}:{lineno}: {errors[0].message}")
            return -1
        count += 1
    return count


def main(argv):
    if len(argv) != 4:
        print(__doc__.strip())
        return 64
    schema_dir = pathlib.Path(argv[1])
    ok = True
    for name, data in (("detection_request", argv[2]), ("detection_response", argv[3])):
        n = validate_lines(schema_dir / f"{name}.schema.json", data)
        if n < 0:
            ok = False
        else:
            print(f"{name}: {n} documents valid")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv))
