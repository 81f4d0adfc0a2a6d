#!/usr/bin/env python3
"""Runs every command on every example config and validates the reports."""
import csv
import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema

COMMANDS = ["field", "kernel", "norms", "certify", "fall", "dichotomy", "pd"]


def main(cli, schema_dir, config_dir):
    schemas = {}
    for cmd in COMMANDS:
        schema = json.loads((pathlib.Path(schema_dir) / f"{cmd}.schema.json").read_text())
        jsonschema.Draft202012Validator.check_schema(schema)
        schemas[cmd] = schema

    failures = 0
    configs = sorted(pathlib.Path(config_dir).glob("*.json"))
    if not configs:
        print("no configs found")
        return 1
    for config in configs:
        for cmd in COMMANDS:
            with tempfile.TemporaryDirectory() as out:
                proc = subprocess.run([cli, cmd, "--config", str(config), "--out", out],
                                      capture_output=True, text=True)
                label = f"{config.name} {cmd}"
                if proc.returncode != 0:
                    print(f"{label}: exit {proc.returncode}: {proc.stderr.strip()}")
                    failures += 1
                    continue
                report = json.loads((pathlib.Path(out) / f"{cmd}.json").read_text())
                try:
                    jsonschema.validate(report, schemas[cmd])
                except jsonschema.ValidationError as err:
                    print(f"{label}: schema violation: {err.message}")
                    failures += 1
                    continue
                name = report["result"].get("csv")
                if name:
                    raw = (pathlib.Path(out) / name).read_bytes()
                    rows = list(csv.reader(raw.decode().splitlines()))
                    if b"\r" in raw or not raw.endswith(b"\n") or len(rows) < 2:
                        print(f"{label}: malformed csv")
                        failures += 1
                        continue
                    if any(len(r) != len(rows[0]) for r in rows):
                        print(f"{label}: ragged csv")
                        failures += 1
                        continue
                print(f"{label}: ok")
    return 1 if failures else 0


if __name__ == "__main__":
    if len(sys.argv) != 4:
        sys.exit("usage: validate_schemas.py CLI SCHEMA_DIR CONFIG_DIR")
    sys.exit(main(*sys.argv[1:]))
