# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause

from pathlib import Path

import json5 as json
from jsonschema import validate as json_validate
from jsonschema.exceptions import ValidationError, SchemaError  # noqa

from lmdp_lab.core.config import lab_config

console = lab_config.console

MDP_FORMAT = "lmdp-lab/mdp-v1"
LMDP_FORMAT = "lmdp-lab/lmdp-v1"

_schema_files = {
    MDP_FORMAT: "mdp-v1.json",
    LMDP_FORMAT: "lmdp-v1.json",
}


def schema_dir():
    return Path(__file__).parent / ".." / "schemas"


def load_schema(doc_format):
    with open(schema_dir() / _schema_files[doc_format]) as schema_in:
        return json.load(schema_in)


def validate(obj, doc_format):
    schema = load_schema(doc_format)
    try:
        validation_result = json_validate(instance=obj, schema=schema)
    except ValidationError as e:
        console.print(f"\n[red]{doc_format} document validation error\n")
        console.print(e.message)
        raise e
    except SchemaError as e:
        console.print(f"\n[red]{doc_format} schema error\n")
        console.print(e)
        raise e
    return validation_result


def detect_format(obj):
    if isinstance(obj, dict) and obj.get("format") in _schema_files:
        return obj["format"]
    return None
