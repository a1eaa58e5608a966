#!/usr/bin/env python
from __future__ import annotations

import os
import subprocess
import sys
from pathlib import Path

MATRIX = [
    ("python3.10", "Django>=4.2a1,<5.0", "py310-django42.txt"),
    ("python3.11", "Django>=4.2a1,<5.0", "py311-django42.txt"),
    ("python3.12", "Django>=4.2a1,<5.0", "py312-django42.txt"),
    ("python3.12", "Django>=5.0a1,<5.1", "py312-django50.txt"),
]

if __name__ == "__main__":
    os.chdir(Path(__file__).parent)
    os.environ["CUSTOM_COMPILE_COMMAND"] = "requirements/compile.py"
    os.environ["PIP_REQUIRE_VIRTUALENV"] = "0"
    common_args = [
        "-m",
        "piptools",
        "compile",
        "--generate-hashes",
        "--allow-unsafe",
    ] + sys.argv[1:]
    for python, django, output in MATRIX:
        subprocess.run(
            [
                python,
                *common_args,
                "-P",
                django,
                "-o",
                output,
                "requirements.in",
            ],
            check=True,
            capture_output=True,
        )
