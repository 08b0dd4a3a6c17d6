import os
import shutil
import subprocess

import pytest


@pytest.fixture(scope="session")
def cli():
    exe = os.environ.get("SOSFLOW_CLI") or shutil.which("sosflow")
    if not exe:
        pytest.skip("sosflow CLI not available (set SOSFLOW_CLI)")

    def run(*args, check=True):
        proc = subprocess.run([exe, *map(str, args)], capture_output=True, text=True)
        if check and proc.returncode != 0:
            raise AssertionError(f"exit {proc.returncode}: {proc.stderr}")
        return proc

    return run
