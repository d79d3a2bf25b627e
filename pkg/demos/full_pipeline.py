"""The whole CLI pipeline in one script.

Runs synth -> train-prior -> run-bo -> run-baseline -> evaluate ->
correlation-curve in a scratch directory and shows what lands on disk.
Every command is deterministic: re-running reproduces identical bytes.
"""

import subprocess
import sys
import tempfile
from pathlib import Path

CONFIG = """\
[model]
kernel = rbf_rbf

[mcmc]
h = 60
burn_in = 20
seed = 13

[bo]
m = 25
n_init = 5
n_iter = 15
seed = 13

[baseline]
n_runs = 20

[data]
source = bundle
path = out/dataset.jsonl

[synth]
grid_size = 12
n_snapshots = 10
seed = 13

[synth_theta]
sigma_r1 = 1.0
l_r1 = 14.0
sigma_r2 = 1.0
l_r2 = 56.0

[output]
dir = out
"""


def run(workdir, *args):
    print(f"$ airbo {' '.join(args)}")
    proc = subprocess.run(
        [sys.executable, "-m", "airbo", *args], cwd=workdir, text=True,
        capture_output=True, check=True,
    )
    for line in proc.stdout.strip().splitlines():
        print(f"  {line}")


workdir = Path(tempfile.mkdtemp(prefix="airbo-demo-"))
(workdir / "run.ini").write_text(CONFIG)
print(f"working in {workdir}\n")

run(workdir, "synth", "--config", "run.ini")
run(workdir, "train-prior", "--config", "run.ini")
run(workdir, "run-bo", "--config", "run.ini", "--prior", "out/prior.jsonl")
run(workdir, "run-baseline", "--config", "run.ini", "--kind", "without-replacement")
run(
    workdir, "evaluate",
    "--traces", "out/bo", "--traces", "out/baseline-without-replacement",
    "--dataset", "out/dataset.jsonl", "--out", "out/eval", "--svg",
)
run(workdir, "correlation-curve", "--prior", "out/prior.jsonl", "--out", "out")

print("\nartifacts:")
for path in sorted((workdir / "out").rglob("*")):
    if path.is_file():
        print(f"  {path.relative_to(workdir)}")
