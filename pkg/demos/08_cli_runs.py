"""Driving experiments through the command line.

Each run takes a JSON config, hashes it, and writes artifacts into a
directory named by the hash, so identical configs land in identical places
with identical bytes.  Overrides are applied with --set before hashing.
This script shells out to the installed `fraclap` entry point the same way
a batch job would.
"""
import json
import pathlib
import subprocess
import sys
import tempfile

cfg = {
    "domain": {"kind": "interval", "extents": [[0.0, 1.0]], "n": [64]},
    "partition": {"dirichlet_faces": [[0, 0]]},
    "s": 0.75,
    "mode_count": 4,
    "outdir": "runs",
}

with tempfile.TemporaryDirectory() as tmp:
    tmp = pathlib.Path(tmp)
    cfg_path = tmp / "eig.json"
    cfg_path.write_text(json.dumps(cfg))

    cmd = ["fraclap", "eig", "--config", str(cfg_path)]
    print("$", " ".join(cmd))
    out = subprocess.run(cmd, cwd=tmp, capture_output=True, text=True)
    print(out.stdout.strip())
    if out.returncode != 0:
        print(out.stderr, file=sys.stderr)
        raise SystemExit(out.returncode)

    run_dir = next((tmp / "runs").iterdir())
    print(f"\nartifacts in runs/{run_dir.name}:")
    for p in sorted(run_dir.iterdir()):
        print(f"  {p.name:<18} {p.stat().st_size:>6} bytes")

    # an override changes the hash, so the original run is untouched
    cmd2 = cmd + ["--set", "mode_count=6"]
    print("\n$", " ".join(cmd2))
    out2 = subprocess.run(cmd2, cwd=tmp, capture_output=True, text=True)
    print(out2.stdout.strip())
    dirs = sorted(p.name for p in (tmp / "runs").iterdir())
    print(f"\nrun directories now: {dirs}")

    # a bad config is rejected before any work happens
    bad = tmp / "bad.json"
    bad.write_text(json.dumps({**cfg, "mode_cont": 4}))
    out3 = subprocess.run(["fraclap", "eig", "--config", str(bad)],
                          cwd=tmp, capture_output=True, text=True)
    print(f"\nmisspelled key: exit code {out3.returncode}, "
          f"stderr: {out3.stderr.strip()}")
