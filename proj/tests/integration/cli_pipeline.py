#!/usr/bin/env python3
"""Runs the detection server, computing server and two agents as separate
processes over loopback TCP and checks that alarms agree end to end."""

import json
import re
import signal
import subprocess
import sys
import tempfile
from pathlib import Path


def run(cli, *args):
    subprocess.run([cli, *args], check=True, capture_output=True, text=True, timeout=120)


def start_server(cli, *args):
    proc = subprocess.Popen([cli, *args], stderr=subprocess.PIPE, text=True)
    line = proc.stderr.readline()
    match = re.search(r"listening on port (\d+)", line)
    if not match:
        proc.kill()
        raise SystemExit(f"server did not report a port: {line!r}")
    return proc, int(match.group(1))


def stop(proc):
    proc.send_signal(signal.SIGTERM)
    _, err = proc.communicate(timeout=30)
    if proc.returncode != 0:
        raise SystemExit(f"server exited with {proc.returncode}: {err}")
    return err


def alarms(text):
    return sorted((a["serial"], a["time"], a["margin"]) for a in map(json.loads, text.splitlines()) if a)


def main():
    cli = sys.argv[1]
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        run(cli, "synth", "--seed", "11", "--windows", "120", "--out", str(tmp / "history.csv"))
        run(cli, "training", "--flows", str(tmp / "history.csv"), "--out", str(tmp / "train.csv"))
        for domain, seed in ((1, 12), (2, 13)):
            run(cli, "synth", "--seed", str(seed), "--windows", "40", "--out", str(tmp / f"d{domain}.csv"))

        alarm_log = tmp / "alarms.jsonl"
        ds, ds_port = start_server(cli, "serve-ds", "--listen", "127.0.0.1:0", "-k", "5", "--insecure",
                                   "--alarm-log", str(alarm_log))
        cs = None
        try:
            cs, cs_port = start_server(cli, "serve-cs", "--listen", "127.0.0.1:0", "--ds", f"127.0.0.1:{ds_port}",
                                       "--train", str(tmp / "train.csv"), "--insecure")
            agents = [
                subprocess.Popen([cli, "agent", "--domain", str(d), "--flows", str(tmp / f"d{d}.csv"),
                                  "--cs", f"127.0.0.1:{cs_port}", "--ds", f"127.0.0.1:{ds_port}", "--insecure"],
                                 stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
                for d in (1, 2)
            ]
            outputs = [a.communicate(timeout=120) for a in agents]
            for a, (_, err) in zip(agents, outputs):
                if a.returncode != 0:
                    raise SystemExit(f"agent failed: {err}")
                if "40 windows dispatched, 40 acknowledged" not in err:
                    raise SystemExit(f"unexpected agent summary: {err}")
            cs_err = stop(cs)
            cs = None
            ds_err = stop(ds)
        finally:
            for p in (cs, ds):
                if p is not None and p.poll() is None:
                    p.kill()

        if "80 tuples processed" not in cs_err:
            raise SystemExit(f"computing server summary: {cs_err}")
        if "80 windows classified, 0 join timeouts" not in ds_err:
            raise SystemExit(f"detection server summary: {ds_err}")
        surfaced = alarms(outputs[0][0] + outputs[1][0])
        logged = alarms(alarm_log.read_text())
        if not surfaced:
            raise SystemExit("no alarms surfaced for attack traffic")
        if surfaced != logged:
            raise SystemExit(f"agents saw {len(surfaced)} alarms, log has {len(logged)}")
        if {s for s, _, _ in surfaced} != {1, 2}:
            raise SystemExit("alarms were not routed to both domains")
        print(f"PASS cli pipeline: 80 windows, {len(surfaced)} alarms")


if __name__ == "__main__":
    main()
