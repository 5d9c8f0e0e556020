"""Writing result tables, metadata and plot scripts to an output directory."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

PLOT_SCRIPTS = {
    "trace": """\
import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("trace.csv")))
t = [float(r["t_ps"]) for r in rows]
y = [float(r["cos_theta"]) for r in rows]
plt.plot(t, y)
plt.xlabel("t (ps)")
plt.ylabel("<cos theta>")
plt.savefig("trace.png", dpi=150)
""",
    "density": """\
import csv
import numpy as np
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("density.csv")))
t = np.unique([float(r["t_ps"]) for r in rows])
th = np.unique([float(r["theta_rad"]) for r in rows])
d = np.array([float(r["density"]) for r in rows]).reshape(len(t), len(th))
plt.pcolormesh(t, th, d.T, shading="auto")
plt.xlabel("t (ps)")
plt.ylabel("theta (rad)")
plt.colorbar(label="density")
plt.savefig("density.png", dpi=150)
""",
    "aoqr": """\
import csv
import numpy as np
import matplotlib.pyplot as plt

rows = list(csv.reader(open("aoqr.csv")))
d1 = np.array([float(x) for x in rows[0][1:]])
E0 = np.array([float(r[0]) for r in rows[1:]])
A = np.array([[float(x) if x != "error" else np.nan for x in r[1:]] for r in rows[1:]])
if len(d1) > 1:
    plt.pcolormesh(d1, E0, A, shading="auto")
    plt.xlabel("delta1 (THz)")
    plt.ylabel("E0 (V/m)")
    plt.colorbar(label="A_OQR")
else:
    plt.plot(E0, A[:, 0])
    plt.xlabel("E0 (V/m)")
    plt.ylabel("A_OQR")
plt.savefig("aoqr.png", dpi=150)
""",
    "magnus_orders": """\
import csv
from collections import defaultdict
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("magnus_orders.csv")))
by_tag = defaultdict(list)
for r in rows:
    by_tag[r["order_tag"]].append(r)
fig, axes = plt.subplots(1, len(by_tag), figsize=(4 * len(by_tag), 3), sharey=True)
for ax, (tag, rs) in zip(axes, by_tag.items()):
    t = [float(r["t_ps"]) for r in rs]
    for k in range(3):
        ax.plot(t, [float(r[f"pop_J{k}"]) for r in rs], label=f"J={k}")
    ax.set_title(f"orders {tag}")
    ax.set_xlabel("t (ps)")
axes[0].legend()
plt.savefig("magnus_orders.png", dpi=150)
""",
    "spectrum": """\
import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("spectrum.csv")))
plt.plot([float(r["omega_THz"]) for r in rows], [float(r["abs_A"]) for r in rows])
plt.xlabel("frequency (THz)")
plt.ylabel("|A| (V/m ps)")
plt.savefig("spectrum.png", dpi=150)
""",
}


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def write_outputs(result, out_dir, fmt: str = "csv", plot_scripts: bool = True, only=None) -> list:
    """Write every table of ``result`` plus ``metadata.json``.

    Data files depend only on the inputs; wall-clock timings go to the
    metadata document alone. Returns the written paths.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    for name, (header, rows) in result.tables().items():
        if only is not None and name not in only:
            continue
        if fmt == "csv":
            path = out / f"{name}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)
        elif fmt == "json":
            path = out / f"{name}.json"
            doc = {"columns": header, "rows": [[_json_value(v) for v in r] for r in rows]}
            path.write_text(json.dumps(doc, indent=1) + "\n")
        else:
            raise ValueError(f"unknown format {fmt!r}")
        written.append(path)
        if plot_scripts and fmt == "csv" and name in PLOT_SCRIPTS:
            script = out / f"plot_{name}.py"
            script.write_text(PLOT_SCRIPTS[name])
            written.append(script)
    meta = out / "metadata.json"
    meta.write_text(json.dumps(result.metadata(), indent=2, sort_keys=True, default=str) + "\n")
    written.append(meta)
    return written


def write_trajectory(traj, path) -> Path:
    """CSV with columns t_ps, re_cJ, im_cJ for each basis level."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(traj.header())
        w.writerows(traj.to_rows())
    return path
