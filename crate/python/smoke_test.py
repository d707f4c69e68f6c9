"""Build the extension, import it and check a few values.

    cargo build -p sqdaa-python --release --features extension-module
    python3 python/smoke_test.py
"""

import json
import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent
LIB = ROOT / "target" / "release" / "libsqdaa.so"


def load():
    tmp = pathlib.Path(tempfile.mkdtemp())
    shutil.copy(LIB, tmp / "sqdaa.so")
    sys.path.insert(0, str(tmp))
    import sqdaa

    return sqdaa


def main():
    if not LIB.exists():
        sys.exit(f"missing {LIB}; build with --features extension-module first")
    sq = load()

    assert sq.sk_tcount(1, 1e-4) == math.ceil(1.15 * math.log2(1e4) + 9.2)
    assert sq.cnnot_tcount(3) == 4 * 3 - 6
    assert sq.majority_vote_shots(0.9, 0.99) >= 1

    spec = json.dumps({"kind": "exponential", "alpha": 1.0})
    curve = json.loads(sq.ratio_curve(spec, [5, 10, 20]))
    ratios = [r["ratio"] for r in curve["rows"]]
    assert ratios == sorted(ratios), ratios
    assert ratios[0] < 1 < ratios[-1], ratios

    dist = json.dumps({"kind": "exponential", "alpha": 1.0})
    drv = json.dumps({"seed": 3, "stopping": {"rule": "collect-top-m", "m": 8}})
    sqd = json.loads(sq.run_model("sqd", dist, 10, drv))
    aa = json.loads(sq.run_model("sqdaa", dist, 10, drv))
    assert sqd["termination"] == aa["termination"] == "target-set-collected"
    assert aa["q_tot"] > 0 and sqd["q_tot"] > 0

    out = json.loads(sq.asp("1.0 IZ\n1.0 ZI\n0.5 XX\n", json.dumps({"time": 5.0})))
    assert out["energy"] < out["initial_energy"]

    try:
        sq.run_model("qpe", dist, 4)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown algorithm accepted")

    print("ok: schema", sq.SCHEMA_VERSION, "ratio(20) = %.1f" % ratios[-1],
          "Q sqd/sqdaa = %.2f" % (sqd["q_tot"] / aa["q_tot"]),
          "asp E = %.4f" % out["energy"])


if __name__ == "__main__":
    main()
