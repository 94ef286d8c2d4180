#!/usr/bin/env python3
"""Smoke test for the pnfield_py extension module.

Build the module first:

    cargo build --release -p pnfield-py

then run this script from the repository root:

    python3 python/smoke_test.py
"""

import math
import random
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        ROOT / "target" / "release" / "libpnfield_py.so",
        ROOT / "target" / "debug" / "libpnfield_py.so",
        ROOT / "target" / "release" / "libpnfield_py.dylib",
        ROOT / "target" / "debug" / "libpnfield_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("build the extension first: cargo build --release -p pnfield-py")
    stage = Path(tempfile.mkdtemp(prefix="pnfield_py_"))
    shutil.copy2(built, stage / "pnfield_py.so")
    sys.path.insert(0, str(stage))
    import pnfield_py

    return pnfield_py


def close(a, b, rel=1e-9, abs_tol=1e-12):
    return abs(a - b) <= max(rel * max(abs(a), abs(b)), abs_tol)


def main():
    pn = load_module()

    # Kernel: mu = 16 pi, nu = 0 gives the identity angular part.
    unit = pn.Kernel.cubic(16.0 * math.pi, 0.0)
    gh = unit.gamma_hat(0.7)
    assert close(gh[0][0], 1.0) and close(gh[1][1], 1.0) and abs(gh[0][1]) < 1e-12
    lo, hi = unit.ellipticity()
    assert close(lo, 1.0) and close(hi, 1.0)

    # Line tension: mu = 4 pi, nu = 0 gives psi(b, n) = |b|^2.
    iso = pn.Kernel.cubic(4.0 * math.pi, 0.0)
    assert close(pn.psi_line(iso, [1, 0], (0.0, 1.0)), 1.0, rel=1e-10)
    line = pn.psi_line(iso, [2, 1], (0.6, 0.8))
    circle = pn.psi_circle(iso, [2, 1], (0.6, 0.8))
    assert close(line, circle, rel=1e-6)
    assert close(line, 5.0, rel=1e-6)

    # Relaxation table: a double slip splits into two units.
    table = pn.LineTensionTable.build(iso, 2, 16)
    assert table.lambda_star > 0.0
    assert close(table.psi([2, 0], 0), 4.0, rel=1e-8)
    assert table.psi_rel_upper([2, 0], 0) <= 2.0 + 1e-9

    # Envelope: 1-homogeneous and sandwiched between the certified bounds.
    atoms = pn.AtomSet.build(table, 2, 16)
    lo, hi = atoms.bounds()
    rng = random.Random(7)
    for _ in range(10):
        a = [rng.uniform(-2, 2) for _ in range(4)]
        g1, support = atoms.g(a)
        g2, _ = atoms.g([2.0 * v for v in a])
        assert close(g2, 2.0 * g1, rel=1e-10, abs_tol=1e-10)
        fro = math.sqrt(sum(v * v for v in a))
        assert lo * fro - 1e-9 <= g1 <= hi * fro + 1e-9
        assert len(support) <= 5

    # Energies: integer constants are free; the two routes agree.
    flat = pn.GridField.constant("torus", (1.0, 1.0), (16, 16), [1.0, -2.0])
    e = flat.energy(iso, 0.1)
    assert e["total"] == 0.0
    values = [rng.uniform(-1, 1) for _ in range(16 * 16 * 2)]
    noisy = pn.GridField.from_values("torus", (1.0, 1.0), (16, 16), 2, values)
    direct = noisy.energy(iso, 0.1, method="direct")
    conv = noisy.energy(iso, 0.1, method="convolution")
    assert close(direct["nonlocal_term"], conv["nonlocal_term"], rel=1e-9)
    assert noisy.h12_seminorm_sq() > 0.0
    smooth = noisy.mollify(4.0 / 16.0)
    assert smooth.energy(iso, 0.1)["nonlocal_term"] <= direct["nonlocal_term"] * (1 + 1e-9)

    # Polyhedral strip and a tiny line-tension sweep.
    strip = pn.PolyhedralField.horizontal_strip(
        "torus", (1.0, 1.0), 1.0, 0.25, 0.75, [1, 0]
    )
    assert close(strip.bv_measure(), 2.0)
    assert strip.segment_count() == 2
    rows, fit = pn.sweep_line_tension(strip, iso, 4, 6, 2.0)
    assert len(rows) == 3 and fit is not None
    a, _, residual = fit
    assert 0.5 < a < 3.5 and residual >= 0.0

    # Recovery field sits on the integer lattice away from the jumps.
    w = strip.build_recovery(1.0 / 32.0, 0.01, 1.0 / 3.0, (0.0, 0.8), (128, 128))
    vals = w.values()
    on_lattice = sum(1 for v in vals if abs(v - round(v)) < 1e-9)
    assert on_lattice > len(vals) // 2

    print("smoke test passed")


if __name__ == "__main__":
    main()
