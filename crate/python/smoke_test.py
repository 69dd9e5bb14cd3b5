"""Smoke test for the Python extension.

Build it first:  pip install -e crates/python --no-build-isolation
"""

import json
import os
import tempfile

import monorec

SPEC = {
    "kind": "smooth_compact",
    "amplitude": 1.0,
    "channels": 2,
    "support_radius": 1.0,
    "half_width": 1.5,
    "nx": 32,
}


def main():
    cfg = monorec.materialize_config()
    assert cfg["circle_grid"] == 64
    assert len(monorec.config_hash()) == 64

    v = monorec.Potential.fixture(json.dumps(SPEC))
    assert v.shape == (32, 32, 2, 2)

    f = monorec.scattering_amplitude(v, 60.0, 32)
    h_plus = monorec.algo2_h(f, "+")
    h_minus = monorec.algo2_h(f, "-")
    direct = monorec.h_direct(v, 60.0, "+", 32)
    gap = max(abs(a - b) for a, b in zip(h_plus.values(), direct.values()))
    assert gap <= 1e-6 * max(1.0, direct.max_norm()), gap

    rec = monorec.reconstruct(h_plus, h_minus, v, stride=4)
    err = rec.max_error(v)
    print(f"|f| = {f.max_norm():.3e}  h gap = {gap:.2e}  V_appr max error = {err:.3e}")
    assert err < v.max_norm()

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "f.mctk")
        f.save(path)
        back = monorec.TorusKernel.load(path)
        assert back.values() == f.values()
        assert monorec.inspect(path)["N"] == 32
        try:
            monorec.TorusKernel.load(os.path.join(d, "missing.mctk"))
        except OSError:
            pass
        else:
            raise AssertionError("missing file must raise OSError")

    zero = dict(SPEC, amplitude=0.0)
    rows = monorec.run_pipeline(json.dumps({"potential": {"fixture": zero}, "energies": [60], "circle_grid": 32, "window": {"stride": 4}}))
    assert rows[0]["max_error"] <= 1e-8, rows
    print("smoke test passed")


if __name__ == "__main__":
    main()
