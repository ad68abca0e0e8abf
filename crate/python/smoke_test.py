"""Smoke test for the Python bindings.

Build first:  cargo build -p biesn-python --release
Then run:     python3 python/smoke_test.py

The built library is copied into a temp dir as `biesn.so` and imported
from there, so no install step is needed.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent


def import_biesn(tmp):
    for profile in ("release", "debug"):
        for name in ("libbiesn_py.so", "libbiesn_py.dylib"):
            lib = ROOT / "target" / profile / name
            if lib.exists():
                shutil.copy(lib, Path(tmp) / "biesn.so")
                sys.path.insert(0, tmp)
                import biesn

                return biesn
    sys.exit("built library not found; run `cargo build -p biesn-python --release`")


def main():
    with tempfile.TemporaryDirectory() as tmp:
        biesn = import_biesn(tmp)

        cfg = biesn.ReservoirConfig(n_units=50, seed=3)
        res = biesn.Reservoir(cfg, 4)
        assert abs(res.spectral_radius - 0.9) < 1e-3, res.spectral_radius

        seq = np.random.default_rng(0).uniform(-1, 1, size=(12, 4))
        fwd = np.array(res.run_forward(seq.tolist()))
        f2, b2 = res.run_bidirectional(seq.tolist())
        assert fwd.shape == (12, 50)
        assert np.array_equal(fwd, np.array(f2))
        back_on_rev = np.array(res.run_forward(seq[::-1].tolist()))[::-1]
        assert np.array_equal(np.array(b2), back_on_rev)
        assert len(res.features(seq.tolist(), "mean_plus_final")) == 200

        rot = [[0.0, -2.0], [2.0, 0.0]]
        assert abs(biesn.spectral_radius(rot) - 2.0) < 1e-6

        x = np.array([[0.0, 1.0], [0.1, 0.9], [1.0, 0.0], [0.9, 0.2]])
        readout = biesn.fit_ridge(x.tolist(), ["b", "b", "a", "a"], lambda_=1e-2)
        assert readout.classes == ["a", "b"]
        assert readout.predict(x.tolist()) == ["b", "b", "a", "a"]

        frames = [[1.0, float("nan")], [3.0, 4.0]]
        kps = Path(tmp) / "s.kps"
        biesn.write_kps(str(kps), frames)
        back = biesn.read_kps(str(kps))
        assert back[1] == [3.0, 4.0] and math.isnan(back[0][1])

        manifest = biesn.generate_synthetic(
            str(Path(tmp) / "data"), n_classes=4, prefix_motifs=2, samples_per_class=20,
            min_len=20, max_len=24, motif_length=5,
        )
        ds = biesn.load_dataset(manifest)
        assert ds.split_sizes() == {"train": 56, "val": 12, "test": 12}, ds.split_sizes()

        model = biesn.train(ds, units=40, lambda_grid=[1e-3, 1e-1, 10.0])
        report = model.evaluate(ds, "test")
        print(f"test accuracy {report.accuracy:.3f} on {report.n_samples} samples")
        assert report.n_samples == 12 and 0.0 <= report.accuracy <= 1.0

        path = str(Path(tmp) / "model.besn")
        model.save(path)
        again = biesn.Model.load(path)
        assert again.predict(ds, "test") == model.predict(ds, "test")

        try:
            biesn.Model.load(str(Path(tmp) / "none.besn"))
        except FileNotFoundError:
            pass
        else:
            raise AssertionError("expected FileNotFoundError")
        try:
            biesn.train(ds, units=41)
        except ValueError as e:
            assert "n_units" in str(e)
        else:
            raise AssertionError("expected ValueError")
        try:
            res.run_forward([[1.0, 2.0, 3.0, 4.0], [1.0]])
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError for ragged rows")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
