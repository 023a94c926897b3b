import json
import math
import os
from importlib.resources import files

import numpy as np
import pytest

from wgqed import cli


def bundled(name):
    return str(files("wgqed").joinpath(f"configs/{name}.cfg"))


def read_csv(path, skip_comments=True):
    lines = path.read_text().splitlines()
    if skip_comments:
        lines = [ln for ln in lines if not ln.startswith("#")]
    header = lines[0].split(",")
    rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    return header, rows


class TestValidation:
    def test_empty_config_rejected(self, tmp_path, capsys):
        path = tmp_path / "empty.cfg"
        path.write_text("{}")
        assert cli.main(["run", str(path)]) == 1
        assert "experiment" in capsys.readouterr().err

    def test_unknown_experiment_names_nearest(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text(json.dumps({"experiment": "rabii"}))
        assert cli.main(["validate", str(path)]) == 1
        err = capsys.readouterr().err
        assert "rabii" in err and "rabi" in err

    def test_unknown_key_named(self, tmp_path, capsys):
        config = json.loads(files("wgqed").joinpath("configs/fig3a_type1.cfg").read_text())
        config["params"]["bogus_knob"] = 1
        path = tmp_path / "extra.cfg"
        path.write_text(json.dumps(config))
        assert cli.main(["validate", str(path)]) == 1
        assert "bogus_knob" in capsys.readouterr().err

    def test_bundled_configs_all_validate(self):
        for entry in files("wgqed").joinpath("configs").iterdir():
            assert cli.main(["validate", str(entry)]) == 0

    def test_non_json_rejected(self, tmp_path):
        path = tmp_path / "broken.cfg"
        path.write_text("not json at all")
        assert cli.main(["validate", str(path)]) == 1


class TestListing:
    def test_eleven_experiments(self, capsys):
        assert cli.main(["list"]) == 0
        out = capsys.readouterr().out
        names = [ln.split()[0] for ln in out.splitlines() if ln and not ln.startswith(" ")]
        assert len(names) == 11

    def test_json_listing(self, capsys):
        assert cli.main(["list", "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["experiments"]) == 11
        assert {"name", "description", "parameters"} <= set(payload["experiments"][0])


class TestRun:
    def test_rabi_artifact_recovers_coupling(self, tmp_path):
        prefix = tmp_path / "rabi"
        assert cli.main(["run", bundled("fig3a_type1"), "--output", str(prefix)]) == 0
        fit = json.loads((tmp_path / "rabi_fit.json").read_text())
        assert fit["derived"]["coupling_2j_mhz"] == pytest.approx(5.65, rel=0.01)
        _, rows = read_csv(tmp_path / "rabi_trace.csv")
        assert rows.shape == (181, 2)

    def test_extinction_spectrum(self, tmp_path):
        prefix = tmp_path / "q1"
        assert cli.main(["run", bundled("fig1c_q1"), "--output", str(prefix)]) == 0
        header, rows = read_csv(tmp_path / "q1_spectrum.csv")
        assert header == ["detuning_mhz", "re_t", "im_t", "abs_t", "abs_t_sq"]
        assert rows[:, 4].min() == pytest.approx(2.07e-5, rel=0.05)

    def test_calib_report(self, tmp_path):
        prefix = tmp_path / "calib"
        assert cli.main(["run", bundled("tableS1_calib"), "--output", str(prefix)]) == 0
        report = json.loads((tmp_path / "calib_calib.json").read_text())
        assert report["resonator"]["chi_mhz"] == pytest.approx(-2.05, rel=0.02)
        assert report["transmon"]["f_max_ghz"] == pytest.approx(6.638, rel=0.01)
        assert report["crosstalk"]["bias_v"][0] == pytest.approx(0.0372, abs=2e-4)
        assert (tmp_path / "calib_flux.csv").exists()

    def test_manifest_contents(self, tmp_path):
        prefix = tmp_path / "modes"
        config = {
            "experiment": "modes",
            "system": {
                "qubits": [
                    {"label": "A", "gamma_1d": 13.4, "phase_pi": 0.0},
                    {"label": "B", "gamma_1d": 13.4, "phase_pi": 1.0},
                ]
            },
            "seed": 7,
        }
        path = tmp_path / "modes.cfg"
        path.write_text(json.dumps(config))
        assert cli.main(["run", str(path), "--output", str(prefix)]) == 0
        manifest = json.loads((tmp_path / "modes_manifest.json").read_text())
        assert manifest["seed"] == 7
        assert manifest["tool_version"]
        assert manifest["outputs"] == ["modes_modes.csv"]
        _, rows = read_csv(tmp_path / "modes_modes.csv")
        assert rows[0, 1] == pytest.approx(2 * 13.4, rel=1e-9)

    def test_seed_override_recorded(self, tmp_path):
        config = {
            "experiment": "modes",
            "system": {"qubits": [{"label": "A", "gamma_1d": 1.0, "phase_pi": 0.0}]},
        }
        path = tmp_path / "m.cfg"
        path.write_text(json.dumps(config))
        assert cli.main(["run", str(path), "--output", str(tmp_path / "m"), "--seed", "99"]) == 0
        manifest = json.loads((tmp_path / "m_manifest.json").read_text())
        assert manifest["seed"] == 99

    def test_steady_state_artifact(self, tmp_path):
        config = {
            "experiment": "steady",
            "system": {
                "qubits": [
                    {"label": "Q", "gamma_1d": 13.4, "gamma_loss": 0.0065,
                     "gamma_phi": 0.21, "phase_pi": 0.0}
                ]
            },
            "params": {"detuning_mhz": 0.0, "omega_rabi": 1.0},
        }
        path = tmp_path / "steady.cfg"
        path.write_text(json.dumps(config))
        assert cli.main(["run", str(path), "--output", str(tmp_path / "st")]) == 0
        header, rows = read_csv(tmp_path / "st_state.csv")
        assert header == ["row", "col", "re", "im"]
        from wgqed.lindblad import thermal_qubit_steady

        rho_ee, _ = thermal_qubit_steady(13.4, 0.0065, 0.21, 0.0, 1.0, 0.0)
        excited = rows[(rows[:, 0] == 1) & (rows[:, 1] == 1)][0, 2]
        assert excited == pytest.approx(rho_ee, abs=1e-9)

    def test_numerical_failure_exit_code(self, tmp_path, capsys):
        # lossless pair with no drive: degenerate steady state
        config = {
            "experiment": "steady",
            "system": {
                "qubits": [
                    {"label": "A", "gamma_1d": 13.4, "phase_pi": 0.0},
                    {"label": "B", "gamma_1d": 13.4, "phase_pi": 1.0},
                ]
            },
            "params": {"detuning_mhz": 0.0, "omega_rabi": 0.0001},
        }
        path = tmp_path / "degenerate.cfg"
        path.write_text(json.dumps(config))
        code = cli.main(["run", str(path), "--output", str(tmp_path / "s")])
        assert code == 2
        assert "failed" in capsys.readouterr().err


class TestBundledConfigs:
    def test_every_bundled_config_runs(self, tmp_path):
        import time

        for entry in sorted(files("wgqed").joinpath("configs").iterdir()):
            workdir = tmp_path / entry.name.replace(".cfg", "")
            workdir.mkdir()
            started = time.time()
            assert cli.main(["run", str(entry), "--output", str(workdir / "run")]) == 0
            assert time.time() - started < 60.0
            manifest = json.loads((workdir / "run_manifest.json").read_text())
            for name in manifest["outputs"]:
                assert (workdir / name).exists()


class TestReproducibility:
    def numeric_bodies(self, directory):
        bodies = {}
        for path in sorted(directory.iterdir()):
            if path.name.endswith("manifest.json"):
                continue
            bodies[path.name] = path.read_bytes()
        return bodies

    def test_byte_identical_reruns(self, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        first.mkdir(), second.mkdir()
        for directory in (first, second):
            assert cli.main(
                ["run", bundled("fig2a_pair"), "--output", str(directory / "pair")]
            ) == 0
        assert self.numeric_bodies(first) == self.numeric_bodies(second)
        m1 = json.loads((first / "pair_manifest.json").read_text())
        m2 = json.loads((second / "pair_manifest.json").read_text())
        m1.pop("wall_time_s"), m2.pop("wall_time_s")
        assert m1 == m2

    def test_thread_count_does_not_change_results(self, tmp_path, monkeypatch):
        serial, threaded = tmp_path / "serial", tmp_path / "threaded"
        serial.mkdir(), threaded.mkdir()
        assert cli.main(["run", bundled("fig1c_q4"), "--output", str(serial / "q4")]) == 0
        monkeypatch.setenv("WGQED_THREADS", "4")
        assert cli.main(["run", bundled("fig1c_q4"), "--output", str(threaded / "q4")]) == 0
        assert (serial / "q4_spectrum.csv").read_bytes() == (
            threaded / "q4_spectrum.csv"
        ).read_bytes()


class TestShelveExperiment:
    def test_transparency_jump_artifacts(self, tmp_path):
        prefix = tmp_path / "shelve"
        assert cli.main(["run", bundled("fig3d_shelve"), "--output", str(prefix)]) == 0
        _, shelved = read_csv(tmp_path / "shelve_shelved.csv")
        _, reference = read_csv(tmp_path / "shelve_reference.csv")
        mid = shelved.shape[0] // 2
        # pulse-averaged on-resonance intensity jumps when shelved
        assert shelved[mid, 4] > 0.3
        assert reference[mid, 4] < 0.05
        # bandwidth averaging makes the reference extinction shallower than CW
        gamma_b = 2 * 13.4 + 0.0065 + 2 * 0.210
        cw = abs(1 - (1 - 0.0) * 13.4 / (gamma_b / 2)) ** 2
        assert reference[mid, 4] > cw
