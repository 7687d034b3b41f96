"""Configuration parsing, persistence formats, and the CLI contract."""

import json
import struct
from pathlib import Path

import numpy as np
import pytest

from vortexnoise import RunConfig, build_lattice, random_solenoidal
from vortexnoise.cli import cli_dispatch
from vortexnoise.config import parse_config, parse_config_full, write_config
from vortexnoise.errors import ConfigError
from vortexnoise.results_io import (Manifest, read_vnsf, write_csv,
                                    write_results, write_vnsf)


class TestConfig:
    def test_minimal_defaults(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text("[run]\nseed = 3\n")
        cfg = parse_config(p)
        assert cfg.M == 8 and cfg.delta == 0.25 and cfg.kappa == 1.0
        assert cfg.seed == 3

    def test_round_trip(self, tmp_path):
        cfg = RunConfig(M=6, N_shell=3, nu=2.5, dt=0.002, seed=11, R=4.0,
                        blowup_threshold=50.0, scheme="exp-proxy",
                        cutoff_enabled=False)
        p = tmp_path / "c.toml"
        write_config(p, cfg)
        assert parse_config(p) == cfg

    def test_delta_range_names_constraint_with_line(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("[run]\nM = 8\ndelta = 0.7\n")
        with pytest.raises(ConfigError) as ei:
            parse_config(p)
        msg = str(ei.value)
        assert "(0, 1/2)" in msg
        assert "bad.toml:3" in msg

    def test_nonpositive_dt_rejected(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("dt = -0.5\n")
        with pytest.raises(ConfigError):
            parse_config(p)

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "bad.toml"
        p.write_text("[run]\nMM = 8\n")
        with pytest.raises(ConfigError) as ei:
            parse_config(p)
        assert "MM" in str(ei.value)

    def test_experiment_sections_pass_through(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text("[run]\nM = 4\n\n[experiment.scaling]\npaths = 7\n")
        cfg, sections = parse_config_full(p)
        assert cfg.M == 4
        assert sections["scaling"]["paths"] == 7

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(tmp_path / "nope.toml")


class TestVNSF:
    def test_round_trip(self, tmp_path):
        lat = build_lattice(3)
        v = random_solenoidal(lat, seed=5)
        p = tmp_path / "field.vnsf"
        write_vnsf(p, v)
        back = read_vnsf(p)
        assert back.lattice.M == 3
        assert np.array_equal(back.coeffs, v.coeffs)

    def test_header_layout(self, tmp_path):
        lat = build_lattice(1)
        v = random_solenoidal(lat, seed=1)
        p = tmp_path / "f.vnsf"
        write_vnsf(p, v)
        raw = p.read_bytes()
        magic, version, M, count = struct.unpack_from("<4sIIQ", raw, 0)
        assert magic == b"VNSF" and version == 1 and M == 1 and count == 6
        assert len(raw) == 20 + count * (12 + 48)

    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "f.vnsf"
        p.write_bytes(b"XXXX" + b"\0" * 32)
        with pytest.raises(ValueError):
            read_vnsf(p)


class TestWriteResults:
    def test_manifest_written_even_without_tables(self, tmp_path):
        write_results(tmp_path / "r", {}, [], Manifest("demo", {"M": 4}))
        data = json.loads((tmp_path / "r" / "manifest.json").read_text())
        assert data["experiment"] == "demo"
        assert data["outputs"] == []

    def test_csv_deterministic_bytes(self, tmp_path):
        rows = [[0.1, 1 / 3, 2], [0.2, 2 / 3, 5]]
        write_csv(tmp_path / "a.csv", ("t", "x", "n"), rows)
        write_csv(tmp_path / "b.csv", ("t", "x", "n"), rows)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        text = (tmp_path / "a.csv").read_text().splitlines()
        assert text[0] == "t,x,n"
        assert float(text[1].split(",")[1]) == 1 / 3


def _write_cfg(tmp_path, run_extra="dt = 0.01\nT_end = 0.05\n", sections=""):
    p = tmp_path / "run.toml"
    p.write_text("[run]\nM = 4\nN_shell = 1\nnu = 1.0\nseed = 9\n"
                 + run_extra + sections)
    return p


class TestCli:
    def test_unknown_subcommand_usage_error(self, capsys):
        assert cli_dispatch(["definitely-not-a-command"]) == 2

    def test_paths_zero_usage_error(self, tmp_path):
        cfg = _write_cfg(tmp_path)
        assert cli_dispatch(["scaling-limit", "--config", str(cfg),
                             "--paths", "0", "--quiet"]) == 2

    def test_bad_config_exit_2(self, tmp_path, capsys):
        p = tmp_path / "bad.toml"
        p.write_text("delta = 0.9\n")
        assert cli_dispatch(["simulate", "--config", str(p)]) == 2
        assert "(0, 1/2)" in capsys.readouterr().err

    def test_simulate_writes_outputs_and_blowup_is_data(self, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text(
            "[run]\nM = 4\nN_shell = 0\nnu = 0.0\nseed = 9\n"
            "Re = 10000.0\nRm = 10000.0\ndt = 0.02\nT_end = 3.0\n"
            "blowup_threshold = 100.0\ncutoff_enabled = false\n"
            "snapshot_every = 2\n"
            "[experiment.simulate]\nK = 10.0\ninit = \"stretching\"\n")
        out = tmp_path / "res"
        rc = cli_dispatch(["simulate", "--config", str(cfg), "--out", str(out), "--quiet"])
        assert rc == 0
        man = json.loads((out / "manifest.json").read_text())
        assert man["params"]["status"] == "blown-up"
        assert (out / "trajectory.csv").exists()
        header = (out / "trajectory.csv").read_text().splitlines()[0]
        assert header == "t,l2,h1,hminus_delta,cutoff,flux_b,dissip,flux_S"

    def test_determinism_byte_identical_csvs(self, tmp_path):
        cfg = _write_cfg(tmp_path, sections="[experiment.simulate]\nK = 0.5\n")
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert cli_dispatch(["simulate", "--config", str(cfg), "--out", str(out1), "--quiet"]) == 0
        assert cli_dispatch(["simulate", "--config", str(cfg), "--out", str(out2), "--quiet"]) == 0
        a = (out1 / "trajectory.csv").read_bytes()
        b = (out2 / "trajectory.csv").read_bytes()
        assert a == b

    def test_corrector_check_outputs(self, tmp_path):
        cfg = _write_cfg(tmp_path, sections="[experiment.corrector]\nN_list = [2, 4]\n")
        out = tmp_path / "corr"
        rc = cli_dispatch(["corrector-check", "--config", str(cfg),
                           "--out", str(out), "--quiet"])
        assert rc == 0
        assert (out / "corrector_study.csv").exists()
        man = json.loads((out / "manifest.json").read_text())
        assert man["experiment"] == "corrector-check"
        assert man["outputs"] == ["corrector_study.csv"]

    def test_decay_check_pass_and_manifest_constants(self, tmp_path):
        cfg = _write_cfg(tmp_path, run_extra="T_end = 0.4\ndt = 0.004\n",
                         sections="[experiment.decay]\nK = 1.0\nnu1 = 8.0\n")
        out = tmp_path / "dec"
        rc = cli_dispatch(["decay-check", "--config", str(cfg),
                           "--out", str(out), "--quiet"])
        assert rc == 0
        man = json.loads((out / "manifest.json").read_text())
        assert man["calibrated_constants"]["nu1"] == 8.0
        assert man["params"]["passed"] is True

    def test_scaling_limit_manifest_includes_theta_support(self, tmp_path):
        cfg = _write_cfg(tmp_path, sections="[experiment.scaling]\nK = 1.0\nnu = 2.0\n"
                                            "N_list = [1, 2]\npaths = 4\n")
        out = tmp_path / "scal"
        rc = cli_dispatch(["scaling-limit", "--config", str(cfg),
                           "--out", str(out), "--quiet"])
        assert rc == 0
        man = json.loads((out / "manifest.json").read_text())
        assert len(man["theta_support"]) > 0
        assert {Path(o).name for o in man["outputs"]} == {"scaling_limit.csv", "distances.csv"}
