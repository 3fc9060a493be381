import json

import numpy as np
import pytest

from atomfringe.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main


@pytest.fixture()
def shot_config(tmp_path):
    path = tmp_path / "shot.json"
    path.write_text(
        json.dumps(
            {
                "scheme": "asymmetric-overlapped",
                "timing": {"t0_ms": 2.2, "t1_ms": 50.0, "delta_t_us": 350.0, "t_sep_ms": 6.0},
                "runs_per_point": 3,
                "contrast": 0.5,
                "n_samples": 512,
            }
        )
    )
    return path


def test_simulate_then_fit(tmp_path, shot_config, capsys):
    profile_csv = tmp_path / "shot.csv"
    assert main(["simulate", "--config", str(shot_config), "--phase", "0.8",
                 "--out", str(profile_csv)]) == EXIT_OK
    header = profile_csv.read_text().splitlines()[0]
    assert header == "position_m,density"

    assert main(["fit", "--in", str(profile_csv)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "shot,converged,A,x0_m,sigma_m,B,k_per_m,phi_rad,C,rss,iters" in out


def test_fit_bad_file_is_config_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("hello\nworld\n")
    assert main(["fit", "--in", str(bad)]) == EXIT_CONFIG


def test_fit_flat_profile_is_numerical_failure(tmp_path):
    flat = tmp_path / "flat.csv"
    rows = ["position_m,density"] + [f"{float(x)!r},1.0" for x in np.linspace(0, 1e-3, 64)]
    flat.write_text("\n".join(rows) + "\n")
    assert main(["fit", "--in", str(flat)]) == EXIT_NUMERICAL


def test_allan_roundtrip(tmp_path, capsys):
    rng = np.random.default_rng(0)
    phase_csv = tmp_path / "phases.csv"
    rows = ["run,phase_rad"] + [f"{i},{float(p)!r}" for i, p in enumerate(rng.normal(0, 0.1, 256))]
    phase_csv.write_text("\n".join(rows) + "\n")
    out_csv = tmp_path / "allan.csv"
    assert main(["allan", "--in", str(phase_csv), "--duty", "11.4",
                 "--taus", "1,2,4,8", "--out", str(out_csv)]) == EXIT_OK
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "tau_runs,tau_seconds,adev_rad,ci_low,ci_high,pairs"
    assert len(lines) == 5


def test_overlap_scan(tmp_path, shot_config, capsys):
    out_csv = tmp_path / "scan.csv"
    code = main(["overlap-scan", "--config", str(shot_config),
                 "--t-max", "0.022", "--points", "23", "--out", str(out_csv)])
    assert code == EXIT_OK
    assert "optimal wait" in capsys.readouterr().out
    assert len(out_csv.read_text().splitlines()) == 24


def test_campaign_and_figure(tmp_path):
    config = tmp_path / "campaign.json"
    config.write_text(
        json.dumps(
            {
                "scheme": "asymmetric-overlapped",
                "timing": {"t0_ms": 2.2, "t1_ms": 50.0, "delta_t_us": 350.0},
                "tof_target_ms": 218.0,
                "scan": {"variable": "delta_t_us", "values": [350.0, 700.0]},
                "runs_per_point": 3,
                "n_samples": 512,
            }
        )
    )
    out_dir = tmp_path / "campaign"
    assert main(["campaign", "--config", str(config), "--out", str(out_dir)]) == EXIT_OK
    for name in ("runs.csv", "phases.csv", "allan.csv", "points.csv", "config.json", "manifest.json"):
        assert (out_dir / name).exists()

    fig_csv = tmp_path / "f2.csv"
    assert main(["figure", "--figure", "f2", "--campaign", str(out_dir),
                 "--out", str(fig_csv)]) == EXIT_OK
    assert fig_csv.read_text().startswith("tof_s,delta_t_s")


def test_campaign_bad_config_exit_code(tmp_path):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"scheme": "symmetric", "timing": {"delta_t_us": 350.0}}))
    assert main(["campaign", "--config", str(config), "--out", str(tmp_path / "x")]) == EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert main(["campaign", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "x")]) == EXIT_CONFIG


def test_seed_override_changes_outputs(tmp_path, shot_config):
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    base = ["simulate", "--config", str(shot_config), "--phase", "0.1"]
    main([*base, "--out", str(a)])
    main(["--seed", "123", *base, "--out", str(b)])
    main(["--seed", "123", *base, "--out", str(c)])
    assert b.read_bytes() == c.read_bytes()
