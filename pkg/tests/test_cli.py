import csv
import io

import pytest

from indexmod.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_rate(capsys):
    code, out, _ = _run(capsys, "rate", "--nt", "32", "--nrf", "24", "--M", "4")
    assert code == 0
    row, = csv.DictReader(io.StringIO(out))
    assert row["rate_bpcu"] == "71"


def test_rate_max(capsys):
    code, out, _ = _run(capsys, "rate-max", "--nt", "16", "32", "--M", "16")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [r["exceeds_sm"] for r in rows] == ["False", "True"]


def test_bounds(capsys):
    code, out, _ = _run(capsys, "bounds", "--nt", "32", "--nrf", "24", "--M", "4")
    row, = csv.DictReader(io.StringIO(out))
    assert code == 0 and (row["lower"], row["rate_bpcu"], row["upper"]) == ("70", "71", "72")
    code, out, _ = _run(capsys, "bounds", "--nt", "32", "--M", "4", "--rmax")
    assert code == 0 and "max" in out


def test_gsfim_rate(capsys):
    code, out, _ = _run(capsys, "gsfim-rate", "--nt", "3", "--nrf", "2", "--N", "8", "--nf", "4",
                        "--M", "4", "--L", "4")
    row, = csv.DictReader(io.StringIO(out))
    assert code == 0 and row["k"] == "7" and row["rate_exact"] == "35/11"


def test_tables(capsys, tmp_path):
    out_path = tmp_path / "t2.csv"
    code, out, _ = _run(capsys, "tables", "--table2", "--out", str(out_path))
    assert code == 0 and out == ""
    rows = list(csv.DictReader(io.StringIO(out_path.read_text())))
    assert len(rows) == 8
    code, out, _ = _run(capsys, "tables", "--series", "gsim-bounds")
    assert code == 0 and out.startswith("n_t,")


def test_usage_errors(capsys):
    assert _run(capsys, "rate", "--nt", "4")[0] == 1
    assert _run(capsys, "nonsense")[0] == 1
    assert _run(capsys, "rate", "--nt", "4", "--nrf", "5", "--M", "4")[0] == 1
    assert _run(capsys, "tables", "--table2", "--series", "gsim-rate")[0] == 1


def test_help(capsys):
    assert _run(capsys, "--help")[0] == 0


def test_ber_missing_config(capsys, tmp_path):
    code, _, err = _run(capsys, "ber", "--config", str(tmp_path / "missing.toml"))
    assert code == 1 and "missing.toml" in err


def test_ber_bad_key(capsys, tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('scheme = "gsim"\nn_t = 4\nn_rf = 2\nn_r = 2\nM = 4\nsnr_db = [5]\ncolour = 1\n')
    code, _, err = _run(capsys, "ber", "--config", str(p))
    assert code == 1 and "colour" in err


@pytest.fixture
def small_config(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('scheme = "gsim"\ndetector = "ml"\nn_t = 4\nn_rf = 2\nn_r = 2\nM = 4\n'
                 'snr_db = [0, 6]\nmin_bit_errors = 50\nmax_trials = 2000\nbatch_trials = 400\n')
    return p


def test_ber_byte_identical(small_config, tmp_path):
    outs = []
    for w in ("1", "8", "1"):
        o = tmp_path / f"out{len(outs)}.csv"
        assert main(["ber", "--config", str(small_config), "--seed", "9", "--workers", w,
                     "--no-timing", "--out", str(o)]) == 0
        outs.append(o.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_ber_jsonl_verbose(small_config, capsys):
    code, out, err = _run(capsys, "ber", "--config", str(small_config), "--format", "jsonl", "-v")
    assert code == 0 and len(out.splitlines()) == 2 and "snr=" in err
