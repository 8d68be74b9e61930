import numpy as np
import pytest

from bbsrc import cli, config
from bbsrc.errors import ValidationError
from bbsrc.imgio import save_pgm


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert cli.main(["synth", "--output", str(d), "--per-class", "4", "--size", "32", "--seed", "3"]) == 0
    return d


@pytest.fixture(scope="module")
def separable(tmp_path_factory):
    """Two classes built from two fixed patterns plus small noise."""
    d = tmp_path_factory.mktemp("sep")
    rng = np.random.default_rng(0)
    yy, xx = np.mgrid[0:16, 0:16]
    pats = [0.5 + 0.3 * np.sin(2 * np.pi * xx / 4), 0.5 + 0.3 * np.sin(2 * np.pi * yy / 4)]
    lines = ["path,label"]
    for i in range(12):
        lab = i % 2
        save_pgm(d / f"img{i:02d}.pgm", np.clip(pats[lab] + 0.05 * rng.normal(size=(16, 16)), 0, 1))
        lines.append(f"img{i:02d}.pgm,{'ab'[lab]}")
    (d / "manifest.csv").write_text("\n".join(lines) + "\n")
    return d


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


# ----------------------------------------------------------------- config

def test_config_roundtrip(tmp_path):
    text = """
[run]
manifest = data/manifest.csv
pipeline = src
seed = 7

[solver]
method = omp
epsilon_rel = 0.1

[src]
sampling = 1/4, 1/20

[ensemble]
block_width = 16
literal_sign = yes
"""
    cfg = config.parse_config(text, tmp_path)
    assert cfg.manifest == tmp_path / "data" / "manifest.csv"
    assert cfg.pipeline == "src" and cfg.seed == 7
    assert cfg.solver.method == "omp" and cfg.solver.epsilon_rel == 0.1 and cfg.solver.epsilon is None
    assert cfg.src.sampling == ("1/4", "1/20")
    assert cfg.ensemble.literal_sign is True and cfg.ensemble.block_height is None
    again = config.parse_config(config.dump_config(cfg), tmp_path)
    assert again == cfg


@pytest.mark.parametrize("text", [
    "[bogus]\nx = 1\n",
    "[run]\nnope = 1\n",
    "[ensemble]\nblock_width = many\n",
    "[solver]\nmethod = magic\n",
])
def test_config_errors(text):
    with pytest.raises(ValidationError):
        config.parse_config(text)


def test_config_validate():
    with pytest.raises(ValidationError):
        config.RunConfig(pipeline="nope", manifest=None).validate(need_manifest=False)
    with pytest.raises(ValidationError):
        config.RunConfig(manifest="/does/not/exist.csv").validate()
    bad = config.RunConfig(ensemble=config.EnsembleConfig(block_width=0))
    with pytest.raises(ValidationError):
        bad.validate(need_manifest=False)


# -------------------------------------------------------------------- cli

def test_extract_deterministic(data, tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        code, _, _ = run(["extract", "--manifest", data / "manifest.csv", "--families", "lbp,edge,glcm",
                          "--out", out], capsys)
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert len(lines) == 9 and lines[0].startswith("path,lbp_000")
    assert (tmp_path / "config.ini").is_file()


def test_extract_missing_image(data, tmp_path, capsys):
    m = tmp_path / "m.csv"
    m.write_text(f"path,label\n{data / 'grating_000.pgm'},a\nmissing.pgm,b\n")
    code, _, err = run(["extract", "--manifest", m, "--families", "edge", "--out", tmp_path / "f.csv"], capsys)
    assert code == 2 and "missing.pgm" in err


def test_validation_exit_code(data, capsys):
    assert run(["crossval", "--manifest", "/no/such/manifest.csv"], capsys)[0] == 1
    assert run(["crossval", "--pipeline", "nope"], capsys)[0] == 1
    assert run(["crossval", "--manifest", data / "manifest.csv", "--threads", "0"], capsys)[0] == 1


def test_crossval_src_two_rows(data, tmp_path, capsys):
    code, out, _ = run(["crossval", "--manifest", data / "manifest.csv", "--pipeline", "src",
                        "--sampling", "1/4,1/20", "--solver", "omp", "--output", tmp_path, "--threads", "1"],
                       capsys)
    assert code == 0
    rows = [l for l in out.splitlines() if l.startswith("src-samp")]
    assert len(rows) == 2 and rows[0].count("&") == 4
    assert (tmp_path / "src-samp1_4_predictions.csv").is_file()
    assert (tmp_path / "src-samp1_20_roc.csv").is_file()
    assert "pipeline = src" in (tmp_path / "config.ini").read_text()


def test_crossval_block_ensemble_separable_and_compare(separable, tmp_path, capsys):
    code, out, _ = run(["crossval", "--manifest", separable / "manifest.csv", "--pipeline", "block-ensemble",
                        "--block-size", "8", "--epsilon-rel", "0.25", "--output", tmp_path, "--threads", "1"],
                       capsys)
    assert code == 0
    summary = dict(l.split(" = ", 1) for l in (tmp_path / "bbmap_summary.txt").read_text().splitlines())
    assert float(summary["ACC"]) == 100.0
    code, out, _ = run(["compare", tmp_path / "bbmap_predictions.csv", tmp_path / "bbll-s_predictions.csv"],
                       capsys)
    assert code == 0 and "p = " in out
    p_text = out.split("p = ")[1].split()[0]
    assert len(p_text.split(".")[1]) == 4
    code, out, _ = run(["compare", tmp_path / "bbmap_predictions.csv", tmp_path / "bbmap_predictions.csv"],
                       capsys)
    assert "p = 1.0000" in out and "degenerate_variance" in out


def test_compare_mismatch_exit_2(data, tmp_path, capsys):
    a = tmp_path / "a_predictions.csv"
    b = tmp_path / "b_predictions.csv"
    a.write_text("path,true_label,predicted_label,score,positive\nx,m,m,1.0,1\ny,n,n,0.0,0\n")
    b.write_text("path,true_label,predicted_label,score,positive\nx,m,m,1.0,1\nz,n,n,0.0,0\n")
    assert run(["compare", a, b], capsys)[0] == 2


def test_crossval_texture_nb(data, tmp_path, capsys):
    code, out, _ = run(["crossval", "--manifest", data / "manifest.csv", "--pipeline", "texture-nb",
                        "--families", "lbp,edge,glcm", "--output", tmp_path, "--threads", "1"], capsys)
    assert code == 0
    row = [l for l in out.splitlines() if l.startswith("texture-nb")][0]
    assert row.count("&") == 4


def test_train_calibrate_classify(data, tmp_path, capsys):
    man = data / "manifest.csv"
    model = tmp_path / "model"
    code, _, _ = run(["train", "--manifest", man, "--pipeline", "block-ensemble", "--block-size", "16",
                      "--epsilon-rel", "0.25", "--calibration", "none", "--model", model], capsys)
    assert code == 0
    cal = tmp_path / "cal"
    for target in (cal, tmp_path / "cal2"):
        code, out, _ = run(["calibrate", "--manifest", man, "--model", model, "--pds-min", "0.05",
                            "--out", target], capsys)
        assert code == 0 and "tau*" in out
    assert (cal / "calibration.txt").read_bytes() == (tmp_path / "cal2" / "calibration.txt").read_bytes()
    params = dict(l.split(" = ", 1) for l in (cal / "calibration.txt").read_text().splitlines())
    curve = np.loadtxt(cal / "pds_curve.csv", delimiter=",", skiprows=1)
    at_min = curve[curve[:, 0] == float(params["lls_min"]), 1]
    assert abs(at_min[0] - 0.05) < 1e-9
    tau = np.loadtxt(cal / "tau_curve.csv", delimiter=",", skiprows=1)
    assert tau.shape == (1001, 3)
    img = data / "grating_000.pgm"
    code, out, _ = run(["classify", "--model", model, img], capsys)
    assert code == 0 and out.splitlines()[1].split(",")[1] == "grating"


def test_train_src_and_nb_classify(data, tmp_path, capsys):
    man = data / "manifest.csv"
    for pipe, extra in (("src", ["--sampling", "1/4", "--solver", "omp"]),
                        ("texture-nb", ["--families", "lbp,edge"])):
        model = tmp_path / pipe
        code, _, _ = run(["train", "--manifest", man, "--pipeline", pipe, "--model", model, *extra], capsys)
        assert code == 0
        cfg_args = []
        if pipe == "texture-nb":
            cfg_args = ["--config", model / "config.ini"]
        code, out, _ = run(["classify", "--model", model, *cfg_args, data / "noise_001.pgm"], capsys)
        assert code == 0 and len(out.splitlines()) == 2
