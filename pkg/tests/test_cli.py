import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from fixtures import build_peptide, toy_complex
from blockgen.blockrepr import Vocabulary
from blockgen.cli import main
from blockgen.metrics import aar, rmsd
from blockgen.metrics.structure import ca_coords
from blockgen.molio import load_complex, save_complex
from blockgen.physcorr import valency_violations
from blockgen.structures import ComplexRecord

TINY = {"hidden-size": 32, "n-layers": 2, "n-heads": 4, "n-rbf": 16, "edge-embed-size": 16, "n-vec": 8,
        "diffusion-steps": 20, "log-every": 0}

CORPUS = ["CCO", "CC(=O)O", "C1=CC=CC=C1", "CC1=CC=CC=C1", "CCN", "CC(C)O", "OCCO", "CCCC",
          "NC(=O)C", "CC=CC"]


def flags(**kw):
    out = []
    for k, v in {**TINY, **kw}.items():
        out += [f"--{k}", str(v)]
    return out


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    data.mkdir()
    save_complex(toy_complex(), data / "toy.json")
    Vocabulary([]).save(root / "aa.vocab")
    return root


@pytest.fixture(scope="module")
def trained(workspace):
    run = workspace / "run"
    base = ["--train-set", str(workspace / "data"), "--vocab", str(workspace / "aa.vocab"),
            "--out-dir", str(run)]
    assert main(["train-vae"] + base + flags(steps=10)) == 0
    assert main(["train-ldm", "--vae-checkpoint", str(run / "vae.ckpt")] + base + flags(**{"ldm-steps": 10})) == 0
    return run


# -- vocabulary and decomposition ---------------------------------------------------
def test_build_vocab_counts(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    (corpus / "mols.smi").write_text("\n".join(CORPUS) + "\n")
    assert main(["build-vocab", str(corpus), "--size", "12", "--out", str(tmp_path / "v.tsv")]) == 0
    lines = (tmp_path / "v.tsv").read_text().splitlines()
    freqs = [int(ln.split("\t")[1]) for ln in lines if ln and not ln.startswith("#")]
    assert sum(f > 0 for f in freqs) == 12 and sum(f == 0 for f in freqs) == 20
    assert "12 fragments" in capsys.readouterr().out


def test_build_vocab_single_entry(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    (corpus / "c.smi").write_text("CCC\nCCCC\n")
    assert main(["build-vocab", str(corpus), "--size", "1", "--out", str(tmp_path / "v.tsv")]) == 0
    v = Vocabulary.load(tmp_path / "v.tsv")
    assert [e.key for e in v.fragments] == ["C"]


def test_build_vocab_missing_dir(tmp_path, capsys):
    code = main(["build-vocab", str(tmp_path / "nope"), "--out", str(tmp_path / "v.tsv")])
    assert code != 0 and "not found" in capsys.readouterr().err


@pytest.fixture
def aromatic_vocab(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    (corpus / "m.smi").write_text("\n".join(["C1=CC=CC=C1"] * 5 + ["CC"] * 3) + "\n")
    main(["build-vocab", str(corpus), "--size", "6", "--out", str(tmp_path / "v.tsv")])
    return tmp_path / "v.tsv"


def test_decompose_smiles(tmp_path, aromatic_vocab, capsys):
    (tmp_path / "b.smi").write_text("C1=CC=CC=C1\n")
    (tmp_path / "e.smi").write_text("CCC1=CC=CC=C1\n")
    assert main(["decompose", str(tmp_path / "b.smi"), "--vocab", str(aromatic_vocab)]) == 0
    assert len(json.loads(capsys.readouterr().out)["binder"]["blocks"]) == 1
    assert main(["decompose", str(tmp_path / "e.smi"), "--vocab", str(aromatic_vocab)]) == 0
    out = json.loads(capsys.readouterr().out)["binder"]
    assert sorted(b["block_type"] for b in out["blocks"]) == ["C=1C=CC=CC1", "CC"]
    assert len(out["inter_bonds"]) == 1


def test_decompose_tripeptide(tmp_path, capsys):
    Vocabulary([]).save(tmp_path / "aa.vocab")
    save_complex(ComplexRecord("p", build_peptide(["ALA", "GLY", "VAL"]), build_peptide(["SER"], prompt=0), {}),
                 tmp_path / "p.json")
    assert main(["decompose", str(tmp_path / "p.json"), "--vocab", str(tmp_path / "aa.vocab")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert [b["block_type"] for b in out["binder"]["blocks"]] == ["ALA", "GLY", "VAL"]


# -- training ---------------------------------------------------------------------
def _curve(path, column):
    with open(path) as fh:
        return [float(r[column]) for r in csv.DictReader(fh)]


def test_training_is_deterministic(workspace, tmp_path):
    base = ["--train-set", str(workspace / "data"), "--vocab", str(workspace / "aa.vocab"), "--seed", "7"]
    for name in ("a", "b"):
        assert main(["train-vae", "--out-dir", str(tmp_path / name)] + base + flags(steps=10)) == 0
    a = _curve(tmp_path / "a" / "vae_curve.csv", "total")
    b = _curve(tmp_path / "b" / "vae_curve.csv", "total")
    assert len(a) == 10 and np.allclose(a, b, atol=1e-6, rtol=0)


def test_outputs_written(trained):
    for name in ("vae.ckpt", "vae_curve.csv", "vae_config.json", "ldm.ckpt", "ldm_curve.csv"):
        assert (trained / name).is_file()
    header = (trained / "vae_curve.csv").read_text().splitlines()[0]
    assert header == "step,loss_kl,loss_rec,loss_dist,total"
    assert (trained / "ldm_curve.csv").read_text().splitlines()[0] == "step,loss"


def test_ldm_without_vae_is_config_error(workspace, tmp_path, capsys):
    code = main(["train-ldm", "--train-set", str(workspace / "data"), "--out-dir", str(tmp_path)] + flags())
    assert code == 2 and "vae-checkpoint" in capsys.readouterr().err


def test_bad_config_key_exit_code(tmp_path):
    (tmp_path / "c.cfg").write_text("not_a_key = 1\n")
    assert main(["train-vae", "--config", str(tmp_path / "c.cfg")]) == 2


def test_missing_train_set_is_data_error(workspace, tmp_path):
    code = main(["train-vae", "--train-set", str(tmp_path / "missing"), "--vocab", str(workspace / "aa.vocab"),
                 "--out-dir", str(tmp_path / "o")] + flags(steps=1))
    assert code == 3


# -- sampling and evaluation --------------------------------------------------------------
def _sample(trained, workspace, out, *extra):
    return main(["sample", str(workspace / "data" / "toy.json"), "--vae-checkpoint", str(trained / "vae.ckpt"),
                 "--ldm-checkpoint", str(trained / "ldm.ckpt"), "--out-dir", str(out)] + list(extra))


def test_sample_aa_only(trained, workspace, tmp_path):
    assert _sample(trained, workspace, tmp_path, "--n-candidates", "3", "--prompt-mode", "aa_only") == 0
    files = sorted(p for p in tmp_path.glob("*.json") if not p.name.startswith("_"))
    assert len(files) == 3
    vocab = Vocabulary([])
    for p in files:
        rec = load_complex(p)
        assert rec.metadata["reference_id"] == "toy"
        assert all(vocab[b.block_type].is_amino_acid for b in rec.binder.blocks)


def test_sample_same_seed_same_output(trained, workspace, tmp_path):
    _sample(trained, workspace, tmp_path / "a", "--seed", "3")
    _sample(trained, workspace, tmp_path / "b", "--seed", "3", "--workers", "2")
    assert (tmp_path / "a" / "toy_0.json").read_bytes() == (tmp_path / "b" / "toy_0.json").read_bytes()


def test_sample_valency_correction(trained, workspace, tmp_path):
    assert _sample(trained, workspace, tmp_path, "--n-candidates", "2", "--valency", "--repulsion") == 0
    for p in tmp_path.glob("toy_*.json"):
        assert valency_violations(load_complex(p).binder) == []


def test_sample_consistency_needs_stats(trained, workspace, tmp_path):
    assert _sample(trained, workspace, tmp_path, "--consistency") == 2


def test_evaluate_self_comparison(workspace, tmp_path, capsys):
    code = main(["evaluate", str(workspace / "data"), str(workspace / "data"), "--out-dir", str(tmp_path)])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["aar"] == 1.0 and report["l_rmsd"] < 1e-6 and report["jsd_bb"] == 0.0
    with open(tmp_path / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1 and float(rows[0]["aar"]) == 1.0


def test_evaluate_matches_library(trained, workspace, tmp_path, capsys):
    cands = tmp_path / "c"
    _sample(trained, workspace, cands, "--n-candidates", "2", "--prompt-mode", "aa_only")
    capsys.readouterr()
    assert main(["evaluate", str(cands), str(workspace / "data"), "--out-dir", str(tmp_path / "e")]) == 0
    with open(tmp_path / "e" / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    ref = load_complex(workspace / "data" / "toy.json")
    from blockgen.pipeline import sequence_of
    for row, path in zip(rows, sorted(cands.glob("toy_*.json"))):
        cand = load_complex(path)
        assert float(row["aar"]) == aar(sequence_of(cand.binder), sequence_of(ref.binder))
        assert float(row["l_rmsd"]) == pytest.approx(rmsd(ca_coords(cand.binder)[0], ca_coords(ref.binder)[0]),
                                                     abs=1e-9)


def test_evaluate_empty_dir(tmp_path, workspace):
    (tmp_path / "empty").mkdir()
    assert main(["evaluate", str(tmp_path / "empty"), str(workspace / "data"), "--out-dir", str(tmp_path)]) != 0


def test_module_entry_point_help():
    out = subprocess.run([sys.executable, "-m", "blockgen", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("build-vocab", "decompose", "train-vae", "train-ldm", "sample", "evaluate"):
        assert cmd in out.stdout
