"""Acceptance suite: one test per release criterion, with timing.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS/SKIP
line per criterion.  Criterion 6 needs the external pet-image corpus and
is skipped unless the SVDCLASSIFY_PET_DATA environment variable points
at a two-class image directory.
"""

import json
import os
import time

import numpy as np
import pytest

from svdclassify.classifier import ModelConfig, classify
from svdclassify.cli import EXIT_OK, main
from svdclassify.linalg import NormKind, svd, truncate
from svdclassify.synth import SynthSpec, generate, write_dataset
from svdclassify.template import ClassTemplate, optimize_weights, reconstruction_error

from _oracles import brute_force_norm, singular_values_oracle

PET_DATA_ENV = "SVDCLASSIFY_PET_DATA"


class _Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False


def _report(number: int, name: str, timer: _Timer, budget: float | None = None):
    suffix = f" ({timer.elapsed:.2f}s" + (f" < {budget:.0f}s budget)" if budget else ")")
    print(f"\nACCEPTANCE {number} {name}: PASS{suffix}")
    if budget is not None:
        assert timer.elapsed < budget, f"criterion {number} exceeded its {budget}s budget"


def test_criterion_1_template_equivalence():
    spec = SynthSpec(means=(0.4, 0.7), noise=0.1, images_per_class=136, seed=5)
    images = generate(spec).class_matrices("dark")
    assert len(images) == 136 and images[0].shape == (64, 64)
    with _Timer() as t:
        optimized = optimize_weights(images)
        uniform = np.full(136, 1.0 / 136)
        max_abs = float(np.max(np.abs(optimized - uniform)))
        e_opt = reconstruction_error(images, optimized)
        e_uni = reconstruction_error(images, uniform)
    assert max_abs <= 1e-6, f"optimized weights deviate from uniform by {max_abs:.3e}"
    assert e_opt <= e_uni * (1.0 + 1e-9)
    _report(1, "template equivalence", t, budget=5.0)


def test_criterion_2_svd_against_eigen_oracle():
    rng = np.random.default_rng(2024)
    with _Timer() as t:
        for _ in range(500):
            m = int(rng.integers(2, 13))
            n = int(rng.integers(2, 13))
            a = rng.standard_normal((m, n))
            f = svd(a)
            reference = singular_values_oracle(a)
            scale = max(1.0, float(reference[0]))
            assert np.max(np.abs(f.sigma - reference)) <= 1e-8 * scale
            r = min(m, n)
            assert np.linalg.norm(f.u.T @ f.u - np.eye(r)) <= 1e-10 * r
            assert np.linalg.norm(f.v.T @ f.v - np.eye(r)) <= 1e-10 * r
            assert np.all(np.diff(f.sigma) <= 0) and np.all(f.sigma >= 0)
            recon_gap = np.linalg.norm((f.u * f.sigma) @ f.v.T - a)
            assert recon_gap <= 1e-8 * max(1.0, np.linalg.norm(a))
    _report(2, "SVD correctness (500 matrices vs eigen oracle)", t, budget=10.0)


def test_criterion_3_eckart_young():
    rng = np.random.default_rng(77)
    with _Timer() as t:
        for _ in range(10):
            m = int(rng.integers(4, 9))
            n = int(rng.integers(4, 9))
            a = rng.standard_normal((m, n))
            f = svd(a)
            for k in range(1, min(m, n)):
                best = np.linalg.norm(a - truncate(f, k))
                for trial in range(100):
                    if trial % 2 == 0:
                        competitor = rng.standard_normal((m, k)) @ rng.standard_normal((k, n))
                    else:
                        # near-optimal competitor: perturbed truncation factors
                        du = f.u[:, :k] + 1e-3 * rng.standard_normal((m, k))
                        dv = f.v[:, :k] + 1e-3 * rng.standard_normal((n, k))
                        competitor = (du * f.sigma[:k]) @ dv.T
                    assert best <= np.linalg.norm(a - competitor)
    _report(3, "Eckart-Young optimality vs 100 rank-k competitors", t, budget=10.0)


def test_criterion_4_norm_oracle():
    rng = np.random.default_rng(4096)
    with _Timer() as t:
        from svdclassify.linalg import matrix_norm

        for _ in range(1000):
            a = rng.standard_normal((5, 5))
            for kind in NormKind:
                assert matrix_norm(a, kind) == pytest.approx(
                    brute_force_norm(a, kind.value), abs=1e-10
                )
        worked = np.array([[1.0, 2.0], [3.0, 4.0]])
        closed_form = ((30.0 + np.sqrt(884.0)) / 2.0) ** 0.5
        assert matrix_norm(worked, NormKind.TWO) == pytest.approx(closed_form, abs=1e-10)
    _report(4, "norm oracle (1000 matrices, 4 norms)", t)


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory):
    """The criterion-5 pipeline, shared with the determinism criterion."""
    base = tmp_path_factory.mktemp("accept")
    data = base / "data"
    write_dataset(
        generate(SynthSpec(means=(0.2, 0.9), noise=0.05, images_per_class=40, seed=7)),
        data,
    )

    def run(tag: str) -> tuple:
        train_out = base / f"train_{tag}"
        eval_out = base / f"eval_{tag}"
        code = main(
            ["train", "--data", str(data), "--out", str(train_out), "--seed", "7"]
        )
        assert code == EXIT_OK
        code = main(
            [
                "evaluate",
                "--model", str(train_out / "model.json"),
                "--out", str(eval_out),
            ]
        )
        assert code == EXIT_OK
        return train_out, eval_out

    with _Timer() as t:
        first = run("a")
    snapshot = {
        name: (first[0] / name).read_bytes()
        for name in ("model.json", "training_report.json", "sweeps.csv")
    } | {
        name: (first[1] / name).read_bytes()
        for name in ("metrics.json", "predictions.csv")
    }
    return {
        "data": data,
        "run": run,
        "first": first,
        "snapshot": snapshot,
        "elapsed": t.elapsed,
    }


def test_criterion_5_synthetic_end_to_end(pipeline_run):
    train_out, eval_out = pipeline_run["first"]
    training = json.loads((train_out / "training_report.json").read_text())
    metrics = json.loads((eval_out / "metrics.json").read_text())
    assert training["per_norm"]["fro"]["best_rank"] <= 3
    assert metrics["accuracy"] >= 0.95
    timer = _Timer()
    timer.elapsed = pipeline_run["elapsed"]
    _report(5, "synthetic end-to-end (train + evaluate)", timer, budget=30.0)


def test_criterion_6_paper_corpus_reproduction(tmp_path):
    root = os.environ.get(PET_DATA_ENV, "")
    if not root or not os.path.isdir(root):
        print(
            f"\nACCEPTANCE 6 corpus reproduction: SKIPPED "
            f"(set {PET_DATA_ENV} to the two-class pet-image directory to enable)"
        )
        pytest.skip(f"{PET_DATA_ENV} not set; criteria 1-5 constitute acceptance")
    with _Timer() as t:
        train_out = tmp_path / "train"
        eval_out = tmp_path / "eval"
        assert main(["train", "--data", root, "--out", str(train_out)]) == EXIT_OK
        assert (
            main(
                [
                    "evaluate",
                    "--model", str(train_out / "model.json"),
                    "--out", str(eval_out),
                ]
            )
            == EXIT_OK
        )
    training = json.loads((train_out / "training_report.json").read_text())
    metrics = json.loads((eval_out / "metrics.json").read_text())
    assert training["selected"]["norm"] == "fro"
    assert abs(training["selected"]["rank"] - 10) <= 3
    assert abs(metrics["accuracy"] - 0.69) <= 0.06
    _report(6, "corpus reproduction (fro, rank 10±3, accuracy 69±6%)", t)


def test_criterion_7_determinism(pipeline_run):
    with _Timer() as t:
        # Rerun the identical pipeline (same data, same output paths) and
        # compare every JSON/CSV artifact against the first run's bytes.
        train_out, eval_out = pipeline_run["run"]("a")
        for name, content in pipeline_run["snapshot"].items():
            where = eval_out if name in ("metrics.json", "predictions.csv") else train_out
            assert (where / name).read_bytes() == content, name
    _report(7, "determinism (byte-identical JSON/CSV across reruns)", t)


def test_criterion_8_tie_resolves_to_second_class():
    with _Timer() as t:
        template = np.full((8, 8), 0.4)
        templates = [
            ClassTemplate("boxer", template, np.array([1.0]), "uniform"),
            ClassTemplate("persian", template.copy(), np.array([1.0]), "uniform"),
        ]
        config = ModelConfig(NormKind.FRO, 2, ("boxer", "persian"))
        outcome = classify(np.full((8, 8), 0.9), templates, config)
        assert outcome.errors["boxer"] == outcome.errors["persian"]
        assert outcome.predicted == "persian"
    _report(8, "tie semantics (equal errors -> second class)", t)
