import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairrecip.core import ExaminationModel, Instance
from fairrecip.datagen import (
    GenConfig,
    export_instance,
    generate,
    generate_perturbed,
    import_instance,
    perturb,
    popularity,
    read_meta,
)


def test_popularity_scores():
    np.testing.assert_allclose(popularity(5), [0.0, 0.25, 0.5, 0.75, 1.0])
    with pytest.raises(ValueError):
        popularity(1)


def test_full_popularity_is_seed_free():
    base = generate(GenConfig(6, 4, 1.0, seed=0))
    for seed in (1, 17, 12345):
        other = generate(GenConfig(6, 4, 1.0, seed=seed))
        np.testing.assert_array_equal(other.p1, base.p1)
        np.testing.assert_array_equal(other.p2, base.p2)
    np.testing.assert_allclose(base.p1, np.tile([0, 1 / 3, 2 / 3, 1], (6, 1)), atol=1e-15)
    np.testing.assert_allclose(base.p2[0], np.arange(6) / 5, atol=1e-15)


def test_uniform_mean():
    inst = generate(GenConfig(250, 200, 0.0, seed=5))
    assert abs(np.concatenate([inst.p1.ravel(), inst.p2.ravel()]).mean() - 0.5) <= 0.01


def test_seeded_determinism():
    a = generate(GenConfig(5, 7, 0.4, seed=9))
    b = generate(GenConfig(5, 7, 0.4, seed=9))
    c = generate(GenConfig(5, 7, 0.4, seed=10))
    np.testing.assert_array_equal(a.p1, b.p1)
    np.testing.assert_array_equal(a.p2, b.p2)
    assert not np.array_equal(a.p1, c.p1)


def test_stream_order_is_p1_then_p2():
    inst = generate(GenConfig(3, 4, 0.0, seed=2))
    draws = np.random.default_rng(2).random(24)
    np.testing.assert_array_equal(inst.p1.ravel(), draws[:12])
    np.testing.assert_array_equal(inst.p2.ravel(), draws[12:])


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 8), m=st.integers(2, 8), lam=st.floats(0.0, 1.0), seed=st.integers(0, 2**32 - 1))
def test_generated_entries_in_unit_interval(n, m, lam, seed):
    inst = generate(GenConfig(n, m, lam, seed=seed))
    assert inst.p1.shape == (n, m) and inst.p2.shape == (m, n)
    assert inst.p1.min() >= 0 and inst.p1.max() <= 1 and inst.p2.min() >= 0 and inst.p2.max() <= 1


def test_config_validation():
    GenConfig(1, 1, 0.0)
    for bad in (dict(n=0), dict(m=2.5), dict(lam=-0.1), dict(lam=1.1), dict(n=1, lam=0.5)):
        with pytest.raises(ValueError):
            GenConfig(**{**dict(n=3, m=3, lam=0.0), **bad})


# --- perturbation -------------------------------------------------------------------


def test_zero_noise_is_identity():
    inst = generate(GenConfig(4, 3, 0.3, seed=1))
    out = perturb(inst, 0.0, seed=4)
    np.testing.assert_array_equal(out.p1, inst.p1)
    np.testing.assert_array_equal(out.p2, inst.p2)


def test_noise_clamped():
    inst = Instance(np.ones((20, 20)), np.zeros((20, 20)))
    out = perturb(inst, 5.0, seed=0)
    assert out.p1.min() == 0.0 and out.p1.max() == 1.0
    assert out.p2.min() == 0.0 and out.p2.max() == 1.0
    with pytest.raises(ValueError):
        perturb(inst, -0.1)


def test_noise_standard_deviation():
    inst = Instance(np.full((250, 200), 0.5), np.full((200, 250), 0.5))
    out = perturb(inst, 0.1, seed=11)
    noise = np.concatenate([(out.p1 - 0.5).ravel(), (out.p2 - 0.5).ravel()])
    assert abs(noise.std() - 0.1) <= 0.005
    assert abs(noise.mean()) <= 0.005


def test_perturbed_pair_shares_one_stream():
    cfg = GenConfig(5, 4, 0.2, seed=3)
    true, noisy = generate_perturbed(cfg, 0.1)
    np.testing.assert_array_equal(true.p1, generate(cfg).p1)
    rng = np.random.default_rng(3)
    generate(cfg, rng)
    again = perturb(true, 0.1, rng=rng)
    np.testing.assert_array_equal(noisy.p1, again.p1)
    assert not np.array_equal(noisy.p1, perturb(true, 0.1, seed=3).p1)


def test_perturb_keeps_examination_model():
    inst = Instance(np.full((2, 3), 0.5), np.full((3, 2), 0.5), ExaminationModel("inv", 2))
    assert perturb(inst, 0.2, seed=0).exam == inst.exam


# --- export / import ---------------------------------------------------------------


def test_export_import_round_trip(tmp_path):
    cfg = GenConfig(6, 4, 0.35, ExaminationModel("inv", 3), seed=21)
    inst = generate(cfg)
    export_instance(inst, tmp_path / "market", cfg)
    back, meta = import_instance(tmp_path / "market")
    np.testing.assert_array_equal(back.p1, inst.p1)
    np.testing.assert_array_equal(back.p2, inst.p2)
    assert back.exam == inst.exam
    assert meta == {"n": "6", "m": "4", "lambda": "0.35", "seed": "21", "exam": "inv", "K": "3"}


def test_import_errors(tmp_path):
    with pytest.raises(FileNotFoundError, match="meta.txt"):
        import_instance(tmp_path)
    cfg = GenConfig(3, 2, 0.0)
    export_instance(generate(cfg), tmp_path, cfg)
    text = (tmp_path / "meta.txt").read_text().replace("n=3", "n=4")
    (tmp_path / "meta.txt").write_text(text)
    with pytest.raises(ValueError, match="n=4"):
        import_instance(tmp_path)


def test_meta_parser_skips_comments(tmp_path):
    path = tmp_path / "meta.txt"
    path.write_text("# market\n\nn = 3\nK=\n")
    assert read_meta(path) == {"n": "3", "K": ""}
    path.write_text("broken\n")
    with pytest.raises(ValueError, match="key=value"):
        read_meta(path)
