import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colosynth import hashing
from colosynth.errors import InvalidSpec
from colosynth.texture import MODES, TextureImage, TextureSpec, generate_texture, sample_texture, value_fbm


def test_deterministic():
    spec = TextureSpec(resolution=(128, 128), seed=9)
    assert np.array_equal(generate_texture(spec).pixels, generate_texture(spec).pixels)


def test_checker_pattern():
    spec = TextureSpec(mode="checker", resolution=(64, 64), base_color_a=(0, 0, 0), base_color_b=(1, 1, 1), noise_scale=8)
    px = generate_texture(spec).pixels
    assert not np.array_equal(px[0, 0], px[0, 8])
    assert np.array_equal(px[0, 0], px[0, 16])


def test_seeds_differ():
    a = generate_texture(TextureSpec(seed=1)).pixels
    b = generate_texture(TextureSpec(seed=2)).pixels
    assert np.abs(a - b).mean() > 0.01


def test_mucosa_palette_red_green_blue():
    px = generate_texture(TextureSpec(seed=5)).pixels
    assert np.all(px[..., 0] >= px[..., 1]) and np.all(px[..., 1] >= px[..., 2])


@pytest.mark.parametrize("mode", MODES)
def test_wraps_in_u(mode):
    tex = generate_texture(TextureSpec(mode=mode, resolution=(128, 64), seed=3))
    v = (np.arange(64) + 0.5) / 64
    assert np.array_equal(sample_texture(tex, np.zeros(64), v), sample_texture(tex, np.ones(64), v))


def test_fbm_field_is_periodic():
    u = np.linspace(0, 1, 17)[:, None]
    v = np.linspace(0, 1, 9)[None, :]
    a = value_fbm(4, u, v, 5, 8, 8)
    b = value_fbm(4, u + 1.0, v, 5, 8, 8)
    assert np.allclose(a, b, atol=1e-12)
    assert a.min() >= 0 and a.max() <= 1


def test_sample_at_texel_center():
    rng = np.random.default_rng(0)
    tex = TextureImage(rng.random((8, 16, 3)))
    for y, x in [(0, 0), (3, 5), (7, 15)]:
        got = sample_texture(tex, x / 16, (y + 0.5) / 8)
        assert np.array_equal(got, tex.pixels[y, x])


def test_bilinear_midpoint_on_split():
    w = 64
    px = np.zeros((4, w, 3))
    px[:, : w // 2] = (0.2, 0.4, 0.6)
    px[:, w // 2 :] = (1.0, 0.0, 0.5)
    tex = TextureImage(px)
    # halfway between the last left column and the first right column
    got = sample_texture(tex, 0.5 - 0.5 / w, 0.5)
    assert np.allclose(got, [0.6, 0.2, 0.55], atol=1e-6)


def test_v_clamps():
    tex = TextureImage(np.random.default_rng(1).random((8, 8, 3)))
    assert np.array_equal(sample_texture(tex, 0.25, -3.0), sample_texture(tex, 0.25, 0.0))
    assert np.array_equal(sample_texture(tex, 0.25, 7.0), sample_texture(tex, 0.25, 1.0))


@pytest.mark.parametrize(
    "kw",
    [
        {"mode": "plaid"},
        {"resolution": (100, 128)},
        {"resolution": (32, 32)},
        {"noise_octaves": 9},
        {"noise_scale": 0.0},
        {"vessel_density": -1.0},
        {"base_color_a": (1.2, 0, 0)},
    ],
)
def test_invalid_spec(kw):
    with pytest.raises(InvalidSpec):
        generate_texture(TextureSpec(**kw))


def test_spec_dict_round_trip():
    spec = TextureSpec(mode="stripes", seed=12, noise_scale=5.5)
    assert TextureSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(InvalidSpec):
        TextureSpec.from_dict({"mood": "x"})


@settings(max_examples=20, deadline=None)
@given(
    st.sampled_from(MODES),
    st.integers(0, 2**64 - 1),
    st.integers(1, 8),
    st.floats(0.5, 40),
    st.floats(0, 30),
)
def test_range_safety(mode, seed, octaves, scale, density):
    spec = TextureSpec(mode=mode, resolution=(64, 64), seed=seed, noise_octaves=octaves, noise_scale=scale, vessel_density=density)
    px = generate_texture(spec).pixels
    assert px.shape == (64, 64, 3)
    assert np.all(np.isfinite(px)) and px.min() >= 0 and px.max() <= 1


def test_hash_streams_independent_and_uniform():
    u = hashing.uniform(7, "field", np.arange(20000))
    assert 0.49 < u.mean() < 0.51 and u.min() >= 0 and u.max() < 1
    assert not np.array_equal(hashing.uniform(7, "a", np.arange(10)), hashing.uniform(7, "b", np.arange(10)))
    z = hashing.normal(3, np.arange(20000))
    assert abs(z.mean()) < 0.03 and abs(z.std() - 1) < 0.03
    assert hashing.tag("x") == hashing.tag("x") != hashing.tag("y")
    counts = [hashing.poisson(12.0, 1, k) for k in range(3000)]
    assert abs(np.mean(counts) - 12) < 0.3
