import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import ndimage

from lvsdd.morphology import convex_hull_mask
from lvsdd.phantom import (
    Papillary,
    PhantomError,
    PhantomSpec,
    RightVentricle,
    SuiteRanges,
    TrimodalRanges,
    fold_into_range,
    generate_phantom,
    generate_suite,
    random_spec,
    trimodal_samples,
)


def test_clean_phantom_has_three_values():
    p = generate_phantom(PhantomSpec())
    assert sorted(np.unique(p.image)) == [0.0, 110.0, 255.0]


def test_seeded_runs_identical():
    spec = PhantomSpec(noise_sigma=7, seed=11, papillary=(Papillary(1.0, 3, 4),))
    a, b = generate_phantom(spec), generate_phantom(spec)
    assert a.image.tobytes() == b.image.tobytes()
    assert generate_phantom(PhantomSpec(noise_sigma=7, seed=12)).image.tobytes() != a.image.tobytes()


def test_truth_masks():
    spec = PhantomSpec(papillary=(Papillary(0.3, 3, 5), Papillary(2.0, 2, 4)))
    p = generate_phantom(spec)
    assert not (p.pool & p.wall).any()
    assert np.array_equal(p.pool_with_papillary_hull, convex_hull_mask(p.pool))
    assert p.pool_with_papillary_hull.sum() > p.pool.sum()
    # blobs carry wall intensity
    assert np.all(p.image[p.pool] == 255.0)
    notch = p.pool_with_papillary_hull & ~p.pool
    assert np.all(p.image[notch] == 110.0)


@given(st.floats(12, 30), st.floats(5, 12))
def test_pool_and_wall_simply_connected(r, t):
    p = generate_phantom(PhantomSpec(pool_radius=r, wall_thickness=t))
    heart = p.pool | p.wall
    assert ndimage.label(heart)[1] == 1
    # no holes: filling changes nothing
    assert np.array_equal(ndimage.binary_fill_holes(heart), heart)


def test_rv_crescent_outside_wall():
    spec = PhantomSpec(rv=RightVentricle(np.pi, 2.0, 12, 2), lv_center=(90, 80))
    p = generate_phantom(spec)
    assert p.rv.any()
    assert not (p.rv & (p.pool | p.wall)).any()
    assert np.all(p.image[p.rv] == 255.0)


@pytest.mark.parametrize("kw", [
    dict(pool_radius=60, wall_thickness=25),
    dict(intensities=(200, 110, 100)),
    dict(intensities=(0, 0, 255)),
    dict(intensities=(0, 300, 255)),
    dict(noise_sigma=-1),
    dict(lv_center=(20, 80)),
])
def test_invalid_specs(kw):
    with pytest.raises(PhantomError):
        generate_phantom(PhantomSpec(**kw))


def test_clean_tier_separation():
    spec = PhantomSpec(intensities=(0, 110, 140), noise_sigma=10)
    with pytest.raises(PhantomError):
        generate_phantom(spec)
    generate_phantom(spec, clean=False)


def test_dark_wall_allowed():
    p = generate_phantom(PhantomSpec(intensities=(120, 30, 250)))
    assert np.all(p.image[p.wall] == 30)


@given(st.floats(-300, 600))
def test_fold_stays_in_range(v):
    out = fold_into_range(np.array([v]))
    assert 0.0 <= out[0] <= 255.0
    if 0 <= v <= 255:
        assert out[0] == v


def test_suite_reproducible_and_in_range():
    a = generate_suite(6, master_seed=3)
    b = generate_suite(6, master_seed=3)
    assert [p.image.tobytes() for p in a] == [p.image.tobytes() for p in b]
    assert len(generate_suite(1)) == 1
    r = SuiteRanges()
    for p in a:
        s = p.spec
        assert r.pool_radius[0] <= s.pool_radius <= r.pool_radius[1]
        assert r.wall_thickness[0] <= s.wall_thickness <= r.wall_thickness[1]
        assert r.noise_sigma[0] <= s.noise_sigma <= r.noise_sigma[1]
        assert r.papillary_count[0] <= len(s.papillary) <= r.papillary_count[1]
    with pytest.raises(PhantomError):
        generate_suite(0)


def test_random_spec_validates():
    rng = np.random.default_rng(0)
    for _ in range(200):
        random_spec(rng, PhantomSpec(), SuiteRanges()).validate(clean=False)


def test_trimodal_samples():
    cls = trimodal_samples(np.random.default_rng(0))
    assert sum(len(c) for c in cls) == TrimodalRanges().n_samples
    assert all(abs(np.median(c) - m) < 6 for c, m in zip(cls, TrimodalRanges().means))
    assert all(c.min() >= 0 and c.max() <= 255 for c in cls)
