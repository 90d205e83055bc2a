import numpy as np
import pytest

from bellvmc.rbm import (RbmParams, TyingScheme, derivatives,
                         derivatives_batch, load_checkpoint, log_amplitude,
                         log_amplitude_batch, log_cosh, log_ratio,
                         make_lookup, random_init, save_checkpoint, thetas,
                         update_lookup)
from bellvmc.rngs import make_rng

ALL_SCHEMES = [
    TyingScheme.make("dense", 6),
    TyingScheme.make("short_range", 6, alpha=4, coupling_range=2),
    TyingScheme.make("perm_symmetric", 6),
    TyingScheme.make("partial_symmetric", 6),
]


def random_configs(n, count, seed):
    return make_rng(seed).choice([-1, 1], size=(count, n)).astype(np.int8)


class TestLogCosh:
    def test_small_arguments_match_direct(self):
        rng = make_rng(1)
        z = rng.normal(size=50) + 1j * rng.normal(size=50)
        assert np.allclose(log_cosh(z), np.log(np.cosh(z)), atol=1e-12)

    def test_large_real_part_no_overflow(self):
        for z in (500.0, -500.0, 500.0 + 2.0j, -500.0 - 1.5j):
            got = log_cosh(z)
            assert np.isfinite(got.real)
            # log cosh z -> |Re z| + i Im(z)*sign(Re z) - log 2 for large |Re z|
            s = np.sign(z.real)
            expect = s * z - np.log(2.0)
            assert got == pytest.approx(expect, abs=1e-12)

    def test_even_function(self):
        z = 0.37 - 0.41j
        assert log_cosh(z) == pytest.approx(log_cosh(-z), abs=1e-14)


class TestTyingSchemes:
    def test_parameter_counts(self):
        n = 8
        dense = TyingScheme.make("dense", n)  # alpha 2
        assert (dense.m, dense.n_free) == (16, 8 + 16 + 16 * 8)
        sr = TyingScheme.make("short_range", n, alpha=4, coupling_range=2)
        # window sizes per site: 3,4,5,5,5,5,4,3 without wraparound
        assert (sr.m, sr.n_free) == (32, 8 + 32 + 4 * 34)
        perm = TyingScheme.make("perm_symmetric", n)
        assert (perm.m, perm.n_free) == (16, 1 + 16 + 16)
        part = TyingScheme.make("partial_symmetric", n)
        assert (part.m, part.n_free) == (16, 2 + 16 + (8 + 15))

    def test_short_range_mask_is_local(self):
        sr = TyingScheme.make("short_range", 10, alpha=4, coupling_range=2)
        sites = sr.w_rows // 4
        assert np.all(np.abs(sites - sr.w_cols) <= 2)
        # no wraparound: hidden units at site 0 never touch site 9
        assert not np.any((sites == 0) & (sr.w_cols == 9))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            TyingScheme.make("banana", 4)

    def test_unpack_ties(self):
        part = TyingScheme.make("partial_symmetric", 4)
        free = np.arange(1, part.n_free + 1, dtype=complex)
        a, b, w = part.unpack(free)
        assert a[0] != a[1] and np.all(a[1:] == a[1])
        # hidden row 0 carries distinct entries, rows >= 1 are constant
        assert len(set(w[0])) == 4
        for r in range(1, part.m):
            assert len(set(w[r])) == 1

    def test_params_immutable(self):
        params = random_init(ALL_SCHEMES[0], 0.1, seed=0)
        with pytest.raises(ValueError):
            params.free[0] = 0.0
        other = params.replace(params.free + 1.0)
        assert other.free[0] == params.free[0] + 1.0


class TestAmplitude:
    def test_matches_product_formula(self):
        # direct evaluation: Phi = exp(a.sigma) * prod_r cosh(b_r + W_r.sigma)
        scheme = TyingScheme.make("dense", 3)
        params = random_init(scheme, 0.3, seed=2)
        for cfg in random_configs(3, 8, seed=3):
            sig = cfg.astype(float)
            direct = np.exp(params.a @ sig) * np.prod(np.cosh(params.b + params.w @ sig))
            assert np.exp(log_amplitude(params, cfg)) == pytest.approx(direct, rel=1e-12)

    def test_single_site_closed_form(self):
        scheme = TyingScheme.make("dense", 1, alpha=1)
        params = RbmParams(scheme, np.array([0.1, 0.2j, 0.3], dtype=complex))
        got = log_amplitude(params, [1])
        expect = 0.1 + np.log(np.cosh(0.2j + 0.3))
        assert got == pytest.approx(expect, abs=1e-14)

    def test_batch_equals_loop(self):
        params = random_init(ALL_SCHEMES[1], 0.2, seed=4)
        cfgs = random_configs(6, 10, seed=5)
        batch = log_amplitude_batch(params, cfgs)
        for i, cfg in enumerate(cfgs):
            assert batch[i] == pytest.approx(log_amplitude(params, cfg), abs=1e-13)

    def test_finite_at_large_parameters(self):
        scheme = TyingScheme.make("dense", 4)
        params = RbmParams(scheme, np.full(scheme.n_free, 30.0 + 30.0j))
        assert np.isfinite(log_amplitude(params, [1, -1, 1, -1]).real)

    def test_config_validation(self):
        params = random_init(ALL_SCHEMES[0], 0.1, seed=0)
        with pytest.raises(ValueError):
            log_amplitude(params, [1, -1, 0, 1, 1, 1])
        with pytest.raises(ValueError):
            log_amplitude(params, [1, -1])


class TestLogRatio:
    @pytest.mark.parametrize("scheme", ALL_SCHEMES, ids=lambda s: s.kind)
    def test_matches_recompute(self, scheme):
        params = random_init(scheme, 0.25, seed=6)
        rng = make_rng(7)
        cfg = rng.choice([-1, 1], size=scheme.n).astype(np.int8)
        lookup = make_lookup(params, cfg)
        for _ in range(20):
            k = int(rng.integers(1, scheme.n + 1))
            flips = (k,) if rng.uniform() < 0.5 else \
                (k, int(1 + (k % scheme.n)))
            new_cfg = cfg.copy()
            for s in set(flips):
                new_cfg[s - 1] = -new_cfg[s - 1]
            direct = log_amplitude(params, new_cfg) - log_amplitude(params, cfg)
            assert log_ratio(params, lookup, flips) == pytest.approx(direct, abs=1e-10)

    def test_lookup_drift_over_thousand_flips(self):
        # acceptance property: cached thetas stay within 1e-8 of recompute
        scheme = TyingScheme.make("dense", 10)
        params = random_init(scheme, 0.3, seed=8)
        rng = make_rng(9)
        cfg = rng.choice([-1, 1], size=10).astype(np.int8)
        lookup = make_lookup(params, cfg)
        for _ in range(1000):
            site = int(rng.integers(1, 11))
            lookup = update_lookup(params, lookup, (site,))
        fresh = make_lookup(params, lookup.config)
        drift = np.max(np.abs(lookup.theta - fresh.theta))
        assert drift <= 1e-8

    def test_flip_validation(self):
        params = random_init(ALL_SCHEMES[0], 0.1, seed=0)
        lookup = make_lookup(params, np.ones(6, dtype=np.int8))
        with pytest.raises(ValueError):
            log_ratio(params, lookup, ())
        with pytest.raises(ValueError):
            log_ratio(params, lookup, (7,))


class TestDerivatives:
    @pytest.mark.parametrize("scheme", ALL_SCHEMES, ids=lambda s: s.kind)
    def test_matches_finite_differences(self, scheme):
        params = random_init(scheme, 0.2, seed=10)
        cfg = random_configs(scheme.n, 1, seed=11)[0]
        o = derivatives(params, cfg)
        h = 1e-6
        for k in range(scheme.n_free):
            for direction in (1.0, 1j):
                fp = params.free.copy()
                fp[k] += direction * h
                fm = params.free.copy()
                fm[k] -= direction * h
                fd = (log_amplitude(params.replace(fp), cfg)
                      - log_amplitude(params.replace(fm), cfg)) / (2 * h)
                # holomorphic: d/d(iy) = i * d/dx
                expect = o[k] * direction
                assert fd == pytest.approx(expect, abs=2e-9)

    def test_tied_groups_sum_members(self):
        # perm-symmetric visible bias derivative is sum_k sigma_k
        scheme = TyingScheme.make("perm_symmetric", 5)
        params = random_init(scheme, 0.2, seed=12)
        cfg = np.array([1, -1, 1, 1, -1], dtype=np.int8)
        o = derivatives(params, cfg)
        assert o[0] == pytest.approx(cfg.sum())
        th = np.tanh(thetas(params, cfg.astype(float)))
        assert np.allclose(o[scheme.sl_b], th)
        expect_w = np.array([
            np.sum(cfg * np.ones(5) * th[r]) for r in range(scheme.m)])
        assert np.allclose(o[scheme.sl_w], expect_w)

    def test_batch_shares_theta(self):
        params = random_init(ALL_SCHEMES[1], 0.2, seed=13)
        cfgs = random_configs(6, 7, seed=14)
        theta = thetas(params, cfgs.astype(float))
        a = derivatives_batch(params, cfgs)
        b = derivatives_batch(params, cfgs, theta=theta)
        assert np.array_equal(a, b)


class TestSymmetries:
    def test_perm_symmetric_invariance(self):
        scheme = TyingScheme.make("perm_symmetric", 6)
        params = random_init(scheme, 0.3, seed=15)
        rng = make_rng(16)
        cfg = rng.choice([-1, 1], size=6).astype(np.int8)
        base = log_amplitude(params, cfg)
        for _ in range(5):
            assert log_amplitude(params, rng.permutation(cfg)) == \
                pytest.approx(base, abs=1e-12)

    def test_partial_symmetric_rest_invariance(self):
        # with the first hidden unit's weights uniform, any permutation of
        # sites 2..N leaves the amplitude unchanged; site 1 stays special
        scheme = TyingScheme.make("partial_symmetric", 6)
        base_params = random_init(scheme, 0.3, seed=17)
        free = base_params.free.copy()
        sl = scheme.sl_w
        free[sl.start:sl.start + scheme.n] = 0.11 - 0.07j  # row-0 weights
        params = base_params.replace(free)
        rng = make_rng(18)
        cfg = np.array([1, -1, -1, 1, -1, 1], dtype=np.int8)
        base = log_amplitude(params, cfg)
        for _ in range(5):
            perm = np.concatenate([[0], 1 + rng.permutation(5)])
            assert log_amplitude(params, cfg[perm]) == pytest.approx(base, abs=1e-12)
        # swapping site 1 into the bulk changes the amplitude
        swapped = cfg.copy()
        swapped[[0, 1]] = swapped[[1, 0]]
        assert log_amplitude(params, swapped) != pytest.approx(base, abs=1e-9)

    def test_partial_symmetric_site1_weights_are_free(self):
        scheme = TyingScheme.make("partial_symmetric", 6)
        params = random_init(scheme, 0.3, seed=19)
        assert len(set(np.round(params.w[0], 12))) > 1


class TestCheckpoints:
    @pytest.mark.parametrize("scheme", ALL_SCHEMES, ids=lambda s: s.kind)
    def test_round_trip(self, scheme, tmp_path):
        params = random_init(scheme, 0.2, seed=20)
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, params, seed=20)
        back, seed = load_checkpoint(path)
        assert seed == 20
        assert back.scheme.kind == scheme.kind
        assert np.allclose(back.free, params.free, atol=0)
        cfg = random_configs(scheme.n, 1, seed=21)[0]
        assert log_amplitude(back, cfg) == log_amplitude(params, cfg)

    def test_rejects_tie_violation(self, tmp_path):
        import json
        scheme = TyingScheme.make("perm_symmetric", 4)
        params = random_init(scheme, 0.2, seed=22)
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, params, seed=None)
        doc = json.loads(path.read_text())
        doc["params"]["a_re"][2] += 0.5  # break the shared visible bias
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError, match="tied"):
            load_checkpoint(path)

    def test_rejects_mask_violation(self, tmp_path):
        import json
        scheme = TyingScheme.make("short_range", 8, alpha=4, coupling_range=2)
        params = random_init(scheme, 0.2, seed=23)
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, params)
        doc = json.loads(path.read_text())
        doc["params"]["W_re"][0][7] = 0.3  # far outside the coupling window
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError, match="mask"):
            load_checkpoint(path)

    def test_rejects_shape_mismatch(self, tmp_path):
        import json
        params = random_init(TyingScheme.make("dense", 4), 0.2, seed=24)
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, params)
        doc = json.loads(path.read_text())
        doc["params"]["b_re"].append(0.0)
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError, match="shape"):
            load_checkpoint(path)
