"""Sampler law checks, coupling invariants, and reproducibility contracts.

Statistical oracles use fixed seeds and 3-sigma tolerances derived from the
binomial/Poisson laws they test against, so every run is deterministic.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from perclr import kernel, sampling
from perclr.errors import CapacityError, InvalidInputError
from perclr.sampling import Configuration, MeasureSpec

PLAIN1 = MeasureSpec(kind="plain", beta=1.0)


class TestEdgeUniform:
    def test_deterministic(self):
        e = ((0,), (5,))
        assert sampling.edge_uniform(42, e) == sampling.edge_uniform(42, e)

    def test_endpoint_order_symmetric(self):
        assert sampling.edge_uniform(7, ((3,), (9,))) == sampling.edge_uniform(7, ((9,), (3,)))
        assert sampling.edge_uniform(7, ((1, 2), (4, 0))) == sampling.edge_uniform(
            7, ((4, 0), (1, 2))
        )

    def test_uniform_mean(self):
        """Empirical mean over 10^6 distinct edges within 3 sigma of 1/2."""
        vals = [sampling.edge_uniform(123, (0, k)) for k in range(1, 10 ** 6 + 1)]
        mean = float(np.mean(vals))
        assert abs(mean - 0.5) < 3.0 / math.sqrt(12 * 10 ** 6)

    def test_distinct_endpoints_required(self):
        with pytest.raises(InvalidInputError):
            sampling.edge_uniform(1, ((2,), (2,)))

    @given(st.integers(min_value=0, max_value=2 ** 63), st.integers(0, 10 ** 6))
    @settings(max_examples=60, deadline=None)
    def test_range(self, seed, k):
        u = sampling.edge_uniform(seed, (k, k + 3))
        assert 0.0 <= u < 1.0


class TestMeasureSpec:
    def test_plain_rejects_mixed_fields(self):
        with pytest.raises(InvalidInputError):
            MeasureSpec(kind="plain", beta=1.0, beta2=2.0)

    def test_mixed_requires_threshold(self):
        with pytest.raises(InvalidInputError):
            MeasureSpec(kind="mixed", beta=1.0, beta2=2.0)

    def test_length_classes(self):
        m = MeasureSpec(kind="mixed", beta=0.5, beta2=2.0, k_threshold=3)
        assert m.beta_for_length(7) == 0.5  # 7 = 2^3 - 1 still short
        assert m.beta_for_length(8) == 2.0

    def test_threshold_one_is_plain_beta2(self):
        m = MeasureSpec(kind="mixed", beta=0.25, beta2=1.5, k_threshold=1)
        for length in range(2, 40):
            assert m.beta_for_length(length) == 1.5


class TestSampleDirect:
    def test_beta_zero_empty(self):
        cfg = sampling.sample_direct(MeasureSpec(kind="plain", beta=0.0), 16, 1, 1, 0)
        assert cfg.long_edges == frozenset()

    def test_reproducible(self):
        a = sampling.sample_direct(PLAIN1, 12, 1, 99, 3)
        b = sampling.sample_direct(PLAIN1, 12, 1, 99, 3)
        assert a.long_edges == b.long_edges

    def test_replica_changes_edges(self):
        a = sampling.sample_direct(PLAIN1, 64, 1, 99, 0)
        b = sampling.sample_direct(PLAIN1, 64, 1, 99, 1)
        assert a.long_edges != b.long_edges

    def test_edge_frequency_n3(self):
        """Edge {0,2} at beta=1 appears with frequency 1/4 (3 sigma of binomial)."""
        R = 10 ** 5
        hits = sum(
            1
            for r in range(R)
            if ((0,), (2,)) in sampling.sample_direct(PLAIN1, 3, 1, 2024, r).long_edges
        )
        sigma = math.sqrt(0.25 * 0.75 / R)
        assert abs(hits / R - 0.25) < 3 * sigma

    def test_mixed_short_classes_suppressed(self):
        spec = MeasureSpec(kind="mixed", beta=0.0, beta2=1.0, k_threshold=2)
        lengths = set()
        for r in range(400):
            cfg = sampling.sample_direct(spec, 8, 1, 5, r)
            lengths.update(v[0] - u[0] for u, v in cfg.long_edges)
        assert lengths  # beta2=1 produces some long edges
        assert all(L >= 4 for L in lengths)  # classes 2..3 carry beta=0

    def test_capacity_guard(self):
        with pytest.raises(CapacityError):
            sampling.sample_direct(PLAIN1, 10 ** 5, 1, 0, 0)

    def test_d2_inside_box_and_no_nearest(self):
        cfg = sampling.sample_direct(MeasureSpec(kind="plain", beta=3.0), 5, 2, 11, 0)
        for u, v in cfg.long_edges:
            assert max(abs(a - b) for a, b in zip(u, v)) >= 2
            for pt in (u, v):
                assert all(0 <= c < 5 for c in pt)


class TestSampleFast:
    def test_beta_zero_empty(self):
        cfg = sampling.sample_fast(MeasureSpec(kind="plain", beta=0.0), 4096, 1, 7, 0)
        assert cfg.long_edges == frozenset()

    def test_reproducible(self):
        a = sampling.sample_fast(PLAIN1, 512, 1, 31, 5)
        b = sampling.sample_fast(PLAIN1, 512, 1, 31, 5)
        assert a.long_edges == b.long_edges

    def test_class_counts_match_binomial_law(self):
        """Chi-square of per-distance counts vs Binomial(n-k, p(beta,k)).

        Aggregates 10^4 replicas at n=64, beta=1; the per-class totals are
        Binomial(R*(n-k), p_k), standardized and combined into a chi-square
        statistic with one dof per class.
        """
        n, R = 64, 10 ** 4
        ks = np.arange(2, n)
        totals = np.zeros(n, dtype=np.int64)
        for r in range(R):
            cfg = sampling.sample_fast(PLAIN1, n, 1, 777, r)
            for u, v in cfg.long_edges:
                totals[v[0] - u[0]] += 1
        p = kernel.one_dim_probs(1.0, ks)
        trials = R * (n - ks)
        z = (totals[2:] - trials * p) / np.sqrt(trials * p * (1 - p))
        chi2 = float(np.sum(z ** 2))
        pval = stats.chi2.sf(chi2, df=len(ks))
        assert pval > 0.001

    def test_mean_edge_count_n1024(self):
        """Mean long-edge count vs the exact sum of (n-k)/k^2 at beta=1."""
        exact = 652.9037969026101  # frozen oracle: sum_{k=2}^{1023} (1024-k)/k^2
        ks = np.arange(2, 1024, dtype=np.float64)
        var = float(np.sum((1024 - ks) * (1 / ks ** 2) * (1 - 1 / ks ** 2)))
        R = 400
        counts = [
            sampling.sample_fast(PLAIN1, 1024, 1, 888, r).edge_count() for r in range(R)
        ]
        assert abs(float(np.mean(counts)) - exact) < 3 * math.sqrt(var / R)

    def test_agrees_with_direct_in_mean(self):
        """sample_fast and sample_direct share the law: mean counts within 3 sigma."""
        n, R = 64, 1500
        fast = np.array(
            [sampling.sample_fast(PLAIN1, n, 1, 101, r).edge_count() for r in range(R)]
        )
        direct = np.array(
            [sampling.sample_direct(PLAIN1, n, 1, 202, r).edge_count() for r in range(R)]
        )
        se = math.sqrt(fast.var(ddof=1) / R + direct.var(ddof=1) / R)
        assert abs(fast.mean() - direct.mean()) < 3 * se

    def test_d2_matches_direct_mean(self):
        n, R = 6, 800
        spec = MeasureSpec(kind="plain", beta=2.0)
        fast = np.array(
            [sampling.sample_fast(spec, n, 2, 303, r).edge_count() for r in range(R)]
        )
        direct = np.array(
            [sampling.sample_direct(spec, n, 2, 404, r).edge_count() for r in range(R)]
        )
        se = math.sqrt(fast.var(ddof=1) / R + direct.var(ddof=1) / R)
        assert abs(fast.mean() - direct.mean()) < 3 * se


class TestSampleContinuum:
    def test_marginal_survival_probability(self):
        """P(u not~ v) = exp(-beta J) = 3/4 at d=1, |u-v|=2, beta=1."""
        R = 10 ** 5
        missing = sum(
            1
            for r in range(R)
            if ((0,), (2,)) not in sampling.sample_continuum(1.0, 3, 1, 555, r).long_edges
        )
        sigma = math.sqrt(0.75 * 0.25 / R)
        assert abs(missing / R - 0.75) < 3 * sigma

    def test_beta_zero_empty(self):
        cfg = sampling.sample_continuum(0.0, 8, 1, 1, 0)
        assert cfg.long_edges == frozenset()

    def test_grid_of_displacements_within_3_sigma(self):
        R = 20000
        n = 8
        configs = [sampling.sample_continuum(0.8, n, 1, 606, r) for r in range(R)]
        for k in (2, 4, 7):
            p = kernel.connection_prob(0.8, 0, k, dim=1)
            hits = sum(1 for c in configs if ((0,), (k,)) in c.long_edges)
            sigma = math.sqrt(p * (1 - p) / R)
            assert abs(hits / R - p) < 3.5 * sigma


class TestCoupledSweep:
    def test_nested_edge_sets(self):
        for r in range(50):
            cfgs = sampling.coupled_sweep([0.25, 0.5, 1.0, 2.0], 128, 1, 909, r)
            for lo, hi in zip(cfgs, cfgs[1:]):
                assert lo.long_edges <= hi.long_edges

    def test_beta_zero_first_is_empty(self):
        cfgs = sampling.coupled_sweep([0.0, 1.0], 64, 1, 2, 0)
        assert cfgs[0].long_edges == frozenset()
        assert cfgs[0].measure.beta == 0.0

    def test_unsorted_rejected(self):
        with pytest.raises(InvalidInputError):
            sampling.coupled_sweep([1.0, 0.5], 16, 1, 0, 0)

    def test_marginals_match_single_beta_law(self):
        """Each sweep marginal reproduces p(beta,k) within 3 sigma."""
        n, R = 256, 10 ** 4
        hits = {(b, k): 0 for b in (0.5, 1.0) for k in (2, 5, 16)}
        for r in range(R):
            cfgs = sampling.coupled_sweep([0.5, 1.0], n, 1, 7070, r)
            for cfg, b in zip(cfgs, (0.5, 1.0)):
                for k in (2, 5, 16):
                    if ((0,), (k,)) in cfg.long_edges:
                        hits[(b, k)] += 1
        for (b, k), h in hits.items():
            p = kernel.connection_prob(b, 0, k, dim=1)
            sigma = math.sqrt(p * (1 - p) / R)
            assert abs(h / R - p) < 3.5 * sigma, (b, k)


class TestChiAugment:
    @staticmethod
    def mixed_config(beta, eps, k, n, seed, replica):
        spec = MeasureSpec(kind="mixed", beta=beta, beta2=beta + eps, k_threshold=k)
        return sampling.sample_fast(spec, n, 1, seed, replica)

    def test_eps_zero_identity(self):
        omega = self.mixed_config(1.0, 0.0, 4, 64, 3, 1)
        out = sampling.chi_augment(omega, 0.0, 4, 12345)
        assert out.long_edges == omega.long_edges
        assert out.measure.k_threshold == 3

    def test_augmented_class_marginal(self):
        """After augmentation the sprinkled class carries 1-e^{-(beta+eps)J}."""
        beta, eps, k, n, R = 0.5, 0.75, 3, 32, 10 ** 4
        probe = ((0,), (5,))  # length 5 lies in [2^2, 2^3-1]
        hits = 0
        for r in range(R):
            omega = self.mixed_config(beta, eps, k, n, 42, r)
            out = sampling.chi_augment(omega, eps, k, 42)
            if probe in out.long_edges:
                hits += 1
        p = kernel.connection_prob(beta + eps, 0, 5, dim=1)
        sigma = math.sqrt(p * (1 - p) / R)
        assert abs(hits / R - p) < 3.5 * sigma

    def test_longer_and_shorter_classes_untouched(self):
        beta, eps, k, n = 0.5, 0.75, 3, 64
        for r in range(200):
            omega = self.mixed_config(beta, eps, k, n, 88, r)
            out = sampling.chi_augment(omega, eps, k, 88)
            added = out.long_edges - omega.long_edges
            for u, v in added:
                assert 4 <= v[0] - u[0] <= 7

    def test_block_touch_frequency_bounded(self):
        """P(chi touches a fixed 2^k block) <= 2^{5d} eps."""
        beta, eps, k, N = 1.0, 0.01, 6, 7
        n = 2 ** N
        bound = 2 ** 5 * eps
        R = 10 ** 4
        touches = 0
        block = range(0, 2 ** k)
        for r in range(R):
            omega = self.mixed_config(beta, eps, k, n, 99, r)
            out = sampling.chi_augment(omega, eps, k, 99)
            added = out.long_edges - omega.long_edges
            if any(u[0] in block or v[0] in block for u, v in added):
                touches += 1
        freq = touches / R
        assert freq <= bound + 3 * math.sqrt(bound * (1 - bound) / R)

    def test_wrong_measure_rejected(self):
        omega = sampling.sample_fast(PLAIN1, 32, 1, 1, 0)
        with pytest.raises(InvalidInputError):
            sampling.chi_augment(omega, 0.1, 3, 5)


class TestMixedBoundaryIdentities:
    def test_threshold_one_is_plain_beta2(self):
        """P_{b1 <= 1}^{b2 > 1} puts beta2 on every long edge."""
        spec = MeasureSpec(kind="mixed", beta=0.2, beta2=1.3, k_threshold=1)
        plain = MeasureSpec(kind="plain", beta=1.3)
        a = sampling.sample_direct(spec, 16, 1, 61, 4)
        b = sampling.sample_direct(plain, 16, 1, 61, 4)
        assert a.long_edges == b.long_edges  # same uniforms, same probabilities

    def test_threshold_n_on_box_2n_is_plain_beta1(self):
        spec = MeasureSpec(kind="mixed", beta=1.3, beta2=0.2, k_threshold=5)
        plain = MeasureSpec(kind="plain", beta=1.3)
        a = sampling.sample_direct(spec, 32, 1, 62, 9)
        b = sampling.sample_direct(plain, 32, 1, 62, 9)
        assert a.long_edges == b.long_edges


class TestSerialization:
    def test_round_trip(self):
        cfg = sampling.sample_fast(PLAIN1, 128, 1, 77, 2)
        rec = sampling.config_to_record(cfg)
        back = sampling.record_to_config(rec)
        assert back == cfg

    def test_jsonl_stable(self):
        cfg = sampling.sample_direct(PLAIN1, 8, 1, 5, 0)
        assert sampling.config_to_jsonl(cfg) == sampling.config_to_jsonl(cfg)
