"""Data tables, the blockwise autoregressive benchmark law, and sources."""

import numpy as np
import pytest

from discflow import (
    ConfigError,
    DomainError,
    JointTable,
    SourceSpec,
    StateSpace,
    blockwise_ar1,
    joint_marginal,
    load_table,
    sample_joint,
    save_table,
    source_pmf,
)


def enumerated_ar1_block(vocab: int) -> np.ndarray:
    """Independent oracle: walk the generative description token by token.

    First token uniform; next tokens prefer the +/-2 window around their
    predecessor with probability 0.9 when the predecessor (1-based) lies in
    [3, vocab - 2] inclusive, else are uniform.  Written with plain loops so
    it shares nothing with the library construction.
    """
    probs = np.zeros((vocab, vocab, vocab))
    for a in range(vocab):
        pa = 1.0 / vocab
        for b in range(vocab):
            pb = _cond_prob(b, a, vocab)
            for c in range(vocab):
                pc = _cond_prob(c, b, vocab)
                probs[a, b, c] = pa * pb * pc
    return probs


def _cond_prob(nxt: int, prev: int, vocab: int) -> float:
    prev_1based = prev + 1
    if 3 <= prev_1based <= vocab - 2:
        window = [prev + off for off in (-2, -1, 0, 1, 2)]
        p = 0.1 / vocab
        if nxt in window:
            p += 0.9 / 5.0
        return p
    return 1.0 / vocab


class TestBlockwiseAr1:
    def test_first_coordinate_uniform(self):
        table = blockwise_ar1(3, 8)
        assert np.allclose(table.marginal([0]), 1.0 / 8.0, atol=1e-15)

    def test_total_mass(self):
        table = blockwise_ar1(3, 8)
        assert abs(table.probs.sum() - 1.0) <= 1e-12

    def test_window_conditional_value(self):
        # 1-based tokens: P(X2 = 4 | X1 = 4) = 0.9/5 + 0.1/8; 0-based index 3.
        table = blockwise_ar1(3, 8)
        joint_x1x2 = table.tensor.sum(axis=2)
        cond = joint_x1x2[3] / joint_x1x2[3].sum()
        assert cond[3] == pytest.approx(0.9 / 5 + 0.1 / 8, abs=1e-12)

    def test_matches_enumeration_oracle(self):
        table = blockwise_ar1(3, 8)
        oracle = enumerated_ar1_block(8)
        assert np.max(np.abs(table.tensor - oracle)) <= 1e-14

    def test_blocks_are_independent(self):
        table = blockwise_ar1(6, 8)
        dense = table.to_dense().tensor
        block = blockwise_ar1(3, 8).tensor
        # P(block2 | block1) == P(block2) for every block1 value
        for a, b, c in [(0, 0, 0), (3, 4, 5), (7, 1, 2)]:
            cond = dense[a, b, c] / dense[a, b, c].sum()
            assert np.max(np.abs(cond - block)) <= 1e-14

    def test_dims_validation(self):
        with pytest.raises(ConfigError):
            blockwise_ar1(4, 8)
        with pytest.raises(ConfigError):
            blockwise_ar1(3, 4)


class TestJointTable:
    def test_normalization_enforced(self):
        with pytest.raises(ConfigError):
            JointTable(StateSpace(1, 4), np.array([0.5, 0.5, 0.5, 0.5]))
        with pytest.raises(ConfigError):
            JointTable(StateSpace(1, 2), np.array([1.5, -0.5]))

    def test_full_marginal_is_table(self):
        table = blockwise_ar1(3, 8)
        assert np.array_equal(table.marginal([0, 1, 2]), table.tensor)

    def test_marginal_sums_to_one(self):
        table = blockwise_ar1(3, 8)
        for coords in ([0], [1], [0, 2]):
            assert joint_marginal(table, coords).sum() == pytest.approx(1.0, abs=1e-12)

    def test_marginal_nesting_consistency(self):
        table = blockwise_ar1(3, 8)
        via_pair = joint_marginal(table, [0, 1]).sum(axis=1)
        direct = joint_marginal(table, [0])
        assert np.max(np.abs(via_pair - direct)) <= 1e-15

    def test_marginal_rejects_bad_coords(self):
        table = blockwise_ar1(3, 8)
        with pytest.raises(ConfigError):
            joint_marginal(table, [])
        with pytest.raises(ConfigError):
            joint_marginal(table, [2, 1])

    def test_block_marginal_across_blocks(self):
        table = blockwise_ar1(6, 8)
        got = joint_marginal(table, [0, 3])
        # coordinates in distinct independent blocks: product of uniforms
        assert np.allclose(got, 1.0 / 64.0, atol=1e-15)


class TestSampling:
    def test_determinism(self):
        table = blockwise_ar1(3, 8)
        a = sample_joint(table, 123, 50)
        b = sample_joint(table, 123, 50)
        assert np.array_equal(a, b)

    def test_point_mass(self):
        probs = np.zeros(8)
        probs[5] = 1.0
        table = JointTable(StateSpace(1, 8), probs)
        samples = sample_joint(table, 0, 100)
        assert np.all(samples == 5)

    def test_empirical_tv_floor(self):
        from discflow import empirical_tv

        table = blockwise_ar1(3, 8)
        samples = sample_joint(table, 7, 1_000_000)
        tv = empirical_tv(samples, table.tensor, (0, 1, 2))
        assert tv <= 0.02

    def test_count_validation(self):
        with pytest.raises(ConfigError):
            sample_joint(blockwise_ar1(3, 8), 0, 0)


class TestSources:
    def test_uniform_pmf(self):
        space = StateSpace(3, 8)
        assert source_pmf(SourceSpec.uniform(), space, 1, 4) == pytest.approx(0.125)

    def test_masked_pmf(self):
        space = StateSpace(3, 8, masked=True)
        src = SourceSpec.masked()
        assert source_pmf(src, space, 0, 8) == 1.0
        assert source_pmf(src, space, 0, 3) == 0.0

    def test_factorized_pmf_echoes_tables(self):
        tables = np.array([[0.25, 0.75], [0.5, 0.5]])
        src = SourceSpec.factorized(tables)
        space = StateSpace(2, 2)
        assert source_pmf(src, space, 0, 1) == 0.75
        assert source_pmf(src, space, 1, 0) == 0.5

    def test_token_out_of_range(self):
        with pytest.raises(DomainError):
            source_pmf(SourceSpec.uniform(), StateSpace(2, 4), 0, 4)

    def test_factorized_rows_must_normalize(self):
        with pytest.raises(ConfigError):
            SourceSpec.factorized(np.array([[0.5, 0.4]]))

    def test_masked_sample_is_all_mask(self):
        space = StateSpace(4, 6, masked=True)
        out = SourceSpec.masked().sample(space, 0, 10)
        assert np.all(out == 6)


class TestTableIO:
    def test_roundtrip(self, tmp_path):
        table = blockwise_ar1(3, 8)
        fname = tmp_path / "table.txt"
        save_table(table, fname)
        loaded = load_table(fname)
        assert loaded.dims == 3 and loaded.vocab == 8
        assert np.max(np.abs(loaded.probs - table.probs)) == 0.0

    def test_bad_header(self, tmp_path):
        fname = tmp_path / "bad.txt"
        fname.write_text("3\n")
        with pytest.raises(ConfigError):
            load_table(fname)

    def test_bad_index(self, tmp_path):
        fname = tmp_path / "bad.txt"
        fname.write_text("1 2\n5 1.0\n")
        with pytest.raises(ConfigError):
            load_table(fname)
