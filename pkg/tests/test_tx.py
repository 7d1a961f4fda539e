import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asyncura.config import SystemConfig
from asyncura.ldpc import make_ldpc
from asyncura.tx import (
    build_interleaver,
    encode_data,
    esop_codebook,
    esop_codeword,
    index_to_segment,
    pilot_indices,
    segment_to_index,
    split_message,
    tree_code,
    tree_encode,
)
from oracles import bits_to_int, gf2_matvec

CFG = SystemConfig()
bits7 = st.lists(st.integers(0, 1), min_size=7, max_size=7).map(lambda b: np.array(b, dtype=np.uint8))


class TestSplit:
    def test_zero(self):
        s = split_message(np.zeros(100, np.uint8), CFG)
        assert not s.v1.any() and not s.v2.any() and not s.vc.any()
        assert len(s.v1) == 7 and len(s.vc) == 86

    def test_leading_one(self):
        p = np.zeros(100, np.uint8)
        p[0] = 1
        s = split_message(p, CFG)
        assert list(s.v1) == [1, 0, 0, 0, 0, 0, 0] and not s.v2.any() and not s.vc.any()

    @given(st.lists(st.integers(0, 1), min_size=100, max_size=100))
    def test_roundtrip(self, bits):
        p = np.array(bits, np.uint8)
        assert np.array_equal(split_message(p, CFG).concat(), p)

    def test_length_error(self):
        with pytest.raises(ValueError):
            split_message(np.zeros(99, np.uint8), CFG)


class TestTreeCode:
    tree = tree_code(7, 2023)

    def test_zero(self):
        r1, r2 = tree_encode(np.zeros(7), np.zeros(7), self.tree)
        assert not r1.any() and not r2.any()

    def test_unit_vector(self):
        e1 = np.eye(7, dtype=np.uint8)[0]
        r1, _ = tree_encode(e1, np.zeros(7), self.tree)
        assert np.array_equal(r1, self.tree.G[0][:, 0])

    @given(bits7, bits7, bits7, bits7)
    def test_linearity(self, a1, a2, b1, b2):
        ra = tree_encode(a1, a2, self.tree)
        rb = tree_encode(b1, b2, self.tree)
        rs = tree_encode(a1 ^ b1, a2 ^ b2, self.tree)
        assert np.array_equal(rs[0], ra[0] ^ rb[0]) and np.array_equal(rs[1], ra[1] ^ rb[1])

    @given(bits7, bits7)
    def test_against_bitwise_oracle(self, v1, v2):
        G1, G2, G3, G4, G5 = self.tree.G
        r1 = gf2_matvec(G1, v1) ^ gf2_matvec(G2, v2)
        r2 = gf2_matvec(G3, v1) ^ gf2_matvec(G4, v2) ^ gf2_matvec(G5, r1)
        got = tree_encode(v1, v2, self.tree)
        assert np.array_equal(got[0], r1) and np.array_equal(got[1], r2)
        a, b = segment_to_index(v1), segment_to_index(v2)
        assert self.tree.parity_indices(a, b) == (bits_to_int(r1) + 1, bits_to_int(r2) + 1)

    def test_deterministic(self):
        other = tree_code.__wrapped__(7, 2023)
        assert all(np.array_equal(a, b) for a, b in zip(other.G, self.tree.G))

    def test_pilot_indices_consistent(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            s = split_message(rng.integers(0, 2, 100, dtype=np.uint8), CFG)
            r1, r2 = tree_encode(s.v1, s.v2, self.tree)
            assert pilot_indices(s, self.tree) == tuple(segment_to_index(x) for x in (s.v1, s.v2, r1, r2))


class TestIndices:
    @pytest.mark.parametrize("bits,idx", [([0] * 7, 1), ([1] * 7, 128), ([0, 0, 0, 0, 1, 0, 1], 6)])
    def test_examples(self, bits, idx):
        assert segment_to_index(bits) == idx
        assert list(index_to_segment(idx, 7)) == bits

    def test_esop(self):
        assert esop_codeword(1, 128)[0] == 1 and esop_codeword(1, 128).sum() == 1
        assert esop_codeword(128, 128)[-1] == 1
        assert np.array_equal(esop_codebook(128), np.eye(128))
        with pytest.raises(ValueError):
            esop_codeword(0, 128)
        with pytest.raises(ValueError):
            esop_codeword(129, 128)


class TestInterleaver:
    def test_deterministic_permutation(self):
        a = build_interleaver(3, 4, 5, 6, 2688, 2023)
        assert np.array_equal(a, build_interleaver(3, 4, 5, 6, 2688, 2023))
        assert np.array_equal(np.sort(a), np.arange(2688))

    def test_distinct_tuples(self):
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            a, b = (tuple(int(x) for x in rng.integers(1, 129, size=4)) for _ in range(2))
            if a != b:
                assert not np.array_equal(build_interleaver(*a, 2688, 2023), build_interleaver(*b, 2688, 2023))

    def test_one_index_changes(self):
        a = build_interleaver(1, 2, 3, 4, 2688, 2023)
        for k in range(4):
            t = [1, 2, 3, 4]
            t[k] += 1
            assert not np.array_equal(a, build_interleaver(*t, 2688, 2023))

    def test_read_only(self):
        with pytest.raises(ValueError):
            build_interleaver(1, 1, 1, 1, 2688, 0)[0] = 5


class TestDataFrame:
    code = make_ldpc()

    def test_zero_payload(self):
        il = build_interleaver(1, 2, 3, 4, CFG.L_c, CFG.code_seed)
        f = encode_data(np.zeros(86, np.uint8), il, self.code, CFG)
        assert not f.coded.any()
        assert np.count_nonzero(f.symbols) == 200
        assert np.allclose(f.symbols[il[:200]], CFG.data_amplitude)

    @settings(max_examples=20, deadline=None)
    @given(st.lists(st.integers(0, 1), min_size=86, max_size=86), st.tuples(*[st.integers(1, 128)] * 4))
    def test_roundtrip_and_count(self, vc, tup):
        il = build_interleaver(*tup, CFG.L_c, CFG.code_seed)
        f = encode_data(np.array(vc, np.uint8), il, self.code, CFG)
        assert np.count_nonzero(f.symbols) == 200
        assert set(np.round(np.abs(f.symbols[f.symbols != 0]), 12)) == {round(CFG.data_amplitude, 12)}
        demapped = (f.symbols[il[:200]].real < 0).astype(np.uint8)
        assert np.array_equal(demapped, f.coded)
        assert f.blocks(CFG.T_d, CFG.S).shape == (21, 128)

    def test_peak_power_mode(self):
        cfg = CFG.replace(power_mode="peak")
        il = build_interleaver(1, 2, 3, 4, cfg.L_c, cfg.code_seed)
        f = encode_data(np.ones(86, np.uint8), il, self.code, cfg)
        assert np.allclose(np.abs(f.symbols[f.symbols != 0]), np.sqrt(cfg.P_sym))
        # mean energy per data-phase channel use is (200 / L_c) P_sym
        assert np.mean(np.abs(f.symbols) ** 2) == pytest.approx(200 / cfg.L_c * cfg.P_sym)

    def test_energy_power_mode(self):
        il = build_interleaver(1, 2, 3, 4, CFG.L_c, CFG.code_seed)
        f = encode_data(np.ones(86, np.uint8), il, self.code, CFG)
        # the whole data phase carries T_d * S * P_sym
        assert np.sum(np.abs(f.symbols) ** 2) == pytest.approx(CFG.L_c * CFG.P_sym)
        assert CFG.pilot_amplitude**2 == pytest.approx(CFG.S * CFG.P_sym)
