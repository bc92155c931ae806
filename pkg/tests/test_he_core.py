import numpy as np
import pytest

from fheact.errors import (
    CapacityError,
    ConfigError,
    DepthExhausted,
    ParamsMismatch,
    ShapeMismatch,
)
from fheact.he_core import HeContext
from fheact.params import SchemeParams


def ctx32(**overrides):
    return HeContext(
        SchemeParams(ring_dimension=64, slot_count=32, depth_after_bootstrap=10, **overrides)
    )


class TestEncodeDecode:
    def test_round_trip(self):
        ctx = ctx32()
        values = np.linspace(-2, 2, 32)
        ct = ctx.encode_encrypt(values)
        assert ct.level == 10
        np.testing.assert_allclose(ctx.decrypt_decode(ct), values)

    def test_rejects_empty(self):
        with pytest.raises(CapacityError):
            ctx32().encode_encrypt([])

    def test_rejects_overfull(self):
        with pytest.raises(CapacityError):
            ctx32().encode_encrypt(np.zeros(33))

    def test_noise_sigma_perturbs(self):
        ctx = HeContext(
            SchemeParams(ring_dimension=64, slot_count=32, noise_sigma=1e-3), seed=7
        )
        values = np.ones(32)
        out = ctx.decrypt_decode(ctx.encode_encrypt(values))
        assert not np.array_equal(out, values)
        np.testing.assert_allclose(out, values, atol=1e-2)


class TestArithmetic:
    def test_add_keeps_level(self):
        ctx = ctx32()
        a = ctx.encode_encrypt(np.arange(32.0))
        b = ctx.encode_encrypt(np.ones(32))
        out = ctx.add(a, b)
        assert out.level == 10
        np.testing.assert_allclose(ctx.decrypt_decode(out), np.arange(32.0) + 1)

    def test_add_plain_scalar(self):
        ctx = ctx32()
        a = ctx.encode_encrypt(np.zeros(32))
        np.testing.assert_allclose(ctx.decrypt_decode(ctx.add(a, 2.5)), 2.5)

    def test_sub(self):
        ctx = ctx32()
        a = ctx.encode_encrypt(np.full(32, 3.0))
        b = ctx.encode_encrypt(np.ones(32))
        np.testing.assert_allclose(ctx.decrypt_decode(ctx.sub(a, b)), 2.0)

    def test_sub_from_plain(self):
        ctx = ctx32()
        b = ctx.encode_encrypt(np.full(32, 0.25))
        np.testing.assert_allclose(ctx.decrypt_decode(ctx.sub_from_plain(1.0, b)), 0.75)

    def test_mult_ct_consumes_one_level(self):
        ctx = ctx32()
        a = ctx.encode_encrypt(np.full(32, 3.0))
        b = ctx.encode_encrypt(np.full(32, 4.0))
        out = ctx.mult(a, b)
        assert out.level == 9
        np.testing.assert_allclose(ctx.decrypt_decode(out), 12.0)

    def test_mult_plain_consumes_one_level(self):
        ctx = ctx32()
        a = ctx.encode_encrypt(np.full(32, 3.0))
        out = ctx.mult(a, 0.5)
        assert out.level == 9
        np.testing.assert_allclose(ctx.decrypt_decode(out), 1.5)

    def test_mult_level_is_min_of_operands(self):
        ctx = ctx32()
        a = ctx.encode_encrypt(np.ones(32))
        b = ctx.mult(ctx.encode_encrypt(np.ones(32)), 1.0)
        assert ctx.mult(a, b).level == 8

    def test_depth_exhaustion(self):
        ctx = ctx32()
        ct = ctx.encode_encrypt(np.ones(32))
        for _ in range(10):
            ct = ctx.mult(ct, 1.0)
        assert ct.level == 0
        with pytest.raises(DepthExhausted):
            ctx.mult(ct, 1.0)
        with pytest.raises(DepthExhausted):
            ctx.mult(ct, ct)

    def test_cross_context_rejected(self):
        a = ctx32().encode_encrypt(np.ones(32))
        ctx = ctx32()
        b = ctx.encode_encrypt(np.ones(32))
        with pytest.raises(ParamsMismatch):
            ctx.add(a, b)
        with pytest.raises(ParamsMismatch):
            ctx.decrypt_decode(a)

    def test_plain_length_mismatch(self):
        ctx = ctx32()
        a = ctx.encode_encrypt(np.ones(32))
        with pytest.raises(ShapeMismatch):
            ctx.add(a, np.ones(31))


class TestRotate:
    def test_rotation_semantics(self):
        ctx = ctx32()
        ct = ctx.encode_encrypt(np.arange(32.0))
        out = ctx.decrypt_decode(ctx.rotate(ct, 3))
        # result[j] = src[(j + 3) mod n]
        np.testing.assert_allclose(out, np.roll(np.arange(32.0), -3))

    def test_negative_and_wraparound(self):
        ctx = ctx32()
        ct = ctx.encode_encrypt(np.arange(32.0))
        np.testing.assert_allclose(
            ctx.decrypt_decode(ctx.rotate(ct, -5)),
            ctx.decrypt_decode(ctx.rotate(ct, 27)),
        )

    def test_rotate_keeps_level(self):
        ctx = ctx32()
        ct = ctx.encode_encrypt(np.ones(32))
        assert ctx.rotate(ct, 1).level == 10


class TestBootstrapAndLevels:
    def test_bootstrap_restores_level(self):
        ctx = ctx32()
        ct = ctx.encode_encrypt(np.full(32, 2.0))
        for _ in range(10):
            ct = ctx.mult(ct, 1.0)
        fresh = ctx.bootstrap(ct)
        assert fresh.level == 10
        np.testing.assert_allclose(ctx.decrypt_decode(fresh), 2.0)
        assert ctx.ledger.bootstrap_count == 1

    def test_level_to_only_lowers(self):
        ctx = ctx32()
        ct = ctx.encode_encrypt(np.ones(32))
        assert ctx.level_to(ct, 4).level == 4
        with pytest.raises(DepthExhausted):
            ctx.level_to(ct, 11)


class TestRotMac:
    def test_matches_composed_ops(self, rng):
        ctx = ctx32()
        src_vals = rng.normal(size=32)
        mask = rng.normal(size=32)
        src = ctx.encode_encrypt(src_vals)
        acc = ctx.rot_mac(None, src, 5, mask)
        expected = np.roll(src_vals, -5) * mask
        np.testing.assert_allclose(ctx.decrypt_decode(acc), expected)
        assert acc.level == 9
        acc = ctx.rot_mac(acc, src, 2, mask)
        expected += np.roll(src_vals, -2) * mask
        np.testing.assert_allclose(ctx.decrypt_decode(acc), expected)


class TestGateDomain:
    def test_round_trip_within_band(self):
        ctx = ctx32()
        values = np.array([1.0, -2.5, 0.125, 63.0] + [0.0] * 28)
        gc = ctx.switch_to_gate(ctx.encode_encrypt(values), 4)
        back = ctx.decrypt_decode(ctx.switch_to_simd(gc))
        step = 1.0 / ctx.params.gate_scale
        np.testing.assert_allclose(back, values[:4], atol=step / 2 + 1e-12)

    def test_round_half_away_from_zero(self):
        ctx = ctx32()
        step = 1.0 / ctx.params.gate_scale
        values = np.array([0.5 * step, -0.5 * step, 1.49 * step, -1.49 * step])
        gc = ctx.switch_to_gate(ctx.encode_encrypt(values), 4)
        np.testing.assert_array_equal(gc.quantized_slots, [1, -1, 1, -1])

    def test_saturation(self):
        ctx = ctx32()
        gc = ctx.switch_to_gate(ctx.encode_encrypt([1e9, -1e9]), 2)
        qmax = ctx.params.gate_qmax
        np.testing.assert_array_equal(gc.quantized_slots, [qmax, -(qmax + 1)])

    def test_compare_strict_less(self):
        ctx = ctx32()
        a = ctx.switch_to_gate(ctx.encode_encrypt([1.0, 2.0, 3.0]), 3)
        b = ctx.switch_to_gate(ctx.encode_encrypt([2.0, 2.0, 1.0]), 3)
        comp = ctx.gate_compare_less(a, b)
        assert comp.encoding == "indicator"
        np.testing.assert_array_equal(comp.quantized_slots, [1, 0, 0])

    def test_compare_exhaustive_p8(self):
        ctx = HeContext(
            SchemeParams(ring_dimension=64, slot_count=32, gate_precision_bits=8)
        )
        qs = np.arange(-128, 128)
        pairs_a = np.repeat(qs, 256).astype(np.float64) / ctx.params.gate_scale
        pairs_b = np.tile(qs, 256).astype(np.float64) / ctx.params.gate_scale
        for lo in range(0, len(pairs_a), 32):
            a = ctx.switch_to_gate(ctx.encode_encrypt(pairs_a[lo : lo + 32]), 32)
            b = ctx.switch_to_gate(ctx.encode_encrypt(pairs_b[lo : lo + 32]), 32)
            comp = ctx.gate_compare_less(a, b)
            expected = (pairs_a[lo : lo + 32] < pairs_b[lo : lo + 32]).astype(int)
            np.testing.assert_array_equal(comp.quantized_slots, expected)

    def test_indicator_unswitch_is_exact(self):
        ctx = ctx32()
        a = ctx.switch_to_gate(ctx.encode_encrypt([-1.0, 1.0]), 2)
        b = ctx.switch_to_gate(ctx.encode_encrypt([0.0, 0.0]), 2)
        out = ctx.switch_to_simd(ctx.gate_compare_less(a, b), pad_to=5)
        np.testing.assert_array_equal(ctx.decrypt_decode(out), [1.0, 0.0, 0.0, 0.0, 0.0])

    def test_per_slot_cost_accounting(self):
        ctx = ctx32()
        ct = ctx.encode_encrypt(np.zeros(32))
        ctx.switch_to_gate(ct, 7)
        assert ctx.ledger.counters["gate_switch"] == 7
        table = ctx.params.cost_table
        assert ctx.ledger.cost_units == 7 * table["gate_switch"]

    def test_gate_needs_active_slots(self):
        ctx = ctx32()
        ct = ctx.encode_encrypt(np.zeros(32))
        with pytest.raises(CapacityError):
            ctx.switch_to_gate(ct, 0)
        with pytest.raises(ShapeMismatch):
            ctx.switch_to_gate(ct, 33)


class TestLedger:
    def test_cost_identity(self, rng):
        ctx = ctx32()
        a = ctx.encode_encrypt(rng.normal(size=32))
        b = ctx.encode_encrypt(rng.normal(size=32))
        ctx.mult(ctx.add(a, b), b)
        ctx.rotate(a, 4)
        ctx.bootstrap(a)
        assert ctx.ledger.cost_units == pytest.approx(ctx.ledger.recompute_cost())

    def test_merge(self):
        c1, c2 = ctx32(), ctx32()
        c1.encode_encrypt(np.ones(32))
        c2.rotate(c2.encode_encrypt(np.ones(32)), 1)
        total = c1.ledger.merge(c2.ledger)
        assert total.counters["encrypt"] == 2
        assert total.counters["rotate"] == 1


class TestParams:
    def test_invalid_ring(self):
        with pytest.raises(ConfigError):
            SchemeParams(ring_dimension=100, slot_count=50)

    def test_slot_count_must_be_half(self):
        with pytest.raises(ConfigError):
            SchemeParams(ring_dimension=64, slot_count=64)

    def test_negative_cost_rejected(self):
        with pytest.raises(ConfigError):
            SchemeParams(ring_dimension=64, slot_count=32, cost_table={"add": -1.0})

    def test_json_round_trip(self, tmp_path):
        p = SchemeParams(ring_dimension=64, slot_count=32, noise_sigma=0.5)
        path = tmp_path / "params.json"
        path.write_text(__import__("json").dumps(p.to_dict()))
        assert SchemeParams.from_json(path) == p

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError):
            SchemeParams.from_dict({"ring_dimension": 64, "slot_count": 32, "bogus": 1})
