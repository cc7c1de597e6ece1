import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqdac.nn import (
    Adam,
    AdamState,
    DecodeError,
    Mlp,
    NonFiniteGradientError,
    adam_step,
    clip_grad_norm,
    deserialize,
    pack_nets,
    param_count,
    serialize,
)


def numeric_grad(net, x, g_out, eps=1e-6):
    """Central differences of sum(g_out * net(x)) over every parameter."""
    grad = np.zeros_like(net.params)
    for i in range(net.params.size):
        old = net.params[i]
        net.params[i] = old + eps
        up = np.sum(g_out * net(x))
        net.params[i] = old - eps
        down = np.sum(g_out * net(x))
        net.params[i] = old
        grad[i] = (up - down) / (2 * eps)
    return grad


def test_param_count_and_views():
    net = Mlp(3, 2, 4, rng=np.random.default_rng(0))
    assert net.params.size == param_count(3, 4, 2) == 4 * 3 + 4 + 2 * 4 + 2
    net.w1[0, 0] = 7.0
    assert net.params[0] == 7.0


def test_forward_shapes_single_and_batch():
    net = Mlp(3, 2, 5, rng=np.random.default_rng(1))
    x = np.random.default_rng(2).normal(size=(4, 3))
    batch = net(x)
    assert batch.shape == (4, 2)
    np.testing.assert_allclose(net(x[1]), batch[1], rtol=1e-14)


def test_identity_activation_is_affine():
    rng = np.random.default_rng(3)
    net = Mlp(2, 1, 3, activation="identity", rng=rng)
    a, b = rng.normal(size=2), rng.normal(size=2)
    mid = net(0.5 * (a + b))
    assert mid == pytest.approx(0.5 * (net(a) + net(b)), rel=1e-12)


def test_bad_dims_and_activation():
    with pytest.raises(ValueError):
        Mlp(0, 1, 1)
    with pytest.raises(ValueError):
        Mlp(1, 1, 1, activation="tanh")
    with pytest.raises(ValueError):
        Mlp(3, 1, 2, rng=np.random.default_rng(0))(np.zeros(4))


def test_init_range():
    net = Mlp(16, 3, 64, rng=np.random.default_rng(0))
    assert np.abs(net.w1).max() <= 1 / np.sqrt(16)
    assert np.abs(net.w2).max() <= 1 / np.sqrt(64)


@pytest.mark.parametrize("batched", [False, True])
def test_backward_matches_finite_differences(batched):
    rng = np.random.default_rng(4)
    net = Mlp(4, 3, 6, rng=rng)
    x = rng.normal(size=(5, 4) if batched else 4)
    g = rng.normal(size=(5, 3) if batched else 3)
    analytic = net.backward(x, g)
    numeric = numeric_grad(net, x, g)
    np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)


def test_backward_writes_into_out():
    rng = np.random.default_rng(5)
    net = Mlp(2, 2, 3, rng=rng)
    out = np.full(net.params.size, np.nan)
    res = net.backward(rng.normal(size=(3, 2)), rng.normal(size=(3, 2)), out=out)
    assert res is out and np.all(np.isfinite(out))


def test_pack_nets_share_one_buffer():
    buf, nets = pack_nets([(2, 3), (4, 1)], 5, np.random.default_rng(0))
    assert buf.size == sum(n.params.size for n in nets)
    buf[:] = 0.0
    assert all(np.all(n(np.ones(n.input_dim)) == 0.0) for n in nets)


def test_copy_is_independent():
    net = Mlp(2, 2, 3, rng=np.random.default_rng(0))
    twin = net.copy()
    twin.params += 1.0
    assert not np.allclose(net.params, twin.params)
    net.load_from(twin)
    np.testing.assert_array_equal(net.params, twin.params)


def test_clip_grad_norm():
    g = np.array([3.0, 4.0])
    assert clip_grad_norm(g, 10.0) == 5.0
    np.testing.assert_array_equal(g, [3.0, 4.0])
    assert clip_grad_norm(g, 1.0) == 5.0
    assert np.linalg.norm(g) == pytest.approx(1.0)


def test_adam_first_step_is_lr_times_sign():
    # bias-corrected first step moves every coordinate by lr (up to epsilon)
    p = np.array([1.0, -2.0, 0.5])
    st_ = AdamState(3, learning_rate=0.1)
    adam_step(p, np.array([0.3, -5.0, 1e-3]), st_)
    np.testing.assert_allclose(p, [0.9, -1.9, 0.4], atol=1e-4)


def test_adam_matches_reference_recurrence():
    rng = np.random.default_rng(6)
    p = rng.normal(size=4)
    ref = p.copy()
    m = np.zeros(4)
    v = np.zeros(4)
    opt = Adam(p, lr=1e-2, max_grad_norm=None)
    for t in range(1, 6):
        g = rng.normal(size=4)
        opt.step(g.copy())
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref -= 1e-2 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    np.testing.assert_allclose(p, ref, rtol=1e-12)


def test_adam_rejects_nonfinite_without_mutation():
    p = np.ones(2)
    st_ = AdamState(2)
    with pytest.raises(NonFiniteGradientError):
        adam_step(p, np.array([np.nan, 1.0]), st_)
    np.testing.assert_array_equal(p, [1.0, 1.0])
    assert st_.step_count == 0


def test_adam_minimizes_quadratic():
    p = np.array([3.0, -1.0])
    opt = Adam(p, lr=0.05, max_grad_norm=10.0)
    for _ in range(2000):
        opt.step(2 * p.copy())
    assert np.abs(p).max() < 1e-3


# -- checkpoint format


def test_serialize_round_trip_is_bit_exact():
    net = Mlp(5, 3, 7, rng=np.random.default_rng(7))
    back = deserialize(serialize(net))
    assert (back.input_dim, back.hidden_dim, back.output_dim) == (5, 7, 3)
    assert back.params.tobytes() == net.params.tobytes()


@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_serialize_round_trip_property(i, h, o, seed):
    net = Mlp(i, o, h, rng=np.random.default_rng(seed))
    assert deserialize(serialize(net)).params.tobytes() == net.params.tobytes()


def _corrupt(data: bytes, pos: int) -> bytes:
    b = bytearray(data)
    b[pos] ^= 0xFF
    return bytes(b)


def test_deserialize_rejects_bad_input():
    good = serialize(Mlp(2, 2, 2, rng=np.random.default_rng(0)))
    with pytest.raises(DecodeError, match="short"):
        deserialize(good[:10])
    with pytest.raises(DecodeError, match="magic"):
        deserialize(b"XXXX" + good[4:])
    with pytest.raises(DecodeError, match="checksum"):
        deserialize(_corrupt(good, len(good) - 10))
    with pytest.raises(DecodeError):
        deserialize(good[:-8])


def test_deserialize_rejects_inconsistent_header():
    good = serialize(Mlp(2, 2, 2, rng=np.random.default_rng(0)))
    header = struct.Struct("<4sHHIIIQ")
    magic, ver, act, i, h, o, n = header.unpack_from(good)
    body = good[header.size : -4]
    bad = header.pack(magic, ver, act, i + 1, h, o, n) + body
    bad += struct.pack("<I", zlib.crc32(bad) & 0xFFFFFFFF)
    with pytest.raises(DecodeError):
        deserialize(bad)
