import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from navguard.nn import (Adam, AdamConfig, BadMagic, ChecksumMismatch, Conv2D, Dense, FeatureSpec,
                         Flatten, Network, NetworkSpec, ReLU, ShapeMismatch, Tanh, TruncatedFile,
                         VersionMismatch, backward_and_step, forward_actor, forward_critic,
                         load_checkpoint, make_bundle, save_checkpoint, soft_update)
from navguard.nn.checkpoint import from_bytes, to_bytes
from navguard.sensing import Observation
from navguard.world.state import Twist

PROBES = 64
REL_TOL = 1e-3


# -- finite differences ----------------------------------------------------------------------

def relu_masks(tape):
    return [c for c in tape.enc + tape.trunk if isinstance(c, np.ndarray) and c.dtype == bool]


def same_masks(a, b):
    return all(np.array_equal(x, y) for x, y in zip(relu_masks(a), relu_masks(b)))


def gradcheck_network(net, inputs, rng, h=1e-6):
    """Central differences of L = sum(G * out) against backprop, on random parameter entries.

    Probes whose +-h perturbation flips a ReLU are redrawn: the loss is not smooth there.
    """
    net = net.astype(np.float64)
    out, tape = net.forward(*inputs)
    G = rng.normal(size=out.shape)
    grads, _ = net.backward(tape, G)
    params = net.params
    sizes = np.array([p.size for p in params], dtype=float)
    done, errs = 0, []
    attempts = 0
    while done < PROBES:
        attempts += 1
        assert attempts < 20 * PROBES, "too many probes land on ReLU kinks"
        k = int(rng.choice(len(params), p=sizes / sizes.sum()))
        idx = np.unravel_index(int(rng.integers(params[k].size)), params[k].shape)
        old = params[k][idx]
        params[k][idx] = old + h
        yp, tp = net.forward(*inputs)
        params[k][idx] = old - h
        ym, tm = net.forward(*inputs)
        params[k][idx] = old
        if not (same_masks(tp, tape) and same_masks(tm, tape)):
            continue
        num = (np.sum(G * yp) - np.sum(G * ym)) / (2 * h)
        ana = grads[k][idx]
        scale = max(abs(num), abs(ana))
        errs.append(0.0 if scale < 1e-7 else abs(num - ana) / scale)
        done += 1
    return max(errs)


def gradcheck_input(net, inputs, which, rng, h=1e-6, n=16):
    net = net.astype(np.float64)
    out, tape = net.forward(*inputs)
    G = rng.normal(size=out.shape)
    _, gin = net.backward(tape, G)
    arr = inputs[{"vec": 0, "img": 1, "action": 2}[which]]
    errs = []
    for _ in range(n):
        idx = tuple(int(rng.integers(s)) for s in arr.shape)
        old = arr[idx]
        arr[idx] = old + h
        yp, tp = net.forward(*inputs)
        arr[idx] = old - h
        ym, tm = net.forward(*inputs)
        arr[idx] = old
        if not (same_masks(tp, tape) and same_masks(tm, tape)):
            continue
        num = (np.sum(G * yp) - np.sum(G * ym)) / (2 * h)
        ana = gin[which].reshape(arr.shape)[idx]
        scale = max(abs(num), abs(ana))
        errs.append(0.0 if scale < 1e-7 else abs(num - ana) / scale)
    return max(errs)


NETS = {
    "actor_rays": (NetworkSpec("actor", 70, trunk=(32, 32), final_scale=1.0), False),
    "critic_rays": (NetworkSpec("critic", 70, trunk=(32, 32)), False),
    "actor_conv": (NetworkSpec("actor", 6, image_side=14, conv=((4, 3, 2), (6, 3, 1)), trunk=(16,),
                               final_scale=1.0), True),
    "critic_conv": (NetworkSpec("critic", 6, image_side=14, conv=((4, 3, 2), (6, 3, 1)), trunk=(16,)),
                    True),
}


def net_inputs(spec, rng, n=5):
    vec = rng.normal(size=(n, spec.vec_dim))
    img = rng.uniform(size=(n, spec.image_side, spec.image_side)) if spec.image_side else None
    act = rng.uniform(-1, 1, size=(n, 2)) if spec.role == "critic" else None
    return [vec, img, act]


@pytest.mark.parametrize("name", sorted(NETS))
def test_network_gradients_match_finite_differences(name):
    spec, _ = NETS[name]
    rng = np.random.default_rng(sum(map(ord, name)))
    net = Network(spec, rng)
    inputs = net_inputs(spec, rng)
    assert gradcheck_network(net, inputs, rng) < REL_TOL
    assert gradcheck_input(net, inputs, "vec", rng) < REL_TOL
    if spec.role == "critic":
        assert gradcheck_input(net, inputs, "action", rng) < REL_TOL
    if spec.image_side:
        assert gradcheck_input(net, inputs, "img", rng) < REL_TOL


@pytest.mark.parametrize("layer,shape", [
    (Dense(7, 5, rng=np.random.default_rng(1)), (4, 7)),
    (Conv2D(2, 3, 3, stride=2, rng=np.random.default_rng(2)), (3, 2, 9, 9)),
    (Conv2D(1, 2, 2, stride=1, rng=np.random.default_rng(3)), (2, 1, 5, 6)),
    (Tanh(), (4, 6)),
    (ReLU(), (4, 6)),
    (Flatten(), (3, 2, 4, 4)),
])
def test_layer_gradients_in_isolation(layer, shape):
    rng = np.random.default_rng(5)
    layer = layer.astype(np.float64)
    x = rng.normal(size=shape)
    y, cache = layer.forward(x)
    G = rng.normal(size=y.shape)
    gx, grads = layer.backward(cache, G)
    h = 1e-6

    def loss(xx):
        return float(np.sum(G * layer.forward(xx)[0]))
    for _ in range(PROBES):
        idx = tuple(int(rng.integers(s)) for s in shape)
        if isinstance(layer, ReLU) and abs(x[idx]) < 10 * h:
            continue
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        num = (loss(xp) - loss(xm)) / (2 * h)
        assert num == pytest.approx(gx[idx], rel=REL_TOL, abs=1e-8)
    for k, p in enumerate(layer.params):
        for _ in range(PROBES // max(1, len(layer.params))):
            idx = tuple(int(rng.integers(s)) for s in p.shape)
            old = p[idx]
            p[idx] = old + h
            lp = loss(x)
            p[idx] = old - h
            lm = loss(x)
            p[idx] = old
            assert (lp - lm) / (2 * h) == pytest.approx(grads[k][idx], rel=REL_TOL, abs=1e-8)


# -- forward passes ---------------------------------------------------------------------------

def obs(seed=0, fs=FeatureSpec()):
    rng = np.random.default_rng(seed)
    return Observation(costmap=None, velocity=Twist(0.3, -0.2), waypoint_rel=rng.normal(size=2),
                       rays=rng.uniform(size=fs.n_sectors), carrot_rel=rng.normal(size=2))


def zero(bundle):
    for net in bundle.networks:
        for p in net.params:
            p[...] = 0.0
    return bundle


def test_zero_weights_give_zero_outputs():
    b = zero(make_bundle(trunk=(16, 16)))
    assert np.array_equal(forward_actor(b, obs()), [0.0, 0.0])
    assert forward_critic(b, obs(), [0.5, -0.5]) == 0.0
    assert forward_critic(b, obs(), [0.5, -0.5], which=2) == 0.0


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), scale=st.floats(0.1, 50))
def test_actor_output_bounded(seed, scale):
    b = make_bundle(trunk=(16,), seed=seed)
    for p in b.actor.params:
        p *= scale
    a = forward_actor(b, obs(seed))
    assert np.all(np.abs(a) <= 1.0)


def test_forward_is_deterministic_and_pure():
    b1, b2 = make_bundle(trunk=(16, 16), seed=3), make_bundle(trunk=(16, 16), seed=3)
    assert np.array_equal(forward_actor(b1, obs(1)), forward_actor(b2, obs(1)))
    assert forward_critic(b1, obs(1), [0.1, 0.2]) == forward_critic(b2, obs(1), [0.1, 0.2])
    before = [p.copy() for n in b1.networks for p in n.params]
    forward_actor(b1, obs(2))
    forward_critic(b1, obs(2), [0.0, 0.0])
    assert all(np.array_equal(a, p) for a, p in zip(before, [p for n in b1.networks for p in n.params]))


def test_targets_start_as_copies():
    b = make_bundle(trunk=(8,))
    for online, tgt in ((b.actor, b.actor_target), (b.critic1, b.critic1_target),
                        (b.critic2, b.critic2_target)):
        assert all(np.array_equal(p, q) and p is not q for p, q in zip(online.params, tgt.params))
    assert b.actor.spec.out_dim == 2 and b.critic1.spec.out_dim == 1


def test_shape_errors():
    net = Network(NetworkSpec("critic", 4, trunk=(3,)))
    with pytest.raises(ShapeMismatch):
        net.forward(np.zeros((2, 5)), action=np.zeros((2, 2)))
    with pytest.raises(ShapeMismatch):
        net.forward(np.zeros((2, 4)))
    with pytest.raises(ValueError):
        NetworkSpec("critic", 4, trunk=(0,))
    with pytest.raises(ValueError):
        NetworkSpec("value", 4)


# -- Adam and the update step ----------------------------------------------------------------

def test_linear_gradient_closed_form():
    # one unit, no bias effect: L = (w x + b - y)^2, dL/dw = 2 (w x + b - y) x
    net = Network(NetworkSpec("critic", 0, trunk=(), action_dim=1), dtype=np.float64)
    net.set_params([np.array([[1.5]]), np.array([0.0])])
    x, y = np.array([[2.0]]), 1.0
    out, tape = net.forward(np.zeros((1, 0)), action=x)
    grads, _ = net.backward(tape, 2.0 * (out - y))
    assert grads[0][0, 0] == pytest.approx(2.0 * (1.5 * 2.0 - y) * 2.0, abs=1e-12)


def test_descent_lowers_single_sample_loss():
    net = Network(NetworkSpec("critic", 3, trunk=()), np.random.default_rng(0))
    opt = Adam(net.params, AdamConfig(lr=1e-3))
    vec, act, y = np.ones((1, 3)), np.ones((1, 2)), 5.0
    q, tape = net.forward(vec, action=act)
    backward_and_step(net, opt, tape, 2.0 * (q - y))
    q2 = net(vec, action=act)
    assert ((q2 - y) ** 2).item() < ((q - y) ** 2).item()


def test_zero_gradient_leaves_params():
    net = Network(NetworkSpec("actor", 4, trunk=(5,)), np.random.default_rng(0))
    opt = Adam(net.params)
    before = [p.copy() for p in net.params]
    for _ in range(10):
        opt.step(net.params, [np.zeros_like(p) for p in net.params])
    assert max(float(np.max(np.abs(p - q))) for p, q in zip(net.params, before)) < 1e-12
    with pytest.raises(ValueError):
        AdamConfig(lr=0.0)
    with pytest.raises(ValueError):
        AdamConfig(beta1=1.0)


def test_adam_first_step_matches_formula():
    p = [np.array([1.0])]
    opt = Adam(p, AdamConfig(lr=0.1))
    opt.step(p, [np.array([4.0])])
    # bias-corrected first step is lr * g / (|g| + eps') = lr for any g > 0
    assert p[0][0] == pytest.approx(0.9, abs=1e-7)


# -- soft update -------------------------------------------------------------------------------

def scalar_net(value):
    net = Network(NetworkSpec("critic", 0, trunk=(), action_dim=1), dtype=np.float64)
    net.set_params([np.array([[value]]), np.array([value])])
    return net


@pytest.mark.parametrize("tau,expect", [(1.0, 2.0), (0.0, 1.0), (0.005, 1.005)])
def test_soft_update_examples(tau, expect):
    tgt, online = scalar_net(1.0), scalar_net(2.0)
    soft_update(tgt, online, tau)
    assert tgt.params[0][0, 0] == pytest.approx(expect, abs=1e-12)
    assert online.params[0][0, 0] == 2.0


@settings(max_examples=30, deadline=None)
@given(tau=st.floats(0.0, 1.0), seed=st.integers(0, 1000))
def test_soft_update_contraction(tau, seed):
    spec = NetworkSpec("actor", 3, trunk=(4,))
    tgt = Network(spec, np.random.default_rng(seed)).astype(np.float64)
    online = Network(spec, np.random.default_rng(seed + 1)).astype(np.float64)
    gap = [o - t for o, t in zip(online.params, tgt.params)]
    soft_update(tgt, online, tau)
    for g, o, t in zip(gap, online.params, tgt.params):
        assert t.shape == o.shape
        assert np.allclose(np.abs(o - t), (1.0 - tau) * np.abs(g), atol=1e-12)
    with pytest.raises(ValueError):
        soft_update(tgt, online, 1.5)


# -- checkpoints -------------------------------------------------------------------------------

def trained_bundle():
    b = make_bundle(trunk=(8, 8), seed=4)
    vec = np.ones((3, b.features.vec_dim), dtype=np.float32)
    out, tape = b.actor.forward(vec)
    backward_and_step(b.actor, b.opt_actor, tape, np.ones_like(out))
    return b


def test_checkpoint_round_trip(tmp_path):
    b = trained_bundle()
    save_checkpoint(b, tmp_path / "a.e2t3")
    again = load_checkpoint(tmp_path / "a.e2t3")
    save_checkpoint(again, tmp_path / "b.e2t3")
    assert (tmp_path / "a.e2t3").read_bytes() == (tmp_path / "b.e2t3").read_bytes()
    assert again.features == b.features and again.opt_actor.t == 1
    assert np.array_equal(forward_actor(again, obs()), forward_actor(b, obs()))
    assert (tmp_path / "a.e2t3").read_bytes()[:4] == b"E2T3"


def test_checkpoint_errors():
    blob = to_bytes(trained_bundle())
    with pytest.raises(TruncatedFile):
        from_bytes(blob[:-10])
    with pytest.raises(TruncatedFile):
        from_bytes(blob[:5])
    with pytest.raises(VersionMismatch):
        from_bytes(blob[:4] + struct.pack("<H", 99) + blob[6:])
    with pytest.raises(BadMagic):
        from_bytes(b"XXXX" + blob[4:])
    flipped = bytearray(blob)
    flipped[-20] ^= 0xFF
    with pytest.raises(ChecksumMismatch):
        from_bytes(bytes(flipped))
