"""Actor and critic networks: optional conv encoder over the costmap, then a dense trunk."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from navguard.nn.layers import Conv2D, Dense, Flatten, Layer, ReLU, ShapeMismatch, Tanh


@dataclass(frozen=True)
class NetworkSpec:
    role: str  # "actor" or "critic"
    vec_dim: int  # flat features: ray minima (if any), velocity, waypoint
    image_side: int = 0  # costmap cells per side; 0 disables the conv encoder
    # (channels, kernel, stride) per conv layer
    conv: tuple[tuple[int, int, int], ...] = ()
    trunk: tuple[int, ...] = (256, 256)
    action_dim: int = 2
    final_scale: float = 0.01  # actor head init scale, keeps the first policy near zero

    def __post_init__(self):
        if self.role not in ("actor", "critic"):
            raise ValueError(f"unknown network role {self.role!r}")
        object.__setattr__(self, "conv", tuple(tuple(int(v) for v in c) for c in self.conv))
        object.__setattr__(self, "trunk", tuple(int(w) for w in self.trunk))
        if self.vec_dim < 0 or self.action_dim < 1 or any(w < 1 for w in self.trunk):
            raise ValueError("network widths must be >= 1")
        if self.conv and self.image_side < 1:
            raise ValueError("a conv encoder needs image_side > 0")

    @property
    def out_dim(self) -> int:
        return self.action_dim if self.role == "actor" else 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conv"] = [list(c) for c in self.conv]
        d["trunk"] = list(self.trunk)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        d = dict(d)
        d["conv"] = tuple(tuple(c) for c in d.get("conv", ()))
        d["trunk"] = tuple(d.get("trunk", ()))
        return cls(**d)


@dataclass
class Tape:
    enc: list = field(default_factory=list)
    trunk: list = field(default_factory=list)
    split: tuple[int, int, int] = (0, 0, 0)
    out_shape: tuple = ()


class Network:
    def __init__(self, spec: NetworkSpec, rng: np.random.Generator | None = None, dtype=np.float32):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.spec = spec
        self.encoder: list[Layer] = []
        enc_dim = 0
        if spec.image_side:
            shape = (1, spec.image_side, spec.image_side)
            for c_out, k, s in spec.conv:
                conv = Conv2D(shape[0], c_out, k, s, rng=rng, dtype=dtype)
                shape = conv.out_shape(shape)
                self.encoder += [conv, ReLU()]
            flat = Flatten()
            self.encoder.append(flat)
            enc_dim = flat.out_shape(shape)[0]
        n_in = enc_dim + spec.vec_dim + (spec.action_dim if spec.role == "critic" else 0)
        self.trunk: list[Layer] = []
        for width in spec.trunk:
            self.trunk += [Dense(n_in, width, rng=rng, dtype=dtype), ReLU()]
            n_in = width
        scale = spec.final_scale if spec.role == "actor" else 1.0
        self.trunk.append(Dense(n_in, spec.out_dim, rng=rng, scale=scale, dtype=dtype))
        if spec.role == "actor":
            self.trunk.append(Tanh())
        self.enc_dim = enc_dim

    # parameters in declaration order (encoder first, then trunk)
    @property
    def layers(self) -> list[Layer]:
        return self.encoder + self.trunk

    @property
    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params]

    @property
    def dtype(self):
        return self.params[0].dtype

    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def set_params(self, values) -> None:
        values = list(values)
        mine = self.params
        if len(values) != len(mine):
            raise ShapeMismatch(f"expected {len(mine)} parameter arrays, got {len(values)}")
        for dst, src in zip(mine, values):
            if dst.shape != np.shape(src):
                raise ShapeMismatch(f"parameter shape {np.shape(src)} != {dst.shape}")
            dst[...] = src

    def copy(self) -> "Network":
        return self.astype(self.dtype)

    def astype(self, dtype) -> "Network":
        clone = object.__new__(Network)
        clone.spec = self.spec
        clone.enc_dim = self.enc_dim
        clone.encoder = [layer.astype(dtype) for layer in self.encoder]
        clone.trunk = [layer.astype(dtype) for layer in self.trunk]
        return clone

    def forward(self, vec, img=None, action=None):
        """Batched forward pass. Returns (output (N, out_dim), tape)."""
        spec = self.spec
        dtype = self.dtype
        vec = np.asarray(vec, dtype=dtype)
        if vec.ndim != 2 or vec.shape[1] != spec.vec_dim:
            raise ShapeMismatch(f"vector input must be (N, {spec.vec_dim}), got {vec.shape}")
        tape = Tape()
        parts = []
        if self.encoder:
            if img is None:
                raise ShapeMismatch("this network needs a costmap image input")
            h = np.asarray(img, dtype=dtype)
            if h.ndim == 3:
                h = h[:, None]
            for layer in self.encoder:
                h, c = layer.forward(h)
                tape.enc.append(c)
            parts.append(h)
        parts.append(vec)
        if spec.role == "critic":
            if action is None:
                raise ShapeMismatch("critic needs an action input")
            action = np.asarray(action, dtype=dtype)
            if action.shape != (vec.shape[0], spec.action_dim):
                raise ShapeMismatch(f"action must be (N, {spec.action_dim}), got {action.shape}")
            parts.append(action)
        h = np.concatenate(parts, axis=1) if len(parts) > 1 else parts[0]
        tape.split = (self.enc_dim, spec.vec_dim, spec.action_dim if spec.role == "critic" else 0)
        for layer in self.trunk:
            h, c = layer.forward(h)
            tape.trunk.append(c)
        tape.out_shape = h.shape
        return h, tape

    def __call__(self, vec, img=None, action=None) -> np.ndarray:
        return self.forward(vec, img, action)[0]

    def backward(self, tape: Tape, gy):
        """Reverse pass. Returns (param grads aligned with ``params``, input grads dict)."""
        gy = np.asarray(gy, dtype=self.dtype)
        if gy.shape != tape.out_shape:
            raise ShapeMismatch(f"output gradient {gy.shape} does not match output {tape.out_shape}")
        grads_trunk = []
        g = gy
        for layer, c in zip(reversed(self.trunk), reversed(tape.trunk)):
            g, gp = layer.backward(c, g)
            grads_trunk.append(gp)
        n_enc, n_vec, n_act = tape.split
        inputs = {"vec": g[:, n_enc:n_enc + n_vec]}
        if n_act:
            inputs["action"] = g[:, n_enc + n_vec:]
        grads_enc = []
        if self.encoder:
            g = g[:, :n_enc]
            for layer, c in zip(reversed(self.encoder), reversed(tape.enc)):
                g, gp = layer.backward(c, g)
                grads_enc.append(gp)
            inputs["img"] = g
        ordered = [gp for gps in reversed(grads_enc) for gp in gps] + \
                  [gp for gps in reversed(grads_trunk) for gp in gps]
        return ordered, inputs
