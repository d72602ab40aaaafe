"""Compact CNN binary classifier: forward/backward passes built on the
kernel backend, SGD with the step-decay schedule, hard-example mining,
multi-crop inference, and checkpoint persistence."""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import CheckpointError, InsufficientInput, ShapeMismatch
from .geometry import LandmarkSet
from .rng import (NS_BATCH, NS_EPOCH, NS_HARD, NS_INIT, NS_MINE, NS_SCORE,
                  derive_rng)
from .synth import (Label, Sample, SynthConfig, build_batch, crop_resize,
                    sample_roi)

CHECKPOINT_MAGIC = b"WFCK"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class CnnArchitecture:
    """Plain conv net: per block 3x3 conv (stride 1, pad 1) + ReLU + 2x2 max
    pool, then global average pooling and a single-logit linear head."""

    input_size: int = 224
    channels: tuple = (8, 16, 32, 64)

    def __post_init__(self):
        if self.input_size < 1 or len(self.channels) == 0:
            raise ValueError("invalid architecture")
        size = self.input_size
        for _ in self.channels:
            size //= 2
        if size < 1:
            raise ValueError("spatial size collapses to zero after pooling")


@dataclass
class TrainConfig:
    batch_size: int = 64
    lr0: float = 0.001
    lr_decay: float = 0.95
    decay_steps: int = 1000
    max_epochs: int = 100
    hard_mine_epochs: int = 20
    hard_mine_lr: float = 0.0001
    hard_threshold: float = 0.5
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if min(self.lr0, self.lr_decay, self.hard_mine_lr) <= 0:
            raise ValueError("rates must be > 0")
        if not 0.0 < self.hard_threshold < 1.0:
            raise ValueError("hard_threshold must be in (0, 1)")
        if self.momentum < 0:
            raise ValueError("momentum must be >= 0")
        if self.batch_size < 2 or self.batch_size % 2 != 0:
            raise ValueError("batch_size must be even and >= 2")


class CompactCnn:
    """Weights + forward/backward for the compact architecture.

    Parameters are float32 by default (the checkpoint precision); tests use
    float64 instances for finite-difference checks.
    """

    def __init__(self, arch: CnnArchitecture = CnnArchitecture(),
                 seed: int = 0, dtype=np.float32):
        self.arch = arch
        self.dtype = np.dtype(dtype)
        self.params: dict = {}
        rng = derive_rng(seed, NS_INIT)
        cin = 3
        for bi, cout in enumerate(arch.channels):
            self.params[f"conv{bi}.w"] = self._kaiming(
                rng, (cout, cin, 3, 3), fan_in=cin * 9)
            self.params[f"conv{bi}.b"] = self._uniform(
                rng, (cout,), 1.0 / np.sqrt(cin * 9))
            cin = cout
        self.params["fc.w"] = self._kaiming(rng, (cin,), fan_in=cin)
        self.params["fc.b"] = self._uniform(rng, (1,), 1.0 / np.sqrt(cin))

    def _kaiming(self, rng, shape, fan_in):
        bound = np.sqrt(6.0 / fan_in)
        return rng.uniform(-bound, bound, size=shape).astype(self.dtype)

    def _uniform(self, rng, shape, bound):
        return rng.uniform(-bound, bound, size=shape).astype(self.dtype)

    @property
    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def flat_weights(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params.values()])

    def set_flat_weights(self, flat: np.ndarray) -> None:
        offset = 0
        for name, p in self.params.items():
            n = p.size
            self.params[name] = flat[offset:offset + n].reshape(
                p.shape).astype(self.dtype)
            offset += n
        if offset != flat.size:
            raise ShapeMismatch("weight vector length does not match model")

    def forward_logits(self, x: np.ndarray, want_cache: bool = False):
        """Logits for an (N, H, W, 3) float batch in [0, 1]."""
        if x.ndim != 4 or x.shape[3] != 3 \
                or x.shape[1] != self.arch.input_size \
                or x.shape[2] != self.arch.input_size:
            raise ShapeMismatch(
                f"expected (N, {self.arch.input_size}, "
                f"{self.arch.input_size}, 3) batch, got {x.shape}")
        h = np.ascontiguousarray(x.transpose(0, 3, 1, 2), dtype=self.dtype)
        cache = []
        for bi in range(len(self.arch.channels)):
            w = self.params[f"conv{bi}.w"]
            b = self.params[f"conv{bi}.b"]
            z = _kernels.conv3x3_forward(h, w, b)
            r = np.maximum(z, 0)
            p, idx = _kernels.maxpool2_forward(r)
            if want_cache:
                cache.append((h, z, idx, r.shape))
            h = p
        gap = h.mean(axis=(2, 3))
        logits = gap @ self.params["fc.w"] + self.params["fc.b"][0]
        if want_cache:
            return logits, (cache, h.shape, gap)
        return logits


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _bce_loss(logits: np.ndarray, labels: np.ndarray) -> float:
    z = logits.astype(np.float64)
    y = labels.astype(np.float64)
    loss = np.maximum(z, 0) - y * z + np.log1p(np.exp(-np.abs(z)))
    return float(loss.mean())


def batch_arrays(samples: Sequence[Sample]):
    """Stack samples into an (N, S, S, 3) pixel array and a label vector."""
    x = np.stack([s.pixels for s in samples])
    y = np.array([int(s.label) for s in samples], dtype=np.int64)
    return x, y


def forward(net: CompactCnn, batch) -> np.ndarray:
    """Fake probabilities in (0, 1) for a batch.

    ``batch`` is an (N, S, S, 3) array or a sequence of Samples.
    """
    if not isinstance(batch, np.ndarray):
        batch, _ = batch_arrays(batch)
    return _sigmoid(net.forward_logits(batch))


def backward(net: CompactCnn, batch, labels=None):
    """Analytic gradient of the mean binary cross-entropy.

    Returns (grads, loss) where grads maps parameter names to arrays of the
    parameter's shape.
    """
    if not isinstance(batch, np.ndarray):
        batch, labels = batch_arrays(batch)
    labels = np.asarray(labels)
    logits, (cache, pooled_shape, gap) = net.forward_logits(
        batch, want_cache=True)
    loss = _bce_loss(logits, labels)
    n = batch.shape[0]
    probs = _sigmoid(logits)
    dlogits = ((probs - labels) / n).astype(net.dtype)

    grads = {}
    grads["fc.w"] = gap.T @ dlogits
    grads["fc.b"] = np.array([dlogits.sum()], dtype=net.dtype)
    dgap = np.outer(dlogits, net.params["fc.w"])
    hw = pooled_shape[2] * pooled_shape[3]
    dh = np.broadcast_to(
        (dgap / hw)[:, :, None, None], pooled_shape).astype(net.dtype)
    dh = np.ascontiguousarray(dh)
    for bi in reversed(range(len(net.arch.channels))):
        h_in, z, idx, r_shape = cache[bi]
        dr = _kernels.maxpool2_backward(dh, idx, r_shape[2], r_shape[3])
        dz = np.ascontiguousarray(dr * (z > 0))
        dx, dw, db = _kernels.conv3x3_backward(
            h_in, net.params[f"conv{bi}.w"], dz)
        grads[f"conv{bi}.w"] = dw
        grads[f"conv{bi}.b"] = db
        dh = np.ascontiguousarray(dx)
    return grads, loss


@dataclass
class SgdState:
    """Optimizer state: momentum buffers plus the step/epoch counters that
    make the lr schedule and resume behavior pure functions of the state."""

    velocity: dict
    step: int = 0
    epoch: int = 0
    hm_epoch: int = 0
    stage1_steps: Optional[int] = None

    @classmethod
    def fresh(cls, net: CompactCnn) -> "SgdState":
        vel = {name: np.zeros_like(p) for name, p in net.params.items()}
        return cls(velocity=vel)


def learning_rate(cfg: TrainConfig, step: int,
                  stage1_steps: Optional[int] = None) -> float:
    """Step-decay schedule: lr0 * decay^(step // decay_steps).

    During the hard-mining stage the schedule restarts from hard_mine_lr at
    the stage boundary.
    """
    if stage1_steps is not None and step >= stage1_steps:
        k = (step - stage1_steps) // cfg.decay_steps
        return cfg.hard_mine_lr * cfg.lr_decay ** k
    return cfg.lr0 * cfg.lr_decay ** (step // cfg.decay_steps)


def sgd_step(net: CompactCnn, grads: dict, state: SgdState,
             cfg: TrainConfig) -> float:
    """One SGD-with-momentum update; increments the step counter and
    returns the learning rate that was applied."""
    lr = learning_rate(cfg, state.step, state.stage1_steps)
    for name, p in net.params.items():
        v = state.velocity[name]
        v *= cfg.momentum
        v += grads[name]
        p -= (lr * v).astype(p.dtype, copy=False)
    state.step += 1
    return lr


def mine_hard(net: CompactCnn, dataset: Sequence[Sample],
              threshold: float = 0.5, chunk: int = 256) -> list:
    """Samples misclassified at the threshold: REAL with fake-probability
    above it, FAKE below it.  Probability exactly at the threshold is not
    hard."""
    hard = []
    for start in range(0, len(dataset), chunk):
        part = list(dataset[start:start + chunk])
        probs = forward(net, part)
        for s, p in zip(part, probs):
            if s.label is Label.REAL and p > threshold:
                hard.append(s)
            elif s.label is Label.FAKE and p < threshold:
                hard.append(s)
    return hard


def predict_image(net: CompactCnn, image: np.ndarray, landmarks: LandmarkSet,
                  rng: np.random.Generator, n_crops: int = 10) -> float:
    """Average fake probability over ``n_crops`` random RoI crops."""
    h, w = image.shape[:2]
    size = net.arch.input_size
    crops = []
    for _ in range(n_crops):
        roi = sample_roi(landmarks, w, h, rng)
        crops.append(crop_resize(image, roi, size))
    probs = forward(net, np.stack(crops))
    return float(probs.mean())


@dataclass
class TrainLogRow:
    step: int
    lr: float
    loss: float


def train(positives: Sequence, cfg: TrainConfig, synth_cfg: SynthConfig,
          arch: Optional[CnnArchitecture] = None,
          net: Optional[CompactCnn] = None,
          state: Optional[SgdState] = None,
          log: Optional[list] = None):
    """Two-stage training: dynamic per-batch negative synthesis, then
    hard-example fine-tuning.

    Returns (net, state, log) where log is a list of TrainLogRow.  Passing
    an existing net/state resumes exactly where the counters left off.
    """
    if len(positives) == 0:
        raise InsufficientInput("training set is empty")
    if len(positives) < cfg.batch_size:
        raise InsufficientInput(
            f"need at least {cfg.batch_size} images, got {len(positives)}")
    if net is None:
        net = CompactCnn(arch or CnnArchitecture(), seed=cfg.seed)
    if state is None:
        state = SgdState.fresh(net)
    if log is None:
        log = []
    n = len(positives)
    per_epoch = n // cfg.batch_size

    while state.epoch < cfg.max_epochs:
        e = state.epoch
        order = derive_rng(cfg.seed, NS_EPOCH, e).permutation(n)
        for k in range(per_epoch):
            chunk = [positives[int(i)]
                     for i in order[k * cfg.batch_size:(k + 1) * cfg.batch_size]]
            batch_rng = derive_rng(cfg.seed, NS_BATCH, e, k)
            samples = build_batch(chunk, synth_cfg, batch_rng)
            grads, loss = backward(net, samples)
            step = state.step
            lr = sgd_step(net, grads, state, cfg)
            log.append(TrainLogRow(step=step, lr=lr, loss=loss))
        state.epoch += 1

    if cfg.hard_mine_epochs > 0 and state.stage1_steps is None:
        state.stage1_steps = state.step

    while state.hm_epoch < cfg.hard_mine_epochs:
        e = state.hm_epoch
        order = derive_rng(cfg.seed, NS_MINE, e).permutation(n)
        pool = []
        for k in range(per_epoch):
            chunk = [positives[int(i)]
                     for i in order[k * cfg.batch_size:(k + 1) * cfg.batch_size]]
            batch_rng = derive_rng(cfg.seed, NS_MINE, e, k + 1)
            pool.extend(build_batch(chunk, synth_cfg, batch_rng))
        hard = mine_hard(net, pool, cfg.hard_threshold)
        shuffle = derive_rng(cfg.seed, NS_HARD, e).permutation(len(hard))
        hard = [hard[int(i)] for i in shuffle]
        for start in range(0, len(hard), cfg.batch_size):
            part = hard[start:start + cfg.batch_size]
            grads, loss = backward(net, part)
            step = state.step
            lr = sgd_step(net, grads, state, cfg)
            log.append(TrainLogRow(step=step, lr=lr, loss=loss))
        state.hm_epoch += 1

    return net, state, log


def _rng_digest(seed: int, step: int, stage1_steps: Optional[int]) -> str:
    payload = f"{seed}:{step}:{stage1_steps}".encode()
    return hashlib.sha256(payload).hexdigest()


def save_checkpoint(path, net: CompactCnn, state: SgdState,
                    seed: int = 0) -> None:
    """Serialize weights + optimizer state.

    Layout: magic, u32 version, u32 header length, JSON header, then the
    weight and velocity vectors as little-endian float32.
    """
    header = {
        "input_size": net.arch.input_size,
        "channels": list(net.arch.channels),
        "dtype": "float32",
        "param_count": int(net.param_count),
        "step": int(state.step),
        "epoch": int(state.epoch),
        "hm_epoch": int(state.hm_epoch),
        "stage1_steps": state.stage1_steps,
        "seed": int(seed),
        "rng_digest": _rng_digest(seed, state.step, state.stage1_steps),
    }
    hbytes = json.dumps(header, sort_keys=True).encode()
    weights = net.flat_weights().astype("<f4").tobytes()
    velocity = np.concatenate(
        [state.velocity[name].ravel() for name in net.params]
    ).astype("<f4").tobytes()
    blob = (CHECKPOINT_MAGIC + struct.pack("<II", CHECKPOINT_VERSION, len(hbytes))
            + hbytes + weights + velocity)
    with open(path, "wb") as f:
        f.write(blob)


def load_checkpoint(path):
    """Restore (net, state, header) from a checkpoint file."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 12 or blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    version, hlen = struct.unpack("<II", blob[4:12])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    try:
        header = json.loads(blob[12:12 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header") from exc
    arch = CnnArchitecture(input_size=header["input_size"],
                           channels=tuple(header["channels"]))
    net = CompactCnn(arch, seed=header.get("seed", 0), dtype=np.float32)
    count = header["param_count"]
    if net.param_count != count:
        raise CheckpointError(f"{path}: parameter count mismatch")
    body = blob[12 + hlen:]
    expected = 2 * count * 4
    if len(body) != expected:
        raise CheckpointError(f"{path}: truncated weight payload")
    flat = np.frombuffer(body[:count * 4], dtype="<f4")
    vflat = np.frombuffer(body[count * 4:], dtype="<f4")
    net.set_flat_weights(flat)
    state = SgdState.fresh(net)
    offset = 0
    for name, p in net.params.items():
        state.velocity[name] = vflat[offset:offset + p.size].reshape(
            p.shape).astype(np.float32)
        offset += p.size
    state.step = header["step"]
    state.epoch = header.get("epoch", 0)
    state.hm_epoch = header.get("hm_epoch", 0)
    state.stage1_steps = header.get("stage1_steps")
    return net, state, header
