"""Recurrent variational autoencoder over controller modes and actions,
and the encoder-only baseline.

The encoder reads (previous mode, state) and scores the current mode; a
Gumbel-softmax relaxed sample of that mode is fed, with the state, to the
decoder, which scores the action class and regresses the continuous
action targets.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch
from torch import nn

from .labeler import ACTIONS, MODES, LabeledFlight
from .wmetrics import ACTION_G1, MODE_G1, EvalStream, ScoreParams, WeightedCounts, accumulate, critical_misses

FORMAT_VERSION = 1
DTYPE = torch.float64
VAE, ENCODER = "vae", "encoder"
TEACHER_FORCED, SELF_FED = "teacher_forced", "self_fed"
N_NEIGHBOR_FIELDS = 13
N_OWN = 3


class TrainingError(RuntimeError):
    pass


@dataclass
class ModelConfig:
    lstm_layers: int = 2
    lstm_units: int = 64
    mode_count: int = 3
    cat_action_count: int = 3
    cont_action_count: int = 4
    gumbel_temperature: float = 1.0
    learning_rate: float = 5e-3
    epochs: int = 40
    batch_size: int = 64
    seed: int = 0
    loss_weights: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.gumbel_temperature <= 0:
            raise ValueError("gumbel_temperature must be > 0")
        if (self.mode_count, self.cat_action_count, self.cont_action_count) != (len(MODES), len(ACTIONS), 4):
            raise ValueError("output counts must match the label taxonomy (3 modes, 3 action classes, 4 targets)")
        if min(self.lstm_layers, self.lstm_units, self.epochs, self.batch_size) < 1 or self.learning_rate <= 0:
            raise ValueError("layers, units, epochs, batch_size and learning_rate must be positive")
        self.loss_weights = tuple(float(w) for w in self.loss_weights)


# -- network -----------------------------------------------------------------

class _LSTMLayer(torch.autograd.Function):
    """One LSTM layer over a whole sequence with hand-written BPTT.

    Gate order in the pre-activations is (input, forget, output, cell), so
    the three sigmoid gates are one contiguous slice. Running the time loop
    inside a single autograd node keeps the graph to one node per layer.
    """

    @staticmethod
    def forward(ctx, xp, w_h):
        B, T, G = xp.shape
        U = G // 4
        sig = xp.new_empty(B, T, 3 * U)
        g = xp.new_empty(B, T, U)
        c_all = xp.new_empty(B, T + 1, U)
        h_all = xp.new_empty(B, T + 1, U)
        c_all[:, 0] = 0.0
        h_all[:, 0] = 0.0
        for t in range(T):
            z = torch.addmm(xp[:, t], h_all[:, t], w_h)
            s = torch.sigmoid(z[:, :3 * U])
            gt = torch.tanh(z[:, 3 * U:])
            c = s[:, U:2 * U] * c_all[:, t] + s[:, :U] * gt
            sig[:, t], g[:, t], c_all[:, t + 1] = s, gt, c
            h_all[:, t + 1] = s[:, 2 * U:] * torch.tanh(c)
        ctx.save_for_backward(w_h, sig, g, c_all, h_all)
        return h_all[:, 1:].clone()

    @staticmethod
    def backward(ctx, d_out):
        w_h, sig, g, c_all, h_all = ctx.saved_tensors
        B, T, U = g.shape
        i, f, o = sig[..., :U], sig[..., U:2 * U], sig[..., 2 * U:]
        tc = torch.tanh(c_all[:, 1:])
        # dz = [dc, dc, dh, dc] * factor, per step
        factor = torch.cat([g * i * (1 - i), c_all[:, :-1] * f * (1 - f),
                            tc * o * (1 - o), i * (1 - g * g)], dim=-1)
        dc_from_h = o * (1 - tc * tc)
        d_z = torch.empty(B, T, 4 * U, dtype=g.dtype)
        w_t = w_h.t()
        dh_next = torch.zeros(B, U, dtype=g.dtype)
        dc_next = torch.zeros(B, U, dtype=g.dtype)
        for t in range(T - 1, -1, -1):
            dh = d_out[:, t] + dh_next
            dc = dc_next + dh * dc_from_h[:, t]
            dz = torch.cat([dc, dc, dh, dc], dim=-1) * factor[:, t]
            d_z[:, t] = dz
            dh_next = dz @ w_t
            dc_next = dc * f[:, t]
        d_w = h_all[:, :-1].reshape(B * T, U).t() @ d_z.reshape(B * T, 4 * U)
        return d_z, d_w


class LSTMStack(nn.Module):
    """Stacked LSTM with tanh cell activation, written out by hand."""

    def __init__(self, n_in: int, units: int, layers: int):
        super().__init__()
        self.units = units
        dims = [n_in] + [units] * (layers - 1)
        k = 1.0 / math.sqrt(units)
        self.w_x = nn.ParameterList([nn.Parameter(torch.empty(d, 4 * units, dtype=DTYPE).uniform_(-k, k)) for d in dims])
        self.w_h = nn.ParameterList([nn.Parameter(torch.empty(units, 4 * units, dtype=DTYPE).uniform_(-k, k)) for _ in dims])
        self.b = nn.ParameterList([nn.Parameter(torch.zeros(4 * units, dtype=DTYPE)) for _ in dims])
        with torch.no_grad():
            for b in self.b:
                b[units:2 * units] = 1.0  # forget gate bias

    def zero_state(self, batch: int):
        z = torch.zeros(batch, self.units, dtype=DTYPE)
        return [(z, z) for _ in self.w_x]

    def _cell(self, z, c):
        U = self.units
        s = torch.sigmoid(z[:, :3 * U])
        c = s[:, U:2 * U] * c + s[:, :U] * torch.tanh(z[:, 3 * U:])
        return s[:, 2 * U:] * torch.tanh(c), c

    def forward(self, x):
        """x (B, T, n_in) -> top-layer outputs (B, T, units)."""
        for w_x, w_h, b in zip(self.w_x, self.w_h, self.b):
            x = _LSTMLayer.apply(x @ w_x + b, w_h)
        return x

    def step(self, x_t, state):
        new = []
        for (h, c), w_x, w_h, b in zip(state, self.w_x, self.w_h, self.b):
            h, c = self._cell(x_t @ w_x + b + h @ w_h, c)
            new.append((h, c))
            x_t = h
        return x_t, new


class Encoder(nn.Module):
    def __init__(self, state_dim: int, cfg: ModelConfig):
        super().__init__()
        self.state_dim = state_dim
        self.rnn = LSTMStack(cfg.mode_count + state_dim, cfg.lstm_units, cfg.lstm_layers)
        self.head = nn.Linear(cfg.lstm_units, cfg.mode_count, dtype=DTYPE)

    def forward(self, prev_mode, x):
        return self.head(self.rnn(torch.cat([prev_mode, x], dim=-1)))


class Decoder(nn.Module):
    def __init__(self, state_dim: int, cfg: ModelConfig):
        super().__init__()
        self.rnn = LSTMStack(cfg.mode_count + state_dim, cfg.lstm_units, cfg.lstm_layers)
        self.cat_head = nn.Linear(cfg.lstm_units, cfg.cat_action_count, dtype=DTYPE)
        self.cont_head = nn.Linear(cfg.lstm_units, cfg.cont_action_count, dtype=DTYPE)

    def forward(self, mode, x):
        h = self.rnn(torch.cat([mode, x], dim=-1))
        return self.cat_head(h), self.cont_head(h)


class ReactionModel(nn.Module):
    def __init__(self, state_dim: int, cfg: ModelConfig, kind: str = VAE):
        super().__init__()
        if kind not in (VAE, ENCODER):
            raise ValueError(f"unknown model kind {kind!r}")
        self.cfg, self.kind, self.state_dim = cfg, kind, state_dim
        self.encoder = Encoder(state_dim, cfg)
        self.decoder = Decoder(state_dim, cfg) if kind == VAE else None

    def _check(self, x):
        if x.shape[-1] != self.state_dim:
            raise ValueError(f"state dimension {x.shape[-1]} does not match model ({self.state_dim})")

    def encoder_step(self, prev_mode, x, hidden=None):
        self._check(x)
        hidden = hidden or self.encoder.rnn.zero_state(x.shape[0])
        h, hidden = self.encoder.rnn.step(torch.cat([prev_mode, x], dim=-1), hidden)
        return self.encoder.head(h), hidden

    def decoder_step(self, mode, x, hidden=None):
        self._check(x)
        hidden = hidden or self.decoder.rnn.zero_state(x.shape[0])
        h, hidden = self.decoder.rnn.step(torch.cat([mode, x], dim=-1), hidden)
        return self.decoder.cat_head(h), self.decoder.cont_head(h), hidden


def gumbel_noise(shape, generator: Optional[torch.Generator] = None):
    u = torch.rand(shape, generator=generator, dtype=DTYPE)
    e = (-torch.log(u.clamp_min(1e-300))).clamp_min(1e-300)
    return -torch.log(e)


def gumbel_softmax_sample(logits, temperature: float = 1.0, generator=None, noise=None):
    """Relaxed one-hot sample; differentiable in ``logits``."""
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    if noise is None:
        noise = gumbel_noise(logits.shape, generator)
    return torch.softmax((logits + noise) / temperature, dim=-1)


# -- data --------------------------------------------------------------------

@dataclass
class Standardizer:
    """z-scores for states and continuous targets.

    Neighbour fields are pooled over slots and fitted on present slots only;
    absent slots map to zeros and presence flags are left as 0/1.
    """

    own_mean: np.ndarray
    own_std: np.ndarray
    nb_mean: np.ndarray
    nb_std: np.ndarray
    cont_mean: np.ndarray
    cont_std: np.ndarray

    @staticmethod
    def _safe(std):
        return np.where(std > 0, std, 1.0)

    @classmethod
    def fit(cls, flights: Sequence[LabeledFlight]) -> "Standardizer":
        X = np.concatenate([lf.features() for lf in flights])
        Y = np.concatenate([lf.cont for lf in flights])
        own = X[:, :N_OWN]
        nb = X[:, N_OWN:].reshape(-1, N_NEIGHBOR_FIELDS)
        nb = nb[nb[:, -1] > 0.5]
        if len(nb):
            nb_mean, nb_std = nb.mean(0), cls._safe(nb.std(0))
        else:
            nb_mean, nb_std = np.zeros(N_NEIGHBOR_FIELDS), np.ones(N_NEIGHBOR_FIELDS)
        nb_mean[-1], nb_std[-1] = 0.0, 1.0
        return cls(own.mean(0), cls._safe(own.std(0)), nb_mean, nb_std, Y.mean(0), cls._safe(Y.std(0)))

    def states(self, X: np.ndarray) -> np.ndarray:
        n = len(X)
        own = (X[:, :N_OWN] - self.own_mean) / self.own_std
        nb = X[:, N_OWN:].reshape(n, -1, N_NEIGHBOR_FIELDS)
        present = nb[..., -1:] > 0.5
        nb = np.where(present, (nb - self.nb_mean) / self.nb_std, 0.0)
        return np.concatenate([own, nb.reshape(n, -1)], axis=1)

    def targets(self, Y):
        return (Y - self.cont_mean) / self.cont_std

    def untargets(self, Z):
        return Z * self.cont_std + self.cont_mean

    def to_dict(self):
        return {k: v.tolist() for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: np.asarray(v, dtype=float) for k, v in d.items()})


@dataclass
class Batch:
    x: torch.Tensor        # (B, T, D)
    mode: torch.Tensor     # (B, T)
    action: torch.Tensor   # (B, T)
    cont: torch.Tensor     # (B, T, 4)
    mask: torch.Tensor     # (B, T) bool


def make_batch(flights: Sequence[LabeledFlight], std: Standardizer) -> Batch:
    B, T = len(flights), max(len(lf) for lf in flights)
    D = flights[0].features().shape[1]
    x = np.zeros((B, T, D))
    mode = np.zeros((B, T), dtype=np.int64)
    action = np.zeros((B, T), dtype=np.int64)
    cont = np.zeros((B, T, 4))
    mask = np.zeros((B, T), dtype=bool)
    for b, lf in enumerate(flights):
        n = len(lf)
        x[b, :n] = std.states(lf.features())
        mode[b, :n], action[b, :n] = lf.mode, lf.action
        cont[b, :n] = std.targets(lf.cont)
        mask[b, :n] = True
    t = lambda a: torch.from_numpy(a)
    return Batch(t(x), t(mode), t(action), t(cont), t(mask))


def _prev_onehot(mode: torch.Tensor, k: int) -> torch.Tensor:
    """One-hot of the previous step's mode; the first step sees C0."""
    prev = torch.zeros_like(mode)
    prev[:, 1:] = mode[:, :-1]
    return nn.functional.one_hot(prev, k).to(DTYPE)


# -- loss and training -------------------------------------------------------

def loss_terms(model: ReactionModel, batch: Batch, generator=None, noise=None) -> Dict[str, torch.Tensor]:
    """Masked mean encoder CE, decoder CE and MSE, and their weighted sum."""
    cfg = model.cfg
    m = batch.mask.to(DTYPE)
    denom = m.sum()
    logits = model.encoder(_prev_onehot(batch.mode, cfg.mode_count), batch.x)
    ce = nn.functional.cross_entropy(logits.transpose(1, 2), batch.mode, reduction="none")
    terms = {"enc_ce": (ce * m).sum() / denom}
    total = cfg.loss_weights[0] * terms["enc_ce"]
    if model.decoder is not None:
        y = gumbel_softmax_sample(logits, cfg.gumbel_temperature, generator, noise)
        a_logits, cont = model.decoder(y, batch.x)
        ce_a = nn.functional.cross_entropy(a_logits.transpose(1, 2), batch.action, reduction="none")
        terms["dec_ce"] = (ce_a * m).sum() / denom
        terms["mse"] = (((cont - batch.cont) ** 2).mean(-1) * m).sum() / denom
        total = total + cfg.loss_weights[1] * terms["dec_ce"] + cfg.loss_weights[2] * terms["mse"]
    terms["total"] = total
    return terms


@dataclass
class TrainedModel:
    model: ReactionModel
    standardizer: Standardizer
    curve: List[float] = field(default_factory=list)
    initial_loss: float = float("nan")

    @property
    def kind(self):
        return self.model.kind


def _eval_loss(model, batches, seed) -> float:
    g = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        tot = sum(float(loss_terms(model, b, g)["total"]) * float(b.mask.sum()) for b in batches)
    return tot / sum(float(b.mask.sum()) for b in batches)


def train(flights: Sequence[LabeledFlight], cfg: ModelConfig, kind: str = VAE,
          epoch_callback=None) -> TrainedModel:
    """Adam on whole-trajectory batches; deterministic for a given seed."""
    flights = [lf for lf in flights if len(lf)]
    if not flights:
        raise TrainingError("empty training set")
    torch.manual_seed(cfg.seed)
    std = Standardizer.fit(flights)
    model = ReactionModel(flights[0].features().shape[1], cfg, kind)
    rng = np.random.default_rng(cfg.seed)
    gen = torch.Generator().manual_seed(cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    # sort by length so padded batches stay compact
    by_len = sorted(range(len(flights)), key=lambda i: len(flights[i]))
    chunks = [by_len[i:i + cfg.batch_size] for i in range(0, len(by_len), cfg.batch_size)]
    batches = [make_batch([flights[i] for i in c], std) for c in chunks]
    initial = _eval_loss(model, batches, cfg.seed)
    curve, bad = [], 0
    for epoch in range(cfg.epochs):
        tot, n = 0.0, 0.0
        for bi in rng.permutation(len(batches)):
            b = batches[bi]
            opt.zero_grad()
            loss = loss_terms(model, b, gen)["total"]
            if not torch.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch + 1}, batch {bi}")
            loss.backward()
            opt.step()
            w = float(b.mask.sum())
            tot, n = tot + loss.item() * w, n + w
        curve.append(tot / n)
        bad = bad + 1 if curve[-1] > 10 * initial else 0
        if bad >= 10:
            raise TrainingError(f"training diverged: loss {curve[-1]:.4g} vs initial {initial:.4g}")
        if epoch_callback:
            epoch_callback(epoch, curve[-1])
    return TrainedModel(model, std, curve, initial)


# -- inference -----------------------------------------------------------------

@dataclass
class Prediction:
    mode_prob: np.ndarray    # (T, 3)
    mode: np.ndarray         # (T,)
    action_prob: np.ndarray  # (T, 3), uniform for the encoder baseline
    action: np.ndarray       # (T,)
    cont: np.ndarray         # (T, 4), in target units; zeros for the baseline


def predict(tm: TrainedModel, features: np.ndarray, feedback: str = SELF_FED,
            truth_modes: Optional[np.ndarray] = None) -> Prediction:
    """Step through one trajectory. Self-fed mode feeds back the previous
    argmax mode; teacher-forced mode feeds back ``truth_modes``."""
    model, cfg = tm.model, tm.model.cfg
    if features.ndim != 2 or features.shape[1] != model.state_dim:
        raise ValueError(f"feature layout {features.shape} does not match model state dim {model.state_dim}")
    if feedback == TEACHER_FORCED and truth_modes is None:
        raise ValueError("teacher-forced prediction needs truth modes")
    if feedback not in (TEACHER_FORCED, SELF_FED):
        raise ValueError(f"unknown feedback {feedback!r}")
    T = len(features)
    x = torch.from_numpy(tm.standardizer.states(features))
    eye = torch.eye(cfg.mode_count, dtype=DTYPE)
    mp, ap, cont = np.zeros((T, 3)), np.full((T, 3), 1.0 / 3), np.zeros((T, 4))
    h_enc = h_dec = None
    prev = 0
    with torch.no_grad():
        for t in range(T):
            xt = x[t:t + 1]
            logits, h_enc = model.encoder_step(eye[prev:prev + 1], xt, h_enc)
            p = torch.softmax(logits, -1)[0]
            mp[t] = p.numpy()
            m = int(torch.argmax(p))
            if model.decoder is not None:
                a_logits, c, h_dec = model.decoder_step(eye[m:m + 1], xt, h_dec)
                ap[t] = torch.softmax(a_logits, -1)[0].numpy()
                cont[t] = tm.standardizer.untargets(c[0].numpy())
            prev = int(truth_modes[t]) if feedback == TEACHER_FORCED else m
    action = ap.argmax(1) if model.decoder is not None else np.zeros(T, dtype=np.int64)
    return Prediction(mp, mp.argmax(1), ap, action, cont)


# -- persistence ---------------------------------------------------------------

def save(path, tm: TrainedModel):
    arrays = {f"param:{k}": v.detach().numpy() for k, v in tm.model.state_dict().items()}
    meta = {"version": FORMAT_VERSION, "kind": tm.kind, "state_dim": tm.model.state_dim,
            "config": asdict(tm.model.cfg), "standardizer": tm.standardizer.to_dict(),
            "curve": tm.curve, "initial_loss": tm.initial_loss}
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load(path) -> TrainedModel:
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        if meta["version"] != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported model format version {meta['version']}")
        cfg = ModelConfig(**{**meta["config"], "loss_weights": tuple(meta["config"]["loss_weights"])})
        model = ReactionModel(meta["state_dim"], cfg, meta["kind"])
        state = {k[len("param:"):]: torch.from_numpy(z[k].copy()) for k in z.files if k.startswith("param:")}
    model.load_state_dict(state)
    return TrainedModel(model, Standardizer.from_dict(meta["standardizer"]), meta["curve"], meta["initial_loss"])


# -- prediction files ------------------------------------------------------------

PREDICTION_HEADER = (["flight_id", "timestamp", "mode", "action"] + [f"p_{m}" for m in MODES]
                     + [f"p_{a}" for a in ACTIONS] + ["d_course", "d_sh", "d_sv", "d_t"])


def write_predictions(path, rows: Sequence):
    """``rows``: (flight id, timestamps, Prediction) per flight."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(PREDICTION_HEADER)
        for fid, times, p in rows:
            for t in range(len(times)):
                w.writerow([fid, int(times[t]), MODES[p.mode[t]], ACTIONS[p.action[t]],
                            *(repr(float(v)) for v in p.mode_prob[t]),
                            *(repr(float(v)) for v in p.action_prob[t]),
                            *(repr(float(v)) for v in p.cont[t])])


def read_predictions(path) -> Dict[str, tuple]:
    """flight id -> (timestamps, Prediction), in file order."""
    groups: Dict[str, list] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != PREDICTION_HEADER:
            raise ValueError(f"{path}: unexpected prediction header")
        for line, row in enumerate(reader, start=2):
            if len(row) != len(PREDICTION_HEADER):
                raise ValueError(f"{path}:{line}: expected {len(PREDICTION_HEADER)} fields")
            groups.setdefault(row[0], []).append(row)
    out = {}
    for fid, rs in groups.items():
        num = np.array([[float(v) for v in r[4:]] for r in rs])
        out[fid] = (np.array([int(r[1]) for r in rs], dtype=np.int64),
                    Prediction(num[:, 0:3], np.array([MODES.index(r[2]) for r in rs]), num[:, 3:6],
                               np.array([ACTIONS.index(r[3]) for r in rs]), num[:, 6:10]))
    return out


def write_loss_curve(path, curves: Dict[str, List[float]]):
    kinds = sorted(curves)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", *kinds])
        for e in range(max(len(c) for c in curves.values())):
            w.writerow([e + 1, *(repr(curves[k][e]) if e < len(curves[k]) else "" for k in kinds)])


# -- cross-validation ------------------------------------------------------------

def kfold(n: int, k: int, seed: int) -> List[np.ndarray]:
    """Test indices of each fold, over a seeded permutation."""
    if not 2 <= k <= n:
        raise ValueError(f"cannot split {n} items into {k} folds")
    return np.array_split(np.random.default_rng(seed).permutation(n), k)


def streams_for(labeled: Sequence[LabeledFlight], preds: Sequence[Prediction], target: str = "mode"):
    out = []
    for lf, p in zip(labeled, preds):
        truth, pred = (lf.mode, p.mode) if target == "mode" else (lf.action, p.action)
        out.append(EvalStream(lf.id, lf.times, truth, pred, lf.is_actual, lf.is_annotated))
    return out


def fold_counts(streams, g1, n_classes=3, params: ScoreParams = ScoreParams()) -> List[WeightedCounts]:
    totals = [WeightedCounts() for _ in range(n_classes)]
    for s in streams:
        for c in range(n_classes):
            totals[c] = totals[c] + accumulate(s, c, g1, params)
    return totals


def cross_validate(labeled: Sequence[LabeledFlight], cfg: ModelConfig, k: int = 5, repeats: int = 1,
                   kinds=(VAE, ENCODER), log=None) -> List[Dict]:
    """Per (repeat, fold, kind): mode/action counts and critical misses on the held-out flights."""
    rows = []
    for rep in range(repeats):
        folds = kfold(len(labeled), k, cfg.seed + rep)
        for f, test_idx in enumerate(folds):
            test_set = set(test_idx.tolist())
            train_set = [lf for i, lf in enumerate(labeled) if i not in test_set]
            test = [labeled[i] for i in sorted(test_set)]
            for kind in kinds:
                tm = train(train_set, cfg, kind)
                preds = [predict(tm, lf.features()) for lf in test]
                ms = streams_for(test, preds, "mode")
                row = {"repeat": rep, "fold": f, "kind": kind,
                       "mode_counts": fold_counts(ms, MODE_G1),
                       "action_counts": fold_counts(streams_for(test, preds, "action"), ACTION_G1),
                       "critical_misses": sum(critical_misses(s, MODE_G1) for s in ms),
                       "resolution_actions": int(sum(lf.is_actual.sum() for lf in test)),
                       "final_loss": tm.curve[-1]}
                rows.append(row)
                if log:
                    log(row)
    return rows
