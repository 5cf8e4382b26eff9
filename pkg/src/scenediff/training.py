"""Training loop (clean-sample reconstruction loss), split evaluation, and the
condition-ablation comparison matrix.

Scenes are normalized into the canonical frame (human-centered, entity bbox
max extent 2) before the model sees them; all reported metrics live in that
frame.  Training is deterministic per seed: sample order, timesteps, and
noise draws all come from one seeded stream.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import metrics as mx
from .diffusion import make_schedule, p_sample_loop, q_sample
from .geometry import rotz
from .gpnet import MODES, GuidingPointsModel, HyperParams
from .synthdata import GenConfig, Interaction, Vocabulary, generate_dataset

ABLATION_FLAGS = MODES  # full, no_v, no_F, objects_only, human_only, no_text


class TrainError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    hyperparams: HyperParams
    epochs: int = 200
    seed: int = 0
    ablation: str = "full"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    lr_decay: str = "cosine"   # "cosine" or "none"
    warmup_epochs: int = 0
    clip_norm: float = 0.0     # 0 disables global-norm gradient clipping
    # Scene relations are yaw-relative, so rotating a whole scene about the
    # human center is an exact task symmetry; augmenting with it forces the
    # model to learn relative geometry instead of memorizing positions.
    augment_rotations: bool = True

    def __post_init__(self):
        if self.epochs <= 0:
            raise TrainError("epochs must be positive")
        if self.ablation not in ABLATION_FLAGS:
            raise TrainError(f"unknown ablation flag {self.ablation!r}")


def clip_gradients(grads: dict, max_norm: float) -> dict:
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total <= max_norm or total == 0.0:
        return grads
    scale = max_norm / total
    return {k: g * scale for k, g in grads.items()}


@dataclass
class TrainLog:
    entries: list[dict] = field(default_factory=list)
    checkpoint_path: str | None = None

    def add(self, **kw):
        if self.entries and kw.get("epoch", 0) <= self.entries[-1]["epoch"]:
            raise TrainError("epochs must be logged monotonically")
        self.entries.append(kw)

    @property
    def losses(self) -> list[float]:
        return [e["loss"] for e in self.entries]

    def save(self, path):
        Path(path).write_text("\n".join(json.dumps(e) for e in self.entries) + "\n")

    @classmethod
    def load(cls, path):
        log = cls()
        for line in Path(path).read_text().splitlines():
            if line.strip():
                log.entries.append(json.loads(line))
        return log


class Adam:
    """Adaptive-moment optimizer over a ParamStore (in-place updates)."""

    def __init__(self, params, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            if name not in self.params:
                continue
            m = self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            v = self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            self.params.arrays[name] -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


@dataclass
class PreparedSample:
    """An interaction in the canonical frame, ready for the model."""

    interaction: Interaction
    entities: list[np.ndarray]
    target: np.ndarray
    center: np.ndarray
    scale: float

    @classmethod
    def from_interaction(cls, itx: Interaction) -> "PreparedSample":
        clouds = itx.entity_clouds()
        center, scale = mx.scene_frame(clouds)
        return cls(itx, [mx.to_frame(c, center, scale) for c in clouds],
                   mx.to_frame(itx.target.points, center, scale), center, scale)


def prepare(dataset: list[Interaction]) -> list[PreparedSample]:
    return [PreparedSample.from_interaction(itx) for itx in dataset]


def train(dataset: list[Interaction], config: TrainConfig, out_dir=None,
          log_hook=None, model: GuidingPointsModel | None = None
          ) -> tuple[GuidingPointsModel, TrainLog]:
    """Reconstruction-loss training: per sample draw a timestep and noise,
    forward-noise the target, predict the clean cloud conditioned on the scene
    and prompt, and follow the mean gradient of the batch with Adam."""
    if not dataset:
        raise TrainError("dataset is empty")
    hp = config.hyperparams
    if model is None:
        model = GuidingPointsModel(hp, Vocabulary.from_grammar(), seed=config.seed,
                                   mode=config.ablation)
    schedule = make_schedule(hp.schedule, hp.t_steps)
    samples = prepare(dataset)
    opt = Adam(model.params, hp.learning_rate, config.adam_beta1,
               config.adam_beta2, config.adam_eps)
    rng = np.random.default_rng([config.seed, 404])
    log = TrainLog()
    step = 0
    # Tiny datasets fill the batch with repeated samples; each occurrence
    # draws its own timestep and noise, reducing gradient variance.
    reps = max(1, -(-hp.batch_size // len(samples))) if len(samples) < hp.batch_size else 1
    for epoch in range(config.epochs):
        t_start = time.time()
        order = np.concatenate([rng.permutation(len(samples)) for _ in range(reps)])
        epoch_losses = []
        if epoch < config.warmup_epochs:
            opt.lr = hp.learning_rate * (epoch + 1) / config.warmup_epochs
        elif config.lr_decay == "cosine":
            span = max(1, config.epochs - config.warmup_epochs)
            opt.lr = hp.learning_rate * 0.5 * (
                1 + math.cos(math.pi * (epoch - config.warmup_epochs) / span))
        for start in range(0, len(order), hp.batch_size):
            batch = order[start:start + hp.batch_size]
            acc: dict[str, np.ndarray] = {}
            for idx in batch:
                s = samples[idx]
                if config.augment_rotations:
                    rot = rotz(float(rng.uniform(0, 2 * np.pi))).T
                    entities = [c @ rot for c in s.entities]
                    target = s.target @ rot
                else:
                    entities, target = s.entities, s.target
                level = int(rng.integers(0, hp.t_steps))
                noise = rng.standard_normal(target.shape)
                x_noisy = q_sample(target, level, noise, schedule)
                loss, grads = model.loss_and_grads(
                    entities, s.interaction.prompt, target, x_noisy, level)
                if not math.isfinite(loss):
                    raise TrainError(f"non-finite loss at step {step}")
                epoch_losses.append(loss)
                for name, g in grads.items():
                    if name in acc:
                        acc[name] += g
                    else:
                        acc[name] = g.copy()
                step += 1
            mean_grads = {k: v / len(batch) for k, v in acc.items()}
            if config.clip_norm > 0.0:
                mean_grads = clip_gradients(mean_grads, config.clip_norm)
            opt.step(mean_grads)
        entry = {"epoch": epoch + 1, "loss": float(np.mean(epoch_losses)),
                 "wall_time": time.time() - t_start}
        log.add(**entry)
        if log_hook:
            log_hook(entry)
    if out_dir is not None:
        out_dir = Path(out_dir)
        model.save(out_dir)
        log.save(out_dir / "train_log.jsonl")
        log.checkpoint_path = str(out_dir)
    return model, log


# ------------------------------------------------------------------ evaluate

def evaluate_model(model: GuidingPointsModel, dataset: list[Interaction],
                   eval_seed: int = 0, f1_tau: float = mx.F1_TAU_DEFAULT,
                   denoiser_override=None) -> tuple[mx.MetricReport, list[dict]]:
    """Sample one cloud per interaction (fixed eval seed) and score it against
    the ground-truth target in the canonical frame."""
    if not dataset:
        raise TrainError("evaluation split is empty")
    hp = model.hp
    schedule = make_schedule(hp.schedule, hp.t_steps)
    records = []
    for i, itx in enumerate(dataset):
        s = PreparedSample.from_interaction(itx)
        if denoiser_override is not None:
            den = denoiser_override(s)
        else:
            den = model.denoiser(s.entities, s.interaction.prompt)
        pred = p_sample_loop(den, None, schedule, hp.n_points, seed=(eval_seed, i))
        gp = model.guiding_points(s.entities, s.interaction.prompt)
        centroid = s.target.mean(axis=0)
        gmse = mx.guiding_mse(gp.S_tilde, centroid) if gp is not None else \
            mx.guiding_mse(np.zeros((hp.n_points, 3)), centroid)
        records.append({
            "id": itx.id,
            "cd": mx.chamfer(pred, s.target),
            "emd": mx.emd(pred, s.target),
            "f1": mx.f1(pred, s.target, tau=f1_tau),
            "guiding_mse": gmse,
            "ip3d": mx.ip_3d(pred, s.entities),
        })
    agg = mx.MetricReport(
        cd=float(np.mean([r["cd"] for r in records])),
        emd=float(np.mean([r["emd"] for r in records])),
        f1=float(np.mean([r["f1"] for r in records])),
        guiding_mse=float(np.mean([r["guiding_mse"] for r in records])),
        ip3d=float(np.mean([r["ip3d"] for r in records])),
    )
    return agg, records


def save_eval_report(aggregate: mx.MetricReport, records: list[dict], path):
    lines = [json.dumps(r) for r in records]
    lines.append(json.dumps({"aggregate": aggregate.to_dict()}))
    Path(path).write_text("\n".join(lines) + "\n")


def load_eval_report(path) -> tuple[dict, list[dict]]:
    records, aggregate = [], None
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if "aggregate" in rec:
            aggregate = rec["aggregate"]
        else:
            records.append(rec)
    return aggregate, records


# ------------------------------------------------------- ablation matrix

def run_ablation_matrix(train_seeds, test_seeds, base_config: TrainConfig,
                        gen_config: GenConfig, n_variants=(64, 128, 256),
                        modes=ABLATION_FLAGS, eval_seed: int = 0,
                        log_hook=None) -> list[dict]:
    """Train/evaluate every condition-ablation flag at the base size, plus
    full-model runs at each point-count variant.  Returns table rows."""
    rows = []

    def one(label, mode, hp, gcfg):
        data = generate_dataset(train_seeds, gcfg)
        test = generate_dataset(test_seeds, gcfg)
        cfg = replace(base_config, hyperparams=hp, ablation=mode)
        model, _ = train(data, cfg, log_hook=None)
        agg, _ = evaluate_model(model, test, eval_seed=eval_seed)
        row = {"label": label, "mode": mode, "n_points": hp.n_points,
               **agg.to_dict()}
        rows.append(row)
        if log_hook:
            log_hook(row)
        return row

    base_hp = base_config.hyperparams
    for mode in modes:
        one(f"{mode}@N={base_hp.n_points}", mode, base_hp, gen_config)
    for n in n_variants:
        if n == base_hp.n_points and any(r["mode"] == "full" for r in rows):
            continue
        hp = replace(base_hp, n_points=n,
                     context_points=min(n, base_hp.context_points or n))
        gcfg = replace(gen_config, n_points=n)
        one(f"full@N={n}", "full", hp, gcfg)
    return rows


def matrix_to_markdown(rows: list[dict]) -> str:
    cols = ["label", "cd", "emd", "f1", "guiding_mse"]
    head = "| " + " | ".join(cols) + " |"
    sep = "|" + "|".join("---" for _ in cols) + "|"
    body = ["| " + " | ".join(
        (row[c] if isinstance(row[c], str) else f"{row[c]:.4f}") for c in cols) + " |"
        for row in rows]
    return "\n".join([head, sep] + body) + "\n"


def matrix_to_csv(rows: list[dict]) -> str:
    cols = ["label", "mode", "n_points", "cd", "emd", "f1", "guiding_mse"]
    out = [",".join(cols)]
    for row in rows:
        out.append(",".join(str(row[c]) for c in cols))
    return "\n".join(out) + "\n"
