"""Fine-tuning loop: in-batch ranking loss, AdamW, linear schedule.

Negatives are implicit: inside a batch, every other pair's positive is a
negative for a query. Validation loss is measured every ``eval_steps``
optimizer steps, the best (lowest validation loss) weights are kept, and
training stops early after ``patience`` evaluations without improvement.
"""

from __future__ import annotations

import copy
import math
import random
from dataclasses import dataclass, field

import torch

from faqembed import ConfigError, DataError
from faqembed.data import batches
from faqembed.model import HashEmbedder
from faqembed.presets import get_preset


@dataclass
class TrainConfig:
    model_name: str = "intfloat/e5-base"
    batch_size: int = 8
    learning_rate: float | None = None  # None: take the preset's rate
    warmup_ratio: float = 0.01
    eval_steps: int = 100
    patience: int = 5
    mixed_precision: bool = True
    seed: int = 0
    max_steps: int = 500
    scale: float = 20.0
    hash_buckets: int = 4096

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if not 0.0 <= self.warmup_ratio <= 1.0:
            raise ConfigError("warmup_ratio must lie in [0, 1]")
        if self.eval_steps < 1 or self.patience < 1 or self.max_steps < 1:
            raise ConfigError("eval_steps, patience, and max_steps must be >= 1")
        if self.scale <= 0:
            raise ConfigError("scale must be > 0")


def batch_loss(model: HashEmbedder, batch: list[tuple[str, str]], scale: float) -> torch.Tensor:
    """Softmax cross-entropy over the batch's query/positive cosine matrix."""
    queries = model.forward([model.query_prefix + q for q, _ in batch])
    positives = model.forward([model.passage_prefix + p for _, p in batch])
    logits = scale * queries @ positives.T
    labels = torch.arange(len(batch))
    return torch.nn.functional.cross_entropy(logits, labels)


@torch.no_grad()
def validation_loss(model: HashEmbedder, pairs: list[tuple[str, str]], batch_size: int, scale: float) -> float:
    """Mean ranking loss over the validation pairs in fixed batch order."""
    was_training = model.training
    model.eval()
    total, count = 0.0, 0
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start : start + batch_size]
        total += float(batch_loss(model, chunk, scale)) * len(chunk)
        count += len(chunk)
    if was_training:
        model.train()
    return total / count


def _linear_schedule(step: int, warmup_steps: int, total_steps: int) -> float:
    if warmup_steps > 0 and step < warmup_steps:
        return (step + 1) / warmup_steps
    if total_steps <= warmup_steps:
        return 1.0
    remaining = total_steps - step
    return max(0.0, remaining / (total_steps - warmup_steps))


@dataclass
class TrainResult:
    model: HashEmbedder
    best_val_loss: float
    best_step: int
    steps_run: int
    stopped_early: bool
    train_losses: list[float] = field(default_factory=list)
    val_history: list[tuple[int, float]] = field(default_factory=list)


def finetune(
    train_pairs: list[tuple[str, str]],
    val_pairs: list[tuple[str, str]],
    config: TrainConfig = TrainConfig(),
) -> TrainResult:
    """Train a fresh model from a named preset; returns the best checkpoint.

    ``mixed_precision`` engages autocast only on CUDA; on CPU training runs
    in full precision so losses stay bit-reproducible.
    """
    if not train_pairs:
        raise DataError("empty training set")
    if not val_pairs:
        raise DataError("empty validation set")
    preset = get_preset(config.model_name)
    lr = config.learning_rate if config.learning_rate is not None else preset.learning_rate

    torch.manual_seed(config.seed)
    model = HashEmbedder(
        n_buckets=config.hash_buckets,
        dim=preset.dim,
        query_prefix=preset.query_prefix,
        passage_prefix=preset.passage_prefix,
        model_name=config.model_name,
    )
    optimizer = torch.optim.AdamW(model.parameters(), lr=lr)
    warmup_steps = int(round(config.warmup_ratio * config.max_steps))
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda step: _linear_schedule(step, warmup_steps, config.max_steps)
    )
    use_autocast = config.mixed_precision and torch.cuda.is_available()

    rng = random.Random(config.seed)
    best_state = copy.deepcopy(model.state_dict())
    best_val = math.inf
    best_step = 0
    evals_since_best = 0
    train_losses: list[float] = []
    val_history: list[tuple[int, float]] = []
    step = 0
    stopped_early = False

    model.train()
    while step < config.max_steps and not stopped_early:
        for batch in batches(train_pairs, config.batch_size, rng):
            if step >= config.max_steps:
                break
            optimizer.zero_grad()
            if use_autocast:
                with torch.autocast("cuda"):
                    loss = batch_loss(model, batch, config.scale)
            else:
                loss = batch_loss(model, batch, config.scale)
            loss.backward()
            optimizer.step()
            scheduler.step()
            train_losses.append(loss.detach().item())
            step += 1

            if step % config.eval_steps == 0:
                val = validation_loss(model, val_pairs, config.batch_size, config.scale)
                val_history.append((step, val))
                if val < best_val:
                    best_val = val
                    best_step = step
                    best_state = copy.deepcopy(model.state_dict())
                    evals_since_best = 0
                else:
                    evals_since_best += 1
                    if evals_since_best >= config.patience:
                        stopped_early = True
                        break

    # final evaluation so short runs still pick the best weights
    if not val_history or val_history[-1][0] != step:
        val = validation_loss(model, val_pairs, config.batch_size, config.scale)
        val_history.append((step, val))
        if val < best_val:
            best_val = val
            best_step = step
            best_state = copy.deepcopy(model.state_dict())

    model.load_state_dict(best_state)
    model.eval()
    return TrainResult(
        model=model,
        best_val_loss=best_val,
        best_step=best_step,
        steps_run=step,
        stopped_early=stopped_early,
        train_losses=train_losses,
        val_history=val_history,
    )
