"""Patience-based early stopping on a periodically evaluated metric."""

from dataclasses import dataclass, field
import math

CONTINUE = "continue"
STOP = "stop"


@dataclass
class EarlyStopping:
    """Track the best validation value and decide when training should end.

    ``patience`` counts evaluations, not epochs. Stopping on patience is only
    allowed once ``min_epochs`` have run; ``max_epochs`` always stops.
    """

    min_epochs: int = 200
    max_epochs: int = 400
    eval_every: int = 5
    patience: int = 5
    metric: str = "NDCG"
    cutoff: int = 10
    best_value: float = -math.inf
    best_epoch: int = 0
    evaluations: int = 0
    since_best: int = 0
    stopped_epoch: int | None = None
    trace: list = field(default_factory=list)

    def __post_init__(self):
        if self.min_epochs < 0 or self.max_epochs < 1:
            raise ValueError("epoch bounds must be positive")
        if self.min_epochs > self.max_epochs:
            raise ValueError(f"min_epochs ({self.min_epochs}) exceeds max_epochs ({self.max_epochs})")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be at least 1")

    def should_evaluate(self, epoch):
        return epoch % self.eval_every == 0 or epoch >= self.max_epochs

    def reset(self):
        self.best_value = -math.inf
        self.best_epoch = 0
        self.evaluations = 0
        self.since_best = 0
        self.stopped_epoch = None
        self.trace = []

    def settings(self):
        return {"min_epochs": self.min_epochs, "max_epochs": self.max_epochs,
                "eval_every": self.eval_every, "patience": self.patience,
                "metric": f"{self.metric}@{self.cutoff}"}


def early_stop_step(state, epoch, value):
    """Record ``value`` observed at ``epoch`` and return ``"continue"`` or ``"stop"``."""
    state.evaluations += 1
    state.trace.append((int(epoch), float(value)))
    if math.isfinite(value) and value > state.best_value:
        state.best_value = float(value)
        state.best_epoch = int(epoch)
        state.since_best = 0
    else:
        state.since_best += 1
    if epoch >= state.max_epochs or (epoch >= state.min_epochs and state.since_best >= state.patience):
        state.stopped_epoch = int(epoch)
        return STOP
    return CONTINUE
