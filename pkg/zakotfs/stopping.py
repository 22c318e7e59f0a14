from collections import defaultdict
from typing import Dict, Iterable, List


class StoppingRule:
    """Per-point Monte Carlo budget: stop at `trials` frames or once every scheme has `min_errors` bit errors"""

    def __init__(self, trials: int, min_errors: int, batch_size: int, schemes: Iterable[str]):
        if trials < 1 or batch_size < 1:
            raise ValueError("trials and batch_size must be at least 1")
        self.trials = int(trials)
        self.min_errors = int(min_errors)
        self.batch_size = int(batch_size)
        self.schemes: List[str] = list(schemes)

        # Errors and frames seen so far per scheme
        self.bit_errors: Dict[str, int] = defaultdict(int)
        self.frames = 0

    @classmethod
    def from_config(cls, config) -> 'StoppingRule':
        return cls(config.trials, config.min_errors, config.batch_size, [s.name for s in config.schemes])

    def next_batch(self) -> range:
        """Trial indices of the next batch; empty when the point is done"""
        if self.is_done():
            return range(0)
        return range(self.frames, min(self.frames + self.batch_size, self.trials))

    def record(self, errors: Dict[str, int], frames: int = 1):
        """Record the bit errors of finished frames"""
        for name, count in errors.items():
            self.bit_errors[name] += int(count)
        self.frames += int(frames)

    def enough_errors(self) -> bool:
        # min_errors of 0 disables early stopping
        if self.min_errors <= 0 or not self.schemes:
            return False
        return all(self.bit_errors[name] >= self.min_errors for name in self.schemes)

    def is_done(self) -> bool:
        return self.frames >= self.trials or self.enough_errors()

    def get_stats(self) -> Dict[str, int]:
        return {
            'frames': self.frames,
            'trials': self.trials,
            'min_errors': self.min_errors,
            'fewest_errors': min((self.bit_errors[name] for name in self.schemes), default=0),
        }

    def reset(self):
        self.bit_errors.clear()
        self.frames = 0
