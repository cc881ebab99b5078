"""Training loop: patch sampling, forward/backward, optimizer steps,
validation PSNR, checkpointing.

Single-threaded runs with the same config and seed produce identical
checkpoints. ``workers > 1`` decodes images in parallel; the numbers do not
change, only the load time.
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

import numpy as np

from core.exceptions import InvalidState, NonFiniteLoss
from core.reporting import TrainLog
from imaging.data import ImageStore, build_manifest, sample_patches, stack_pairs
from imaging.metrics import crop_border, psnr
from network.checkpoint import load_checkpoint, read_tensors, save_checkpoint, write_tensors
from network.model import model_backward, model_forward, model_init, model_summary, super_resolve
from network.optim import Optimizer, clip_grad_norm, mse_loss
from network.tensor import Rng

logger = logging.getLogger(__name__)

BEST = 'best.srck'
LAST = 'last.srck'
LAST_OPTIM = 'last.optim.srck'
LOG = 'train_log.csv'
MANIFEST = 'manifest.json'


@dataclass
class TrainingResult:
    epoch_losses: List[float] = field(default_factory=list)
    best_val_psnr: float = -math.inf
    steps: int = 0
    output_dir: Path = None


class Trainer:
    """Owns the model, optimizer and sampler of one run"""

    def __init__(self, config):
        self.config = config
        self.output_dir = Path(config.output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        data = config.data
        self.manifest = build_manifest(data.data_root, config.model.scale, data.split_ratio, data.seed, data.patch)
        self.manifest.save(self.output_dir / MANIFEST)
        self.store = ImageStore(self.manifest, channels=config.model.channels, workers=data.workers)
        self.rng = Rng(data.seed)
        self.model = model_init(config.model, self.rng)
        self.optimizer = Optimizer(config.optim.new_state())
        self.start_epoch = 1
        self.best_val_psnr = -math.inf
        self.step = 0

    def steps_per_epoch(self):
        optim = self.config.optim
        if optim.steps_per_epoch:
            return optim.steps_per_epoch
        grid = self.store.grid_patch_count('train', self.config.data.patch)
        return max(1, math.ceil(grid / optim.batch_size))

    def resume(self):
        """Continue from last.srck and its optimizer moments"""
        last = self.output_dir / LAST
        model, meta = load_checkpoint(last)
        if model.config != self.config.model:
            raise InvalidState('last checkpoint was trained with a different model config')
        self.model = model
        moments, optim_meta = read_tensors(self.output_dir / LAST_OPTIM)
        self.optimizer.load_moments(moments, optim_meta['t'])
        self.start_epoch = meta['epoch'] + 1
        self.step = meta['step']
        self.best_val_psnr = meta.get('best_val_psnr', -math.inf)
        self.rng.state = int(optim_meta['rng_state'])
        logger.info('resuming at epoch %d, step %d', self.start_epoch, self.step)

    def train_step(self):
        optim = self.config.optim
        pairs = sample_patches(
            self.store, optim.batch_size, self.config.data.patch, self.rng, flip=self.config.data.flip,
        )
        lr_batch, hr_batch = stack_pairs(pairs)
        sr, cache = model_forward(self.model, lr_batch, 'train')
        loss, d_sr = mse_loss(sr, hr_batch)
        if not math.isfinite(loss.value):
            raise NonFiniteLoss(f'loss became {loss.value} at step {self.step + 1}')
        grads = model_backward(self.model, cache, d_sr)
        if optim.clip_norm:
            clip_grad_norm(grads, optim.clip_norm)
        self.optimizer.step(self.model, grads)
        self.step += 1
        return loss.value

    def validate(self):
        """Mean PSNR of the model over the validation images"""
        r = self.config.model.scale
        scores = []
        for name in self.store.names('val'):
            hr, lr = self.store.get(name)
            sr = super_resolve(self.model, lr)
            scores.append(psnr(crop_border(sr, r), crop_border(hr, r)))
        return float(np.mean(scores))

    def _checkpoint(self, path, epoch):
        save_checkpoint(path, self.model, epoch=epoch, step=self.step, best_val_psnr=self.best_val_psnr)

    def _evaluate(self, log, epoch, train_loss):
        val_psnr = self.validate()
        log.write(self.step, epoch, train_loss, val_psnr)
        logger.info('epoch %d step %d: train loss %.6g, val PSNR %.4f dB', epoch, self.step, train_loss, val_psnr)
        if val_psnr > self.best_val_psnr:
            self.best_val_psnr = val_psnr
            self._checkpoint(self.output_dir / BEST, epoch)
            logger.info('new best checkpoint at %.4f dB', val_psnr)

    def run(self, resume=False):
        if resume:
            self.resume()
        for line in model_summary(self.model):
            logger.debug(line)
        log = TrainLog(self.output_dir / LOG, append=resume)
        optim = self.config.optim
        steps = self.steps_per_epoch()
        result = TrainingResult(output_dir=self.output_dir)
        logger.info('training %d epochs of %d steps, batch %d', optim.epochs, steps, optim.batch_size)
        for epoch in range(self.start_epoch, optim.epochs + 1):
            losses = []
            for _ in range(steps):
                losses.append(self.train_step())
                if optim.eval_interval and self.step % optim.eval_interval == 0:
                    self._evaluate(log, epoch, float(np.mean(losses)))
            epoch_loss = float(np.mean(losses))
            result.epoch_losses.append(epoch_loss)
            if not optim.eval_interval:
                self._evaluate(log, epoch, epoch_loss)
            self._checkpoint(self.output_dir / LAST, epoch)
            write_tensors(
                self.output_dir / LAST_OPTIM, self.optimizer.moments(),
                {'t': self.optimizer.state.t, 'epoch': epoch, 'rng_state': str(self.rng.state)},
            )
        result.best_val_psnr = self.best_val_psnr
        result.steps = self.step
        return result


def train(config, resume=False):
    return Trainer(config).run(resume=resume)
