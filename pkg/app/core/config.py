"""Run configuration: flag > file > default.

The config file is flat ``key = value`` text (``#`` comments, optional
quotes), parsed with python-dotenv and validated by RunConfigSerializer.
"""
from dataclasses import asdict, dataclass
from pathlib import Path

from dotenv import dotenv_values

from core.exceptions import InvalidConfig
from core.serializers import ModelConfigSerializer, OptimConfigSerializer, RunConfigSerializer
from network.model import ModelConfig
from network.optim import OptimState


@dataclass(frozen=True)
class OptimConfig:
    optimizer: str = 'adam'
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 16
    epochs: int = 50
    steps_per_epoch: int = 0
    clip_norm: float = 0.0
    eval_interval: int = 0

    def new_state(self):
        return OptimState(
            kind=self.optimizer, lr=self.lr, beta1=self.beta1,
            beta2=self.beta2, eps_adam=self.adam_eps,
        )


@dataclass(frozen=True)
class DataConfig:
    data_root: str
    patch: int = 32
    split_ratio: float = 0.9
    seed: int = 0
    flip: bool = False
    workers: int = 1


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig
    optim: OptimConfig
    data: DataConfig
    output_dir: str = 'runs/latest'

    def to_dict(self):
        return asdict(self)


def config_keys():
    """Every flat key with its serializer field, in declaration order"""
    return RunConfigSerializer().fields


def read_config_file(path):
    path = Path(path)
    if not path.is_file():
        raise InvalidConfig(f'config file {path} does not exist')
    values = dotenv_values(path)
    unknown = set(values) - set(config_keys())
    if unknown:
        raise InvalidConfig(f'unknown config keys in {path.name}: {", ".join(sorted(unknown))}')
    return values


def _errors_text(errors):
    return '; '.join(f'{key}: {" ".join(str(m) for m in messages)}' for key, messages in errors.items())


def build_run_config(path=None, overrides=None):
    """Merge defaults, file values and non-None overrides into a RunConfig"""
    raw = read_config_file(path) if path else {}
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    serializer = RunConfigSerializer(data=raw)
    if not serializer.is_valid():
        raise InvalidConfig(_errors_text(serializer.errors))
    values = dict(serializer.validated_data)
    model = ModelConfig(**{k: values[k] for k in ModelConfigSerializer().fields}).validate()
    optim = OptimConfig(**{k: values[k] for k in OptimConfigSerializer().fields})
    data = DataConfig(**{k: values[k] for k in ('data_root', 'patch', 'split_ratio', 'seed', 'flip', 'workers')})
    return RunConfig(model, optim, data, values['output_dir'])
