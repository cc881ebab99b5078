from core.config import build_run_config, config_keys
from core.management.commands._base import SrresCommand
from core.training import train


class Command(SrresCommand):
    """Django command to train a super-resolution model"""
    help = 'Train a model; every config key can be overridden with a --kebab-case flag'

    def add_arguments(self, parser):
        parser.add_argument('--config', help='flat key = value run configuration file')
        parser.add_argument('--resume', action='store_true', help='continue from last.srck in the output dir')
        for name, field in config_keys().items():
            parser.add_argument(
                '--' + name.replace('_', '-'), dest=name, default=None,
                help=field.help_text or f'override {name}',
            )

    def handle(self, *args, **options):
        overrides = {name: options.get(name) for name in config_keys()}
        config = build_run_config(options['config'], overrides)
        self.stdout.write(f'Training x{config.model.scale} model into {config.output_dir}')
        result = train(config, resume=options['resume'])
        self.stdout.write(self.style.SUCCESS(
            f'Trained {result.steps} steps, best val PSNR {result.best_val_psnr:.4f} dB'
        ))
