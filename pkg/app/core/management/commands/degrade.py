from pathlib import Path

import numpy as np

from core.exceptions import EmptyDataset, InvalidConfig
from core.management.commands._base import SrresCommand
from imaging.baselines import degrade
from imaging.data import list_images, load_pixels, save_image


class Command(SrresCommand):
    """Django command to write the LR version of every PNG in a directory"""
    help = 'Degrade HR images with antialiased bicubic downscaling'

    def add_arguments(self, parser):
        parser.add_argument('--input', required=True)
        parser.add_argument('--scale', type=int, required=True)
        parser.add_argument('--out', required=True)

    def handle(self, *args, **options):
        if options['scale'] < 1:
            raise InvalidConfig('scale must be at least 1')
        files = list_images(options['input'])
        if not files:
            raise EmptyDataset(f'no PNG images under {options["input"]}')
        out_dir = Path(options['out'])
        for path in files:
            lr = np.clip(degrade(load_pixels(path), options['scale']), 0.0, 1.0)
            save_image(lr, out_dir / path.name)
        self.stdout.write(self.style.SUCCESS(f'Degraded {len(files)} images into {out_dir}'))
