from core.evaluation import super_resolve_image
from core.management.commands._base import SrresCommand
from imaging.data import load_pixels, save_image
from network.checkpoint import load_checkpoint


class Command(SrresCommand):
    """Django command to super-resolve one PNG"""
    help = 'Upscale an image with a trained checkpoint'

    def add_arguments(self, parser):
        parser.add_argument('--ckpt', required=True)
        parser.add_argument('--input', required=True)
        parser.add_argument('--out', required=True)

    def handle(self, *args, **options):
        model, _ = load_checkpoint(options['ckpt'])
        x = load_pixels(options['input'])
        sr = super_resolve_image(model, x)
        save_image(sr, options['out'])
        self.stdout.write(self.style.SUCCESS(
            f'Wrote {sr.shape[3]}x{sr.shape[2]} image to {options["out"]}'
        ))
