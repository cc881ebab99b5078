from core.evaluation import run_bench
from core.management.commands._base import SrresCommand
from core.reporting import write_bench_csv


class Command(SrresCommand):
    """Django command to compare interpolation baselines and checkpoints"""
    help = 'Benchmark nearest, bilinear, bicubic and model:<ckpt> methods'

    def add_arguments(self, parser):
        parser.add_argument('--data', required=True)
        parser.add_argument('--methods', default='nearest,bilinear,bicubic')
        parser.add_argument('--scale', type=int, default=2)
        parser.add_argument('--report', required=True)
        parser.add_argument('--border', type=int, default=None, help='border crop in pixels (default: scale)')

    def handle(self, *args, **options):
        reports = run_bench(options['data'], options['methods'], options['scale'], border=options['border'])
        write_bench_csv(options['report'], reports)
        for report in reports:
            self.stdout.write(f'{report.method}: PSNR {report.mean_psnr:.4f} dB, SSIM {report.mean_ssim:.4f}')
        self.stdout.write(self.style.SUCCESS(f'Report written to {options["report"]}'))
