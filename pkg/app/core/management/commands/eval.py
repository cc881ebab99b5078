from core.evaluation import run_eval
from core.management.commands._base import SrresCommand
from core.reporting import write_bench_csv


class Command(SrresCommand):
    """Django command to score a checkpoint on a directory of HR images"""
    help = 'Evaluate a checkpoint with PSNR/SSIM on luma'

    def add_arguments(self, parser):
        parser.add_argument('--ckpt', required=True)
        parser.add_argument('--data', required=True)
        parser.add_argument('--report', required=True)

    def handle(self, *args, **options):
        report = run_eval(options['ckpt'], options['data'])
        write_bench_csv(options['report'], [report])
        self.stdout.write(self.style.SUCCESS(
            f'{len(report.images)} images: PSNR {report.mean_psnr:.4f} dB, SSIM {report.mean_ssim:.4f}'
        ))
