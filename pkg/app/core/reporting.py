"""CSV reports for benchmark/evaluation scores and the training log."""
import csv
import math
from pathlib import Path

from imaging.metrics import MetricReport

BENCH_HEADER = ['method', 'image', 'psnr_db', 'ssim']
TRAIN_HEADER = ['step', 'epoch', 'train_loss', 'val_psnr']
MEAN_ROW = 'MEAN'


def format_float(value):
    """Shortest round-trippable text; infinity is written as inf"""
    value = float(value)
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return repr(value)


def write_bench_csv(path, reports):
    """One row per (method, image), then one MEAN row per method"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(BENCH_HEADER)
        for report in reports:
            for score in report.images:
                writer.writerow([report.method, score.image, format_float(score.psnr_db), format_float(score.ssim)])
        for report in reports:
            writer.writerow([report.method, MEAN_ROW, format_float(report.mean_psnr), format_float(report.mean_ssim)])


def read_bench_csv(path):
    """Parse a bench CSV back into (reports by method, stored means by method)"""
    reports = {}
    means = {}
    with Path(path).open(newline='', encoding='utf-8') as fh:
        for row in csv.DictReader(fh):
            method = row['method']
            psnr_db, ssim_value = float(row['psnr_db']), float(row['ssim'])
            if row['image'] == MEAN_ROW:
                means[method] = (psnr_db, ssim_value)
            else:
                reports.setdefault(method, MetricReport(method)).add(row['image'], psnr_db, ssim_value)
    return reports, means


class TrainLog:
    """Append-only CSV of step, epoch, train_loss, val_psnr"""

    def __init__(self, path, append=False):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not (append and self.path.exists()):
            with self.path.open('w', newline='', encoding='utf-8') as fh:
                csv.writer(fh, lineterminator='\n').writerow(TRAIN_HEADER)

    def write(self, step, epoch, train_loss, val_psnr):
        with self.path.open('a', newline='', encoding='utf-8') as fh:
            csv.writer(fh, lineterminator='\n').writerow(
                [step, epoch, format_float(train_loss), format_float(val_psnr)]
            )

    def rows(self):
        with self.path.open(newline='', encoding='utf-8') as fh:
            return list(csv.DictReader(fh))
