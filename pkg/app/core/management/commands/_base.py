import sys

from django.core.management.base import BaseCommand, CommandError

from core.exceptions import SrresError


class SrresCommand(BaseCommand):
    """Base for srres commands: engine errors become exit codes 1-3"""
    requires_system_checks = []

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        # argument errors raise CommandError, which exits with the usage code 1
        parser.called_from_command_line = False
        return parser

    def run_from_argv(self, argv):
        parser = self.create_parser(argv[0], argv[1])
        try:
            parser.parse_args(argv[2:])
        except CommandError as exc:
            self.stderr.write(f'{parser.format_usage()}{exc}')
            sys.exit(exc.returncode)
        return super().run_from_argv(argv)

    def execute(self, *args, **options):
        try:
            return super().execute(*args, **options)
        except SrresError as exc:
            raise CommandError(f'{exc.__class__.__name__}: {exc}', returncode=exc.exit_code) from exc
