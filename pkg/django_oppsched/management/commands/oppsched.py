from dataclasses import replace

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from django_oppsched.choices import ReportFormat
from django_oppsched.exceptions import DomainError, ScenarioError
from django_oppsched.forms import SweepField
from django_oppsched.runner import (
    compare,
    emit_report,
    plan_sweep,
    render_report,
)
from django_oppsched.scenario import read_scenario
from django_oppsched.utils import get_option

VALIDATION_ERROR = 2
RUNTIME_ERROR = 3


def _message(error):
    if isinstance(error, ValidationError):
        return "; ".join(error.messages)
    return str(error)


class Command(BaseCommand):
    help = (
        "Simulate a threshold scheduling scenario, optionally over a sweep, "
        "and report simulated against analytic values. Flags override the "
        "scenario file, which overrides OPPSCHED_* settings."
    )

    def add_arguments(self, parser):
        parser.add_argument("--scenario", required=True, help="Scenario file")
        parser.add_argument(
            "--sweep", help="Sweep axis and values, e.g. k=1,2,3 or K=100,1000"
        )
        parser.add_argument("--slots", type=int, help="Slots per grid point")
        parser.add_argument("--seed", type=int, help="Simulation seed")
        parser.add_argument(
            "--format",
            choices=ReportFormat.values,
            default=ReportFormat.CSV,
            help="Report format",
        )
        parser.add_argument(
            "--out", help="Report file; the report is printed when omitted"
        )
        parser.add_argument(
            "--threads", type=int, help="Threads for simulation chunks"
        )
        parser.add_argument(
            "--timing",
            action="store_true",
            default=None,
            help="Add the runtime_seconds column",
        )

    def _plan(self, options):
        scenario = read_scenario(options["scenario"])
        config = scenario.config
        if options["slots"] is not None:
            if options["slots"] < 1:
                raise ValidationError("--slots must be at least 1")
            config = replace(config, slots=options["slots"])
        if options["seed"] is not None:
            if not 0 <= options["seed"] < 2**64:
                raise ValidationError("--seed must be a 64-bit unsigned value")
            config = replace(config, seed=options["seed"])
        if options["threads"] is not None and options["threads"] < 1:
            raise ValidationError("--threads must be at least 1")
        sweep = scenario.sweep
        if options["sweep"]:
            sweep = SweepField().clean(options["sweep"])
        return plan_sweep(config, sweep)

    def handle(self, *args, **options):
        try:
            configs = self._plan(options)
        except (ScenarioError, ValidationError) as e:
            raise CommandError(_message(e), returncode=VALIDATION_ERROR) from e

        threads = options["threads"] or get_option("threads")
        try:
            records = [compare(config, threads) for config in configs]
            if options["out"]:
                emit_report(
                    records,
                    options["format"],
                    options["out"],
                    options["timing"],
                )
            else:
                report = render_report(
                    records, options["format"], options["timing"]
                )
                self.stdout.write(report, ending="")
        except (DomainError, ScenarioError, OSError) as e:
            raise CommandError(str(e), returncode=RUNTIME_ERROR) from e

        if options["out"]:
            self.stderr.write(
                self.style.SUCCESS(
                    f"Wrote {len(records)} records to {options['out']}"
                )
            )
