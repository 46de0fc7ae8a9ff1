import json
from pathlib import Path

import numpy as np
from django.core.management.base import BaseCommand, CommandError

from gridflow.engine import load_scenario, locate_document, run
from gridflow.exceptions import ConfigurationError, GridflowError
from gridflow.grid import load_case
from gridflow.models import SimulationRun
from gridflow.oracle import compare_dispatch
from gridflow.reporting import summarize, write_trace_csv

CONFIG_ERROR = 1
RUNTIME_ERROR = 2


class Command(BaseCommand):
    help = 'Run, compare or validate distributed DC-OPF scenarios'

    def add_arguments(self, parser):
        subcommands = parser.add_subparsers(dest='subcommand', required=True)

        run_parser = subcommands.add_parser('run', help='Simulate a scenario and write trace.csv and summary.json')
        self._add_scenario_arguments(run_parser)
        run_parser.add_argument('--out', default='out', help='Output directory')
        run_parser.add_argument('--csv-downsample', type=int, default=1, help='Keep every N-th trace row')
        run_parser.add_argument('--record', action='store_true', help='Store the run in the database')

        compare_parser = subcommands.add_parser('compare', help='Compare the distributed steady state with the oracles')
        self._add_scenario_arguments(compare_parser)
        compare_parser.add_argument('--grid-step', type=float, default=1.0, help='Brute-force grid step in MW')

        validate_parser = subcommands.add_parser('validate', help='Schema-check a scenario or case file')
        validate_parser.add_argument('--scenario', required=True, help='Scenario or case JSON file')

    def _add_scenario_arguments(self, parser):
        parser.add_argument('--scenario', required=True, help='Scenario JSON file')
        parser.add_argument('--seed', type=int, help='Override the scenario seed')
        parser.add_argument('--duration', type=float, help='Override the simulated duration in seconds')
        parser.add_argument('--disable-constraint', action='store_true', help='Turn the constraint layer off')
        parser.add_argument('--disable-penalty', action='store_true', help='Turn the penalty term off')
        parser.add_argument('--meter-noise', type=float, help='Meter noise sigma in p.u.')

    def handle(self, *args, **options):
        subcommand = options['subcommand']
        handler = getattr(self, f'handle_{subcommand}')
        payload = handler(options)
        self.stdout.write(json.dumps(payload, indent=2, sort_keys=True))

    def _scenario(self, options):
        try:
            scenario = load_scenario(options['scenario'])
            return scenario.with_overrides(
                seed=options.get('seed'),
                duration=options.get('duration'),
                constraint=False if options.get('disable_constraint') else None,
                penalty=False if options.get('disable_penalty') else None,
                meter_noise=options.get('meter_noise'),
            )
        except GridflowError as e:
            self.stderr.write(self.style.ERROR(str(e)))
            if e.detail:
                self.stderr.write(json.dumps(e.detail, default=str))
            raise CommandError(f"Invalid scenario: {e}", returncode=CONFIG_ERROR)

    def _run(self, scenario):
        try:
            return run(scenario)
        except ConfigurationError as e:
            # raised while setting up, before the first step
            self.stderr.write(self.style.ERROR(str(e)))
            raise CommandError(f"Invalid scenario: {e}", returncode=CONFIG_ERROR)
        except (GridflowError, ArithmeticError, np.linalg.LinAlgError) as e:
            self.stderr.write(self.style.ERROR(str(e)))
            raise CommandError(f"Simulation failed: {e}", returncode=RUNTIME_ERROR)

    def handle_run(self, options):
        scenario = self._scenario(options)
        trace = self._run(scenario)
        watch = [int(line) for line in scenario.document.get('line_limits', {})]
        summary = summarize(trace, watch_lines=watch).as_dict()

        out = Path(options['out'])
        try:
            out.mkdir(parents=True, exist_ok=True)
            write_trace_csv(trace, out / 'trace.csv', options['csv_downsample'])
            (out / 'summary.json').write_text(json.dumps(summary, indent=2, sort_keys=True))
        except OSError as e:
            self.stderr.write(self.style.ERROR(str(e)))
            raise CommandError(f"Could not write artifacts to {out}", returncode=RUNTIME_ERROR)

        if options['record']:
            SimulationRun.objects.create(
                name=scenario.name,
                source='cli',
                scenario=scenario.as_document(),
                seed=scenario.seed,
                duration=scenario.duration,
                constraint_enabled=scenario.switches.constraint,
                penalty_enabled=scenario.switches.penalty,
                meter_noise=scenario.meter_sigma,
                summary=json.loads(json.dumps(summary)),
            )
        self.stderr.write(self.style.SUCCESS(f"Wrote {out / 'trace.csv'} and {out / 'summary.json'}"))
        return summary

    def handle_compare(self, options):
        scenario = self._scenario(options)
        trace = self._run(scenario)
        if not len(trace):
            raise CommandError("Nothing to compare for a zero-duration scenario", returncode=CONFIG_ERROR)
        try:
            table = compare_dispatch(
                scenario.case, trace.act[-1], scenario.case.demand_mw(trace.t[-1]),
                step=options['grid_step'], t=trace.t[-1],
            )
        except GridflowError as e:
            self.stderr.write(self.style.ERROR(str(e)))
            raise CommandError(f"Oracle failed: {e}", returncode=RUNTIME_ERROR)
        return {'summary': summarize(trace).as_dict(), 'comparison': table}

    def handle_validate(self, options):
        path = locate_document(options['scenario'])
        try:
            document = json.loads(path.read_text())
            if isinstance(document, dict) and 'buses' in document:
                case = load_case(document, name=path.stem)
                kind = 'case'
            else:
                case = load_scenario(path).case
                kind = 'scenario'
        except (OSError, json.JSONDecodeError) as e:
            self.stderr.write(self.style.ERROR(str(e)))
            raise CommandError(f"Cannot read {path}", returncode=CONFIG_ERROR)
        except GridflowError as e:
            self.stderr.write(self.style.ERROR(str(e)))
            if e.detail:
                self.stderr.write(json.dumps(e.detail, default=str))
            raise CommandError(f"Invalid {path.name}: {e}", returncode=CONFIG_ERROR)
        return {
            'valid': True,
            'kind': kind,
            'buses': case.n_buses,
            'lines': case.n_lines,
            'generators': case.n_generators,
            'loads': len(case.loads),
        }
