import io
import logging
from pathlib import Path

from django.conf import settings
from rest_framework.parsers import JSONParser

from reclab.experiment import aggregate, load_dataset, report_frame, run_seed, versions
from reclab.management.base import ReclabCommand
from reclab.serializers import EvalReportSerializer, ExperimentConfigSerializer
from utils.renderers import write_csv, write_json

logger = logging.getLogger(__name__)


def read_config(path, out=None, repetitions=None, seed=None):
    """Parse the JSON config and apply command-line overrides on top of it."""
    data = JSONParser().parse(io.BytesIO(Path(path).read_bytes()))
    if isinstance(data, dict):
        if out is not None:
            data['output_dir'] = out
        if repetitions is not None:
            data['repetitions'] = repetitions
        if seed is not None:
            data['split'] = {**(data.get('split') or {}), 'seed': seed}
    serializer = ExperimentConfigSerializer(data=data)
    serializer.is_valid(raise_exception=True)
    return serializer


class Command(ReclabCommand):
    help = 'Benchmark the configured algorithms by test MAE over one or more seeded splits.'

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='experiment config (JSON)')
        parser.add_argument('--out', help='output directory, overrides output_dir')
        parser.add_argument('--repetitions', type=int, help='number of seeds, overrides repetitions')
        parser.add_argument('--seed', type=int, help='first seed, overrides split.seed')

    def execute_command(self, **options):
        serializer = read_config(options['config'], options.get('out'), options.get('repetitions'),
                                 options.get('seed'))
        config = serializer.save()
        threads = settings.RECLAB['THREADS']
        out = Path(config.output_dir)

        loaded = load_dataset(config.dataset)
        reports = []
        for seed in config.seeds:
            report = run_seed(loaded, config, seed, threads)
            seed_dir = out / f'seed-{seed}'
            write_json(seed_dir / 'report.json', EvalReportSerializer(report).data)
            write_csv(seed_dir / 'report.csv', report_frame(report))
            reports.append(report)

        summary = aggregate(reports)
        write_json(out / 'aggregate.json', {'seeds': config.seeds, 'rows': summary.to_dict(orient='records')})
        write_csv(out / 'aggregate.csv', summary)
        write_json(out / 'manifest.json', {
            'config': serializer.validated_data,
            'seeds': config.seeds,
            'versions': versions(),
        })
        logger.info('bench finished: %d seed(s) written to %s', len(reports), out)

        for row in summary.itertuples(index=False):
            self.stdout.write(f'{row.algo:<20} MAE {row.mean:.4f} +/- {row.std:.4f}')
