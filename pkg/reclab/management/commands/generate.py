import logging

from reclab.ingest import MovieLensFormat, generate_zipf, serialize_movielens
from reclab.management.base import ReclabCommand
from utils.renderers import write_atomic

logger = logging.getLogger(__name__)


class Command(ReclabCommand):
    help = 'Write a synthetic MovieLens-100K style file with Zipf item popularity.'

    def add_arguments(self, parser):
        parser.add_argument('--n-users', type=int, required=True)
        parser.add_argument('--n-items', type=int, required=True)
        parser.add_argument('--n-ratings', type=int, required=True)
        parser.add_argument('--exponent', type=float, default=1.0)
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--r-max', type=int, default=5)
        parser.add_argument('--out', required=True, help='destination file')

    def execute_command(self, **options):
        dataset = generate_zipf(
            options['n_users'],
            options['n_items'],
            options['n_ratings'],
            exponent=options['exponent'],
            r_max=options['r_max'],
            seed=options['seed'],
        )
        path = write_atomic(options['out'], serialize_movielens(dataset, MovieLensFormat.TAB_100K))
        logger.info('wrote %d ratings to %s', len(dataset), path)
        self.stdout.write(f'{len(dataset)} ratings written to {path}')
