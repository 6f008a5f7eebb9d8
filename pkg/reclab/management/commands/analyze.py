from pathlib import Path

import pandas as pd
from django.conf import settings
from django.core.management.base import CommandError

from reclab.analysis import (
    diversity_order_invariant,
    diversity_ordered,
    fit_power_law,
    item_popularity_fit,
    rating_histogram,
)
from reclab.experiment import DATASET_FORMATS, DatasetSpec, load_dataset
from reclab.management.base import ReclabCommand
from reclab.serializers import DiversityInputSerializer, load
from utils.exceptionhandler import INPUT_ERROR
from utils.renderers import write_csv, write_json


def fit_payload(fit):
    return {'exponent': fit.exponent, 'log_intercept': fit.log_intercept, 'r_squared': fit.r_squared}


class Command(ReclabCommand):
    help = 'Zipf checks on a ratings file, or the global-diversity counts of a group description.'

    def add_arguments(self, parser):
        parser.add_argument('--mode', choices=['zipf', 'diversity'], required=True)
        parser.add_argument('--dataset', help='ratings file (zipf mode)')
        parser.add_argument('--format', choices=DATASET_FORMATS, default='TAB_100K')
        parser.add_argument('--r-max', type=int, help='rating scale maximum')
        parser.add_argument('--input', help='DiversityInput JSON (diversity mode)')
        parser.add_argument('--divide-by-m-factorial', action='store_true',
                            help="divide each term by M_i! instead of N!")
        parser.add_argument('--out', help='output directory')

    def execute_command(self, **options):
        out = Path(options.get('out') or settings.RECLAB['OUTPUT_DIR'])
        if options['mode'] == 'zipf':
            self.zipf(options, out)
        else:
            self.diversity(options, out)

    def zipf(self, options, out):
        if not options.get('dataset'):
            raise CommandError('--dataset is required in zipf mode', returncode=INPUT_ERROR)
        spec = DatasetSpec(options['dataset'], options['format'], r_max=options.get('r_max'))
        dataset = load_dataset(spec).dataset
        histogram = rating_histogram(dataset)
        value_fit = fit_power_law(histogram.points())
        fits = {'rating_values': fit_payload(value_fit)}
        if len(set(dataset.items.tolist())) >= 2:
            item_fit = item_popularity_fit(dataset)
            fits['item_popularity'] = {**fit_payload(item_fit), 'zipf_exponent': item_fit.zipf_exponent}

        write_json(out / 'histogram.json', {
            'counts': {str(value): count for value, count in histogram.counts.items()},
            'total': histogram.total,
        })
        write_csv(out / 'histogram.csv', pd.DataFrame(histogram.points(), columns=['value', 'count']))
        write_json(out / 'fit.json', fits)
        self.stdout.write(f'rating-value exponent {value_fit.exponent:.4f} (r2 {value_fit.r_squared:.4f})')

    def diversity(self, options, out):
        if not options.get('input'):
            raise CommandError('--input is required in diversity mode', returncode=INPUT_ERROR)
        data = load(DiversityInputSerializer, Path(options['input']).read_bytes())
        divisor = 'M' if options.get('divide_by_m_factorial') else 'N'
        ordered = diversity_ordered(data)
        invariant = diversity_order_invariant(data, divisor)
        write_json(out / 'diversity.json', {
            'ordered_ln': ordered,
            'invariant_ln': invariant,
            'difference_ln': ordered - invariant,
            'divisor': divisor,
        })
        self.stdout.write(f'ordered_ln {ordered:.5f} invariant_ln {invariant:.5f}')
