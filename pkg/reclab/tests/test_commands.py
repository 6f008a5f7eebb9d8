import io
import json
import tempfile
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

TEN_RATINGS = ''.join(f'{u}\t{i}\t{1 + (u + i) % 5}\t0\n' for u in range(1, 6) for i in (1, 2))


def comoda_csv(extra_rows=''):
    rows = ''.join(f'{u},{i},{1 + (u * i) % 5},{u % 3},{i % 2}\n' for u in range(1, 7) for i in range(1, 6))
    return 'userID,itemID,rating,mood,location\n' + rows + extra_rows


class CommandTestCase(SimpleTestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = Path(tmp.name)

    def call(self, name, **options):
        return call_command(name, stdout=io.StringIO(), **options)

    def write_json(self, name, data):
        path = self.tmp / name
        path.write_text(json.dumps(data), encoding='utf-8')
        return str(path)

    def generate(self, name='zipf.data', **options):
        options = {'n_users': 100, 'n_items': 50, 'n_ratings': 1000, 'exponent': 1.0, 'seed': 42, **options}
        path = self.tmp / name
        self.call('generate', out=str(path), **options)
        return path


class GenerateCommandTests(CommandTestCase):
    def test_writes_requested_line_count(self):
        path = self.generate()
        self.assertEqual(len(path.read_bytes().splitlines()), 1000)

    def test_same_arguments_same_file(self):
        self.assertEqual(self.generate('a.data').read_bytes(), self.generate('b.data').read_bytes())

    def test_infeasible_counts(self):
        with self.assertRaises(CommandError) as ctx:
            self.generate(n_ratings=10 ** 6)
        self.assertEqual(ctx.exception.returncode, 1)


class AnalyzeCommandTests(CommandTestCase):
    def test_diversity_mode(self):
        source = self.write_json('groups.json', {'groups': [[1, 3]], 'N': 2})
        self.call('analyze', mode='diversity', input=source, out=str(self.tmp / 'out'))
        payload = json.loads((self.tmp / 'out' / 'diversity.json').read_text())
        self.assertAlmostEqual(payload['ordered_ln'], 2.07944, places=5)
        self.assertAlmostEqual(payload['invariant_ln'], 1.38629, places=5)
        self.assertEqual(payload['divisor'], 'N')

    def test_diversity_m_factorial_flag(self):
        source = self.write_json('groups.json', {'groups': [[1, 3]], 'N': 2})
        self.call('analyze', mode='diversity', input=source, divide_by_m_factorial=True, out=str(self.tmp))
        payload = json.loads((self.tmp / 'diversity.json').read_text())
        self.assertAlmostEqual(payload['invariant_ln'], 0.28768, places=5)
        self.assertEqual(payload['divisor'], 'M')

    def test_zipf_mode(self):
        path = self.generate(n_users=1000, n_items=100, n_ratings=10000)
        self.call('analyze', mode='zipf', dataset=str(path), out=str(self.tmp / 'zipf'))
        fits = json.loads((self.tmp / 'zipf' / 'fit.json').read_text())
        histogram = json.loads((self.tmp / 'zipf' / 'histogram.json').read_text())
        self.assertGreaterEqual(fits['rating_values']['r_squared'], 0.9)
        self.assertIn('zipf_exponent', fits['item_popularity'])
        self.assertEqual(histogram['total'], 10000)
        self.assertTrue((self.tmp / 'zipf' / 'histogram.csv').read_text().startswith('value,count\n'))

    def test_zipf_mode_on_comoda(self):
        comoda = self.tmp / 'comoda.csv'
        comoda.write_text(comoda_csv(), encoding='utf-8')
        self.call('analyze', mode='zipf', dataset=str(comoda), format='COMODA', out=str(self.tmp / 'zipf'))
        histogram = json.loads((self.tmp / 'zipf' / 'histogram.json').read_text())
        self.assertEqual(histogram['total'], 30)

    def test_zipf_mode_on_wider_scale(self):
        path = self.generate(r_max=7)
        self.call('analyze', mode='zipf', dataset=str(path), r_max=7, out=str(self.tmp / 'zipf'))
        histogram = json.loads((self.tmp / 'zipf' / 'histogram.json').read_text())
        self.assertIn('7', histogram['counts'])

    def test_missing_input_file(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('analyze', mode='diversity', input=str(self.tmp / 'nope.json'), out=str(self.tmp))
        self.assertEqual(ctx.exception.returncode, 1)

    def test_invalid_diversity_input(self):
        source = self.write_json('groups.json', {'groups': [[0, 3]], 'N': 2})
        with self.assertRaises(CommandError) as ctx:
            self.call('analyze', mode='diversity', input=source, out=str(self.tmp))
        self.assertEqual(ctx.exception.returncode, 1)


class BenchCommandTests(CommandTestCase):
    def setUp(self):
        super().setUp()
        self.ratings = self.tmp / 'ten.data'
        self.ratings.write_text(TEN_RATINGS, encoding='utf-8')

    def config(self, out='run', **fields):
        data = {
            'dataset': {'path': str(self.ratings), 'format': 'TAB_100K'},
            'algorithms': ['random'],
            'repetitions': 2,
            'output_dir': str(self.tmp / out),
            **fields,
        }
        return self.write_json(f'{out}.json', data)

    def test_random_only_writes_one_row_per_seed(self):
        self.call('bench', config=self.config())
        for seed in (0, 1):
            report = json.loads((self.tmp / 'run' / f'seed-{seed}' / 'report.json').read_text())
            self.assertEqual([row['algo'] for row in report['rows']], ['random'])
            self.assertEqual(report['split']['seed'], seed)
            self.assertEqual(report['split']['n_test'], 2)
        aggregate = json.loads((self.tmp / 'run' / 'aggregate.json').read_text())
        self.assertEqual(aggregate['seeds'], [0, 1])
        self.assertEqual(aggregate['rows'][0]['seeds'], 2)
        manifest = json.loads((self.tmp / 'run' / 'manifest.json').read_text())
        self.assertEqual(manifest['config']['algorithms'], ['random'])
        self.assertIn('numpy', manifest['versions'])

    def test_flags_override_config(self):
        self.call('bench', config=self.config(), out=str(self.tmp / 'elsewhere'), repetitions=1, seed=7)
        self.assertTrue((self.tmp / 'elsewhere' / 'seed-7' / 'report.csv').exists())
        self.assertFalse((self.tmp / 'elsewhere' / 'seed-8').exists())

    def test_rerun_is_byte_identical(self):
        self.ratings.write_bytes(self.generate('bench.data', n_users=40, n_items=25, n_ratings=300).read_bytes())
        fields = {
            'algorithms': ['itemcf', 'mf', 'zeromat', 'dotmat-hybrid'],
            'train': {'k': 3, 'epochs': 3},
            'repetitions': 1,
        }
        self.call('bench', config=self.config('first', **fields))
        self.call('bench', config=self.config('second', **fields))
        first = (self.tmp / 'first' / 'seed-0' / 'report.json').read_bytes()
        second = (self.tmp / 'second' / 'seed-0' / 'report.json').read_bytes()
        self.assertEqual(first, second)

    def test_powermat_on_movielens(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('bench', config=self.config(algorithms=['powermat']))
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertIn('context required', str(ctx.exception))

    def test_powermat_on_comoda(self):
        comoda = self.tmp / 'comoda.csv'
        comoda.write_text(comoda_csv(), encoding='utf-8')
        config = self.config(
            dataset={'path': str(comoda), 'format': 'COMODA'},
            algorithms=['powermat'],
            overrides={'powermat': {'gamma': 1e-4, 'k': 2, 'epochs': 2}},
            repetitions=1,
        )
        self.call('bench', config=config)
        report = json.loads((self.tmp / 'run' / 'seed-0' / 'report.json').read_text())
        self.assertEqual([row['algo'] for row in report['rows']], ['powermat', 'random'])

    def test_comoda_duplicates_reach_the_report(self):
        comoda = self.tmp / 'comoda.csv'
        comoda.write_text(comoda_csv('1,1,4,2,0\n'), encoding='utf-8')
        self.call('bench', config=self.config(dataset={'path': str(comoda), 'format': 'COMODA'}, repetitions=1))
        report = json.loads((self.tmp / 'run' / 'seed-0' / 'report.json').read_text())
        self.assertEqual(report['split']['duplicates_dropped'], 1)
        self.assertEqual(report['split']['n_train'] + report['split']['n_test'], 30)

    def test_output_path_is_not_mistaken_for_errors(self):
        self.call('bench', config=self.config(out='ErrorDetail-run', repetitions=1))
        manifest = json.loads((self.tmp / 'ErrorDetail-run' / 'manifest.json').read_text())
        self.assertNotIn('errors', manifest)
        self.assertIn('ErrorDetail-run', manifest['config']['output_dir'])

    def test_divergence_exits_with_two(self):
        config = self.config(algorithms=['mf'], overrides={'mf': {'gamma': 10.0, 'k': 1, 'epochs': 20}})
        with self.assertRaises(CommandError) as ctx:
            self.call('bench', config=config)
        self.assertEqual(ctx.exception.returncode, 2)

    def test_missing_dataset(self):
        self.ratings.unlink()
        with self.assertRaises(CommandError) as ctx:
            self.call('bench', config=self.config())
        self.assertEqual(ctx.exception.returncode, 1)

    def test_malformed_config(self):
        path = self.tmp / 'broken.json'
        path.write_text('{"dataset": ', encoding='utf-8')
        with self.assertRaises(CommandError) as ctx:
            self.call('bench', config=str(path))
        self.assertEqual(ctx.exception.returncode, 1)

    def test_invalid_config(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('bench', config=self.config(algorithms=['svd']))
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertIn('algorithms', str(ctx.exception))
