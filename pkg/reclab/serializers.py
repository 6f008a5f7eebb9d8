import io
from collections.abc import Mapping

from django.conf import settings
from django.core.exceptions import ValidationError as DjangoValidationError
from rest_framework import serializers
from rest_framework.fields import empty
from rest_framework.parsers import JSONParser

from utils.renderers import ReportRender

from .analysis import DiversityInput
from .baselines import CfConfig, SimilarityKind, SimilarityMatrix
from .evaluation import ALGORITHM_NAMES, RANDOM, AlgorithmSettings
from .exceptions import ContextRequiredError
from .experiment import DATASET_FORMATS, DatasetSpec, ExperimentConfig
from .ingest import DEFAULT_CONTEXT_COLUMNS, SplitSpec
from .models import SEED_MAX, EvalEntry, EvalReport, FactorModel, PowerMatModel, TrainConfig


def float_matrix():
    return serializers.ListField(child=serializers.ListField(child=serializers.FloatField()))


def dump(serializer_class, instance):
    """JSON bytes for ``instance`` in the form ``serializer_class`` defines."""
    return ReportRender().render(serializer_class(instance).data)


def load(serializer_class, raw):
    data = JSONParser().parse(io.BytesIO(raw))
    serializer = serializer_class(data=data)
    serializer.is_valid(raise_exception=True)
    return serializer.save()


class TrainConfigSerializer(serializers.Serializer):
    gamma = serializers.FloatField(min_value=0, default=0.005)
    k = serializers.IntegerField(min_value=1, default=10)
    epochs = serializers.IntegerField(min_value=1, default=30)
    seed = serializers.IntegerField(min_value=0, max_value=SEED_MAX, default=0)
    eps_floor = serializers.FloatField(default=1e-6)
    init_lo = serializers.FloatField(default=0.1)
    init_hi = serializers.FloatField(default=0.9)
    samples_per_epoch = serializers.IntegerField(min_value=1, allow_null=True, default=None)
    p_max = serializers.FloatField(default=10.0)

    def validate(self, attrs):
        # TrainConfig raises django's ValidationError, which DRF folds into the field errors
        TrainConfig(**attrs)
        return attrs

    def create(self, validated_data):
        return TrainConfig(**validated_data)


class TrainBlockSerializer(TrainConfigSerializer):
    """Experiment-wide training block; every run takes its seed from the split."""

    def get_fields(self):
        fields = super().get_fields()
        fields.pop('seed')
        return fields


class TrainOverrideSerializer(TrainBlockSerializer):
    def get_fields(self):
        fields = super().get_fields()
        for field in fields.values():
            field.required = False
            field.default = empty
        return fields

    def validate(self, attrs):
        return attrs


class FactorModelSerializer(serializers.Serializer):
    k = serializers.IntegerField(read_only=True)
    U = float_matrix()
    V = float_matrix()

    def to_representation(self, instance):
        return {'k': instance.k, 'U': instance.U.tolist(), 'V': instance.V.tolist()}

    def validate(self, attrs):
        widths = {len(row) for row in attrs['U']} | {len(row) for row in attrs['V']}
        if not attrs['U'] or not attrs['V'] or len(widths) != 1:
            raise serializers.ValidationError('U and V must be non-empty with rows of one common length k')
        return attrs

    def create(self, validated_data):
        return FactorModel(validated_data['U'], validated_data['V'])


class PowerMatModelSerializer(FactorModelSerializer):
    alpha = serializers.ListField(child=serializers.FloatField(), min_length=1)
    beta = serializers.FloatField()
    sigma_u = serializers.FloatField(default=1.0)
    sigma_v = serializers.FloatField(default=1.0)

    def to_representation(self, instance):
        data = super().to_representation(instance.factors)
        data.update({
            'alpha': instance.alpha.tolist(),
            'beta': instance.beta,
            'sigma_u': instance.sigma_u,
            'sigma_v': instance.sigma_v,
        })
        return data

    def create(self, validated_data):
        factors = FactorModel(validated_data['U'], validated_data['V'])
        return PowerMatModel(factors, validated_data['alpha'], validated_data['beta'],
                             validated_data['sigma_u'], validated_data['sigma_v'])


class SimilarityMatrixSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=[kind.value for kind in SimilarityKind])
    scores = float_matrix()

    def to_representation(self, instance):
        return {'kind': instance.kind.value, 'scores': instance.scores.tolist()}

    def create(self, validated_data):
        return SimilarityMatrix(validated_data['scores'], SimilarityKind(validated_data['kind']))


def dump_similarities(sims):
    return dump(SimilarityMatrixSerializer, sims)


def load_similarities(raw):
    return load(SimilarityMatrixSerializer, raw)


class EvalReportSerializer(serializers.Serializer):
    """``{"split": {...}, "rows": [{"algo", "mae", "n"}, ...]}``"""

    def to_representation(self, instance):
        return {
            'split': {
                'test_fraction': instance.split_ratio,
                'seed': instance.seed,
                'n_train': instance.n_train,
                'n_test': instance.n_test,
                'duplicates_dropped': instance.duplicates_dropped,
            },
            'rows': [
                {'algo': entry.algorithm, 'mae': entry.mae, 'n': entry.n_test_predictions}
                for entry in instance.entries
            ],
        }

    def to_internal_value(self, data):
        try:
            split = data['split']
            entries = [EvalEntry(row['algo'], float(row['mae']), int(row['n'])) for row in data['rows']]
            return {
                'entries': entries,
                'split_ratio': float(split['test_fraction']),
                'seed': int(split['seed']),
                'n_train': int(split.get('n_train', 0)),
                'n_test': int(split.get('n_test', 0)),
                'duplicates_dropped': int(split.get('duplicates_dropped', 0)),
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise serializers.ValidationError({'non_field_errors': [f'malformed report: {exc}']})

    def create(self, validated_data):
        return EvalReport(**validated_data)


class DiversityInputSerializer(serializers.Serializer):
    groups = serializers.ListField(
        child=serializers.ListField(child=serializers.IntegerField(), min_length=2, max_length=2),
        min_length=1,
    )
    N = serializers.IntegerField(min_value=1)

    def validate_groups(self, groups):
        for k, m in groups:
            if k < 1 or m < 0:
                raise serializers.ValidationError(f'group (K={k}, M={m}) needs K >= 1 and M >= 0')
        return groups

    def create(self, validated_data):
        return DiversityInput(tuple(map(tuple, validated_data['groups'])), validated_data['N'])


class DatasetSerializer(serializers.Serializer):
    path = serializers.CharField()
    format = serializers.ChoiceField(choices=DATASET_FORMATS, default='TAB_100K')
    context_columns = serializers.ListField(child=serializers.CharField(), default=list)
    r_max = serializers.IntegerField(min_value=1, allow_null=True, default=None)

    def validate(self, attrs):
        if attrs['format'] == 'COMODA':
            attrs['context_columns'] = attrs['context_columns'] or list(DEFAULT_CONTEXT_COLUMNS)
        elif attrs['context_columns']:
            raise serializers.ValidationError({'context_columns': 'only COMODA datasets carry context columns'})
        return attrs


class SplitSerializer(serializers.Serializer):
    test_fraction = serializers.FloatField(default=0.2)
    seed = serializers.IntegerField(min_value=0, max_value=SEED_MAX, default=0)

    def validate_test_fraction(self, value):
        if not 0 < value < 1:
            raise serializers.ValidationError('must lie in (0, 1)')
        return value


class CfSerializer(serializers.Serializer):
    neighborhood_size = serializers.IntegerField(min_value=1, default=30)
    similarity_kind = serializers.ChoiceField(choices=[kind.value for kind in SimilarityKind], default='cosine')


class HybridSerializer(serializers.Serializer):
    fill_fraction = serializers.FloatField(default=1.0)

    def validate_fill_fraction(self, value):
        if not 0 < value <= 1:
            raise serializers.ValidationError('must lie in (0, 1]')
        return value


class PowerMatSerializer(serializers.Serializer):
    sigma_u = serializers.FloatField(default=1.0)
    sigma_v = serializers.FloatField(default=1.0)

    def validate(self, attrs):
        if attrs['sigma_u'] <= 0 or attrs['sigma_v'] <= 0:
            raise serializers.ValidationError('sigma_u and sigma_v must be positive')
        return attrs


class ExperimentConfigSerializer(serializers.Serializer):
    """One self-contained bench config; omitted blocks take their defaults."""

    OPTIONAL_BLOCKS = ('split', 'train', 'overrides', 'cf', 'hybrid', 'powermat')

    dataset = DatasetSerializer()
    split = SplitSerializer()
    train = TrainBlockSerializer()
    overrides = serializers.DictField(child=TrainOverrideSerializer())
    algorithms = serializers.ListField(child=serializers.ChoiceField(choices=ALGORITHM_NAMES), min_length=1)
    cf = CfSerializer()
    hybrid = HybridSerializer()
    powermat = PowerMatSerializer()
    output_dir = serializers.CharField(default=lambda: str(settings.RECLAB['OUTPUT_DIR']))
    repetitions = serializers.IntegerField(min_value=1, default=5)

    def to_internal_value(self, data):
        if isinstance(data, Mapping):
            data = {**{block: {} for block in self.OPTIONAL_BLOCKS}, **data}
        return super().to_internal_value(data)

    def validate_algorithms(self, algorithms):
        if len(set(algorithms)) != len(algorithms):
            raise serializers.ValidationError('algorithms must not repeat')
        return algorithms

    def validate(self, attrs):
        unknown = [name for name in attrs['overrides'] if name not in ALGORITHM_NAMES or name == RANDOM]
        if unknown:
            raise serializers.ValidationError({'overrides': f'no trainable algorithm named {", ".join(unknown)}'})
        for name, override in attrs['overrides'].items():
            try:
                TrainConfig(**{**attrs['train'], **override})
            except DjangoValidationError as exc:
                raise serializers.ValidationError({'overrides': {name: exc.messages}})
        if attrs['split']['seed'] + attrs['repetitions'] - 1 > SEED_MAX:
            raise serializers.ValidationError({'repetitions': 'seeds would leave the 64-bit range'})
        if 'powermat' in attrs['algorithms'] and attrs['dataset']['format'] != 'COMODA':
            raise ContextRequiredError(
                f'context required: powermat needs a COMODA dataset, got {attrs["dataset"]["format"]}'
            )
        return attrs

    def create(self, validated_data):
        data = validated_data
        algorithm_settings = AlgorithmSettings(
            train=TrainConfig(**data['train']),
            overrides={name: dict(values) for name, values in data['overrides'].items()},
            cf=CfConfig(**data['cf']),
            fill_fraction=data['hybrid']['fill_fraction'],
            sigma_u=data['powermat']['sigma_u'],
            sigma_v=data['powermat']['sigma_v'],
        )
        return ExperimentConfig(
            dataset=DatasetSpec(**data['dataset']),
            split=SplitSpec(**data['split']),
            algorithms=tuple(data['algorithms']),
            settings=algorithm_settings,
            output_dir=data['output_dir'],
            repetitions=data['repetitions'],
        )
