from pathlib import Path

from rest_framework import serializers

from network.model import FINAL_ACTIVATIONS, LAYER_ORDERS
from network.optim import OPTIMIZERS


class ModelConfigSerializer(serializers.Serializer):
    """Serializer for the network shape"""
    scale = serializers.IntegerField(min_value=1, max_value=8, default=2)
    channels = serializers.ChoiceField(choices=[1, 3], default=1)
    feat_channels = serializers.IntegerField(min_value=1, default=32)
    mapping_layers = serializers.IntegerField(min_value=1, default=3)
    kernel_size = serializers.IntegerField(min_value=1, default=3)
    use_batchnorm = serializers.BooleanField(default=False)
    layer_order = serializers.ChoiceField(choices=sorted(LAYER_ORDERS), default='conv_bn_relu')
    residual = serializers.BooleanField(default=True)
    final_activation = serializers.ChoiceField(choices=FINAL_ACTIVATIONS, default='identity')
    bn_momentum = serializers.FloatField(min_value=0, max_value=1, default=0.1)
    bn_eps = serializers.FloatField(min_value=0, default=1e-5)

    def validate_kernel_size(self, value):
        """Only odd kernels keep 'same' padding symmetric"""
        if value % 2 == 0:
            raise serializers.ValidationError('kernel_size must be odd')
        return value

    def validate_bn_momentum(self, value):
        if not 0 < value < 1:
            raise serializers.ValidationError('bn_momentum must lie strictly between 0 and 1')
        return value

    def validate_bn_eps(self, value):
        if value <= 0:
            raise serializers.ValidationError('bn_eps must be positive')
        return value


class OptimConfigSerializer(serializers.Serializer):
    """Serializer for the optimizer and schedule"""
    optimizer = serializers.ChoiceField(choices=OPTIMIZERS, default='adam')
    lr = serializers.FloatField(min_value=0, default=1e-4)
    beta1 = serializers.FloatField(min_value=0, max_value=0.999999, default=0.9)
    beta2 = serializers.FloatField(min_value=0, max_value=0.999999, default=0.999)
    adam_eps = serializers.FloatField(min_value=0, default=1e-8)
    batch_size = serializers.IntegerField(min_value=1, default=16)
    epochs = serializers.IntegerField(min_value=1, default=50)
    steps_per_epoch = serializers.IntegerField(
        min_value=0, default=0,
        help_text='0 means one pass over the non-overlapping patch grid of the train split',
    )
    clip_norm = serializers.FloatField(min_value=0, default=0.0, help_text='0 disables clipping')
    eval_interval = serializers.IntegerField(
        min_value=0, default=0, help_text='steps between validations; 0 means every epoch end',
    )


class DataConfigSerializer(serializers.Serializer):
    """Serializer for the dataset and sampling"""
    data_root = serializers.CharField()
    patch = serializers.IntegerField(min_value=1, default=32)
    split_ratio = serializers.FloatField(min_value=0, max_value=1, default=0.9)
    seed = serializers.IntegerField(min_value=0, default=0)
    flip = serializers.BooleanField(default=False)
    workers = serializers.IntegerField(min_value=1, default=1)
    output_dir = serializers.CharField(default='runs/latest')

    def validate_data_root(self, value):
        """Data root must exist when the run is configured"""
        if not Path(value).is_dir():
            raise serializers.ValidationError(f'{value} is not a directory')
        return value


class RunConfigSerializer(ModelConfigSerializer, OptimConfigSerializer, DataConfigSerializer):
    """Serializer for the flat run configuration file and its flag overrides"""
