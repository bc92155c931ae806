import pytest

from fheact_trainer.train import (
    DatasetMissing,
    data_root,
    square_resnet_divergence,
    train_lenet5,
    train_resnet20,
)


def _dataset_available(name: str) -> bool:
    try:
        from fheact_trainer.train import _load_torchvision

        _load_torchvision(name, data_root(), train=False)
        return True
    except DatasetMissing:
        return False


needs_mnist = pytest.mark.skipif(
    not _dataset_available("mnist"), reason="MNIST not available locally"
)
needs_cifar = pytest.mark.skipif(
    not _dataset_available("cifar10"), reason="CIFAR-10 not available locally"
)


class TestDivergenceDemo:
    def test_square_resnet_diverges_on_synthetic_data(self):
        result = square_resnet_divergence(seed=0, epochs=2, samples=256)
        assert result["diverged"]


@needs_mnist
class TestLenetTraining:
    def test_relu_accuracy(self, tmp_path):
        manifest = train_lenet5("relu", seed=0, out_dir=tmp_path)
        assert manifest["metadata"]["val_accuracy"] >= 0.988  # 99.2 - 0.4 points

    def test_square_accuracy(self, tmp_path):
        manifest = train_lenet5("square", seed=0, out_dir=tmp_path)
        assert manifest["metadata"]["val_accuracy"] >= 0.992  # 99.6 - 0.4 points


@needs_cifar
class TestResnetTraining:
    def test_relu_accuracy_and_betas(self, tmp_path):
        manifest = train_resnet20(seed=0, out_dir=tmp_path)
        assert manifest["metadata"]["val_accuracy"] >= 0.91  # 92.2 - 1 point
        assert all(b > 0 for b in manifest["betas"].values())
