from dualprior.common.exceptions import (
    ConfigHashMismatchError,
    DatasetNotFoundError,
    DualPriorError,
    IntegrityError,
    ShapeError,
)


def test_shape_error_names_dimension():
    error = ShapeError("W=15 is not divisible by 4", dimension="W", size=15)

    assert isinstance(error, DualPriorError)
    assert isinstance(error, ValueError)
    assert error.dimension == "W"
    assert error.context == {"dimension": "W", "size": 15}
    assert error.message == "W=15 is not divisible by 4"


def test_dataset_not_found_is_a_file_not_found_error():
    error = DatasetNotFoundError("/tmp/nowhere")

    assert isinstance(error, FileNotFoundError)
    assert error.context["path"] == "/tmp/nowhere"


def test_integrity_error_context():
    error = IntegrityError("hq.arr", "aa", "bb")

    assert error.context == {"path": "hq.arr", "expected": "aa", "actual": "bb"}


def test_hash_mismatch_names_source():
    error = ConfigHashMismatchError("aa", "bb", "stage1.ckpt")

    assert "stage1.ckpt" in error.message
    assert error.context["expected"] == "aa"
