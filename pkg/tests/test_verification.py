import pytest

from querysumm.verification import LAYER_CHECKS, TOLERANCE, run_gradient_suite


def test_single_named_check():
    results = run_gradient_suite(["merge"])
    assert set(results) == {"merge"}
    assert results["merge"] < TOLERANCE


def test_unknown_check_rejected():
    with pytest.raises(ValueError, match="unknown check"):
        run_gradient_suite(["warp-drive"])


def test_layer_check_names_cover_all_layer_types():
    assert {"local", "query", "global", "pooling", "ordering", "merge", "decoder"} <= set(
        LAYER_CHECKS
    )
