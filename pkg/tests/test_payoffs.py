import numpy as np
import pytest

from robusthedge import PayoffSpec, asian_put, butterfly, call, lookback_call, put


def test_call_terminal():
    assert call(10.0).evaluate([10.0, 11.3]) == pytest.approx(1.3)
    assert call(10.0).evaluate([10.0, 9.0]) == 0.0


def test_butterfly_at_middle_strike():
    assert butterfly(8, 10, 12).evaluate([9.0, 10.0]) == pytest.approx(2.0)


def test_butterfly_wings_are_zero():
    spec = butterfly(8, 10, 12)
    assert spec.evaluate([10.0, 7.0]) == 0.0
    assert spec.evaluate([10.0, 13.0]) == 0.0


def test_lookback_constant_path():
    assert lookback_call(12.0).evaluate([10.0] * 31) == 0.0


def test_lookback_includes_initial_value():
    assert lookback_call(12.0).evaluate([13.0, 10.0, 10.0]) == pytest.approx(1.0)


def test_asian_constant_path():
    assert asian_put(10.0, 30).evaluate([10.0] * 31) == 0.0


def test_asian_excludes_initial_value():
    # average of the 2 post-initial observations only
    spec = asian_put(10.0, 2)
    assert spec.evaluate([100.0, 9.0, 7.0]) == pytest.approx(10.0 - 8.0)


def test_asian_length_mismatch():
    with pytest.raises(ValueError):
        asian_put(10.0, 30).evaluate([10.0] * 10)


def test_invalid_butterfly_strikes():
    with pytest.raises(ValueError):
        butterfly(12, 10, 8)


def test_terminal_function_call():
    psi = call(10.0).terminal_function()
    assert psi(12.0) == pytest.approx(2.0)


def test_terminal_function_butterfly():
    psi = butterfly(8, 10, 12).terminal_function()
    assert psi(9.0) == pytest.approx(1.0)


def test_terminal_function_none_for_path_dependent():
    assert lookback_call(12.0).terminal_function() is None
    assert asian_put(10.0, 30).terminal_function() is None


def test_lipschitz_bounds():
    assert call(10.0).lipschitz_bound() == 1.0
    assert butterfly(8, 10, 12).lipschitz_bound() == 2.0


def test_butterfly_equals_call_decomposition_pathwise():
    rng = np.random.default_rng(0)
    paths = 10.0 + rng.normal(0, 3, size=(200, 5))
    bf = butterfly(8, 10, 12).evaluate_batch(paths)
    decomposed = (
        call(8.0).evaluate_batch(paths)
        + call(12.0).evaluate_batch(paths)
        - 2.0 * call(10.0).evaluate_batch(paths)
    )
    np.testing.assert_allclose(bf, decomposed, rtol=0, atol=1e-12)


def test_terminal_invariant_under_repeated_terminal_state():
    rng = np.random.default_rng(1)
    for spec in (call(10.0), put(10.0), butterfly(8, 10, 12)):
        path = list(10.0 + rng.normal(0, 2, size=6))
        extended = path + [path[-1]] * 3
        assert spec.evaluate(extended) == spec.evaluate(path)


def test_json_round_trip():
    for spec in (call(10.0), put(9.5), butterfly(8, 10, 12),
                 lookback_call(12.0), asian_put(10.0, 30)):
        assert PayoffSpec.from_dict(spec.to_dict()) == spec


def test_parse_butterfly_config():
    spec = PayoffSpec.from_dict({"kind": "butterfly", "k": [8, 10, 12]})
    assert spec.strikes == (8.0, 10.0, 12.0)
