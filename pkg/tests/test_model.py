import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stargraph.errors import ConfigSchemaError, DomainError, ValidationError
from stargraph.model import (PotentialSpec, ScalingLaw, StarGraph, config_from_dict,
                             config_hash, config_to_dict, evaluate_potential, evaluate_scaling,
                             load_config, validate_potential)

MINIMAL = {"n": 2, "support_lengths": [1, 1], "potential": {"kind": "diagonal", "segments": []},
           "scaling_coefficients": [1], "k_grid": [1], "eps_grid": [1, 0.5], "zeta": [0, 1],
           "truncation_radius": 10}


def test_minimal_config_loads(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(MINIMAL))
    cfg = load_config(path)
    assert cfg.graph.n == 2
    assert cfg.zeta == 1j
    assert cfg.eps_grid == (1.0, 0.5)
    assert not evaluate_potential(cfg.potential, 0.3).any()


def test_negative_length_rejected():
    doc = dict(MINIMAL, support_lengths=[-1, 1])
    with pytest.raises(ValidationError, match="support_lengths must be positive"):
        config_from_dict(doc)


def test_nonsymmetric_segment_rejected():
    doc = dict(MINIMAL, potential={"kind": "matrix", "segments": [[0, 1, [[0, 1], [2, 0]]]]})
    with pytest.raises(ValidationError, match="potential must be symmetric"):
        config_from_dict(doc)


def test_schema_error_names_field():
    doc = dict(MINIMAL, potential={"kind": "diagonal", "segments": [[0, "x", [[0, 0], [0, 0]]]]})
    with pytest.raises(ConfigSchemaError) as info:
        config_from_dict(doc)
    assert info.value.path == "potential.segments.0.1"


def test_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{n: 2")
    with pytest.raises(ConfigSchemaError, match="invalid JSON"):
        load_config(path)


@pytest.mark.parametrize("field, value, message", [
    ("eps_grid", [0.5, 1.0], "strictly decreasing"),
    ("eps_grid", [2.0], r"\(0, 1\]"),
    ("zeta", [1.0, 0.0], "imaginary"),
    ("truncation_radius", 0.5, "truncation_radius"),
    ("k_grid", [0.0], "positive"),
])
def test_config_invariants(field, value, message):
    with pytest.raises(ValidationError, match=message):
        config_from_dict(dict(MINIMAL, **{field: value}))


def test_support_must_fit_shorter_edge():
    g = StarGraph((1.0, 0.5))
    v = np.array([[0.0, 1.0], [1.0, 0.0]])
    spec = PotentialSpec.from_segments([(0.0, 0.8, v)], kind="matrix")
    with pytest.raises(ValidationError, match="vanish beyond"):
        validate_potential(g, spec)
    validate_potential(g, PotentialSpec.from_segments([(0.0, 0.5, v)], kind="matrix"))


def test_diagonal_kind_rejects_coupling():
    with pytest.raises(ValidationError, match="off-diagonal"):
        PotentialSpec.from_segments([(0, 1, [[0, 1], [1, 0]])], kind="diagonal")


def test_evaluate_potential_examples(two_wells):
    assert not evaluate_potential(PotentialSpec.zero(3), 0.5).any()
    np.testing.assert_array_equal(
        evaluate_potential(PotentialSpec.diagonal_wells([-(math.pi / 2) ** 2, 0, 0], [1, 1, 1]), 0.5),
        np.diag([-math.pi ** 2 / 4, 0.0, 0.0]))
    assert not evaluate_potential(two_wells, 1.5).any()
    with pytest.raises(DomainError):
        evaluate_potential(two_wells, -0.1)


def test_half_open_segments():
    spec = PotentialSpec.from_segments([(0.0, 0.5, [[1.0]]), (0.5, 1.0, [[2.0]])])
    assert evaluate_potential(spec, 0.5)[0, 0] == 2.0
    assert evaluate_potential(spec, 1.0)[0, 0] == 0.0


def _sym(rng, n):
    a = rng.normal(size=(n, n))
    return a + a.T


@given(st.integers(1, 5), st.integers(0, 2 ** 32 - 1), st.floats(0, 3))
def test_potential_bit_symmetric_and_compact(n, seed, x):
    rng = np.random.default_rng(seed)
    segs = [(lo, lo + w, _sym(rng, n)) for lo, w in zip(rng.uniform(0, 0.5, 3), rng.uniform(0.1, 0.5, 3))]
    spec = PotentialSpec.from_segments(segs, kind="matrix")
    Q = evaluate_potential(spec, x)
    assert np.array_equal(Q, Q.T)
    if x > spec.extent:
        assert not Q.any()


@pytest.mark.parametrize("coef, eps, expected", [
    ((1.0,), 0.3, 1.0), ((1.0, 2.0), 0.1, 1.2), ((1.0, -0.5, 0.25), 0.0, 1.0)])
def test_evaluate_scaling(coef, eps, expected):
    assert evaluate_scaling(ScalingLaw(coef), eps) == pytest.approx(expected, abs=1e-15)


@given(st.lists(st.floats(-5, 5), max_size=4))
def test_scaling_at_zero_is_one(tail):
    law = ScalingLaw((1.0, *tail))
    assert evaluate_scaling(law, 0.0) == 1.0
    assert law.lambda_prime == (tail[0] if tail else 0.0)


def test_scaling_domain_and_invariant():
    with pytest.raises(DomainError):
        evaluate_scaling(ScalingLaw(), 1.5)
    with pytest.raises(ValidationError):
        ScalingLaw((2.0, 1.0))


def test_config_hash_is_order_insensitive():
    a = config_from_dict(MINIMAL)
    b = config_from_dict(dict(reversed(list(MINIMAL.items()))))
    assert config_hash(a) == config_hash(b)
    c = config_from_dict(dict(MINIMAL, k_grid=[2]))
    assert config_hash(a) != config_hash(c)
    assert config_from_dict(config_to_dict(a)) is not None


def test_permuted_and_scaled(two_wells):
    p = two_wells.permuted([2, 0, 1])
    np.testing.assert_array_equal(np.diag(evaluate_potential(p, 0.5)), [0.0, -math.pi ** 2 / 4,
                                                                        -math.pi ** 2 / 4])
    s = two_wells.scaled(0.1, 100.0)
    assert s.extent == pytest.approx(0.1)
    assert evaluate_potential(s, 0.05)[0, 0] == pytest.approx(-25 * math.pi ** 2)
