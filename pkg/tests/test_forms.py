from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings

from chaoslab import (
    CoefficientTensor,
    FormError,
    SparseMultilinearForm,
    SupNormInfeasible,
    evaluate,
    form_to_tensor,
    format_form_text,
    parse_form_text,
    sup_norm,
    tensor_to_form,
)
from chaoslab import forms
from chaoslab.forms import last_variable_coordinates, sup_norm_bruteforce

from conftest import small_forms

R2F = SparseMultilinearForm((((1, 1), 1), ((1, 2), 1), ((2, 1), 1), ((2, 2), -1)))


def test_construction_and_dims():
    f = SparseMultilinearForm({(3, 1): 2, (1, 2): -1})
    assert f.order == 2 and f.dims == (3, 2) and len(f) == 2
    assert f.coefficient((3, 1)) == 2 and f.coefficient((2, 2)) == 0
    assert f.integer_flag


@pytest.mark.parametrize(
    "mon",
    [(), (((1, 1), 1), ((1,), 1)), (((0, 1), 1),), (((1, 1), 0),), (((1, 1), 1), ((1, 1), 2))],
)
def test_construction_errors(mon):
    with pytest.raises(FormError):
        SparseMultilinearForm(mon)


def test_evaluate_examples():
    assert evaluate(R2F, [(1, 1), (1, 1)]) == 2
    assert evaluate(R2F, [(1, -1), (1, -1)]) == -2
    assert evaluate(R2F, [(0, 0), (0.3, 1)]) == 0


def test_evaluate_shape_errors():
    with pytest.raises(FormError):
        evaluate(R2F, [(1, 1)])
    with pytest.raises(FormError):
        evaluate(R2F, [(1,), (1, 1)])


def test_sup_norm_examples():
    cert = sup_norm(R2F)
    assert cert.value == 2 and evaluate(R2F, cert.witness) == 2
    assert sup_norm(SparseMultilinearForm({(2, 3, 1): -7})).value == 7
    ones = SparseMultilinearForm({(i, j): 1 for i in range(1, 4) for j in range(1, 4)})
    assert sup_norm(ones).value == 9


def test_tie_break_is_lexicographic():
    # all four leading patterns of x1 give |value| 2; the first (+,+) wins
    cert = sup_norm(R2F)
    assert cert.witness[0] == (1, 1)


@settings(max_examples=120, deadline=None)
@given(small_forms())
def test_sup_norm_matches_bruteforce(f):
    cert = sup_norm(f)
    assert cert.value == sup_norm_bruteforce(f)
    assert abs(evaluate(f, cert.witness)) == cert.value
    assert all(s in (1, -1) for w in cert.witness for s in w)


@settings(max_examples=40, deadline=None)
@given(small_forms(max_order=3, max_dim=4))
def test_chunked_paths_match(f):
    full = sup_norm(f)
    saved = forms._LEAD_LIMIT
    try:
        forms._LEAD_LIMIT = 4
        small = sup_norm(f, threads=3)
    finally:
        forms._LEAD_LIMIT = saved
    assert (small.value, small.witness) == (full.value, full.witness)


def test_threads_do_not_change_certificate(monkeypatch):
    monkeypatch.setattr(forms, "_LEAD_LIMIT", 64)
    rng = np.random.default_rng(9)
    f = tensor_to_form(CoefficientTensor(1 - 2 * rng.integers(0, 2, size=(5, 5, 5))))
    certs = {(c.value, c.witness) for c in (sup_norm(f, threads=t) for t in (1, 2, 5))}
    assert len(certs) == 1


def test_float_coefficients():
    f = SparseMultilinearForm({(1, 1): 0.5, (2, 1): -0.25, (2, 2): 1.5})
    assert sup_norm(f).value == pytest.approx(sup_norm_bruteforce(f), rel=1e-15)


def test_budget():
    f = tensor_to_form(CoefficientTensor(np.ones((12, 12))))
    with pytest.raises(SupNormInfeasible):
        sup_norm(f, max_bits=8)


def test_tensor_round_trip():
    t = form_to_tensor(R2F)
    assert t == CoefficientTensor([[1, 1], [1, -1]])
    assert tensor_to_form(t) == R2F
    sparse = form_to_tensor(SparseMultilinearForm({(1, 3): 4}))
    assert sparse.entries.tolist() == [[0, 0, 4]]


def test_last_variable_coordinates():
    assert last_variable_coordinates(R2F) == {1, 2}
    assert last_variable_coordinates(SparseMultilinearForm({(1, 1, 1): 1})) == {1}


@given(small_forms())
def test_text_round_trip(f):
    assert parse_form_text(format_form_text(f, header=["comment"])) == f


def test_text_errors():
    with pytest.raises(FormError):
        parse_form_text("# nothing\n")
    with pytest.raises(FormError):
        parse_form_text("1 x 1\n")
