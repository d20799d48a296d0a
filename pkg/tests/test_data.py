import json
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from fairfeedback.data import (
    GENDERS,
    RACES,
    TRACE_HEADER,
    DataTuple,
    SynthSpec,
    errors_only,
    load_tuples,
    read_report,
    read_trace,
    synthesize_dataset,
    validate_tuple,
    write_report,
    write_trace,
    write_tuples,
)
from fairfeedback.errors import DataIOError, ParseError, SpecError, ValidationError
from fairfeedback.saff import RegretTrace
from conftest import donor, recipient, symmetric_tuple


def _dump(tuples, path):
    path.write_text(json.dumps([t.to_dict() for t in tuples]))
    return path


def test_load_preserves_count_and_order(tmp_path):
    tuples = synthesize_dataset(SynthSpec(num_tuples=10, seed=5))
    assert load_tuples(_dump(tuples, tmp_path / "t.json")) == tuples


def test_bad_mortality_names_field(tmp_path):
    t = symmetric_tuple()
    bad = DataTuple(t.donor, (replace(t.recipients[0], mortality=1.2),) + t.recipients[1:])
    with pytest.raises(ValidationError) as err:
        load_tuples(_dump([t, bad], tmp_path / "t.json"))
    assert "tuple[1].recipients[0].mortality" in str(err.value)
    assert [d.field for d in err.value.diagnostics] == ["tuple[1].recipients[0].mortality"]


def test_empty_recipients_rejected(tmp_path):
    with pytest.raises(ValidationError):
        load_tuples(_dump([DataTuple(donor(), ())], tmp_path / "t.json"))


def test_parse_error_has_location(tmp_path):
    p = tmp_path / "t.json"
    p.write_text('[\n {"donor": }\n]')
    with pytest.raises(ParseError, match="line 2"):
        load_tuples(p)
    obj = symmetric_tuple().to_dict()
    del obj["recipients"][3]["ttno"]
    p.write_text(json.dumps([obj]))
    with pytest.raises(ParseError, match=r"recipients\[3\].*ttno"):
        load_tuples(p)


def test_missing_file_named(tmp_path):
    with pytest.raises(DataIOError, match="nope.json"):
        load_tuples(tmp_path / "nope.json")


def test_validate_examples():
    mixed = DataTuple(donor(), (recipient(age=30, gender="Female", race="Black", decision=1),
                                recipient(age=60), recipient(age=45, race="Asian")))
    assert validate_tuple(mixed) == []
    all_male = DataTuple(donor(), tuple(recipient(age=30 + 5 * i, decision=int(i == 0)) for i in range(6)))
    diags = validate_tuple(all_male)
    assert any(d.severity == "warning" and d.field == "gender" and d.message == "empty disadvantaged group"
               for d in diags)
    assert errors_only(diags) == []
    none_accepted = DataTuple(donor(), tuple(recipient(decision=0) for _ in range(4)))
    assert [d.field for d in errors_only(validate_tuple(none_accepted))] == ["recipients.decision"]


def test_validate_flags_three_acceptances_and_minors():
    recs = tuple(recipient(age=16 if i == 0 else 40, decision=int(i < 3)) for i in range(5))
    fields = {d.field for d in errors_only(validate_tuple(DataTuple(donor(), recs)))}
    assert fields == {"recipients[0].age", "recipients.decision"}


def test_synthesis_deterministic():
    spec = SynthSpec(num_tuples=30, seed=17)
    assert synthesize_dataset(spec) == synthesize_dataset(spec)
    assert synthesize_dataset(spec) != synthesize_dataset(replace(spec, seed=18))


def test_synthesized_tuples_validate():
    for t in synthesize_dataset(SynthSpec(num_tuples=300, seed=2, bias_knobs={"age": 3.0, "race": 0.5})):
        assert errors_only(validate_tuple(t)) == []


def test_demographics_converge():
    spec = SynthSpec(num_tuples=1000, seed=4)   # 10^4 recipients
    recs = [r for t in synthesize_dataset(spec) for r in t.recipients]
    n = len(recs)
    gender, race = Counter(r.gender for r in recs), Counter(r.race for r in recs)
    for g in GENDERS:
        assert abs(gender[g] / n - spec.demographic_mix["gender"][g]) <= 0.02
    for r in RACES:
        assert abs(race[r] / n - spec.demographic_mix["race"][r]) <= 0.02
    assert abs(sum(r.age > 50 for r in recs) / n - 0.5) <= 0.02


def test_bias_knob_scales_disadvantaged_ttno():
    recs = [r for t in synthesize_dataset(SynthSpec(num_tuples=400, seed=8, bias_knobs={"age": 2.0}))
            for r in t.recipients if r.gender == "Male" and r.race != "Black"]
    old = np.median([r.ttno for r in recs if r.age > 50])
    young = np.median([r.ttno for r in recs if r.age <= 50])
    assert 1.7 < old / young < 2.3


@pytest.mark.parametrize("bad", [
    {"num_tuples": 0},
    {"recipients_per_tuple": 1},
    {"bias_knobs": {"age": 0.0}},
    {"bias_knobs": {"income": 2.0}},
    {"demographic_mix": {"gender": {"Male": 0.7, "Female": 0.2}}},
    {"decision_model": {"intercept": 0.0}},
    {"colour": "blue"},
])
def test_synth_spec_errors(bad):
    base = SynthSpec().to_dict()
    base.update(bad)
    with pytest.raises(SpecError):
        SynthSpec.from_dict(base)


def test_synth_spec_dict_round_trip():
    spec = SynthSpec(num_tuples=12, seed=3, bias_knobs={"age": 2.0, "gender": 1.0, "race": 1.0})
    assert SynthSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


def _trace(epochs, rng):
    t = RegretTrace()
    for _ in range(epochs + 1):
        t.append(rng.random() * 10, rng.random() * 10, rng.dirichlet(np.ones(3)))
    return t


def test_trace_rows(tmp_path, rng):
    p = tmp_path / "trace.csv"
    write_trace(_trace(3, rng), p)
    lines = p.read_text().splitlines()
    assert lines[0].split(",") == list(TRACE_HEADER)
    assert len(lines) == 5


@settings(max_examples=25, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(epochs=st.integers(0, 30), seed=st.integers(0, 2**32 - 1))
def test_trace_round_trip(tmp_path, epochs, seed):
    t = _trace(epochs, np.random.default_rng(seed))
    p = tmp_path / "trace.csv"
    write_trace(t, p)
    back = read_trace(p)
    assert back.hard_regret == t.hard_regret and back.soft_regret == t.soft_regret
    assert all(np.array_equal(a, b) for a, b in zip(back.betas, t.betas))


def test_trace_parse_errors(tmp_path):
    p = tmp_path / "trace.csv"
    p.write_text("epoch,regret\n0,1\n")
    with pytest.raises(ParseError, match="header"):
        read_trace(p)
    p.write_text(",".join(TRACE_HEADER) + "\n0,1,1,0.2,0.3,0.5\n2,1,1,0.2,0.3,0.5\n")
    with pytest.raises(ParseError, match="line 3"):
        read_trace(p)


def test_unwritable_path_named(tmp_path, rng):
    target = tmp_path / "missing_dir" / "trace.csv"
    with pytest.raises(DataIOError, match="missing_dir"):
        write_trace(_trace(1, rng), target)
    with pytest.raises(DataIOError, match="missing_dir"):
        write_tuples([symmetric_tuple()], target)


def test_report_round_trip(tmp_path):
    rep = {"attribute": "age", "phi": [0.1, 2.5, 0.0], "beta_star": [0.2, 0.3, 0.5],
           "social_score": 4, "config": {"epochs": 100, "learning_rate": 0.5}, "seed": 7}
    p = tmp_path / "report.json"
    write_report(rep, p)
    assert read_report(p) == rep
    with pytest.raises(ValueError, match="seed"):
        write_report({k: v for k, v in rep.items() if k != "seed"}, p)


@settings(max_examples=20, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(seed=st.integers(0, 2**31), n=st.integers(1, 5), k=st.integers(2, 16))
def test_tuple_file_round_trip(tmp_path, seed, n, k):
    tuples = synthesize_dataset(SynthSpec(num_tuples=n, recipients_per_tuple=k, seed=seed))
    p = tmp_path / "t.json"
    write_tuples(tuples, p)
    assert load_tuples(p) == tuples
