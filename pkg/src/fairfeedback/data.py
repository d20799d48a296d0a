"""
Donor/recipient schema, tuple files, validation, the synthetic dataset
generator, and persistence of learner traces and reports.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import DataIOError, ParseError, SpecError, ValidationError
from .numkit import WeibullParams

RACES = ("White", "Black", "Hispanic", "Asian", "Other")
GENDERS = ("Male", "Female")
AGE_BANDS = ("<=50", ">50")
MIN_AGE = 17
MIN_RECIPIENTS, MAX_RECIPIENTS = 2, 16

DONOR_FIELDS = ("age", "race", "gender", "kdpi")
RECIPIENT_FIELDS = ("age", "race", "gender", "epts", "distance", "ttno", "mortality", "decision")
TRACE_HEADER = (
    "epoch", "hard_regret", "soft_regret",
    "beta_independence", "beta_separation", "beta_sufficiency",
)


@dataclass(frozen=True)
class DonorProfile:
    age: float
    race: str
    gender: str
    kdpi: int


@dataclass(frozen=True)
class RecipientRecord:
    age: float
    race: str
    gender: str
    epts: int
    distance: float
    ttno: float
    mortality: float
    decision: int


@dataclass(frozen=True)
class DataTuple:
    donor: DonorProfile
    recipients: tuple[RecipientRecord, ...]

    def to_dict(self) -> dict:
        return {
            "donor": asdict(self.donor),
            "recipients": [asdict(r) for r in self.recipients],
        }


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    field: str
    message: str

    def __str__(self):
        return f"{self.severity}: {self.field}: {self.message}"


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _check_person(prefix: str, person, out: list[Diagnostic]) -> None:
    if not (isinstance(person.age, (int, float)) and math.isfinite(person.age)) \
            or person.age < MIN_AGE:
        out.append(Diagnostic("error", f"{prefix}.age", f"age must be >= {MIN_AGE}, got {person.age}"))
    if person.race not in RACES:
        out.append(Diagnostic("error", f"{prefix}.race", f"unknown race {person.race!r}"))
    if person.gender not in GENDERS:
        out.append(Diagnostic("error", f"{prefix}.gender", f"unknown gender {person.gender!r}"))


def validate_tuple(t: DataTuple, splits: Sequence[str] = ("gender", "race", "age")) -> list[Diagnostic]:
    """Return diagnostics for ``t``; an empty list means the tuple is valid.

    Group splits that leave one side empty are reported as warnings only.
    """
    from .fairness import GroupSpec  # local: fairness imports this module

    out: list[Diagnostic] = []
    d = t.donor
    _check_person("donor", d, out)
    if not (0 <= d.kdpi <= 100):
        out.append(Diagnostic("error", "donor.kdpi", f"kdpi must lie in [0, 100], got {d.kdpi}"))

    k = len(t.recipients)
    if not (MIN_RECIPIENTS <= k <= MAX_RECIPIENTS):
        out.append(Diagnostic(
            "error", "recipients",
            f"need {MIN_RECIPIENTS}..{MAX_RECIPIENTS} recipients, got {k}",
        ))
    for i, r in enumerate(t.recipients):
        prefix = f"recipients[{i}]"
        _check_person(prefix, r, out)
        if not (0 <= r.epts <= 100):
            out.append(Diagnostic("error", f"{prefix}.epts", f"epts must lie in [0, 100], got {r.epts}"))
        if not (math.isfinite(r.distance) and r.distance >= 0):
            out.append(Diagnostic("error", f"{prefix}.distance", f"distance must be >= 0, got {r.distance}"))
        if not (math.isfinite(r.ttno) and r.ttno > 0):
            out.append(Diagnostic("error", f"{prefix}.ttno", f"ttno must be > 0, got {r.ttno}"))
        if not (math.isfinite(r.mortality) and 0 < r.mortality < 1):
            out.append(Diagnostic("error", f"{prefix}.mortality",
                                  f"mortality must lie in (0, 1), got {r.mortality}"))
        if r.decision not in (0, 1):
            out.append(Diagnostic("error", f"{prefix}.decision", f"decision must be 0 or 1, got {r.decision}"))

    if k:
        accepted = sum(1 for r in t.recipients if r.decision == 1)
        if not (1 <= accepted <= 2):
            out.append(Diagnostic(
                "error", "recipients.decision",
                f"tuple needs one or two accepted recipients, got {accepted}",
            ))
        for attr in splits:
            spec = GroupSpec.for_attribute(attr)
            adv = sum(1 for r in t.recipients if spec.advantaged(r))
            dis = sum(1 for r in t.recipients if spec.disadvantaged(r))
            if adv == 0:
                out.append(Diagnostic("warning", attr, "empty advantaged group"))
            if dis == 0:
                out.append(Diagnostic("warning", attr, "empty disadvantaged group"))
    return out


def errors_only(diags: Sequence[Diagnostic]) -> list[Diagnostic]:
    return [d for d in diags if d.severity == "error"]


# ---------------------------------------------------------------------------
# Tuple files
# ---------------------------------------------------------------------------

def _number(obj: dict, key: str, where: str, integer: bool = False):
    if key not in obj:
        raise ParseError(f"{where}: missing field {key!r}")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{where}.{key}: expected a number, got {v!r}")
    if integer:
        if float(v) != int(v):
            raise ParseError(f"{where}.{key}: expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _string(obj: dict, key: str, where: str) -> str:
    if key not in obj:
        raise ParseError(f"{where}: missing field {key!r}")
    v = obj[key]
    if not isinstance(v, str):
        raise ParseError(f"{where}.{key}: expected a string, got {v!r}")
    return v


def tuple_from_dict(obj: Any, where: str = "tuple") -> DataTuple:
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    donor = obj.get("donor")
    if not isinstance(donor, dict):
        raise ParseError(f"{where}.donor: expected an object")
    dw = f"{where}.donor"
    d = DonorProfile(
        age=_number(donor, "age", dw),
        race=_string(donor, "race", dw),
        gender=_string(donor, "gender", dw),
        kdpi=_number(donor, "kdpi", dw, integer=True),
    )
    recs = obj.get("recipients")
    if not isinstance(recs, list):
        raise ParseError(f"{where}.recipients: expected an array")
    recipients = []
    for i, r in enumerate(recs):
        rw = f"{where}.recipients[{i}]"
        if not isinstance(r, dict):
            raise ParseError(f"{rw}: expected an object")
        recipients.append(RecipientRecord(
            age=_number(r, "age", rw),
            race=_string(r, "race", rw),
            gender=_string(r, "gender", rw),
            epts=_number(r, "epts", rw, integer=True),
            distance=_number(r, "distance", rw),
            ttno=_number(r, "ttno", rw),
            mortality=_number(r, "mortality", rw),
            decision=_number(r, "decision", rw, integer=True),
        ))
    return DataTuple(donor=d, recipients=tuple(recipients))


def load_tuples(path) -> list[DataTuple]:
    """Read and validate a tuple file; raises ParseError or ValidationError."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise DataIOError(f"cannot read {path}: {e.strerror or e}") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(raw, list):
        raise ParseError(f"{path}: top level must be a JSON array of tuples")
    tuples = [tuple_from_dict(obj, f"tuple[{i}]") for i, obj in enumerate(raw)]
    problems = []
    for i, t in enumerate(tuples):
        problems.extend(
            Diagnostic(d.severity, f"tuple[{i}].{d.field}", d.message)
            for d in errors_only(validate_tuple(t))
        )
    if problems:
        listing = "; ".join(str(p) for p in problems)
        raise ValidationError(f"{path}: {len(problems)} invalid field(s): {listing}", problems)
    return tuples


def write_tuples(tuples: Sequence[DataTuple], path) -> None:
    _write_text(path, json.dumps([t.to_dict() for t in tuples], indent=1))


def _write_text(path, text: str) -> None:
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e.strerror or e}") from e


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------

def _default_mix() -> dict[str, dict[str, float]]:
    # proportions of the sampled donor-recipient data
    return {
        "gender": {"Male": 0.62, "Female": 0.38},
        "race": {"White": 0.46, "Black": 0.25, "Hispanic": 0.19, "Asian": 0.08, "Other": 0.02},
        "age": {"<=50": 0.50, ">50": 0.50},
    }


def _default_decision_model() -> dict[str, float]:
    # logit of acceptance; features are rescaled to O(1) before use
    return {"intercept": -2.5, "epts": -1.5, "kdpi": -1.0, "ttno": 0.8, "mortality": 1.5}


@dataclass
class SynthSpec:
    num_tuples: int = 200
    recipients_per_tuple: int = 10
    demographic_mix: dict = field(default_factory=_default_mix)
    base_ttno: WeibullParams = field(default_factory=lambda: WeibullParams(1.5, 12.0))
    base_mortality: WeibullParams = field(default_factory=lambda: WeibullParams(2.0, 0.25))
    bias_knobs: dict = field(default_factory=lambda: {"gender": 1.0, "race": 1.0, "age": 1.0})
    decision_model: dict = field(default_factory=_default_decision_model)
    seed: int = 0

    def check(self) -> None:
        if self.num_tuples < 1:
            raise SpecError("num_tuples must be >= 1")
        if not (MIN_RECIPIENTS <= self.recipients_per_tuple <= MAX_RECIPIENTS):
            raise SpecError(f"recipients_per_tuple must lie in [{MIN_RECIPIENTS}, {MAX_RECIPIENTS}]")
        allowed = {"gender": GENDERS, "race": RACES, "age": AGE_BANDS}
        for attr, levels in allowed.items():
            mix = self.demographic_mix.get(attr)
            if mix is None:
                raise SpecError(f"demographic_mix lacks {attr!r}")
            unknown = set(mix) - set(levels)
            if unknown:
                raise SpecError(f"demographic_mix[{attr!r}] has unknown levels {sorted(unknown)}")
            if any(p < 0 for p in mix.values()) or abs(sum(mix.values()) - 1.0) > 1e-9:
                raise SpecError(f"demographic_mix[{attr!r}] must be nonnegative and sum to 1")
        for attr, m in self.bias_knobs.items():
            if attr not in allowed:
                raise SpecError(f"unknown bias knob {attr!r}")
            if not (m > 0):
                raise SpecError(f"bias knob {attr!r} must be > 0")
        missing = {"intercept", "epts", "kdpi", "ttno", "mortality"} - set(self.decision_model)
        if missing:
            raise SpecError(f"decision_model lacks coefficients {sorted(missing)}")

    @classmethod
    def from_dict(cls, obj: dict) -> "SynthSpec":
        obj = dict(obj)
        unknown = set(obj) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise SpecError(f"unknown SynthSpec fields {sorted(unknown)}")
        try:
            for key in ("base_ttno", "base_mortality"):
                if key in obj and not isinstance(obj[key], WeibullParams):
                    obj[key] = WeibullParams(float(obj[key]["shape"]), float(obj[key]["scale"]))
            if "bias_knobs" in obj:
                obj["bias_knobs"] = {**{"gender": 1.0, "race": 1.0, "age": 1.0}, **obj["bias_knobs"]}
            spec = cls(**obj)
        except (KeyError, TypeError, ValueError) as e:
            raise SpecError(f"malformed SynthSpec: {e}") from e
        spec.check()
        return spec

    def to_dict(self) -> dict:
        return asdict(self)


def _categorical(rng: np.random.Generator, mix: dict[str, float]) -> str:
    levels = list(mix)
    return levels[rng.choice(len(levels), p=np.array([mix[k] for k in levels]))]


def _disadvantaged_flags(race: str, gender: str, age: float) -> dict[str, bool]:
    return {"race": race == "Black", "gender": gender == "Female", "age": age > 50}


def _synth_tuple(spec: SynthSpec, index: int) -> DataTuple:
    rng = np.random.default_rng([spec.seed, index])
    mix = spec.demographic_mix
    donor = DonorProfile(
        age=float(rng.integers(18, 76)),
        race=_categorical(rng, mix["race"]),
        gender=_categorical(rng, mix["gender"]),
        kdpi=int(rng.integers(0, 101)),
    )
    kt, lt = spec.base_ttno.shape, spec.base_ttno.scale
    km, lm = spec.base_mortality.shape, spec.base_mortality.scale
    coef = spec.decision_model

    rows, logits = [], []
    for _ in range(spec.recipients_per_tuple):
        gender = _categorical(rng, mix["gender"])
        race = _categorical(rng, mix["race"])
        band = _categorical(rng, mix["age"])
        age = float(rng.integers(18, 51) if band == "<=50" else rng.integers(51, 76))
        epts = int(rng.integers(0, 101))
        distance = round(float(rng.uniform(1.0, 250.0)), 1)

        flags = _disadvantaged_flags(race, gender, age)
        mult = math.prod(spec.bias_knobs.get(a, 1.0) for a, on in flags.items() if on)
        ttno = float(lt * mult * rng.weibull(kt))
        while ttno <= 0.0:
            ttno = float(lt * mult * rng.weibull(kt))
        mortality = float(lm * mult * rng.weibull(km))
        while not (0.0 < mortality < 1.0):
            mortality = float(lm * mult * rng.weibull(km))

        logit = (coef["intercept"] + coef["epts"] * epts / 100.0
                 + coef["kdpi"] * donor.kdpi / 100.0
                 + coef["ttno"] * ttno / lt + coef["mortality"] * mortality / lm)
        decision = int(rng.random() < 1.0 / (1.0 + math.exp(-logit)))
        logits.append(logit)
        rows.append([age, race, gender, epts, distance, ttno, mortality, decision])

    # force one or two acceptances by flipping the highest-logit recipients
    order = np.argsort(-np.asarray(logits), kind="stable")
    accepted = [i for i in order if rows[i][7] == 1]
    if not accepted:
        rows[order[0]][7] = 1
    elif len(accepted) > 2:
        for i in accepted[2:]:
            rows[i][7] = 0

    recipients = tuple(RecipientRecord(*row) for row in rows)
    return DataTuple(donor=donor, recipients=recipients)


def synthesize_dataset(spec: SynthSpec) -> list[DataTuple]:
    """Generate ``spec.num_tuples`` tuples; each tuple owns a (seed, index) substream."""
    spec.check()
    return [_synth_tuple(spec, i) for i in range(spec.num_tuples)]


# ---------------------------------------------------------------------------
# Traces and reports
# ---------------------------------------------------------------------------

def write_trace(trace, path) -> None:
    """Write a RegretTrace (or anything with the same columns) as CSV."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_HEADER)
            for e, (h, s, b) in enumerate(zip(trace.hard_regret, trace.soft_regret, trace.betas)):
                w.writerow([e, repr(float(h)), repr(float(s))] + [repr(float(x)) for x in b])
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e.strerror or e}") from e


def read_trace(path):
    from .saff import RegretTrace

    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise DataIOError(f"cannot read {path}: {e.strerror or e}") from e
    if not rows or tuple(rows[0]) != TRACE_HEADER:
        raise ParseError(f"{path}: missing or wrong trace header")
    hard, soft, betas = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(TRACE_HEADER):
            raise ParseError(f"{path}: line {lineno}: expected {len(TRACE_HEADER)} columns")
        try:
            if int(row[0]) != lineno - 2:
                raise ParseError(f"{path}: line {lineno}: epochs must be consecutive from 0")
            hard.append(float(row[1]))
            soft.append(float(row[2]))
            betas.append(np.array([float(x) for x in row[3:]]))
        except ValueError as e:
            raise ParseError(f"{path}: line {lineno}: {e}") from e
    return RegretTrace(hard_regret=hard, soft_regret=soft, betas=betas)


def write_report(results: dict, path) -> None:
    required = ("attribute", "phi", "beta_star", "social_score", "config", "seed")
    missing = [k for k in required if k not in results]
    if missing:
        raise ValueError(f"report lacks keys {missing}")
    _write_text(path, json.dumps(results, indent=2, sort_keys=False))


def read_report(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except OSError as e:
        raise DataIOError(f"cannot read {path}: {e.strerror or e}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: line {e.lineno}: {e.msg}") from e
