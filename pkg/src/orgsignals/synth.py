"""Deterministic synthetic e-mail corpora with planted signal regimes.

Each scenario constructs a communication pattern whose signal values are
known by construction (star topology centralizes to 1.0, alternating hubs
oscillate at rate 1.0, constant reply delays pin the response metrics, a
two-point emotional mix pins the sentiment dispersion).  The generator
writes the canonical event CSV plus an expected.json sidecar recording
the planted values and the analysis settings under which they are exact.

Message bodies are bags of tokens, not prose: the content signals depend
only on token statistics.  All randomness flows from per-concern streams
derived from the scenario seed, so reruns are byte-identical.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .ingest import EXTERNAL_UNIT, MessageEvent, write_event_csv

CORPUS_START = datetime(2024, 1, 1, tzinfo=timezone.utc)
TOKENS_PER_MESSAGE = 20
NUDGE_GAP = timedelta(minutes=30)
UNIT_NAME = "team0"

POSITIVE_WORDS = [
    "great", "excellent", "happy", "wonderful", "fantastic", "love", "delighted", "superb",
]
NEGATIVE_WORDS = [
    "terrible", "awful", "horrible", "sad", "angry", "worried", "dreadful", "gloomy",
]
DICT_WORDS = [f"word{i:03d}" for i in range(200)]
OOV_WORDS = [f"novel{i:03d}" for i in range(100)]


def reference_dictionary() -> dict[str, float]:
    """Zipf-weighted reference over the in-dictionary vocabulary."""
    weights = {w: 1.0 / (i + 1) for i, w in enumerate(DICT_WORDS)}
    tail = 1.0 / (len(DICT_WORDS) + 1)
    for w in POSITIVE_WORDS + NEGATIVE_WORDS:
        weights[w] = tail
    total = math.fsum(weights.values())
    return {w: v / total for w, v in weights.items()}


class ScenarioError(ValueError):
    """Scenario spec validation failure; message names the offending field."""


@dataclass(slots=True)
class ScenarioSpec:
    name: str
    n_actors: int
    duration_days: int
    topology: str                        # star | ring | rotating_star | random
    rotation_period_days: int = 7        # rotating_star only
    edge_probability: float = 0.001      # random only, per ordered pair per day
    reply_delay_hours: tuple[str, float, float] | None = None  # (kind, a, b)
    nudge_profile: int = 1
    emotional_mean: float = 0.3
    emotional_std: float = 0.1
    in_dictionary_fraction: float = 1.0
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        def need(field, kind):
            if field not in data:
                raise ScenarioError(f"missing field: {field}")
            value = data[field]
            if kind is float and isinstance(value, int):
                value = float(value)
            if not isinstance(value, kind):
                raise ScenarioError(f"invalid field {field}: expected {kind.__name__}")
            return value

        topology = need("topology", dict)
        kind = topology.get("kind")
        if kind not in ("star", "ring", "rotating_star", "random"):
            raise ScenarioError(f"invalid field topology.kind: {kind!r}")

        reply = data.get("reply_delay_hours")
        reply_spec = None
        if reply is not None:
            if not isinstance(reply, dict) or "kind" not in reply:
                raise ScenarioError("invalid field reply_delay_hours")
            if reply["kind"] == "constant":
                value = float(reply.get("value", 0))
                reply_spec = ("constant", value, value)
            elif reply["kind"] == "uniform":
                reply_spec = ("uniform", float(reply.get("low", 0)), float(reply.get("high", 0)))
            else:
                raise ScenarioError(f"invalid field reply_delay_hours.kind: {reply['kind']!r}")

        mix = data.get("lexicon_mix", {})
        vocab = data.get("vocabulary", {})
        spec = cls(
            name=str(data.get("name", "scenario")),
            n_actors=need("n_actors", int),
            duration_days=need("duration_days", int),
            topology=kind,
            rotation_period_days=int(topology.get("rotation_period_days", 7)),
            edge_probability=float(topology.get("p", 0.001)),
            reply_delay_hours=reply_spec,
            nudge_profile=int(data.get("nudge_profile", 1)),
            emotional_mean=float(mix.get("mean", 0.3)),
            emotional_std=float(mix.get("std", 0.1)),
            in_dictionary_fraction=float(vocab.get("in_dictionary_fraction", 1.0)),
            seed=int(data.get("seed", 0)),
        )
        spec.validate()
        return spec

    def validate(self) -> None:
        if self.n_actors < 2:
            raise ScenarioError("invalid field n_actors: must be >= 2")
        if self.topology == "rotating_star" and self.n_actors < 3:
            raise ScenarioError("invalid field n_actors: rotating_star needs >= 3")
        if self.duration_days < 1:
            raise ScenarioError("invalid field duration_days: must be >= 1")
        if self.topology == "rotating_star":
            if self.rotation_period_days < 1:
                raise ScenarioError("invalid field topology.rotation_period_days")
            if self.duration_days % self.rotation_period_days != 0:
                raise ScenarioError(
                    "invalid field duration_days: must be a multiple of rotation_period_days"
                )
        if self.topology == "random" and not 0.0 < self.edge_probability <= 1.0:
            raise ScenarioError("invalid field topology.p: must be in (0, 1]")
        if self.nudge_profile < 1:
            raise ScenarioError("invalid field nudge_profile: must be >= 1")
        if self.reply_delay_hours is not None:
            _, low, high = self.reply_delay_hours
            if not 0.0 < low <= high:
                raise ScenarioError("invalid field reply_delay_hours: need 0 < low <= high")
            if high > 80.0:
                raise ScenarioError(
                    "invalid field reply_delay_hours: delays beyond 80h break weekly windowing"
                )
            if low <= (self.nudge_profile - 1) * (NUDGE_GAP.total_seconds() / 3600.0):
                raise ScenarioError(
                    "invalid field reply_delay_hours: delay must exceed the nudge run"
                )
            if self.topology == "rotating_star":
                interval_hours = max(24.0, 2.0 * high + 8.0)
                if interval_hours > self.rotation_period_days * 24.0:
                    raise ScenarioError(
                        "invalid field reply_delay_hours: reply envelope exceeds the rotation period"
                    )
        if not 0.0 <= self.emotional_mean <= 1.0:
            raise ScenarioError("invalid field lexicon_mix.mean: must be in [0, 1]")
        if self.emotional_std < 0.0:
            raise ScenarioError("invalid field lexicon_mix.std: must be >= 0")
        if not 0.0 <= self.emotional_mean - self.emotional_std <= 1.0 or not (
            0.0 <= self.emotional_mean + self.emotional_std <= 1.0
        ):
            raise ScenarioError("invalid field lexicon_mix: mean +/- std must stay in [0, 1]")
        if not 0.0 <= self.in_dictionary_fraction <= 1.0:
            raise ScenarioError("invalid field vocabulary.in_dictionary_fraction")

    # -- derived cadence ---------------------------------------------------

    @property
    def max_delay_hours(self) -> float:
        return self.reply_delay_hours[2] if self.reply_delay_hours else 0.0

    @property
    def round_interval(self) -> timedelta:
        """Spacing of communication rounds; wide enough that a run's reply
        always lands before the next round and reverse runs overshoot the
        recommended horizon."""
        hours = max(24.0, 2.0 * self.max_delay_hours + 8.0)
        return timedelta(hours=hours)

    @property
    def recommended_horizon_hours(self) -> float:
        if self.reply_delay_hours is None:
            return 14 * 24.0
        return self.max_delay_hours + 4.0

    @property
    def recommended_window_days(self) -> int:
        if self.topology == "rotating_star":
            return self.rotation_period_days
        return 7

    def actor(self, i: int) -> str:
        return f"actor{i:03d}@example.org"

    def unit_mapping(self) -> dict[str, str]:
        """Actor roster: the tracked unit, and leaves for rotating hubs."""
        if self.topology == "rotating_star":
            mapping = {self.actor(0): UNIT_NAME, self.actor(1): UNIT_NAME}
            for i in range(2, self.n_actors):
                mapping[self.actor(i)] = EXTERNAL_UNIT
            return mapping
        return {self.actor(i): UNIT_NAME for i in range(self.n_actors)}


class _TokenSampler:
    """Deterministic bag-of-tokens bodies with a two-point emotional mix."""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.rng = random.Random(f"{spec.seed}/vocab")
        self.message_index = 0
        ref = reference_dictionary()
        self.dict_words = DICT_WORDS
        self.dict_cum = []
        acc = 0.0
        for w in DICT_WORDS:
            acc += ref[w]
            self.dict_cum.append(acc)

    def next_tokens(self) -> tuple[list[str], float]:
        """(tokens, emotionality) for the next message."""
        spec = self.spec
        high = self.message_index % 2 == 0
        fraction = spec.emotional_mean + (spec.emotional_std if high else -spec.emotional_std)
        n_emotional = round(fraction * TOKENS_PER_MESSAGE)
        self.message_index += 1

        tokens = []
        for j in range(n_emotional):
            source = POSITIVE_WORDS if j % 2 == 0 else NEGATIVE_WORDS
            tokens.append(source[(self.message_index + j) % len(source)])
        for _ in range(TOKENS_PER_MESSAGE - n_emotional):
            if self.rng.random() < spec.in_dictionary_fraction:
                tokens.append(
                    self.rng.choices(self.dict_words, cum_weights=self.dict_cum, k=1)[0]
                )
            else:
                tokens.append(OOV_WORDS[self.rng.randrange(len(OOV_WORDS))])
        return tokens, n_emotional / TOKENS_PER_MESSAGE


def _population_std(values: list[float]) -> float:
    mean = math.fsum(values) / len(values)
    return math.sqrt(math.fsum((v - mean) ** 2 for v in values) / len(values))


def _population_var(values: list[float]) -> float:
    mean = math.fsum(values) / len(values)
    return math.fsum((v - mean) ** 2 for v in values) / len(values)


def generate(spec: ScenarioSpec) -> tuple[list[MessageEvent], dict]:
    """Generate the scenario's events and its expected.json sidecar dict."""
    spec.validate()
    corpus_end = CORPUS_START + timedelta(days=spec.duration_days)
    delay_rng = random.Random(f"{spec.seed}/delays")
    pair_rng = random.Random(f"{spec.seed}/pairs")
    sampler = _TokenSampler(spec)
    mapping = spec.unit_mapping()

    events: list[MessageEvent] = []
    seq = 0
    # construction-side tallies over the tracked unit's stream
    unit_emotionality: list[float] = []
    unit_sent: Counter[str] = Counter()
    unit_received: Counter[str] = Counter()
    reply_delays_hours: list[float] = []

    def emit(sender: str, recipients: list[str], stamp: datetime,
             in_reply_to: str | None, subject: str) -> str:
        nonlocal seq
        tokens, emotionality = sampler.next_tokens()
        message_id = f"<m{seq:07d}@sim.local>"
        seq += 1
        events.append(MessageEvent(
            message_id=message_id,
            timestamp=stamp,
            sender=sender,
            recipients=[(r, 1.0) for r in recipients],
            in_reply_to=in_reply_to,
            subject_key=subject,
            tokens=tokens,
        ))
        if mapping.get(sender) == UNIT_NAME:
            unit_emotionality.append(emotionality)
            unit_sent[sender] += 1
            for r in recipients:
                unit_received[r] += 1
        return message_id

    def sample_delay() -> timedelta:
        kind, low, high = spec.reply_delay_hours
        hours = low if kind == "constant" else delay_rng.uniform(low, high)
        return timedelta(seconds=round(hours * 3600))

    def run_rounds(pairs_of_round):
        """Drive nudge runs and replies for round-structured topologies.

        A round is generated only if its whole envelope (nudges plus the
        latest possible reply) fits inside the corpus, so every planted
        run closes cleanly and the tallies stay exact.
        """
        interval = spec.round_interval
        envelope = (spec.nudge_profile - 1) * NUDGE_GAP + timedelta(
            seconds=round(spec.max_delay_hours * 3600)
        )
        k = 0
        while CORPUS_START + k * interval + envelope < corpus_end:
            stamp = CORPUS_START + k * interval
            for sender, recipient in pairs_of_round(k):
                first_id = None
                for j in range(spec.nudge_profile):
                    mid = emit(sender, [recipient], stamp + j * NUDGE_GAP,
                               None if j == 0 else first_id, f"round {k}")
                    if j == 0:
                        first_id = mid
                if spec.reply_delay_hours is not None:
                    delay = sample_delay()
                    emit(recipient, [sender], stamp + delay, first_id, f"round {k}")
                    if mapping.get(recipient) == UNIT_NAME:
                        reply_delays_hours.append(delay.total_seconds() / 3600.0)
            k += 1

    if spec.topology == "star":
        hub = spec.actor(0)
        leaves = [spec.actor(i) for i in range(1, spec.n_actors)]
        run_rounds(lambda k: [(hub, leaf) for leaf in leaves])
    elif spec.topology == "ring":
        actors = [spec.actor(i) for i in range(spec.n_actors)]
        run_rounds(lambda k: [
            (actors[i], actors[(i + 1) % len(actors)]) for i in range(len(actors))
        ])
    elif spec.topology == "rotating_star":
        actors = [spec.actor(i) for i in range(spec.n_actors)]
        rotation = timedelta(days=spec.rotation_period_days)

        def pairs(k):
            at = CORPUS_START + k * spec.round_interval
            phase = int((at - CORPUS_START) / rotation)
            hub = actors[phase % 2]
            return [(hub, other) for other in actors if other != hub]

        run_rounds(pairs)
    elif spec.topology == "random":
        actors = [spec.actor(i) for i in range(spec.n_actors)]
        per_day = round(spec.edge_probability * spec.n_actors * (spec.n_actors - 1))
        for day in range(spec.duration_days):
            day_start = CORPUS_START + timedelta(days=day)
            stamps = sorted(pair_rng.randrange(86400) for _ in range(per_day))
            for offset in stamps:
                i = pair_rng.randrange(spec.n_actors)
                j = pair_rng.randrange(spec.n_actors - 1)
                if j >= i:
                    j += 1
                emit(actors[i], [actors[j]],
                     day_start + timedelta(seconds=offset), None, f"day {day}")

    events.sort(key=lambda e: e.timestamp)
    sidecar = _build_sidecar(spec, unit_emotionality, unit_sent, unit_received,
                             reply_delays_hours)
    return events, sidecar


def _build_sidecar(spec, unit_emotionality, unit_sent, unit_received, reply_delays):
    """Expected signal values that are exact by construction."""
    expected: dict[str, float] = {}
    n_windows = spec.duration_days // spec.recommended_window_days

    if spec.topology in ("star", "rotating_star") and spec.n_actors >= 3:
        expected["central_leadership"] = 1.0
    elif spec.topology == "ring" and spec.n_actors >= 3:
        expected["central_leadership"] = 0.0

    if n_windows >= 3:
        if spec.topology in ("star", "ring"):
            expected["rotating_leadership"] = 0.0
        elif spec.topology == "rotating_star":
            expected["rotating_leadership"] = 1.0
            expected["rotating_leadership_ci"] = 1.0

    if reply_delays:
        avg = math.fsum(reply_delays) / len(reply_delays)
        expected["avg_response_time_hours"] = avg
        expected["avg_nudges"] = float(spec.nudge_profile)
        expected["responsiveness"] = 1.0 / (1.0 + avg / 24.0)

    if len(unit_emotionality) >= 2:
        expected["honest_sentiment"] = _population_std(unit_emotionality)

    actors = set(unit_sent) | set(unit_received)
    members = {a for a, u in spec.unit_mapping().items() if u == UNIT_NAME}
    cis = [
        (unit_sent[a] - unit_received[a]) / (unit_sent[a] + unit_received[a])
        for a in actors & members
        if unit_sent[a] + unit_received[a] >= 1
    ]
    if len(cis) >= 2:
        expected["balanced_contribution"] = _population_var(cis)

    return {
        "scenario": {
            "name": spec.name,
            "n_actors": spec.n_actors,
            "duration_days": spec.duration_days,
            "topology": spec.topology,
            "nudge_profile": spec.nudge_profile,
            "emotional_mean": spec.emotional_mean,
            "emotional_std": spec.emotional_std,
            "in_dictionary_fraction": spec.in_dictionary_fraction,
            "seed": spec.seed,
        },
        "unit": UNIT_NAME,
        "analysis": {
            "window_days": spec.recommended_window_days,
            "step_days": spec.recommended_window_days,
            "response_horizon_hours": spec.recommended_horizon_hours,
            "period": "whole",
        },
        "expected": expected,
    }


def write_bundle(spec: ScenarioSpec, out_dir: str | Path) -> dict:
    """Write events.csv, expected.json, units.csv, and the lexicon files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    events, sidecar = generate(spec)

    write_event_csv(events, out / "events.csv")
    with open(out / "expected.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "units.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("address,unit\n")
        for actor, unit in sorted(spec.unit_mapping().items()):
            fh.write(f"{actor},{unit}\n")
    with open(out / "positive.txt", "w", encoding="utf-8") as fh:
        fh.write("\n".join(POSITIVE_WORDS) + "\n")
    with open(out / "negative.txt", "w", encoding="utf-8") as fh:
        fh.write("\n".join(NEGATIVE_WORDS) + "\n")
    with open(out / "reference_dictionary.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("word,relative_frequency\n")
        for word, freq in reference_dictionary().items():
            fh.write(f"{word},{freq!r}\n")
    return sidecar
