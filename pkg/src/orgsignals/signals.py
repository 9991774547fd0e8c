"""The six communication signal metrics, aggregated per unit and period.

Signals fall in three dimensions: structure (central_leadership,
balanced_contribution), dynamics (rotating_leadership, responsiveness
and the other reply metrics), content (honest_sentiment,
innovative_language).  Every metric degrades to "missing" (None) rather
than a fake zero when its inputs are insufficient.
"""

from __future__ import annotations

import csv
import logging
import math
from bisect import bisect_left
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

from .graph import (
    TimeWindowConfig,
    betweenness_centrality,
    build_windows,
    group_centralization,
)
from .ingest import MessageEvent

log = logging.getLogger(__name__)

SIGNAL_DIMENSIONS = {
    "central_leadership": "structure",
    "balanced_contribution": "structure",
    "rotating_leadership": "dynamics",
    "rotating_leadership_ci": "dynamics",
    "avg_response_time_hours": "dynamics",
    "avg_nudges": "dynamics",
    "responsiveness": "dynamics",
    "honest_sentiment": "content",
    "innovative_language": "content",
    "oov_rate": "content",
}

SIGNALS_CSV_COLUMNS = [
    "unit",
    "period_start",
    "period_end",
    *SIGNAL_DIMENSIONS.keys(),
]

DEFAULT_RESPONSE_HORIZON = timedelta(days=14)


@dataclass(slots=True)
class SignalRecord:
    """Signal values for one unit over one analysis period; None = missing."""

    unit: str
    period_start: datetime
    period_end: datetime
    central_leadership: float | None = None
    balanced_contribution: float | None = None
    rotating_leadership: float | None = None
    rotating_leadership_ci: float | None = None
    avg_response_time_hours: float | None = None
    avg_nudges: float | None = None
    responsiveness: float | None = None
    honest_sentiment: float | None = None
    innovative_language: float | None = None
    oov_rate: float | None = None

    dimensions = SIGNAL_DIMENSIONS

    def as_row(self) -> list[str]:
        row = [self.unit, self.period_start.isoformat(), self.period_end.isoformat()]
        for name in SIGNAL_DIMENSIONS:
            value = getattr(self, name)
            row.append("" if value is None else repr(float(value)))
        return row


@dataclass(slots=True)
class ResponseEvent:
    """One closed request run: nudges from requester, then a reply."""

    requester: str
    responder: str
    run_start: datetime
    run_last: datetime
    response_at: datetime
    nudges: int

    @property
    def elapsed_hours(self) -> float:
        return (self.response_at - self.run_start).total_seconds() / 3600.0


@dataclass
class LexiconConfig:
    """Sentiment word lists plus the reference word-frequency dictionary."""

    positive: set[str] = field(default_factory=set)
    negative: set[str] = field(default_factory=set)
    reference_dictionary: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        overlap = self.positive & self.negative
        if overlap:
            raise ValueError(f"positive/negative lexicons overlap: {sorted(overlap)[:5]}")
        if self.reference_dictionary:
            if any(v <= 0 for v in self.reference_dictionary.values()):
                raise ValueError("reference frequencies must be positive")
            total = math.fsum(self.reference_dictionary.values())
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"reference frequencies sum to {total}, expected 1")


# ---------------------------------------------------------------------------
# Structure: contribution balance
# ---------------------------------------------------------------------------

def contribution_index(sent: int, received: int) -> float:
    """(sent - received) / (sent + received); +1 pure sender, -1 pure receiver."""
    total = sent + received
    if total < 1:
        raise ValueError("no activity")
    return (sent - received) / total


def actor_activity(events: list[MessageEvent]) -> dict[str, tuple[int, int]]:
    """Per-actor (sent, received) counts; each recipient occurrence counts 1."""
    sent: Counter[str] = Counter()
    received: Counter[str] = Counter()
    for e in events:
        sent[e.sender] += 1
        for addr, _ in e.recipients:
            received[addr] += 1
    return {a: (sent[a], received[a]) for a in set(sent) | set(received)}


def balanced_contribution(
    events: list[MessageEvent], actors: set[str] | None = None
) -> float:
    """Population variance of the contribution index over active actors.

    `actors` optionally restricts which actors enter the variance (unit
    members, typically); actors with no activity are excluded either way.
    """
    activity = actor_activity(events)
    values = [
        contribution_index(s, r)
        for a, (s, r) in activity.items()
        if (actors is None or a in actors) and s + r >= 1
    ]
    if len(values) < 2:
        raise ValueError("insufficient actors")
    mean = math.fsum(values) / len(values)
    return math.fsum((v - mean) ** 2 for v in values) / len(values)


# ---------------------------------------------------------------------------
# Dynamics: leadership rotation
# ---------------------------------------------------------------------------

def oscillation_count(series: list[float]) -> int:
    """Direction changes in a series: local extrema after plateau compression."""
    if not series:
        raise ValueError("empty series")
    compressed = [series[0]]
    for x in series[1:]:
        if x != compressed[-1]:
            compressed.append(x)
    count = 0
    for i in range(2, len(compressed)):
        d_prev = compressed[i - 1] - compressed[i - 2]
        d_next = compressed[i] - compressed[i - 1]
        if (d_prev > 0) != (d_next > 0):
            count += 1
    return count


def rotating_leadership(
    betweenness_series: list[dict[str, float]],
    ci_series: list[dict[str, float]],
    actors: set[str] | None = None,
) -> tuple[float, float]:
    """Mean oscillation rates of per-actor betweenness and CI across windows.

    Both series must cover the same window positions; actors absent from a
    window take value 0 there.  Each mean oscillation count is divided by
    (windows - 2), the maximum per actor, so the rate lies in [0, 1].
    """
    n_windows = len(betweenness_series)
    if len(ci_series) != n_windows:
        raise ValueError("series length mismatch")
    if n_windows < 3:
        raise ValueError("series too short")

    def mean_rate(series: list[dict[str, float]]) -> float:
        pool = actors if actors is not None else {a for w in series for a in w}
        if not pool:
            return 0.0
        total = sum(
            oscillation_count([w.get(a, 0.0) for w in series]) for a in pool
        )
        return total / len(pool) / (n_windows - 2)

    return mean_rate(betweenness_series), mean_rate(ci_series)


# ---------------------------------------------------------------------------
# Dynamics: reply behaviour
# ---------------------------------------------------------------------------

def extract_response_events(
    events: list[MessageEvent],
    max_response_horizon: timedelta = DEFAULT_RESPONSE_HORIZON,
) -> list[ResponseEvent]:
    """Scan every ordered actor pair for request runs and their replies.

    A run accumulates consecutive A->B messages with no intervening B->A;
    the first strictly later B->A message closes it.  The close emits a
    ResponseEvent only when it falls within the horizon of the run start;
    otherwise the run is censored and dropped, as are runs never closed.
    Same-second replies are treated as crossing mail and ignored.
    """
    pair_times: dict[tuple[str, str], list[datetime]] = defaultdict(list)
    for e in events:
        for addr, _ in e.recipients:
            pair_times[(e.sender, addr)].append(e.timestamp)

    out: list[ResponseEvent] = []
    for (requester, responder), requests in pair_times.items():
        responses = pair_times.get((responder, requester), [])
        # requests sort ahead of responses at equal timestamps
        merged = sorted(
            [(t, 0) for t in requests] + [(t, 1) for t in responses]
        )
        run_start: datetime | None = None
        run_last: datetime | None = None
        nudges = 0
        for t, kind in merged:
            if kind == 0:
                if run_start is None:
                    run_start, run_last, nudges = t, t, 1
                else:
                    run_last = t
                    nudges += 1
            elif run_start is not None and t > run_last:
                if t - run_start <= max_response_horizon:
                    out.append(
                        ResponseEvent(requester, responder, run_start, run_last, t, nudges)
                    )
                run_start, run_last, nudges = None, None, 0
    out.sort(key=lambda r: (r.run_start, r.requester, r.responder))
    return out


def rapid_response(
    response_events: list[ResponseEvent],
) -> tuple[float, float, float]:
    """(avg_response_time_hours, avg_nudges, responsiveness).

    Responsiveness is 1/(1 + avg_hours/24): 1.0 for instantaneous replies,
    decreasing toward 0 as the average response time grows.
    """
    if not response_events:
        raise ValueError("no response events")
    avg_hours = math.fsum(r.elapsed_hours for r in response_events) / len(response_events)
    avg_nudges = math.fsum(r.nudges for r in response_events) / len(response_events)
    return avg_hours, avg_nudges, 1.0 / (1.0 + avg_hours / 24.0)


# ---------------------------------------------------------------------------
# Content: sentiment dispersion and lexical divergence
# ---------------------------------------------------------------------------

def message_emotionality(
    tokens: list[str], lexicon: LexiconConfig
) -> tuple[float, float]:
    """(emotional-token density, polarity balance) of one message."""
    if not tokens:
        raise ValueError("empty token list")
    pos = sum(1 for t in tokens if t in lexicon.positive)
    neg = sum(1 for t in tokens if t in lexicon.negative)
    hits = pos + neg
    emotionality = hits / len(tokens)
    sentiment = (pos - neg) / hits if hits else 0.0
    return emotionality, sentiment


def honest_sentiment(events: list[MessageEvent], lexicon: LexiconConfig) -> float:
    """Population standard deviation of per-message emotionality."""
    values = [
        message_emotionality(e.tokens, lexicon)[0] for e in events if e.tokens
    ]
    if len(values) < 2:
        raise ValueError("insufficient messages")
    mean = math.fsum(values) / len(values)
    return math.sqrt(math.fsum((v - mean) ** 2 for v in values) / len(values))


def jensen_shannon_divergence(p: dict[str, float], q: dict[str, float]) -> float:
    """Base-2 Jensen-Shannon divergence over the union support, in [0, 1]."""
    total = 0.0
    for key in p.keys() | q.keys():
        pk = p.get(key, 0.0)
        qk = q.get(key, 0.0)
        m = 0.5 * (pk + qk)
        if pk > 0.0:
            total += 0.5 * pk * math.log2(pk / m)
        if qk > 0.0:
            total += 0.5 * qk * math.log2(qk / m)
    return min(1.0, max(0.0, total))


def innovative_language(tokens: list[str], reference: dict[str, float]) -> float:
    """Divergence of the token stream's unigram distribution from the reference."""
    if not tokens:
        raise ValueError("no content")
    counts = Counter(tokens)
    n = len(tokens)
    p = {w: c / n for w, c in counts.items()}
    return jensen_shannon_divergence(p, reference)


def out_of_vocabulary_rate(tokens: list[str], reference: dict[str, float]) -> float:
    """Auxiliary metric: fraction of tokens absent from the reference."""
    if not tokens:
        raise ValueError("no content")
    return sum(1 for t in tokens if t not in reference) / len(tokens)


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------

def _window_ci_vectors(
    events: list[MessageEvent], graphs
) -> list[dict[str, float]]:
    """Per-window contribution index per actor; inactive actors omitted."""
    stamps = [e.timestamp for e in events]
    vectors = []
    for g in graphs:
        lo = bisect_left(stamps, g.window_start)
        hi = bisect_left(stamps, g.window_end)
        vectors.append(
            {
                a: contribution_index(s, r)
                for a, (s, r) in actor_activity(events[lo:hi]).items()
            }
        )
    return vectors


def compute_signal_record(
    unit: str,
    period: tuple[datetime, datetime],
    events: list[MessageEvent],
    window_cfg: TimeWindowConfig,
    lexicon: LexiconConfig,
    members: set[str] | None = None,
    response_horizon: timedelta = DEFAULT_RESPONSE_HORIZON,
) -> SignalRecord:
    """Populate a SignalRecord for one unit's event stream over one period.

    `events` is the unit's time-sorted stream (sender belongs to the unit).
    `members` restricts actor-level aggregates to the unit roster; without
    it every actor appearing in the stream is aggregated.  Sub-signals whose
    preconditions fail are left missing, never zeroed.
    """
    start, end = period
    if end <= start:
        raise ValueError("empty period")
    events = [e for e in events if start <= e.timestamp < end]
    if not events:
        raise ValueError(f"unit {unit!r} has no events in period")
    record = SignalRecord(unit=unit, period_start=start, period_end=end)

    cfg = TimeWindowConfig(
        window_length=window_cfg.window_length,
        step=window_cfg.step,
        corpus_start=start,
        corpus_end=end,
    )
    graphs = build_windows(events, cfg)

    # structure: mean betweenness centralization over computable windows
    centralizations = []
    betweenness_series: list[dict[str, float]] = []
    for g in graphs:
        if g.n >= 2:
            vector = betweenness_centrality(g)
            betweenness_series.append(vector)
            if g.n >= 3:
                centralizations.append(group_centralization(vector, "betweenness"))
        else:
            betweenness_series.append({})
    if centralizations:
        record.central_leadership = math.fsum(centralizations) / len(centralizations)

    try:
        record.balanced_contribution = balanced_contribution(events, members)
    except ValueError:
        pass

    # dynamics: oscillation rates need at least three window positions
    if len(graphs) >= 3:
        ci_series = _window_ci_vectors(events, graphs)
        pool = members
        if pool is None:
            pool = {a for w in betweenness_series for a in w} | {
                a for w in ci_series for a in w
            }
        pool = pool & ({a for w in betweenness_series for a in w}
                       | {a for w in ci_series for a in w})
        if pool:
            rate_b, rate_ci = rotating_leadership(betweenness_series, ci_series, pool)
            record.rotating_leadership = rate_b
            record.rotating_leadership_ci = rate_ci

    responses = extract_response_events(events, response_horizon)
    if members is not None:
        responses = [r for r in responses if r.requester in members]
    if responses:
        avg_hours, avg_nudges, responsiveness = rapid_response(responses)
        record.avg_response_time_hours = avg_hours
        record.avg_nudges = avg_nudges
        record.responsiveness = responsiveness

    try:
        record.honest_sentiment = honest_sentiment(events, lexicon)
    except ValueError:
        pass

    all_tokens = [t for e in events for t in e.tokens]
    if all_tokens and lexicon.reference_dictionary:
        record.innovative_language = innovative_language(
            all_tokens, lexicon.reference_dictionary
        )
        record.oov_rate = out_of_vocabulary_rate(
            all_tokens, lexicon.reference_dictionary
        )
    return record


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def load_word_list(path: str | Path) -> set[str]:
    """One word per line, UTF-8; blank lines ignored."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.strip().lower()
            if word:
                words.add(word)
    return words


def load_reference_csv(path: str | Path) -> dict[str, float]:
    """Reference dictionary CSV (word,relative_frequency), renormalized.

    A deviation of the frequency sum beyond 1e-6 is logged as a warning;
    the distribution is renormalized either way so downstream invariants
    hold exactly.
    """
    freqs: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["word", "relative_frequency"]:
            raise ValueError("reference dictionary: expected header word,relative_frequency")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise ValueError(f"reference dictionary row {lineno}: got {len(row)} fields")
            word = row[0].strip().lower()
            try:
                freq = float(row[1])
            except ValueError:
                raise ValueError(
                    f"reference dictionary row {lineno}: bad frequency {row[1]!r}"
                ) from None
            if freq <= 0:
                raise ValueError(f"reference dictionary row {lineno}: frequency must be > 0")
            if word in freqs:
                raise ValueError(f"reference dictionary row {lineno}: duplicate word {word!r}")
            freqs[word] = freq
    if not freqs:
        raise ValueError("reference dictionary is empty")
    total = math.fsum(freqs.values())
    if abs(total - 1.0) > 1e-6:
        log.warning("reference dictionary frequencies sum to %.9f; renormalizing", total)
    return {w: f / total for w, f in freqs.items()}


def load_lexicon(
    positive_path: str | Path,
    negative_path: str | Path,
    reference_path: str | Path | None = None,
) -> LexiconConfig:
    reference = load_reference_csv(reference_path) if reference_path else {}
    return LexiconConfig(
        positive=load_word_list(positive_path),
        negative=load_word_list(negative_path),
        reference_dictionary=reference,
    )


def write_signals_csv(records: list[SignalRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SIGNALS_CSV_COLUMNS)
        for record in records:
            writer.writerow(record.as_row())


def read_signals_csv(path: str | Path) -> list[dict]:
    """Rows as dicts with floats parsed and missing cells as None."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SIGNALS_CSV_COLUMNS:
            raise ValueError(f"signals CSV: unexpected header {reader.fieldnames}")
        for raw in reader:
            row: dict = {
                "unit": raw["unit"],
                "period_start": raw["period_start"],
                "period_end": raw["period_end"],
            }
            for name in SIGNAL_DIMENSIONS:
                cell = raw[name]
                row[name] = float(cell) if cell else None
            rows.append(row)
    return rows
