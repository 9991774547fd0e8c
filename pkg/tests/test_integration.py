"""Full pipeline chain: events -> analyze CLI -> calibrate CLI.

Sixteen small units with planted structure, reply, and emotionality
regimes produce real analyze output; a performance file constructed as an
exact linear function of the measured signals must then be recovered by
calibrate with R2 ~ 1.  This pins the signals.csv schema between the two
commands.
"""

import csv
import json

import pytest

from orgsignals.cli import main
from orgsignals.ingest import write_event_csv
from orgsignals.signals import read_signals_csv

from conftest import mk_event


def emotional_tokens(count):
    """Six tokens with `count` lexicon hits."""
    hits = ["great", "terrible", "great", "terrible"][:count]
    return hits + ["plan", "update", "notes", "agenda", "minutes", "draft"][: 6 - count]


def unit_events(index):
    """One unit's 28-day event stream with unit-specific regimes.

    Rounds every 96h keep every reply (delays up to 32h) within a shared
    40h analysis horizon while the next round overshoots it, so reverse
    runs are censored and the measured response time equals the delay.
    """
    actors = [f"u{index:02d}{x}@x.com" for x in "abcd"]
    hub, leaves = actors[0], actors[1:]
    delay = 2.0 + index * 2.0            # hours, varies responsiveness
    spread = index % 3                   # extra hits per sent message, varies dispersion
    ring = index % 4 == 0                # every fourth unit is egalitarian
    events = []
    for round_index in range(7):
        base = round_index * 96.0
        if ring:
            pairs = list(zip(actors, actors[1:] + actors[:1]))
        else:
            pairs = [(hub, leaf) for leaf in leaves]
        for i, (src, dst) in enumerate(pairs):
            events.append(mk_event(src, [dst], hours=base,
                                   message_id=f"<u{index}-{round_index}-{i}>",
                                   tokens=emotional_tokens(2 + spread)))
            events.append(mk_event(dst, [src], hours=base + delay,
                                   message_id=f"<u{index}-{round_index}-{i}-r>",
                                   tokens=emotional_tokens(2 - spread)))
    return actors, events


def test_pipeline_chain(tmp_path):
    all_events, unit_rows = [], []
    for index in range(16):
        actors, events = unit_events(index)
        all_events.extend(events)
        unit_rows.extend((a, f"unit{index:02d}") for a in actors)

    events_path = tmp_path / "events.csv"
    write_event_csv(sorted(all_events, key=lambda e: e.timestamp), events_path)
    units_path = tmp_path / "units.csv"
    with open(units_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["address", "unit"])
        writer.writerows(unit_rows)
    (tmp_path / "positive.txt").write_text("great\n")
    (tmp_path / "negative.txt").write_text("terrible\n")

    analysis = tmp_path / "analysis"
    assert main([
        "analyze", "--events", str(events_path), "--units", str(units_path),
        "--positive", str(tmp_path / "positive.txt"),
        "--negative", str(tmp_path / "negative.txt"),
        "--window-days", "7", "--step-days", "7",
        "--response-horizon-hours", "40",
        "--corpus-start", "2024-01-01T00:00:00+00:00",
        "--corpus-end", "2024-01-29T00:00:00+00:00",
        "--out-dir", str(analysis),
    ]) == 0

    rows = read_signals_csv(analysis / "signals.csv")
    assert len(rows) == 16
    by_unit = {r["unit"]: r for r in rows}
    # planted regime shape survives the real pipeline
    assert by_unit["unit00"]["central_leadership"] == pytest.approx(0.0, abs=1e-9)
    assert by_unit["unit01"]["central_leadership"] == pytest.approx(1.0, abs=1e-9)
    for index in range(16):
        unit = f"unit{index:02d}"
        assert by_unit[unit]["avg_response_time_hours"] == pytest.approx(
            2.0 + 2.0 * index, abs=0.01
        )
        assert by_unit[unit]["honest_sentiment"] == pytest.approx((index % 3) / 6, abs=1e-9)
    assert (by_unit["unit01"]["responsiveness"]
            > by_unit["unit15"]["responsiveness"])

    # exact linear performance over the measured signals
    truth = {"intercept": 1.0, "honest_sentiment": 0.14,
             "responsiveness": 0.05, "central_leadership": -0.07}
    perf_path = tmp_path / "performance.csv"
    with open(perf_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit", "performance"])
        for row in rows:
            y = (truth["intercept"]
                 + truth["honest_sentiment"] * row["honest_sentiment"]
                 + truth["responsiveness"] * row["responsiveness"]
                 + truth["central_leadership"] * row["central_leadership"])
            writer.writerow([row["unit"], repr(y)])

    calibration = tmp_path / "calibration"
    assert main([
        "calibrate", "--signals", str(analysis / "signals.csv"),
        "--performance", str(perf_path), "--out-dir", str(calibration),
    ]) == 0

    with open(calibration / "calibration.csv", newline="") as fh:
        terms = {
            (r["model"], r["term"]): r for r in csv.DictReader(fh)
        }
    assert float(terms[("3", "intercept")]["coefficient"]) == pytest.approx(1.0, abs=1e-8)
    for term, value in list(truth.items())[1:]:
        assert float(terms[("3", term)]["coefficient"]) == pytest.approx(value, abs=1e-8)
    assert float(terms[("3", "honest_sentiment")]["r2"]) == pytest.approx(1.0, abs=1e-9)
    table = (calibration / "calibration_table.txt").read_text()
    assert "Structure" in table and "Adj R2" in table
