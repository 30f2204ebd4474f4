"""Human-normalized score aggregation: per-game normalization, mean/median
over games, interquartile mean and optimality gap over runs, percentile
bootstrap confidence intervals, and score-distribution curves.

Bundled under ``data/`` are the published Atari 100k benchmark tables
(per-game mean scores for several methods, the random/human reference
columns, and scores at intermediate interaction budgets); feeding them back
through this module reproduces the published aggregate rows, which is the
module's oracle.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from importlib import resources

import numpy as np


class NormalizationError(ValueError):
    """Normalization is undefined when the human and random scores agree."""


class EmptyTableError(ValueError):
    pass


def normalized_score(agent: float, random: float, human: float) -> float:
    """(agent - random) / (human - random); may be negative or exceed 1."""
    if human == random:
        raise NormalizationError(
            f"human score equals random score ({human}); cannot normalize")
    return (agent - random) / (human - random)


@dataclass
class ScoreTable:
    """Per-run raw scores plus the reference scores used to normalize them."""
    rows: list[tuple[str, str, float]]                  # (game, run, score)
    references: dict[str, tuple[float, float]]          # game -> (random, human)

    def __post_init__(self):
        for game, (rand, human) in self.references.items():
            if human == rand:
                raise NormalizationError(
                    f"game '{game}': human score equals random score")
        missing = {g for g, _, _ in self.rows} - set(self.references)
        if missing:
            raise KeyError(f"no reference scores for games: {sorted(missing)}")

    def games(self) -> list[str]:
        seen: list[str] = []
        for game, _, _ in self.rows:
            if game not in seen:
                seen.append(game)
        return seen

    def normalized_by_game(self) -> dict[str, np.ndarray]:
        """Normalized run scores grouped per game, in row order."""
        out: dict[str, list[float]] = {}
        for game, _, score in self.rows:
            rand, human = self.references[game]
            out.setdefault(game, []).append(normalized_score(score, rand, human))
        return {g: np.asarray(v, dtype=np.float64) for g, v in out.items()}

    def normalized_runs(self) -> np.ndarray:
        """All normalized run scores, flattened in row order."""
        per_game = self.normalized_by_game()
        return np.concatenate([per_game[g] for g in self.games()])


def interquartile_mean(scores: np.ndarray) -> float:
    """Mean of the middle 50%: drop floor(n/4) scores from each end."""
    arr = np.sort(np.asarray(scores, dtype=np.float64))
    if arr.size == 0:
        raise EmptyTableError("IQM of an empty score list")
    trim = arr.size // 4
    return float(arr[trim:arr.size - trim].mean())


def optimality_gap(scores: np.ndarray) -> float:
    """Mean shortfall below human level: E[max(0, 1 - score)]."""
    arr = np.asarray(scores, dtype=np.float64)
    if arr.size == 0:
        raise EmptyTableError("optimality gap of an empty score list")
    return float(np.maximum(0.0, 1.0 - arr).mean())


@dataclass
class AggregateReport:
    per_game_mean: dict[str, float]
    normalized_mean: float
    normalized_median: float
    iqm: float
    optimality_gap: float
    confidence: dict[str, tuple[float, float]] = field(default_factory=dict)

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["statistic", "value", "ci_low", "ci_high"])
        for name in ("normalized_mean", "normalized_median", "iqm",
                     "optimality_gap"):
            lo, hi = self.confidence.get(name, ("", ""))
            writer.writerow([name, f"{getattr(self, name):.6f}", lo, hi])
        for game, mean in self.per_game_mean.items():
            writer.writerow([f"game:{game}", f"{mean:.6f}", "", ""])
        return out.getvalue()


def aggregates(table: ScoreTable, bootstrap_resamples: int = 10_000,
               seed: int = 0, confidence: float = 0.95) -> AggregateReport:
    """Aggregate statistics over a score table.

    Mean and median are taken across per-game normalized means; IQM and
    optimality gap are taken across all normalized runs. Confidence
    intervals (when `bootstrap_resamples` > 0) come from a seeded percentile
    bootstrap that resamples runs within each game.
    """
    if not table.rows:
        raise EmptyTableError("score table has no rows")
    per_game = table.normalized_by_game()
    games = table.games()
    game_means = {g: float(per_game[g].mean()) for g in games}
    means = np.asarray([game_means[g] for g in games])
    runs = table.normalized_runs()
    report = AggregateReport(
        per_game_mean=game_means,
        normalized_mean=float(means.mean()),
        normalized_median=float(np.median(means)),
        iqm=interquartile_mean(runs),
        optimality_gap=optimality_gap(runs),
    )
    if bootstrap_resamples > 0:
        report.confidence = _bootstrap_confidence(
            per_game, games, bootstrap_resamples, seed, confidence)
    return report


def _bootstrap_confidence(per_game: dict[str, np.ndarray], games: list[str],
                          resamples: int, seed: int, confidence: float
                          ) -> dict[str, tuple[float, float]]:
    rng = np.random.default_rng(seed)
    resampled_means = np.empty((resamples, len(games)))
    resampled_runs: list[np.ndarray] = []
    for gi, game in enumerate(games):
        scores = per_game[game]
        draws = scores[rng.integers(0, scores.size, size=(resamples, scores.size))]
        resampled_means[:, gi] = draws.mean(axis=1)
        resampled_runs.append(draws)
    all_runs = np.concatenate(resampled_runs, axis=1)
    all_runs.sort(axis=1)
    n = all_runs.shape[1]
    trim = n // 4
    stats = {
        "normalized_mean": resampled_means.mean(axis=1),
        "normalized_median": np.median(resampled_means, axis=1),
        "iqm": all_runs[:, trim:n - trim].mean(axis=1),
        "optimality_gap": np.maximum(0.0, 1.0 - all_runs).mean(axis=1),
    }
    lo_q = (1.0 - confidence) / 2.0
    hi_q = 1.0 - lo_q
    return {name: (float(np.quantile(vals, lo_q)), float(np.quantile(vals, hi_q)))
            for name, vals in stats.items()}


def fraction_above(table: ScoreTable, thresholds) -> list[tuple[float, float]]:
    """Fraction of runs with normalized score strictly above each threshold."""
    runs = table.normalized_runs()
    return [(float(x), float((runs > x).mean())) for x in np.asarray(thresholds)]


def fraction_above_csv(table: ScoreTable, thresholds) -> str:
    out = io.StringIO()
    out.write("threshold,fraction_above\n")
    for x, frac in fraction_above(table, thresholds):
        out.write(f"{x},{frac:.6f}\n")
    return out.getvalue()


# -- CSV interfaces ---------------------------------------------------------------


def _read_csv_rows(text: str) -> list[dict[str, str]]:
    lines = [ln for ln in text.splitlines() if ln.strip() and
             not ln.lstrip().startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def load_scores_csv(text: str) -> list[tuple[str, str, float]]:
    """Parse `game,run,score` rows (comment lines allowed)."""
    rows = []
    for rec in _read_csv_rows(text):
        rows.append((rec["game"], rec["run"], float(rec["score"])))
    if not rows:
        raise EmptyTableError("scores CSV has no data rows")
    return rows


def load_references_csv(text: str) -> dict[str, tuple[float, float]]:
    """Parse `game,random,human` rows (comment lines allowed)."""
    refs = {}
    for rec in _read_csv_rows(text):
        refs[rec["game"]] = (float(rec["random"]), float(rec["human"]))
    if not refs:
        raise EmptyTableError("references CSV has no data rows")
    return refs


def score_table_from_files(scores_path: str, refs_path: str) -> ScoreTable:
    with open(scores_path, "r", encoding="utf-8") as f:
        rows = load_scores_csv(f.read())
    with open(refs_path, "r", encoding="utf-8") as f:
        refs = load_references_csv(f.read())
    return ScoreTable(rows=rows, references=refs)


# -- bundled benchmark tables -----------------------------------------------------


def _bundled_text(name: str) -> str:
    return (resources.files("dreamloop.analysis") / "data" / name).read_text(
        encoding="utf-8")


def bundled_references() -> dict[str, tuple[float, float]]:
    return load_references_csv(_bundled_text("atari100k_references.csv"))


def bundled_method_table(method: str) -> ScoreTable:
    """Published per-game scores for one method ('TWM', 'SPR', 'DER',
    'CURL', 'DrQeps', or 'SimPLe')."""
    rows = []
    for rec in _read_csv_rows(_bundled_text("atari100k_scores.csv")):
        if rec["method"] == method:
            rows.append((rec["game"], rec["run"], float(rec["score"])))
    if not rows:
        raise KeyError(f"no bundled scores for method '{method}'")
    return ScoreTable(rows=rows, references=bundled_references())


def bundled_stage_table(env_steps: int) -> ScoreTable:
    """Published per-game scores at an intermediate interaction budget."""
    rows = []
    for rec in _read_csv_rows(_bundled_text("sample_efficiency_scores.csv")):
        if int(rec["env_steps"]) == env_steps:
            rows.append((rec["game"], rec["run"], float(rec["score"])))
    if not rows:
        raise KeyError(f"no bundled scores at {env_steps} env steps")
    return ScoreTable(rows=rows, references=bundled_references())
