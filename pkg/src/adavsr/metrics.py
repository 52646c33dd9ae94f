"""Edit-distance based recognition metrics."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InputError

__all__ = ["EditCounts", "edit_distance", "wer", "cer", "ReportRow"]


@dataclass
class EditCounts:
    substitutions: int
    deletions: int
    insertions: int

    @property
    def total(self) -> int:
        return self.substitutions + self.deletions + self.insertions


def edit_distance(hyp, ref) -> EditCounts:
    """Levenshtein alignment of hyp against ref with unit costs.

    Deletions are reference items missing from the hypothesis;
    insertions are hypothesis items not in the reference.  Among
    minimum-cost alignments, ties prefer substitution, then deletion.
    """
    hyp, ref = list(hyp), list(ref)
    n, m = len(ref), len(hyp)
    # dp[i][j] = counts for ref[:i] vs hyp[:j]
    dp = [[None] * (m + 1) for _ in range(n + 1)]
    dp[0][0] = EditCounts(0, 0, 0)
    for j in range(1, m + 1):
        dp[0][j] = EditCounts(0, 0, j)
    for i in range(1, n + 1):
        dp[i][0] = EditCounts(0, i, 0)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if ref[i - 1] == hyp[j - 1]:
                dp[i][j] = dp[i - 1][j - 1]
                continue
            sub, dele, ins = dp[i - 1][j - 1], dp[i - 1][j], dp[i][j - 1]
            best = min(sub.total, dele.total, ins.total)
            if sub.total == best:
                dp[i][j] = EditCounts(sub.substitutions + 1, sub.deletions, sub.insertions)
            elif dele.total == best:
                dp[i][j] = EditCounts(dele.substitutions, dele.deletions + 1, dele.insertions)
            else:
                dp[i][j] = EditCounts(ins.substitutions, ins.deletions, ins.insertions + 1)
    return dp[n][m]


def _rate(hyp_units: list[list], ref_units: list[list]) -> float:
    if len(hyp_units) != len(ref_units):
        raise InputError("hypothesis and reference lists differ in length")
    total_ref = sum(len(r) for r in ref_units)
    if total_ref == 0:
        raise InputError("reference is empty; error rate is undefined")
    total_err = sum(edit_distance(h, r).total for h, r in zip(hyp_units, ref_units))
    return 100.0 * total_err / total_ref


def wer(hyps: list[str], refs: list[str]) -> float:
    """Corpus-level word error rate in percent."""
    return _rate([h.split() for h in hyps], [r.split() for r in refs])


def cer(hyps: list[str], refs: list[str]) -> float:
    """Corpus-level character error rate in percent (spaces excluded)."""
    return _rate(
        [list(h.replace(" ", "")) for h in hyps],
        [list(r.replace(" ", "")) for r in refs],
    )


@dataclass
class ReportRow:
    condition: str
    wer: float
    cer: float

    def as_csv(self) -> str:
        return f"{self.condition},{self.wer:.6f},{self.cer:.6f}"
