"""Rule engine for sample-table cleaning.

Rules flag rows for removal:
1. Each rule evaluates its condition on the full input table (vectorized)
2. A row is removed when any enabled rule flags it
3. Removal counts are attributed to the first rule (in add order) that flags a row

Because every condition sees the same input table, the retained set does not
depend on rule order. Only the per-rule attribution does.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

import numpy as np
import pandas as pd

from src.errors import InputError


class Rule:
    """Base class for cleaning rules.

    Create custom rules by subclassing and overriding condition().

    Example:
        class MoneynessRule(Rule):
            def __init__(self, low, high):
                super().__init__("Moneyness Range")
                self.low, self.high = low, high

            def condition(self, table):
                m = table['moneyness']
                return (m < self.low) | (m > self.high)
    """

    # Columns the rule reads; missing columns make the rule an input error
    columns: Tuple[str, ...] = ()

    def __init__(self, name: str):
        """Initialize rule.

        Args:
            name: Human-readable name for this rule
        """
        self.name = name
        self.enabled = True
        self.trigger_count = 0  # Rows flagged over all evaluations

    def condition(self, table: pd.DataFrame) -> np.ndarray:
        """Rows to remove.

        Args:
            table: Sample table

        Returns:
            Boolean mask, True where the row fails the rule
        """
        return np.zeros(len(table), dtype=bool)

    def get_conditions(self, table: pd.DataFrame, mask: np.ndarray) -> Dict[str, Any]:
        """Return condition details for DEBUG logging.

        Called only when the rule flags at least one row.
        """
        return {'flagged': int(mask.sum())}


@dataclass
class CleaningReport:
    """Per-rule removal counts and retained counts per class."""
    input_count: int
    flagged: Dict[str, int] = field(default_factory=dict)
    removed: Dict[str, int] = field(default_factory=dict)
    retained_calls: int = 0
    retained_puts: int = 0

    @property
    def retained(self) -> int:
        return self.retained_calls + self.retained_puts

    @property
    def removed_total(self) -> int:
        return sum(self.removed.values())

    def to_frame(self) -> pd.DataFrame:
        rows = [{'rule': name, 'flagged': self.flagged.get(name, 0), 'removed': count}
                for name, count in self.removed.items()]
        rows.append({'rule': 'retained_calls', 'flagged': 0, 'removed': self.retained_calls})
        rows.append({'rule': 'retained_puts', 'flagged': 0, 'removed': self.retained_puts})
        rows.append({'rule': 'input', 'flagged': 0, 'removed': self.input_count})
        return pd.DataFrame(rows, columns=['rule', 'flagged', 'removed'])

    def add_prefiltered(self, rule_name: str, count: int) -> None:
        """Attribute rows dropped before the table was built to a rule."""
        if count <= 0:
            return
        self.input_count += count
        self.flagged[rule_name] = self.flagged.get(rule_name, 0) + count
        self.removed[rule_name] = self.removed.get(rule_name, 0) + count


class RuleEngine:
    """Evaluates cleaning rules against sample tables."""

    def __init__(self, log_manager=None):
        """Initialize rule engine.

        Args:
            log_manager: Optional LogManager for rule-level DEBUG events
        """
        self.log_manager = log_manager
        self.rules: list[Rule] = []

    def add_rule(self, rule: Rule) -> None:
        """Add a rule to the engine. Removal attribution follows add order."""
        self.rules.append(rule)
        if self.log_manager:
            self.log_manager.debug(f"Added rule: {rule.name}")

    def evaluate(self, table: pd.DataFrame) -> Tuple[pd.DataFrame, CleaningReport]:
        """Apply all enabled rules.

        Args:
            table: Sample table

        Returns:
            (retained rows, CleaningReport)
        """
        n = len(table)
        removed_any = np.zeros(n, dtype=bool)
        report = CleaningReport(input_count=n)

        for rule in self.rules:
            if not rule.enabled:
                continue
            missing = [c for c in rule.columns if c not in table.columns]
            if missing:
                raise InputError(f"Rule '{rule.name}' needs columns {missing}")
            mask = np.asarray(rule.condition(table), dtype=bool)
            flagged = int(mask.sum())
            report.flagged[rule.name] = flagged
            report.removed[rule.name] = int((mask & ~removed_any).sum())
            removed_any |= mask
            if flagged:
                rule.trigger_count += flagged
                if self.log_manager:
                    self.log_manager.debug_rule(rule.name, rule.get_conditions(table, mask))

        retained = table.loc[~removed_any].reset_index(drop=True)
        if 'cp_flag' in retained.columns:
            report.retained_puts = int((retained['cp_flag'] == 1).sum())
            report.retained_calls = len(retained) - report.retained_puts
        else:
            report.retained_calls = len(retained)
        return retained, report

    def enable_rule(self, rule_name: str) -> None:
        for rule in self.rules:
            if rule.name == rule_name:
                rule.enabled = True
                return

    def disable_rule(self, rule_name: str) -> None:
        for rule in self.rules:
            if rule.name == rule_name:
                rule.enabled = False
                return

    def get_rule_status(self) -> list[Dict[str, Any]]:
        """Get status of all rules.

        Returns:
            List of dicts with rule info: name, enabled, trigger_count
        """
        return [
            {
                'name': rule.name,
                'enabled': rule.enabled,
                'trigger_count': rule.trigger_count,
            }
            for rule in self.rules
        ]
