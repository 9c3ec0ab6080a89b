"""
Result tables: one row per (variant, sweep value) with mean and std over the seeded runs, written as
CSV, canonical JSON and a markdown summary.
"""
import os
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence

import numpy as np
import pandas as pd

from ngnn.train import RunResult, epoch_time_summary, paired_sign_test
from ngnn.utils.system import canonical_json, dict_to_markdown, ensure_dir

logger = logging.getLogger(__name__)

COLUMNS = ['variant', 'sweep_value', 'mean', 'std', 'params', 'epoch_s', 'epoch_s_std', 'drop']
CAVEAT = ("Desk-scale reproduction: the table tracks trends and exact parameter and metric bookkeeping; "
          "absolute scores are not comparable to large-benchmark results.")
BASELINE_VARIANT = 'baseline'

__all__ = ['COLUMNS', 'CAVEAT', 'ResultTable', 'summarize']


def summarize(results: Sequence[RunResult]) -> Dict[str, Any]:
    """
    Aggregate seeded runs: mean and (population) std of the test metric, sorted by seed first so the
    reduction does not depend on completion order.
    """
    results = sorted(results, key=lambda r: r.seed)
    # the first epoch of every run is a warm-up
    seconds = [s for r in results for s in (r.epoch_seconds[1:] if len(r.epoch_seconds) > 1 else r.epoch_seconds)]
    epoch_s, epoch_s_std = epoch_time_summary(seconds, warmup=0)
    tests = np.array([r.test_metric for r in results], dtype=np.float64)
    return {
        'runs': len(results),
        'seeds': [r.seed for r in results],
        'metric': results[0].metric,
        'test_metrics': tests.tolist(),
        'mean': float(tests.mean()),
        'std': float(tests.std()),
        'best_valid_mean': float(np.mean([r.best_valid for r in results])),
        'params': results[0].param_count,
        'epoch_s': epoch_s,
        'epoch_s_std': epoch_s_std,
    }


def _markdown_table(frame: pd.DataFrame) -> str:
    header = '| ' + ' | '.join(frame.columns) + ' |'
    rule = '|' + '|'.join('---' for _ in frame.columns) + '|'
    body = ['| ' + ' | '.join(_cell(v) for v in row) + ' |' for row in frame.itertuples(index=False)]
    return '\n'.join([header, rule] + body)


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


@dataclass
class ResultTable:
    """
    Attributes:
        axis: the swept quantity (feature_add, edge_noise, ngnn_depth, position, ...).
        metric: the reported test metric.
        rows: table rows, in insertion order.
        per_seed: test metrics per seed, keyed "<variant>|<sweep value>".
        metadata: caveats, seeds and paired comparisons.
    """
    axis: str
    metric: str
    rows: List[Dict[str, Any]] = field(default_factory=list)
    per_seed: Dict[str, List[float]] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)

    @staticmethod
    def key(variant: str, value: Any) -> str:
        return f"{variant}|{value}"

    def add_row(self, variant: str, sweep_value: Any, results: Sequence[RunResult], **extra: Any) -> Dict[str, Any]:
        stats = summarize(results)
        row = {
            'variant': variant,
            'sweep_value': sweep_value,
            'mean': stats['mean'],
            'std': stats['std'],
            'params': stats['params'],
            'epoch_s': stats['epoch_s'],
            'epoch_s_std': stats['epoch_s_std'],
            **extra,
        }
        self.rows.append(row)
        self.per_seed[self.key(variant, sweep_value)] = stats['test_metrics']
        self.metadata.setdefault('seeds', stats['seeds'])
        return row

    def variants(self) -> List[str]:
        return list(dict.fromkeys(row['variant'] for row in self.rows))

    def finalize(self) -> 'ResultTable':
        """
        Fill the `drop` column (first sweep value minus this one, per variant) and compare each
        variant's per-seed degradation with the baseline's through a paired sign test.
        """
        first = {}
        for row in self.rows:
            start = first.setdefault(row['variant'], row)
            row['drop'] = start['mean'] - row['mean']

        self.metadata['caveat'] = CAVEAT
        self.metadata['metric'] = self.metric
        if BASELINE_VARIANT not in first:
            return self

        base_first = self.per_seed[self.key(BASELINE_VARIANT, first[BASELINE_VARIANT]['sweep_value'])]
        comparisons = {}
        for variant in self.variants():
            if variant == BASELINE_VARIANT:
                continue
            start = self.per_seed[self.key(variant, first[variant]['sweep_value'])]
            for row in self.rows:
                if row['variant'] != variant or row is first[variant]:
                    continue
                base_key = self.key(BASELINE_VARIANT, row['sweep_value'])
                if base_key not in self.per_seed:
                    continue
                drops = np.subtract(start, self.per_seed[self.key(variant, row['sweep_value'])])
                base_drops = np.subtract(base_first, self.per_seed[base_key])
                comparisons.setdefault(variant, {})[str(row['sweep_value'])] = {
                    'gap': float(np.mean(base_drops) - np.mean(drops)),
                    'p_value': paired_sign_test(drops, base_drops),
                }
        self.metadata['sign_tests'] = comparisons
        return self

    def columns(self) -> List[str]:
        extra = [c for row in self.rows for c in row if c not in COLUMNS]
        return COLUMNS + list(dict.fromkeys(extra))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=self.columns())

    def to_dict(self) -> Dict[str, Any]:
        return {
            'axis': self.axis,
            'metric': self.metric,
            'columns': self.columns(),
            'rows': self.rows,
            'per_seed': self.per_seed,
            'metadata': self.metadata,
        }

    def write(self, out_dir: str) -> Dict[str, str]:
        """
        Write results.csv, results.json and results.md under `out_dir`.
        :return: the written paths by format.
        """
        ensure_dir(out_dir)
        paths = {fmt: os.path.join(out_dir, f"results.{fmt}") for fmt in ('csv', 'json', 'md')}
        frame = self.to_frame()
        frame.to_csv(paths['csv'], index=False)
        with open(paths['json'], 'w', encoding='utf-8') as f:
            f.write(canonical_json(self.to_dict()))
            f.write('\n')
        notes = [self.metadata.get('caveat', CAVEAT), f"seeds: {self.metadata.get('seeds')}"]
        for variant, by_value in self.metadata.get('sign_tests', {}).items():
            for value, test in by_value.items():
                notes.append(f"{variant} vs {BASELINE_VARIANT} at {value}: gap {test['gap']:.4f}, "
                             f"sign test p={test['p_value']:.3g}")
        dict_to_markdown({f"Sweep over {self.axis} ({self.metric})": {
            'Results': _markdown_table(frame),
            'Notes': notes,
        }}, paths['md'])
        logger.info("wrote %s", ', '.join(paths.values()))
        return paths
