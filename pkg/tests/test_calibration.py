"""Harmonic mean and (alpha, beta) grid calibration."""

import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gzsl_ensemble.calibration import (
    GridSpec,
    calibrate_grid,
    hmean,
    read_calibration_json,
    write_calibration_json,
    write_hmean_grid_csv,
)
from gzsl_ensemble.ensemble import ClassWeighting, ensemble_scores, predict_weighted
from gzsl_ensemble.metrics import per_class_top1


def brute_force_calibration(dap, cyg, labels, pseudo_seen, pseudo_unseen, grid):
    """Independent re-implementation: per-sample ops, nested loops, explicit
    tie-breaking toward smaller beta then smaller alpha."""
    best = None
    table = {}
    for alpha in grid.alpha_values:
        fused = np.vstack([ensemble_scores(dap[i], cyg[i], alpha) for i in range(dap.shape[0])])
        for beta in grid.beta_values:
            w = ClassWeighting(beta=beta, seen_set=frozenset(pseudo_seen),
                               unseen_set=frozenset(pseudo_unseen))
            preds = np.array([predict_weighted(fused[i], w) for i in range(fused.shape[0])])
            acc_s = per_class_top1(preds, labels, pseudo_seen)
            acc_u = per_class_top1(preds, labels, pseudo_unseen)
            h = hmean(acc_s, acc_u)
            table[(alpha, beta)] = h
            if best is None or h > best[2] or (h == best[2] and (beta, alpha) < (best[1], best[0])):
                best = (alpha, beta, h)
    return best, table


def _random_problem(seed, m=40, c=6):
    rng = np.random.default_rng(seed)
    dap = rng.dirichlet(np.ones(c), size=m)
    cyg = rng.dirichlet(np.ones(c), size=m)
    labels = rng.integers(0, c, size=m)
    # every class needs at least one sample
    labels[:c] = np.arange(c)
    pseudo_unseen = frozenset({1, 4})
    pseudo_seen = frozenset(range(c)) - pseudo_unseen
    return dap, cyg, labels, pseudo_seen, pseudo_unseen


class TestHmean:
    def test_equal_inputs_are_fixed_points(self):
        for v in (0.0, 0.25, 0.5, 1.0):
            assert hmean(v, v) == pytest.approx(v)

    def test_zero_on_either_side(self):
        assert hmean(0.0, 0.887) == 0.0
        assert hmean(0.887, 0.0) == 0.0
        assert hmean(0.0, 0.0) == 0.0

    def test_published_row_arithmetic(self):
        # reported (unseen, seen) percentages reproduce the reported H-mean
        assert hmean(0.496, 0.601) * 100 == pytest.approx(54.3, abs=0.05)

    @given(a=st.floats(0, 1), b=st.floats(0, 1))
    @settings(max_examples=200, deadline=None)
    def test_symmetric_bounded_and_zero_iff(self, a, b):
        h = hmean(a, b)
        assert h == hmean(b, a)
        assert 0.0 <= h <= 1.0
        lo, hi = min(a, b), max(a, b)
        if lo > 0:
            # 2*lo*hi/(lo+hi) rewritten as 2*lo/(1 + lo/hi); also lo <= h <= 2*lo
            assert h == pytest.approx(2 * lo / (1 + lo / hi), rel=1e-9)
            assert lo * (1 - 1e-12) <= h <= 2 * lo * (1 + 1e-12)
        assert (h == 0.0) == (a == 0.0 or b == 0.0)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            hmean(1.2, 0.5)


class TestGridSpec:
    def test_default_step_has_101_points(self):
        grid = GridSpec.with_step(0.01)
        assert len(grid.alpha_values) == 101
        assert grid.alpha_values[0] == 0.0 and grid.alpha_values[-1] == 1.0

    def test_requires_endpoints(self):
        with pytest.raises(ValueError):
            GridSpec(alpha_values=(0.0, 0.5), beta_values=(0.0, 1.0))

    def test_requires_increasing(self):
        with pytest.raises(ValueError):
            GridSpec(alpha_values=(0.0, 0.5, 0.5, 1.0), beta_values=(0.0, 1.0))


class TestCalibrateGrid:
    def test_matches_brute_force_oracle(self):
        dap, cyg, labels, pseudo_seen, pseudo_unseen = _random_problem(0)
        grid = GridSpec(alpha_values=(0.0, 0.25, 0.5, 0.75, 1.0),
                        beta_values=(0.0, 0.2, 0.4, 0.6, 0.8, 1.0))
        result = calibrate_grid(dap, cyg, labels, pseudo_seen, pseudo_unseen, grid)
        (alpha, beta, h), table = brute_force_calibration(dap, cyg, labels,
                                                          sorted(pseudo_seen), sorted(pseudo_unseen), grid)
        assert result.alpha_star == alpha
        assert result.beta_star == beta
        assert result.val_hmean == h
        for ai, a in enumerate(grid.alpha_values):
            for bi, b in enumerate(grid.beta_values):
                assert result.hmean_grid[ai, bi] == table[(a, b)]

    def test_all_zero_grid_ties_to_smallest(self):
        # both scorers always point at seen class 0: one side's accuracy is
        # zero at every grid point, so every H is zero
        c = 4
        dap = np.tile(np.eye(c)[0], (8, 1))
        cyg = np.tile(np.eye(c)[0], (8, 1))
        labels = np.array([0, 1, 2, 3, 0, 1, 2, 3])
        result = calibrate_grid(dap, cyg, labels,
                                frozenset({0, 1}), frozenset({2, 3}),
                                GridSpec(alpha_values=(0.0, 0.5, 1.0),
                                         beta_values=(0.0, 0.5, 1.0)))
        assert (result.hmean_grid == 0).all()
        assert result.alpha_star == 0.0
        assert result.beta_star == 0.0

    def test_empty_pseudo_set_rejected(self):
        dap, cyg, labels, pseudo_seen, pseudo_unseen = _random_problem(1)
        with pytest.raises(ValueError, match="nonempty"):
            calibrate_grid(dap, cyg, labels, pseudo_seen | pseudo_unseen, frozenset(),
                           GridSpec.with_step(0.5))

    def test_empty_validation_set_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            calibrate_grid(np.empty((0, 4)), np.empty((0, 4)), np.empty(0, dtype=int),
                           frozenset({0, 1}), frozenset({2, 3}), GridSpec.with_step(0.5))

    def test_extreme_beta_columns_give_zero_hmean(self):
        dap, cyg, labels, pseudo_seen, pseudo_unseen = _random_problem(2)
        result = calibrate_grid(dap, cyg, labels, pseudo_seen, pseudo_unseen,
                                GridSpec.with_step(0.25))
        assert (result.hmean_grid[:, 0] == 0.0).all()
        assert (result.hmean_grid[:, -1] == 0.0).all()

    def test_deterministic(self):
        dap, cyg, labels, pseudo_seen, pseudo_unseen = _random_problem(3)
        grid = GridSpec.with_step(0.1)
        a = calibrate_grid(dap, cyg, labels, pseudo_seen, pseudo_unseen, grid)
        b = calibrate_grid(dap, cyg, labels, pseudo_seen, pseudo_unseen, grid)
        assert a.alpha_star == b.alpha_star and a.beta_star == b.beta_star
        assert np.array_equal(a.hmean_grid, b.hmean_grid)


class TestEmittedFiles:
    def test_json_and_csv_round_trip(self, tmp_path):
        dap, cyg, labels, pseudo_seen, pseudo_unseen = _random_problem(4)
        grid = GridSpec.with_step(0.25)
        result = calibrate_grid(dap, cyg, labels, pseudo_seen, pseudo_unseen, grid)

        json_path = tmp_path / "calibration.json"
        write_calibration_json(result, str(json_path))
        obj = read_calibration_json(str(json_path))
        assert obj["alpha_star"] == result.alpha_star
        assert obj["beta_star"] == result.beta_star
        assert obj["val_hmean"] == result.val_hmean

        csv_path = tmp_path / "hmean_grid.csv"
        write_hmean_grid_csv(result, str(csv_path))
        with open(csv_path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(grid.alpha_values) * len(grid.beta_values)
        for row in rows:
            ai = grid.alpha_values.index(float(row["alpha"]))
            bi = grid.beta_values.index(float(row["beta"]))
            assert float(row["hmean"]) == result.hmean_grid[ai, bi]
            assert float(row["acc_seen"]) == result.acc_seen_grid[ai, bi]
            assert float(row["acc_unseen"]) == result.acc_unseen_grid[ai, bi]
