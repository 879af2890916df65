import math

import numpy as np
import pytest

from selfactor.exceptions import ParameterError
from selfactor.theory import GridCell, plain_rate, rate_experiment, theory_lambda


def test_plain_rate_and_lambda():
    cell = GridCell(100, 50, 8, 6, 2)
    assert plain_rate(cell) == pytest.approx(24 + 6 * math.log(50))
    assert theory_lambda(2.0, 3, 20, 4.0, A=0.5) == pytest.approx(0.5 * 2 * math.sqrt(3 + math.log(20)) / 2)


@pytest.mark.filterwarnings("ignore:rank .* exceeds:RuntimeWarning")
def test_noise_free_cell_ratio_zero():
    exp = rate_experiment([GridCell(40, 10, 4, 3, 1, sigma=0.0)], seeds=range(3))
    assert all(r.ratio == 0.0 for r in exp.records)
    assert len(exp.records) == 6


def test_records_and_rows():
    cells = [GridCell(60, 15, m, 3, 1) for m in (3, 6)]
    exp = rate_experiment(cells, seeds=range(4))
    assert exp.cells() == cells
    for rec in exp.records:
        assert rec.error > 0 and rec.benchmark > 0 and np.isfinite(rec.ratio)
    rows = exp.as_rows()
    assert len(rows) == 16 and {"seed", "estimator", "error", "benchmark", "ratio"} <= set(rows[0])
    assert exp.median_error(cells[0], "selective") > 0
    slope, intercept, r2 = exp.rate_fit("selective")
    assert 0 <= r2 <= 1


def test_tuple_cells_and_criterion():
    exp = rate_experiment([(50, 10, 4, 3, 1, 0.5, 2.0)], seeds=[0], estimators=("selective",),
                          criterion="sfpic", rank_grid=[1, 2])
    rec = exp.records[0]
    assert rec.cell.sigma == 0.5 and rec.cell.snr == 2.0 and rec.ratio < 10


def test_unknown_estimator():
    with pytest.raises(ParameterError):
        rate_experiment([GridCell(20, 5, 3, 2, 1)], seeds=[0], estimators=("lasso",))


def test_selective_not_worse_on_low_rank():
    cells = [GridCell(100, 30, m, 6, 1) for m in (8, 16)]
    exp = rate_experiment(cells, seeds=range(6))
    for c in cells:
        assert exp.median_error(c, "selective") <= 1.05 * exp.median_error(c, "group")
