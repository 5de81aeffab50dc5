import numpy as np
import pytest

from hjlab.continuation import (GBU_LOSS, GLOBAL, UNDECIDED,
                                UndecidedProbeError, boundary_loss, classify,
                                default_tol_loss, order_check,
                                threshold_bisect, viscosity_extend)
from hjlab.geometry import Grid, Interval
from hjlab.solver import Field, SolverConfig

H_COARSE = 1.0 / 100


def make_u0(amplitude, n=100):
    g = Grid(Interval(1.0), 1.0 / n)
    return Field(g, amplitude * np.sin(np.pi * g.coords))


def solver_cfg(t_end=1.0, snaps=()):
    return SolverConfig(p=3.0, t_end=t_end, snapshot_times=snaps)


class TestViscosityExtend:
    def test_small_data_all_levels_agree(self):
        # below the truncation level the runs are the classical one
        u0 = make_u0(0.1)
        snaps = tuple(np.linspace(0, 0.05, 6))
        ext = viscosity_extend(u0, 0.05, (2.0, 4.0, 8.0),
                               solver_cfg(snaps=snaps))
        assert np.all(ext.convergence_gap == 0.0)
        assert ext.loss_time is None
        assert float(ext.boundary_trace[:, 1].max()) <= ext.tol_loss

    def test_zero_data(self):
        g = Grid(Interval(1.0), H_COARSE)
        u0 = Field(g, np.zeros(g.shape))
        ext = viscosity_extend(u0, 0.01, (1.0, 2.0, 4.0),
                               solver_cfg(snaps=(0.0, 0.01)))
        for snap in ext.limit_snapshots:
            assert snap.max_abs() == 0.0

    def test_limit_dominates_every_level(self):
        u0 = make_u0(4.0)
        snaps = tuple(np.linspace(0, 0.02, 5))
        ext = viscosity_extend(u0, 0.02, (3.0, 4.5, 7.0),
                               solver_cfg(snaps=snaps))
        for i, limit in enumerate(ext.limit_snapshots):
            for rec in ext.runs:
                assert np.all(limit.values >= rec.snapshots[i].values - 1e-8)

    def test_gbu_data_loses_boundary_conditions(self):
        # at this coarse spacing 10 tol_loss would exceed the sup-norm bound,
        # so only loss detection itself is asserted; the 10x margin belongs
        # to fine-grid acceptance runs
        u0 = make_u0(8.0)
        snaps = (0.0,) + tuple(np.linspace(1e-4, 0.03, 30))
        ext = viscosity_extend(u0, 0.03, (3.0, 5.0, 8.0),
                               solver_cfg(snaps=snaps))
        loss_time, max_trace = boundary_loss(ext, ext.tol_loss)
        assert loss_time is not None
        assert max_trace > 2 * ext.tol_loss

    def test_bad_schedules_rejected(self):
        u0 = make_u0(1.0)
        with pytest.raises(ValueError):
            viscosity_extend(u0, 0.01, (1.0, 2.0), solver_cfg())
        with pytest.raises(ValueError):
            viscosity_extend(u0, 0.01, (2.0, 1.0, 3.0), solver_cfg())


class TestBoundaryLoss:
    def test_threshold_monotonicity(self):
        u0 = make_u0(8.0)
        snaps = (0.0,) + tuple(np.linspace(1e-4, 0.03, 30))
        ext = viscosity_extend(u0, 0.03, (3.0, 5.0, 8.0),
                               solver_cfg(snaps=snaps))
        t_small, max_trace = boundary_loss(ext, ext.tol_loss)
        t_large, _ = boundary_loss(ext, 2 * ext.tol_loss)
        assert t_small <= t_large
        none_time, _ = boundary_loss(ext, max_trace + 1.0)
        assert none_time is None


class TestClassify:
    def test_zero_data_global(self):
        g = Grid(Interval(1.0), H_COARSE)
        cls = classify(Field(g, np.zeros(g.shape)), 0.5, solver_cfg())
        assert cls.verdict == GLOBAL

    def test_small_data_global(self):
        cls = classify(make_u0(0.1), 1.0, solver_cfg())
        assert cls.verdict == GLOBAL
        assert cls.T_h is None

    def test_large_data_loses(self):
        cls = classify(make_u0(8.0), 0.05, solver_cfg(),
                       k_schedule=(3.0, 5.0, 8.0))
        assert cls.verdict == GBU_LOSS
        assert cls.T_h is not None
        assert cls.loss_time is not None
        assert cls.loss_time > cls.T_h

    def test_short_horizon_undecided(self):
        # horizon far below the decay time leaves the verdict open
        cls = classify(make_u0(0.4), 1e-4, solver_cfg())
        assert cls.verdict == UNDECIDED


class TestThreshold:
    def test_bracket_and_monotone_table(self):
        phi = make_u0(1.0)
        result = threshold_bisect(phi, 2.0, 0.05, solver_cfg(),
                                  k_schedule=(3.0, 5.0, 8.0))
        assert result.lambda_lo < result.lambda_hi
        assert (result.lambda_hi - result.lambda_lo) / result.lambda_lo <= 0.05
        verdicts = [v for _, v in result.table()]
        flips = sum(1 for a, b in zip(verdicts, verdicts[1:]) if a != b)
        assert flips == 1
        assert verdicts[0] == GLOBAL
        assert verdicts[-1] != GLOBAL
        for lam, cls in result.classifications:
            if lam <= result.lambda_lo:
                assert cls.verdict == GLOBAL
            if lam >= result.lambda_hi:
                assert cls.verdict != GLOBAL

    def test_normalization_enforced(self):
        phi = make_u0(2.0)
        with pytest.raises(ValueError):
            threshold_bisect(phi, 1.0, 0.05, solver_cfg())
        g = Grid(Interval(1.0), H_COARSE)
        with pytest.raises(ValueError):
            threshold_bisect(Field(g, np.zeros(g.shape)), 1.0, 0.05, solver_cfg())

    def test_undecided_probe_raises(self):
        phi = make_u0(1.0)
        with pytest.raises(UndecidedProbeError) as err:
            threshold_bisect(phi, 1e-4, 0.05, solver_cfg())
        assert err.value.lam > 0


class TestOrderCheck:
    def test_rejects_equal_and_unordered_data(self):
        u0 = make_u0(8.0)
        with pytest.raises(ValueError):
            order_check(u0, u0, 0.05, solver_cfg())
        v0 = Field(u0.grid, 0.5 * u0.values)
        with pytest.raises(ValueError):
            order_check(u0, v0, 0.05, solver_cfg())

    def test_rejects_global_data(self):
        u0 = make_u0(0.05)
        v0 = Field(u0.grid, 1.2 * u0.values)
        with pytest.raises(ValueError):
            order_check(u0, v0, 1.0, solver_cfg())

    def test_blowup_times_ordered(self):
        u0 = make_u0(8.0)
        v0 = Field(u0.grid, 1.2 * u0.values)
        rep = order_check(u0, v0, 0.05, solver_cfg(),
                          k_schedule=(3.0, 5.0, 8.0))
        fc = rep.fitted_constants
        assert fc["T_h_v"] < fc["T_h_u"]
        assert "loss_time_v" in fc


def test_default_tol_loss_scales_with_spacing():
    g1 = Grid(Interval(1.0), 1.0 / 100)
    g2 = Grid(Interval(1.0), 1.0 / 400)
    assert default_tol_loss(g1, 3.0) == pytest.approx(
        2 * default_tol_loss(g2, 3.0))
