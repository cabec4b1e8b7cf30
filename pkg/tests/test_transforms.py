"""Response transformation Z and its objective identity."""

import numpy as np
import pytest

from clusterlift import (
    Level,
    Target,
    TargetSpec,
    addipw_objective,
    naive_objective,
    objective_from_z,
    write_transformed_csv,
    z_transform,
)
from conftest import make_cluster, make_dataset, make_unit, random_dataset

CONV_CA = TargetSpec(Target.CONVERSION, Level.CLUSTER_AWARE)


class TestZValues:
    def test_worked_examples(self):
        # one cluster of ten units, three converted: mean outcome 0.3
        units = [
            make_unit(j=j, a=int(j == 0), e1=0.5, y=float(j < 3),
                      rev=5.0 * (j < 3), price=5.0)
            for j in range(10)
        ]
        ds = make_dataset([make_cluster(0, units)])
        z = z_transform(ds, CONV_CA).z_values
        assert z[0] == pytest.approx(0.6)    # treated: +T/e1 = 0.3*2
        assert z[1] == pytest.approx(-0.6)   # control: -T/(1-e1)

    def test_zero_outcome_gives_zero(self):
        ds = make_dataset([make_cluster(0, [make_unit(a=1, e1=0.7)])])
        assert z_transform(ds, CONV_CA).z_values[0] == 0.0

    def test_sign_matches_direction(self, rng):
        ds = random_dataset(rng, n_clusters=30)
        td = z_transform(ds, CONV_CA)
        cols = ds.columns
        t = cols.mean_conversion[cols.cluster_ord]
        direction = (2 * cols.treatment - 1) * t
        assert np.all(np.sign(td.z_values) == np.sign(direction))

    def test_alignment_metadata(self, rng):
        ds = random_dataset(rng, n_clusters=12)
        td = z_transform(ds, CONV_CA)
        cols = ds.columns
        assert td.n_units == ds.n_units
        assert td.n_clusters == ds.n_clusters
        assert np.array_equal(td.covariates, cols.covariates)
        assert np.array_equal(td.cluster_id, cols.cluster_id[cols.cluster_ord])
        assert np.array_equal(td.unit_index, cols.unit_index)
        assert td.spec == CONV_CA


class TestFiltering:
    def test_cluster_aware_ipc_filters_whole_clusters(self):
        buying = make_cluster(0, [
            make_unit(j=0, a=1, e1=0.5, y=1.0, rev=9.0, cost=1.0, price=10.0),
            make_unit(j=1),
        ])
        silent = make_cluster(1, [make_unit(j=0, a=1), make_unit(j=1)])
        ds = make_dataset([buying, silent])
        td = z_transform(ds, TargetSpec(Target.IPC_PROFIT, Level.CLUSTER_AWARE))
        assert td.filtered.tolist() == [False, False, True, True]
        assert np.all(td.z_values[td.filtered] == 0.0)

    def test_unit_naive_ipc_filters_non_converters(self):
        ds = make_dataset([make_cluster(0, [
            make_unit(j=0, a=1, e1=0.5, y=1.0, rev=9.0, cost=1.0, price=10.0),
            make_unit(j=1, a=1),
        ])])
        td = z_transform(ds, TargetSpec(Target.IPC_PROFIT, Level.UNIT_NAIVE))
        assert td.filtered.tolist() == [False, True]

    def test_other_targets_filter_nothing(self, rng):
        ds = random_dataset(rng, n_clusters=10)
        for target in (Target.CONVERSION, Target.NAIVE_PROFIT, Target.CRVTW_REVENUE):
            for level in (Level.CLUSTER_AWARE, Level.UNIT_NAIVE):
                td = z_transform(ds, TargetSpec(target, level))
                assert not td.filtered.any()


class TestObjectiveIdentity:
    def test_matches_addipw_objective(self, rng):
        for trial in range(20):
            ds = random_dataset(rng, n_clusters=int(rng.integers(1, 30)))
            f = rng.random(ds.n_units)
            for target in Target:
                spec = TargetSpec(target, Level.CLUSTER_AWARE)
                a = addipw_objective(ds, f, spec)
                b = objective_from_z(z_transform(ds, spec), f)
                assert b == pytest.approx(a, rel=1e-9, abs=1e-12)

    def test_matches_naive_objective(self, rng):
        for trial in range(10):
            ds = random_dataset(rng, n_clusters=int(rng.integers(1, 30)))
            f = rng.random(ds.n_units)
            for target in Target:
                spec = TargetSpec(target, Level.UNIT_NAIVE)
                a = naive_objective(ds, f, spec)
                b = objective_from_z(z_transform(ds, spec), f)
                assert b == pytest.approx(a, rel=1e-9, abs=1e-12)

    def test_zero_z_and_linearity(self, rng):
        ds = random_dataset(rng, n_clusters=8)
        td = z_transform(ds, CONV_CA)
        assert objective_from_z(td, np.zeros(ds.n_units)) == 0.0
        full = objective_from_z(td, np.ones(ds.n_units))
        half = objective_from_z(td, np.full(ds.n_units, 0.5))
        assert half == pytest.approx(0.5 * full, rel=1e-12)

    def test_levels_agree_at_size_one(self, rng):
        ds = random_dataset(rng, n_clusters=40, m_lo=1, m_hi=1)
        for target in Target:
            za = z_transform(ds, TargetSpec(target, Level.CLUSTER_AWARE))
            zn = z_transform(ds, TargetSpec(target, Level.UNIT_NAIVE))
            assert za.z_values == pytest.approx(zn.z_values, rel=1e-12)
            assert np.array_equal(za.filtered, zn.filtered)


class TestCsvExport:
    def test_layout_and_round_trip(self, rng, tmp_path):
        ds = random_dataset(rng, n_clusters=6, d=2)
        td = z_transform(ds, TargetSpec(Target.IPC_PROFIT, Level.UNIT_NAIVE))
        path = tmp_path / "z.csv"
        write_transformed_csv(td, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "cluster_id,unit_index,x0,x1,z,filtered"
        assert len(lines) == td.n_units + 1
        first = lines[1].split(",")
        assert int(first[0]) == int(td.cluster_id[0])
        assert float(first[4]) == td.z_values[0]
        assert first[5] in ("0", "1")
