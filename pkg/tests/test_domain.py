"""Domain types: records, clusters, target values, dataset I/O."""

import numpy as np
import pytest

from clusterlift import (
    Cluster,
    Dataset,
    Level,
    Target,
    TargetSpec,
    ValidationError,
    cluster_target_value,
    cluster_target_values,
    load_dataset,
    save_dataset,
    validate_dataset,
)
from conftest import make_cluster, make_dataset, make_unit, random_dataset

ALL_TARGETS = (
    Target.CONVERSION,
    Target.NAIVE_PROFIT,
    Target.CRVTW_REVENUE,
    Target.IPC_PROFIT,
)


class TestTargetSpec:
    def test_accepts_all_pairs(self):
        for target in ALL_TARGETS:
            for level in (Level.CLUSTER_AWARE, Level.UNIT_NAIVE):
                spec = TargetSpec(target, level)
                assert spec.target is target and spec.level is level

    def test_coerces_string_values(self):
        spec = TargetSpec("conversion", "cluster-aware")
        assert spec.target is Target.CONVERSION
        assert spec.level is Level.CLUSTER_AWARE

    @pytest.mark.parametrize("rate", [0.0, 1.0, -0.1, float("nan")])
    def test_rejects_bad_discount_rate(self, rate):
        with pytest.raises(ValidationError, match="discount_rate"):
            TargetSpec(Target.IPC_PROFIT, Level.CLUSTER_AWARE, discount_rate=rate)


class TestUnitRecord:
    def test_rejects_non_binary_treatment(self):
        with pytest.raises(ValidationError, match="treatment"):
            make_unit(a=2)

    @pytest.mark.parametrize("e1", [0.0, 1.0, -0.2, 1.5])
    def test_rejects_degenerate_propensity(self, e1):
        with pytest.raises(ValidationError, match="propensity"):
            make_unit(e1=e1)

    def test_rejects_cost_without_treatment(self):
        with pytest.raises(ValidationError):
            make_unit(a=0, y=1.0, rev=9.0, cost=1.0)

    def test_rejects_revenue_above_price(self):
        with pytest.raises(ValidationError):
            make_unit(y=1.0, rev=11.0, price=10.0)

    def test_rejects_revenue_without_conversion(self):
        with pytest.raises(ValidationError):
            make_unit(y=0.0, rev=5.0)


class TestCluster:
    def test_means_from_units(self):
        c = make_cluster(0, [
            make_unit(j=0, y=1.0, rev=50.0, price=50.0),
            make_unit(j=1),
            make_unit(j=2, a=1, y=1.0, rev=46.0, cost=4.0, price=50.0),
            make_unit(j=3),
        ])
        assert c.size == 4
        assert c.mean_conversion == pytest.approx(0.5)
        assert c.mean_revenue == pytest.approx(24.0)
        assert c.mean_cost == pytest.approx(1.0)
        assert c.mean_profit == pytest.approx(23.0)

    def test_rejects_empty(self):
        with pytest.raises(ValidationError):
            Cluster.from_units(0, [])

    def test_rejects_duplicate_unit_index(self):
        with pytest.raises(ValidationError, match="unit_index"):
            make_cluster(0, [make_unit(j=1), make_unit(j=1)])

    def test_rejects_mixed_covariate_lengths(self):
        with pytest.raises(ValidationError):
            make_dataset([
                make_cluster(0, [make_unit(j=0, x=(0.0, 1.0))]),
                make_cluster(1, [make_unit(j=0, x=(0.0,))]),
            ])


class TestClusterTargetValue:
    def test_naive_profit_example(self):
        c = make_cluster(0, [
            make_unit(j=0),
            make_unit(j=1, a=1, y=1.0, rev=50.0, cost=4.0, price=60.0),
        ])
        spec = TargetSpec(Target.NAIVE_PROFIT, Level.CLUSTER_AWARE)
        assert cluster_target_value(c, spec) == pytest.approx(23.0)

    def test_ipc_absent_without_conversion(self):
        c = make_cluster(0, [make_unit(j=0), make_unit(j=1)])
        spec = TargetSpec(Target.IPC_PROFIT, Level.CLUSTER_AWARE)
        assert cluster_target_value(c, spec) is None

    def test_ipc_counterfactual_cost_example(self):
        # converted untreated unit at price 100: cost charged as if treated
        c = make_cluster(0, [
            make_unit(j=0, a=0, y=1.0, rev=100.0, price=100.0),
            make_unit(j=1, price=20.0),
        ])
        spec = TargetSpec(Target.IPC_PROFIT, Level.CLUSTER_AWARE, discount_rate=0.08)
        assert cluster_target_value(c, spec) == pytest.approx(46.0)

    def test_conversion_and_revenue_are_means(self):
        c = make_cluster(0, [
            make_unit(j=0, y=1.0, rev=30.0, price=30.0),
            make_unit(j=1),
            make_unit(j=2, y=1.0, rev=60.0, price=60.0),
        ])
        conv = TargetSpec(Target.CONVERSION, Level.CLUSTER_AWARE)
        rev = TargetSpec(Target.CRVTW_REVENUE, Level.CLUSTER_AWARE)
        assert cluster_target_value(c, conv) == pytest.approx(2.0 / 3.0)
        assert cluster_target_value(c, rev) == pytest.approx(30.0)

    def test_requires_cluster_level(self):
        c = make_cluster(0, [make_unit()])
        with pytest.raises(ValidationError):
            cluster_target_value(c, TargetSpec(Target.CONVERSION, Level.UNIT_NAIVE))

    def test_vectorized_route_matches_scalar(self, rng):
        ds = random_dataset(rng, n_clusters=40)
        for target in ALL_TARGETS:
            spec = TargetSpec(target, Level.CLUSTER_AWARE)
            values, present = cluster_target_values(ds.columns, spec)
            for i, cluster in enumerate(ds.clusters):
                scalar = cluster_target_value(cluster, spec)
                if scalar is None:
                    assert not present[i] and values[i] == 0.0
                else:
                    assert present[i]
                    assert values[i] == pytest.approx(scalar, rel=1e-12)


class TestDataset:
    def test_rejects_empty(self):
        with pytest.raises(ValidationError, match="dataset has no clusters"):
            Dataset([])

    def test_rejects_duplicate_cluster_id(self):
        with pytest.raises(ValidationError, match="cluster_id"):
            make_dataset([
                make_cluster(3, [make_unit()]),
                make_cluster(3, [make_unit()]),
            ])

    def test_columns_round_trip(self, rng):
        ds = random_dataset(rng, n_clusters=15)
        rebuilt = Dataset.from_columns(ds.columns, provenance=ds.provenance)
        assert rebuilt == ds
        assert rebuilt.clusters == ds.clusters

    def test_subset(self, rng):
        ds = random_dataset(rng, n_clusters=10)
        sub = ds.subset([7, 2, 5])
        assert sub.n_clusters == 3
        assert [c.cluster_id for c in sub.clusters] == [2, 5, 7]
        with pytest.raises(ValidationError):
            ds.subset([0, 0])
        with pytest.raises(ValidationError):
            ds.subset([99])

    def test_cluster_sum(self, rng):
        ds = random_dataset(rng, n_clusters=12)
        cols = ds.columns
        per_unit = rng.standard_normal(cols.n_units)
        sums = cols.cluster_sum(per_unit)
        start = 0
        for i, size in enumerate(cols.cluster_size):
            assert sums[i] == pytest.approx(per_unit[start:start + int(size)].sum())
            start += int(size)

    def test_validate_dataset_passes_random(self, rng):
        validate_dataset(random_dataset(rng, n_clusters=8))


class TestDatasetIO:
    def test_round_trip_identity(self, rng, tmp_path):
        ds = random_dataset(rng, n_clusters=25, d=4)
        path = tmp_path / "data.jsonl"
        save_dataset(ds, path)
        assert load_dataset(path) == ds

    def test_round_trip_bytes_stable(self, rng, tmp_path):
        ds = random_dataset(rng, n_clusters=5)
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_dataset(ds, p1)
        save_dataset(load_dataset(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        with pytest.raises(ValidationError, match="dataset has no clusters"):
            load_dataset(path)

    def test_zero_propensity_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            '{"covariate_dim": 1, "provenance": ""}\n'
            '{"cluster_id": 0, "units": [{"j": 0, "x": [0.0], "a": 0, "e1": 0.0,'
            ' "y": 0, "rev": 0.0, "cost": 0.0, "price": 5.0}]}\n'
        )
        with pytest.raises(ValidationError, match="propensity"):
            load_dataset(path)

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            '{"covariate_dim": 1, "provenance": ""}\n'
            "not json at all\n"
        )
        with pytest.raises(ValidationError, match="line 2"):
            load_dataset(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            '{"covariate_dim": 1, "provenance": ""}\n'
            '{"cluster_id": 0, "units": [{"j": 0, "x": [0.0], "a": 0, "e1": 0.5,'
            ' "y": 0, "rev": 0.0, "cost": 0.0, "price": 5.0, "extra": 1}]}\n'
        )
        with pytest.raises(ValidationError, match="line 2"):
            load_dataset(path)

    def test_non_binary_conversion_rejected_on_load(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            '{"covariate_dim": 1, "provenance": ""}\n'
            '{"cluster_id": 0, "units": [{"j": 0, "x": [0.0], "a": 0, "e1": 0.5,'
            ' "y": 0.5, "rev": 0.0, "cost": 0.0, "price": 5.0}]}\n'
        )
        with pytest.raises(ValidationError):
            load_dataset(path)

    def test_non_binary_conversion_rejected_on_save(self, tmp_path):
        ds = make_dataset([make_cluster(0, [
            make_unit(y=0.25, rev=1.0, price=4.0),
        ])])
        with pytest.raises(ValidationError):
            save_dataset(ds, tmp_path / "out.jsonl")


class TestLevelEquivalenceAtSizeOne:
    def test_cluster_targets_equal_unit_targets(self):
        # cluster of one: the cluster mean IS the unit's own outcome
        unit = make_unit(j=0, a=1, y=1.0, rev=46.0, cost=4.0, price=50.0)
        c = make_cluster(0, [unit])
        spec = {t: TargetSpec(t, Level.CLUSTER_AWARE) for t in ALL_TARGETS}
        assert cluster_target_value(c, spec[Target.CONVERSION]) == pytest.approx(1.0)
        assert cluster_target_value(c, spec[Target.NAIVE_PROFIT]) == pytest.approx(42.0)
        assert cluster_target_value(c, spec[Target.CRVTW_REVENUE]) == pytest.approx(46.0)
        expected_ipc = 46.0 - 0.08 * 50.0
        assert cluster_target_value(c, spec[Target.IPC_PROFIT]) == pytest.approx(expected_ipc)
