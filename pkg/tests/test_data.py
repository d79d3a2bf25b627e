"""Ingestion, preprocessing, projection and synthetic-field tests."""

import math

import numpy as np
import pytest

from airbo.data import (
    Dataset,
    Snapshot,
    dataset_fingerprint,
    generate_synthetic,
    load_dataset,
    load_grid_csv,
    load_station_csv,
    preprocess,
    project_latlon,
    save_dataset,
)
from airbo.errors import InputError, ParseError
from airbo.kernels import ThetaVector, composite_eval, get_spec

SPEC = get_spec("rbf_rbf")
THETA = ThetaVector(values={"sigma_r1": 1.0, "l_r1": 2.0, "sigma_r2": 1.0, "l_r2": 8.0})


def write_grid_csv(path, snapshots):
    """snapshots: dict id -> dict (row, col) -> value or None."""
    lines = ["snapshot_id,row,col,value"]
    for sid, cells in snapshots.items():
        for (row, col), value in cells.items():
            lines.append(f"{sid},{row},{col},{'' if value is None else value}")
    path.write_text("\n".join(lines) + "\n")


def full_grid(size, value=1.0, missing=()):
    return {
        (r, c): (None if (r, c) in missing else value + r + c)
        for r in range(size)
        for c in range(size)
    }


class TestLoadGridCsv:
    def test_two_by_two_grid_locations(self, tmp_path):
        path = tmp_path / "grid.csv"
        write_grid_csv(path, {"a": full_grid(2)})
        snaps = load_grid_csv(path, cell_size_km=7.0)
        assert len(snaps) == 1
        assert snaps[0].n_candidates == 4
        assert set(map(tuple, snaps[0].locations)) == {(0, 0), (7, 0), (0, 7), (7, 7)}

    def test_missing_fraction_just_over_threshold_excluded(self, tmp_path):
        missing = {(r, c) for r in range(28) for c in range(28)}
        missing = set(list(sorted(missing))[:79])  # 79 / 784 = 10.07 %
        path = tmp_path / "grid.csv"
        write_grid_csv(path, {"a": full_grid(28, missing=missing)})
        assert load_grid_csv(path) == []

    def test_missing_fraction_just_under_threshold_retained(self, tmp_path):
        missing = {(r, c) for r in range(28) for c in range(28)}
        missing = set(list(sorted(missing))[:78])  # 78 / 784 = 9.95 %
        path = tmp_path / "grid.csv"
        write_grid_csv(path, {"a": full_grid(28, missing=missing)})
        snaps = load_grid_csv(path)
        assert len(snaps) == 1
        assert snaps[0].n_candidates == 784 - 78

    def test_malformed_row_reports_line_number(self, tmp_path):
        path = tmp_path / "grid.csv"
        path.write_text("snapshot_id,row,col,value\na,0,0,1.0\na,0,x,2.0\n")
        with pytest.raises(ParseError, match=":3"):
            load_grid_csv(path)

    def test_duplicate_cell_rejected(self, tmp_path):
        path = tmp_path / "grid.csv"
        path.write_text("snapshot_id,row,col,value\na,0,0,1.0\na,0,0,2.0\n")
        with pytest.raises(InputError, match="duplicate"):
            load_grid_csv(path)

    def test_row_order_invariance(self, tmp_path):
        cells = full_grid(4, missing={(1, 2)})
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_grid_csv(p1, {"s": cells})
        lines = p1.read_text().splitlines()
        p2.write_text("\n".join([lines[0]] + list(reversed(lines[1:]))) + "\n")
        s1, s2 = load_grid_csv(p1)[0], load_grid_csv(p2)[0]
        np.testing.assert_array_equal(s1.locations, s2.locations)
        np.testing.assert_array_equal(s1.mask, s2.mask)
        np.testing.assert_array_equal(
            s1.values_raw[s1.mask], s2.values_raw[s2.mask]
        )


def write_station_csv(path, rows):
    lines = ["date,station_id,lat,lon,classification,value"]
    lines += [",".join(str(x) for x in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


class TestLoadStationCsv:
    def station_rows(self, date, n, classification="Roadside", value=10.0):
        return [
            (date, f"st{i:03d}", 51.0 + i * 0.01, -0.5 + i * 0.01, classification, value)
            for i in range(n)
        ]

    def test_day_below_threshold_dropped(self, tmp_path):
        path = tmp_path / "laqn.csv"
        write_station_csv(path, self.station_rows("2015-01-01", 39))
        assert load_station_csv(path) == []

    def test_filter_applies_before_threshold(self, tmp_path):
        path = tmp_path / "laqn.csv"
        rows = self.station_rows("2015-01-01", 40) + [
            ("2015-01-01", f"bg{i:03d}", 51.9, 0.2, "Background", 5.0) for i in range(100)
        ]
        write_station_csv(path, rows)
        snaps = load_station_csv(path)
        assert len(snaps) == 1
        assert snaps[0].n_candidates == 40

    def test_duplicate_station_readings_averaged(self, tmp_path):
        path = tmp_path / "laqn.csv"
        rows = self.station_rows("2015-01-01", 40)
        rows[0] = ("2015-01-01", "st000", 51.0, -0.5, "Roadside", 10.0)
        rows.append(("2015-01-01", "st000", 51.0, -0.5, "Roadside", 20.0))
        write_station_csv(path, rows)
        snaps = load_station_csv(path, min_readings=40)
        values = dict(zip(map(tuple, snaps[0].locations), snaps[0].values_raw))
        # station st000 is the reference (most south-westerly), at (0, 0)
        assert values[(0.0, 0.0)] == pytest.approx(15.0)

    def test_bad_date_reports_line(self, tmp_path):
        path = tmp_path / "laqn.csv"
        write_station_csv(path, [("01/02/2015", "a", 51.0, 0.0, "Roadside", 1.0)])
        with pytest.raises(ParseError, match=":2"):
            load_station_csv(path, min_readings=1)

    def test_row_order_invariance(self, tmp_path):
        rows = self.station_rows("2015-01-01", 41)
        rows.append(("2015-01-01", "st000", 51.0, -0.5, "Roadside", 12.5))
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_station_csv(p1, rows)
        write_station_csv(p2, list(reversed(rows)))
        s1, s2 = load_station_csv(p1)[0], load_station_csv(p2)[0]
        np.testing.assert_array_equal(s1.locations, s2.locations)
        np.testing.assert_array_equal(s1.values_raw, s2.values_raw)


class TestProjectLatlon:
    def test_reference_maps_to_origin(self):
        out = project_latlon((51.5, -0.1), [(51.5, -0.1)])
        np.testing.assert_allclose(out, [[0.0, 0.0]], atol=1e-12)

    def test_one_degree_north(self):
        # spherical arc length: R * pi / 180
        out = project_latlon((50.0, 0.0), [(51.0, 0.0)])
        assert out[0, 1] == pytest.approx(6371.0 * math.pi / 180.0, abs=1e-6)
        assert out[0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_one_degree_east_at_sixty_north(self):
        out = project_latlon((60.0, 10.0), [(60.0, 11.0)])
        assert out[0, 0] == pytest.approx(0.5 * 6371.0 * math.pi / 180.0, abs=1e-6)

    def test_out_of_range_latitude_rejected(self):
        with pytest.raises(InputError):
            project_latlon((91.0, 0.0), [(50.0, 0.0)])


def snapshot(sid, values, locations=None):
    values = np.asarray(values, dtype=float)
    if locations is None:
        locations = np.column_stack([np.arange(len(values), dtype=float), np.zeros(len(values))])
    return Snapshot(
        id=sid,
        locations=np.asarray(locations, dtype=float),
        values_raw=values,
        mask=np.ones(len(values), dtype=bool),
    )


class TestPreprocess:
    def test_exponential_values_standardise_symmetrically(self):
        ds = Dataset(tuning=[snapshot("t", [math.e, math.e**3])], test=[])
        preprocess(ds)
        np.testing.assert_allclose(
            ds.tuning[0].values_pre, [-1 / math.sqrt(2), 1 / math.sqrt(2)], atol=1e-12
        )

    def test_test_value_at_tuning_mean_maps_to_zero(self):
        ds = Dataset(
            tuning=[snapshot("t", [math.e, math.e**3])],
            test=[snapshot("x", [math.e**2])],
        )
        preprocess(ds)
        assert ds.test[0].values_pre[0] == pytest.approx(0.0, abs=1e-12)

    def test_double_preprocess_rejected(self):
        ds = Dataset(tuning=[snapshot("t", [1.0, 2.0])], test=[])
        preprocess(ds)
        with pytest.raises(InputError, match="already preprocessed"):
            preprocess(ds)

    def test_nonpositive_value_names_snapshot_and_location(self):
        ds = Dataset(tuning=[snapshot("bad", [1.0, 0.0])], test=[])
        with pytest.raises(InputError, match="bad"):
            preprocess(ds)

    def test_test_set_never_contributes_to_stats(self):
        tuning = [snapshot("t", [1.0, 2.0, 3.0])]
        with_test = Dataset(tuning=tuning, test=[snapshot("x", [100.0, 200.0])])
        preprocess(with_test)
        alone = Dataset(tuning=[snapshot("t", [1.0, 2.0, 3.0])], test=[])
        preprocess(alone)
        assert with_test.log_mean == alone.log_mean
        assert with_test.log_std == alone.log_std


class TestGenerateSynthetic:
    def test_tiny_amplitudes_give_near_constant_fields(self):
        theta = ThetaVector(
            values={"sigma_r1": 1e-3, "l_r1": 2.0, "sigma_r2": 1e-3, "l_r2": 8.0}
        )
        synth = generate_synthetic(SPEC, theta, grid_size=8, n_snapshots=3, seed=1)
        for snap in synth.snapshots:
            spread = snap.values_raw.max() / snap.values_raw.min() - 1.0
            assert spread < 0.01

    def test_fixed_seed_reproducible(self):
        a = generate_synthetic(SPEC, THETA, 8, 2, seed=9)
        b = generate_synthetic(SPEC, THETA, 8, 2, seed=9)
        for sa, sb in zip(a.snapshots, b.snapshots):
            np.testing.assert_array_equal(sa.values_raw, sb.values_raw)

    def test_grid_cap_enforced(self):
        with pytest.raises(InputError, match="4096"):
            generate_synthetic(SPEC, THETA, grid_size=65, n_snapshots=1, seed=0)

    def test_empirical_covariance_matches_kernel(self):
        # Monte-Carlo covariance of the log field at two fixed points
        synth = generate_synthetic(SPEC, THETA, grid_size=6, n_snapshots=2000, seed=3,
                                   cell_size_km=1.0)
        i, j = 0, 8  # (0,0) and (2,1): displacement (2, 1)
        logs = np.array(
            [[math.log(s.values_raw[i]), math.log(s.values_raw[j])] for s in synth.snapshots]
        )
        emp = np.cov(logs.T)[0, 1]
        tau = synth.snapshots[0].locations[i] - synth.snapshots[0].locations[j]
        expected = composite_eval(SPEC, THETA, tau)
        assert emp == pytest.approx(expected, rel=0.10)

    def test_log_shift_moves_level_not_structure(self):
        a = generate_synthetic(SPEC, THETA, 6, 1, seed=4, log_shift=0.0)
        b = generate_synthetic(SPEC, THETA, 6, 1, seed=4, log_shift=2.0)
        np.testing.assert_allclose(
            np.log(b.snapshots[0].values_raw) - np.log(a.snapshots[0].values_raw),
            2.0,
            atol=1e-9,
        )


class TestBundleRoundTrip:
    def make_dataset(self):
        synth = generate_synthetic(SPEC, THETA, 6, 4, seed=5)
        synth.snapshots[1].mask[3] = False
        synth.snapshots[1].values_raw[3] = math.nan
        ds = Dataset(tuning=synth.snapshots[:2], test=synth.snapshots[2:], meta=synth.meta())
        preprocess(ds)
        return ds

    def test_round_trip_bit_exact(self, tmp_path):
        ds = self.make_dataset()
        path = tmp_path / "bundle.jsonl"
        save_dataset(ds, path)
        first = path.read_bytes()
        loaded = load_dataset(path)
        assert loaded.log_mean == ds.log_mean
        assert loaded.log_std == ds.log_std
        assert [s.id for s in loaded.tuning] == [s.id for s in ds.tuning]
        for a, b in zip(loaded.all_snapshots(), ds.all_snapshots()):
            np.testing.assert_array_equal(a.locations, b.locations)
            np.testing.assert_array_equal(a.mask, b.mask)
            np.testing.assert_array_equal(a.values_raw[a.mask], b.values_raw[b.mask])
            np.testing.assert_array_equal(a.values_pre[a.mask], b.values_pre[b.mask])
        save_dataset(loaded, path)
        assert path.read_bytes() == first

    def test_fingerprint_stable_and_content_sensitive(self):
        ds = self.make_dataset()
        fp1 = dataset_fingerprint(ds.tuning)
        fp2 = dataset_fingerprint(ds.tuning)
        assert fp1 == fp2
        assert dataset_fingerprint(ds.test) != fp1

    def test_missing_bundle_names_path(self, tmp_path):
        with pytest.raises(InputError, match="nope.jsonl"):
            load_dataset(tmp_path / "nope.jsonl")
