import json

import numpy as np
import pandas as pd
import pytest

from stablelab.core.io.io_utils import (
    MANIFEST_NAME,
    library_versions,
    load_manifest,
    read_csv,
    read_green_table,
    summarize_manifests,
    write_csv,
    write_green_table,
    write_json,
    write_manifest,
)
from stablelab.exceptions import ParameterError


def test_csv_keeps_every_bit(tmp_path):
    values = np.array([0.1, 1 / 3, np.pi * 1e-17, 2.0 ** -1074])
    path = write_csv(pd.DataFrame({"v": values}), tmp_path / "t.csv")
    back = read_csv(path)["v"].to_numpy()
    np.testing.assert_array_equal(back, values)
    assert b"\r\n" not in path.read_bytes()


def test_json_handles_numpy_values(tmp_path):
    payload = {"a": np.float64(1.5), "b": np.arange(3), "c": np.bool_(True), "d": (1, 2)}
    path = write_json(payload, tmp_path / "x.json")
    assert json.loads(path.read_text()) == {"a": 1.5, "b": [0, 1, 2], "c": True, "d": [1, 2]}


def test_manifest_round_trip(tmp_path):
    write_manifest(
        tmp_path,
        study="threeg",
        config_hash="abc",
        seed=7,
        walltime=1.25,
        tables={"ratios": "ratios.csv"},
        fits={"threeg": {"c_hat": 2.0, "gamma_hat": 0.5, "accepted": True}},
        stability_curves={},
        accepted=True,
        extra={"domain": {"shape": "ball"}},
    )
    m = load_manifest(tmp_path)
    assert m["study"] == "threeg"
    assert m["seed"] == 7
    assert m["domain"] == {"shape": "ball"}
    assert m["_path"].endswith(MANIFEST_NAME)
    assert set(m["versions"]) == set(library_versions())


def test_load_manifest_missing(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_manifest(tmp_path / "nope")


def test_summarize_manifests(tmp_path):
    for name, accepted in (("a", True), ("b", False)):
        write_manifest(
            tmp_path / name,
            study="growth",
            config_hash=name,
            seed=1,
            walltime=0.5,
            tables={},
            fits={"growth": {"c_hat": 1.0, "gamma_hat": 0.4, "accepted": accepted}},
            stability_curves={},
            accepted=accepted,
        )
    table = summarize_manifests([tmp_path / "a", tmp_path / "b"])
    assert len(table) == 2
    assert table["accepted"].tolist() == [True, False]


def test_green_table_round_trip(tmp_path):
    x = np.array([[0.1, 0.2], [0.3, 0.4]])
    y = np.array([[0.0, 0.0], [-0.1, 0.5]])
    path = write_green_table(tmp_path / "g.csv", x, y, [1.0, 2.0], [0.1, 0.0])
    assert path.read_text().splitlines()[0] == "x0,x1,y0,y1,g,g_err"
    xs, ys, g, err = read_green_table(path)
    np.testing.assert_array_equal(xs, x)
    np.testing.assert_array_equal(ys, y)
    np.testing.assert_array_equal(g, [1.0, 2.0])


def test_green_table_rejects_bad_files(tmp_path):
    bad_header = tmp_path / "h.csv"
    bad_header.write_text("a,b,c,d,g,g_err\n0,0,1,1,1,0\n")
    with pytest.raises(ParameterError):
        read_green_table(bad_header)
    negative = tmp_path / "n.csv"
    negative.write_text("x0,x1,y0,y1,g,g_err\n0,0,1,1,-1,0\n")
    with pytest.raises(ParameterError):
        read_green_table(negative)
