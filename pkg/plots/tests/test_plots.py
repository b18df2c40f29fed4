"""Figure rendering over the benchmark CSV schemas."""

import math

import pytest

from evcharge_plots import (
    PlotIOError,
    PlotJob,
    SchemaMismatchError,
    plot_cdf,
    plot_sweeps,
)
from evcharge_plots.figures import build_cdf_figure, build_sweep_figure

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def write_cdf_csv(path, rows):
    lines = ["level,policy,ratio"]
    lines += [f"{lvl},{pol},{ratio}" for lvl, pol, ratio in rows]
    path.write_text("\n".join(lines) + "\n")


def write_sweep_csv(path, rows):
    lines = ["axis,value,policy,mean_ratio,n_trials,n_inf"]
    lines += [",".join(str(x) for x in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def cdf_rows(levels=(0.6, 0.3, 0.15), policies=("opa", "uboa")):
    rows = []
    for lvl in levels:
        for pol in policies:
            for i in range(5):
                rows.append((lvl, pol, 1.0 + 0.3 * i))
    return rows


def test_cdf_three_levels_three_panels(tmp_path):
    src = tmp_path / "cdf.csv"
    write_cdf_csv(src, cdf_rows())
    out = tmp_path / "cdf.png"
    got = plot_cdf(PlotJob(inputs=(str(src),), output=str(out), kind="cdf"))
    assert got == str(out)
    assert out.read_bytes()[:8] == PNG_MAGIC

    fig = build_cdf_figure([
        {"level": str(l), "policy": p, "ratio": str(r)}
        for l, p, r in cdf_rows()
    ])
    assert len(fig.axes) == 3
    for ax in fig.axes:
        # one step curve per policy plus the ratio-2 reference line
        assert len(ax.lines) == 2 + 1
        assert any(line.get_xdata()[0] == 2.0 for line in ax.lines)


def test_cdf_single_policy_single_curve(tmp_path):
    fig = build_cdf_figure([
        {"level": "0.3", "policy": "opa", "ratio": str(r)}
        for r in (1.0, 1.5, 2.5)
    ])
    assert len(fig.axes) == 1
    assert len(fig.axes[0].lines) == 1 + 1


def test_cdf_infinite_ratios_excluded_from_curve():
    fig = build_cdf_figure([
        {"level": "0.3", "policy": "opa", "ratio": r}
        for r in ("1.0", "inf", "2.0")
    ])
    (curve,) = [l for l in fig.axes[0].lines if len(l.get_xdata()) > 2 or
                l.get_linestyle() == "-"]
    ys = list(curve.get_ydata())
    # the CDF saturates below 1: the infinite ratio never enters the curve
    assert max(ys) == pytest.approx(2 / 3)
    assert all(math.isfinite(x) for x in curve.get_xdata())


def test_cdf_schema_violations(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("level,policy\n0.3,opa\n")  # missing ratio column
    job = PlotJob(inputs=(str(bad),), output=str(tmp_path / "x.png"), kind="cdf")
    with pytest.raises(SchemaMismatchError):
        plot_cdf(job)

    empty = tmp_path / "empty.csv"
    empty.write_text("level,policy,ratio\n")
    with pytest.raises(SchemaMismatchError):
        plot_cdf(PlotJob(inputs=(str(empty),), output=str(tmp_path / "x.png"),
                         kind="cdf"))

    with pytest.raises(SchemaMismatchError):
        plot_cdf(PlotJob(inputs=(), output="x.png", kind="cdf"))
    with pytest.raises(SchemaMismatchError):
        plot_cdf(PlotJob(inputs=("a.csv",), output="x.png", kind="sweep"))


def test_cdf_io_errors(tmp_path):
    with pytest.raises(PlotIOError):
        plot_cdf(PlotJob(inputs=(str(tmp_path / "missing.csv"),),
                         output=str(tmp_path / "x.png"), kind="cdf"))
    src = tmp_path / "cdf.csv"
    write_cdf_csv(src, cdf_rows(levels=(0.3,)))
    with pytest.raises(PlotIOError):
        plot_cdf(PlotJob(inputs=(str(src),),
                         output=str(tmp_path / "no" / "dir" / "x.png"),
                         kind="cdf"))


def test_sweep_four_axes_four_panels(tmp_path):
    paths = []
    for axis in ("pmax", "capacity", "delta", "rho"):  # shuffled on purpose
        p = tmp_path / f"{axis}.csv"
        write_sweep_csv(p, [
            (axis, v, pol, 1.0 + v / 10, 5, 0)
            for v in (1.0, 2.0) for pol in ("opa", "ommp")
        ])
        paths.append(str(p))
    out = tmp_path / "sweep.png"
    plot_sweeps(PlotJob(inputs=tuple(paths), output=str(out), kind="sweep"))
    assert out.read_bytes()[:8] == PNG_MAGIC

    tables = []
    for axis in ("pmax", "capacity", "delta", "rho"):
        tables.append([
            {"axis": axis, "value": str(v), "policy": pol,
             "mean_ratio": "1.5", "n_trials": "5", "n_inf": "0"}
            for v in (1.0, 2.0) for pol in ("opa", "ommp")
        ])
    fig = build_sweep_figure(tables)
    assert [ax.get_xlabel() for ax in fig.axes] == [
        "capacity", "rho", "delta", "pmax",
    ]
    for ax in fig.axes:
        assert len(ax.lines) == 2 + 1  # two policies + reference line


def test_sweep_single_axis_and_skipped_points(tmp_path):
    rows = [
        ("rho", 2.0, "opa", 1.4, 5, 0),
        ("rho", 4.0, "opa", "nan", 0, 0),  # skipped grid point
        ("rho", 8.0, "opa", 1.9, 5, 1),
    ]
    src = tmp_path / "rho.csv"
    write_sweep_csv(src, rows)
    out = tmp_path / "rho.png"
    plot_sweeps(PlotJob(inputs=(str(src),), output=str(out), kind="sweep"))
    assert out.exists()

    fig = build_sweep_figure([[
        {"axis": a, "value": str(v), "policy": p, "mean_ratio": str(m),
         "n_trials": str(n), "n_inf": str(i)} for a, v, p, m, n, i in rows
    ]])
    assert len(fig.axes) == 1
    (curve,) = [l for l in fig.axes[0].lines if l.get_marker() == "o"]
    assert list(curve.get_xdata()) == [2.0, 8.0]


def test_sweep_schema_violations(tmp_path):
    mixed = tmp_path / "mixed.csv"
    write_sweep_csv(mixed, [("rho", 2.0, "opa", 1.4, 5, 0),
                            ("pmax", 0.5, "opa", 1.2, 5, 0)])
    with pytest.raises(SchemaMismatchError):
        plot_sweeps(PlotJob(inputs=(str(mixed),),
                            output=str(tmp_path / "x.png"), kind="sweep"))

    empty = tmp_path / "empty.csv"
    empty.write_text("axis,value,policy,mean_ratio,n_trials,n_inf\n")
    with pytest.raises(SchemaMismatchError):
        plot_sweeps(PlotJob(inputs=(str(empty),),
                            output=str(tmp_path / "x.png"), kind="sweep"))

    five = tuple(str(tmp_path / f"{i}.csv") for i in range(5))
    with pytest.raises(SchemaMismatchError):
        plot_sweeps(PlotJob(inputs=five, output="x.png", kind="sweep"))
