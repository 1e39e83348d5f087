from click.testing import CliRunner

from kpi2kvi.cli import _parse_q, main


def test_parse_q_specs():
    assert _parse_q("0.5,1.0") == [0.5, 1.0]
    qs = _parse_q("0.1:1.0:0.1")
    assert len(qs) == 10
    assert qs[0] == 0.1 and qs[-1] == 1.0


def test_eval_writes_csv(tmp_path):
    out = tmp_path / "results.csv"
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["eval", "--variants", "4", "--q", "1.0", "--runs", "2", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    text = out.read_text()
    assert "case_id,variant,q," in text
    data_rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")][1:]
    assert len(data_rows) == 2  # two bundled cases, one variant, one q point


def test_help_lists_commands():
    runner = CliRunner()
    result = runner.invoke(main, ["--help"])
    assert result.exit_code == 0
    assert "serve" in result.output and "eval" in result.output
