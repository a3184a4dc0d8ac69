import runpy

import pytest

from conftest import ROOT

DEMOS = sorted((ROOT / "demos").glob("demo_*.py"))


@pytest.mark.parametrize("path", DEMOS, ids=[p.stem for p in DEMOS])
def test_demo_runs(path, capsys):
    runpy.run_path(str(path), run_name="__main__")
    assert capsys.readouterr().out
