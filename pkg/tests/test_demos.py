import runpy

import pytest

from conftest import ROOT


@pytest.mark.parametrize("name", ["01_motion_and_ball.py", "02_plan_a_pass.py"])
def test_demo_runs(name, capsys):
    runpy.run_path(str(ROOT / "demos" / name), run_name="__main__")
    assert capsys.readouterr().out
