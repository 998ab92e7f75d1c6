"""Each core service's __main__ self-check runs clean."""

import runpy

import pytest


SERVICES = [
    'app.services.hypothesis_service',
    'app.services.oracle_service',
    'app.services.instance_service',
    'app.services.tournament_service',
    'app.services.analysis_service',
    'app.services.baseline_service',
    'app.services.learner_service',
]


@pytest.mark.filterwarnings('ignore::RuntimeWarning')
@pytest.mark.parametrize('module', SERVICES)
def test_main_block(module, capsys):
    try:
        runpy.run_module(module, run_name='__main__')
    except SystemExit as e:
        assert e.code in (None, 0)

    out = capsys.readouterr().out
    assert '✗' not in out
    assert '❌' not in out
