import json

import pytest
from click.testing import CliRunner

from main import ERROR_EXIT, cli

QBF_TEXT = "p cnf 3 2\na 1 0\ne 2 3 0\n1 2 3 0\n-1 2 3 0\n"


@pytest.fixture
def run():
    runner = CliRunner()

    def invoke(*args):
        return runner.invoke(cli, list(args))
    return invoke


def test_check_inexpressible_query(run, spec_files):
    result = run('check', '--spec', spec_files['base'], '--source-query', spec_files['man'])
    assert result.exit_code == 1
    assert "=== Verdict: NO ===" in result.output
    assert "Witness:" in result.output


def test_check_expressible_query(run, spec_files):
    result = run('check', '--spec', spec_files['spec'], '--source-query', spec_files['join'])
    assert result.exit_code == 0
    assert "manages(x,y)" in result.output


def test_check_json_output(run, spec_files):
    result = run('--json', 'check', '--spec', spec_files['spec'], '--source-query', spec_files['emp'])
    assert result.exit_code == 1
    data = json.loads(result.output)
    assert data['verdict'] == 'no'
    assert data['witness']['validated']
    assert data['bounds']['strategy'] == 'rooted-pseudo-tree'


def test_check_small_budget_is_unknown(run, spec_files):
    result = run('check', '--spec', spec_files['spec'], '--source-query', spec_files['emp'], '--max-abox', '0')
    assert result.exit_code == 2


def test_verify(run, spec_files):
    ok = run('verify', '--spec', spec_files['spec'], '--source-query', spec_files['join'],
             '--target-query', spec_files['manages'])
    assert ok.exit_code == 0
    wrong = run('verify', '--spec', spec_files['spec'], '--source-query', spec_files['emp'],
                '--target-query', spec_files['employee'])
    assert wrong.exit_code == 1


def test_verify_rejects_arity_mismatch(run, spec_files):
    result = run('verify', '--spec', spec_files['spec'], '--source-query', spec_files['man'],
                 '--target-query', spec_files['manages'])
    assert result.exit_code == ERROR_EXIT
    assert "arity" in result.output


def test_missing_spec_is_an_error(run, spec_files):
    result = run('check', '--source-query', spec_files['man'])
    assert result.exit_code == ERROR_EXIT
    assert "spec path is required" in result.output


def test_parse_error_is_reported_with_location(run, spec_files, tmp_path):
    broken = tmp_path / 'broken.txt'
    broken.write_text("schema { Man/2 }\nmappings { Man(x,y) -> }\n", encoding='utf-8')
    result = run('check', '--spec', str(broken), '--source-query', spec_files['man'])
    assert result.exit_code == ERROR_EXIT
    assert "Error:" in result.output


def test_rewrite(run, tmp_path):
    spec = tmp_path / 'spec.txt'
    spec.write_text("ontology dllite { A [= B }\n", encoding='utf-8')
    query = tmp_path / 'query.txt'
    query.write_text("q(x) :- B(x).\n", encoding='utf-8')
    result = run('rewrite', '--spec', str(spec), '--query', str(query))
    assert result.exit_code == 0
    assert len([line for line in result.output.splitlines() if line.startswith('q(')]) == 2


def test_chase(run, spec_files):
    result = run('chase', '--spec', spec_files['spec'], '--abox', spec_files['abox'], '--depth', '1')
    assert result.exit_code == 0
    assert "Employee(a)" in result.output
    assert "Secretary(_n1)" in result.output


def test_containment(run, spec_files):
    same = run('containment', '--left', spec_files['join'], '--right', spec_files['join'])
    assert same.exit_code == 0
    assert same.output.strip() == 'true'
    different = run('containment', '--left', spec_files['man'], '--right', spec_files['emp'])
    assert different.exit_code == 1
    assert different.output.strip() == 'false'


def test_gen_qbf_writes_instance(run, tmp_path):
    formula = tmp_path / 'formula.qdimacs'
    formula.write_text(QBF_TEXT, encoding='utf-8')
    out = tmp_path / 'out'
    result = run('gen-qbf', '--qbf', str(formula), '--out-dir', str(out), '--evaluate')
    assert result.exit_code == 0
    assert (out / 'instance.obda').exists()
    assert (out / 'query.uq').read_text(encoding='utf-8').startswith('q() :-')
    assert "Formula is true" in result.output


def test_oracle_on_generated_instance(run):
    result = run('oracle', '--seed', '7', '--max-domain', '2')
    assert result.exit_code in (0, 1)
    assert "=== Generated specification ===" in result.output
    assert "Databases checked:" in result.output


def test_oracle_takes_its_seed_from_the_config_file(run, tmp_path):
    config = tmp_path / 'config.json'
    config.write_text(json.dumps({"seed": 7}), encoding='utf-8')
    from_file = run('--config', str(config), 'oracle', '--max-domain', '2')
    from_flag = run('oracle', '--seed', '7', '--max-domain', '2')
    assert "Seed: 7" in from_file.output
    assert from_file.output == from_flag.output
    overridden = run('--config', str(config), 'oracle', '--seed', '8', '--max-domain', '2')
    assert "Seed: 8" in overridden.output


def test_oracle_finds_counterexample(run, spec_files):
    result = run('--json', 'oracle', '--spec', spec_files['base'], '--source-query', spec_files['man'])
    assert result.exit_code == 1
    data = json.loads(result.output)
    assert not data['consistent']
    assert 'counterexample' in data
