"""
End-to-end tests of the command-line front end
"""

import pytest

import config
from app import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def data_file(tmp_path, capsys):
    path = tmp_path / "data.txt"
    code, _, _ = run(capsys, 'gen', '--family', 'gaussian', '--truth', '0.5 -2; 0.5 2',
                     '-n', '300', '--seed', '5', '--out', str(path))
    assert code == 0
    return path


def test_gen_is_deterministic(tmp_path, capsys):
    first, second = tmp_path / "a.txt", tmp_path / "b.txt"
    for path in (first, second):
        code, _, _ = run(capsys, 'gen', '--family', 'poisson', '--truth', '0.5 1; 0.5 6',
                         '-n', '5', '--seed', '42', '--out', str(path))
        assert code == config.EXIT_OK
    assert len(first.read_text().splitlines()) == 5
    assert first.read_text() == second.read_text()


def test_gen_to_stdout(capsys):
    code, out, _ = run(capsys, 'gen', '--family', 'gaussian', '--truth', '1 0', '-n', '3')
    assert code == 0
    assert len(out.splitlines()) == 3


def test_bad_family_names_the_token(capsys):
    code, _, err = run(capsys, 'gen', '--family', 'cauchy', '--truth', '1 0', '-n', '3')
    assert code == config.EXIT_VALIDATION
    assert 'cauchy' in err


def test_missing_option(capsys):
    code, _, err = run(capsys, 'gen', '--family', 'gaussian', '-n', '3')
    assert code == config.EXIT_VALIDATION
    assert '--truth' in err


def test_fit_then_score(tmp_path, capsys, data_file):
    measure = tmp_path / "fit.txt"
    code, out, _ = run(capsys, 'fit', '--family', 'gaussian', '--phi', 'ks', '--data', str(data_file),
                       '-k', '2', '--domain=-5:5', '--restarts', '2', '--max-iterations', '300',
                       '--out', str(measure))
    assert code == 0
    summary = out.splitlines()[0]
    assert summary.startswith('k=')
    objective = summary.split()[1]

    code, out, _ = run(capsys, 'score', '--family', 'gaussian', '--phi', 'ks', '--data', str(data_file),
                       '--measure', str(measure))
    assert code == 0
    assert out.strip() == objective


def test_fit_reads_a_config_file(tmp_path, capsys, data_file):
    options = tmp_path / "fit.cfg"
    options.write_text(f"family = gaussian\nphi = mmd(rbf,gamma=0.5)\ndata = {data_file}\n"
                       "k = 1\ndomain = -5:5\nrestarts = 1\nmax-iterations = 100\n")
    code, out, _ = run(capsys, 'fit', '--config', str(options))
    assert code == 0
    assert out.startswith('k=1 ')

    options.write_text("colour = blue\n")
    code, _, err = run(capsys, 'fit', '--config', str(options))
    assert code == config.EXIT_VALIDATION
    assert 'colour' in err


def test_missing_data_file(tmp_path, capsys):
    code, _, _ = run(capsys, 'fit', '--family', 'gaussian', '--phi', 'ks', '--data', str(tmp_path / "none.txt"),
                     '-k', '1', '--domain=-5:5')
    assert code == config.EXIT_IO


def test_strict_non_convergence(capsys, data_file):
    code, _, err = run(capsys, 'fit', '--family', 'gaussian', '--phi', 'ks', '--data', str(data_file),
                       '-k', '2', '--domain=-5:5', '--restarts', '1', '--max-iterations', '1', '--strict')
    assert code == config.EXIT_NOT_CONVERGED
    assert 'converge' in err


def test_order_thresholds(capsys, data_file):
    common = ['order', '--family', 'gaussian', '--phi', 'ks', '--data', str(data_file), '--k-max', '2',
              '--domain=-5:5', '--restarts', '2', '--max-iterations', '200']
    code, out, _ = run(capsys, *common, '--c1', '1e6')
    assert code == 0
    assert out.splitlines()[0] == 'k_hat=1'

    code, out, _ = run(capsys, *common, '--c1', '1e-9')
    assert code == 0
    assert out.splitlines()[0] == 'k_hat=undetermined'
    assert 'objective[2]=' in out


def test_wasserstein(capsys):
    code, out, _ = run(capsys, 'wasserstein', '0.5 -1; 0.5 1', '0.5 -1; 0.5 1')
    assert (code, out.strip()) == (0, '0')
    code, out, _ = run(capsys, 'wasserstein', '1 0', '1 2')
    assert (code, out.strip()) == (0, '2')
    code, _, _ = run(capsys, 'wasserstein', '1 0', '1 2', '--ell', '0.5')
    assert code == config.EXIT_VALIDATION


def _study_file(tmp_path, n_grid):
    path = tmp_path / "study.cfg"
    path.write_text("family = gaussian\ntruth = 0.5 -2; 0.5 2\nphi = ks\ndomain = -5:5\n"
                    f"n_grid = {n_grid}\nk = 2\nrestarts = 1\nmax_iterations = 100\n")
    return path


def test_rate_study_with_one_row(tmp_path, capsys):
    csv = tmp_path / "rows.csv"
    code, _, err = run(capsys, 'rate-study', '--config', str(_study_file(tmp_path, '50')),
                       '--csv', str(csv), '--threads', '1')
    assert code == config.EXIT_STUDY_SHAPE
    assert 'rows' in err
    assert len(csv.read_text().splitlines()) == 2


def test_rate_study_outputs(tmp_path, capsys):
    csv, svg, html = tmp_path / "rows.csv", tmp_path / "plot.svg", tmp_path / "report.html"
    code, out, _ = run(capsys, 'rate-study', '--config', str(_study_file(tmp_path, '50,100')),
                       '--replications', '2', '--csv', str(csv), '--svg', str(svg), '--html', str(html),
                       '--threads', '2')
    assert code == 0
    assert out.splitlines()[-1].startswith('slope=')
    assert csv.read_text().splitlines()[0] == 'n,mean,se,reps,frac_correct'
    assert svg.read_text(encoding='utf-8').startswith('<svg')
    assert html.exists()


def test_study_needs_a_config(capsys):
    code, _, _ = run(capsys, 'rate-study')
    assert code == config.EXIT_VALIDATION


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(['fit', '--help'])
    assert excinfo.value.code == 0
    out = capsys.readouterr().out
    assert f"(default: {config.RESTARTS})" in out
    assert f"(default: {config.MAX_ITERATIONS})" in out
