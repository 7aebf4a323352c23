import numpy as np
import pytest

from quadexp import ScenarioError, read_measure_csv
from quadexp.cli import (
    TASKS,
    bundled_scenario,
    emit_convergence,
    main,
    parse_scenario,
    run_scenario,
)

GOOD = """\
# minimal forward scenario
task = forward
T = 1.0
N = 4
seed = 3
theta = [[0, 0.5], [-0.5, 0]]
drift = [[-1, 0.2], [-0.2, -1]]
dispersion = [[1, 0], [0, 1]]
"""

MODEL_BLOCK = """\
theta = [[0, 0.5], [-0.5, 0]]
drift = [[-1, 0.2], [-0.2, -1]]
dispersion = [[1, 0], [0, 1]]
"""


def write(tmp_path, text, name="case.scn"):
    path = tmp_path / name
    path.write_text(text, encoding="ascii")
    return path


def test_bundled_scenarios_exist_and_validate():
    names = (
        "atomic_roundtrip.scn",
        "zero_forward.scn",
        "diagonal_inverse.scn",
        "spde_fast.scn",
        "laplace_recovery.scn",
        "oracle_single.scn",
    )
    for name in names:
        path = bundled_scenario(name)
        assert path.is_file()
        scn = parse_scenario(path)
        assert scn.task in TASKS


def test_parse_good_scenario(tmp_path):
    path = write(tmp_path, GOOD)
    scn = parse_scenario(path)
    assert scn.task == "forward"
    assert scn.horizon == 1.0
    assert scn.steps == 4
    assert scn.seed == 3
    assert scn.output_dir == "case_out"
    assert np.allclose(scn.theta, [[0.0, 0.5], [-0.5, 0.0]])
    over = parse_scenario(path, output_dir="elsewhere", levels=3, seed=11)
    assert over.output_dir == "elsewhere"
    assert over.levels == 3
    assert over.seed == 11


def test_parse_model_file_indirection(tmp_path):
    write(tmp_path, MODEL_BLOCK, name="shared.mod")
    path = write(
        tmp_path, "task = forward\nT = 1.0\nN = 4\nmodel_file = shared.mod\n"
    )
    scn = parse_scenario(path)
    assert scn.drift is not None


@pytest.mark.parametrize(
    "text,match",
    [
        ("T = 1.0\nN = 4\n" + MODEL_BLOCK, "missing required key 'task'"),
        ("task = juggle\nT = 1\nN = 4\n" + MODEL_BLOCK, "unknown task"),
        ("task = forward\nwhat = 3\n", "unknown key"),
        ("task = forward\nT = 1\nT = 2\n", "duplicate key"),
        ("task = forward\njust some words\n", "expected 'key = value'"),
        ("task = forward\nT =\n", "empty key or value"),
        ("task = forward\nT = fast\n", "T must be float"),
        ("task = forward\ntheta = [[0, 1], [-1]]\nT = 1\nN = 2\n", "ragged"),
        ("task = forward\ntheta = [[0, x], [-1, 0]]\nT = 1\nN = 2\n", "non-numeric"),
        ("task = forward\ntheta = (0, 1)\nT = 1\nN = 2\n", "matrix literal"),
        ("task = forward\nT = 1.0\nN = 4\n", "needs model key"),
        (
            "task = oracle\ntheta = [[0, 1], [-1, 0]]\ndrift = [[-1, 0], [0, -1]]\n",
            "partial model",
        ),
        (GOOD + "levels = 0\n", "levels"),
        (GOOD + "cutoff = 4\n", "cutoff"),
        (
            "task = spde\nT = 1\nN = 4\n" + MODEL_BLOCK,
            "needs pi",
        ),
        (
            GOOD.replace("task = forward", "task = inverse")
            + "pi = [[1, 2], [3, 4]]\n",
            "symmetric",
        ),
        (
            GOOD.replace("task = forward", "task = inverse")
            + "pi = [[1, 2, 3], [4, 5, 6]]\n",
            "square",
        ),
    ],
)
def test_parse_rejects_bad_scenarios(tmp_path, text, match):
    path = write(tmp_path, text)
    with pytest.raises(ScenarioError, match=match):
        parse_scenario(path)


def test_parse_model_file_conflicts(tmp_path):
    write(tmp_path, MODEL_BLOCK, name="shared.mod")
    both = write(
        tmp_path,
        "task = forward\nT = 1\nN = 2\nmodel_file = shared.mod\n" + MODEL_BLOCK,
        name="both.scn",
    )
    with pytest.raises(ScenarioError, match="excludes inline"):
        parse_scenario(both)
    write(tmp_path, MODEL_BLOCK + "T = 4\n", name="stray.mod")
    stray = write(
        tmp_path,
        "task = forward\nT = 1\nN = 2\nmodel_file = stray.mod\n",
        name="stray.scn",
    )
    with pytest.raises(ScenarioError, match="model files carry only"):
        parse_scenario(stray)


def test_parse_rejects_missing_and_non_ascii(tmp_path):
    with pytest.raises(ScenarioError, match="unreadable"):
        parse_scenario(tmp_path / "absent.scn")
    path = tmp_path / "utf.scn"
    path.write_bytes("task = forward # na\u00efve\n".encode("utf-8"))
    with pytest.raises(ScenarioError, match="ASCII"):
        parse_scenario(path)


def test_emit_convergence_orders():
    eps = 1e-4
    rows = emit_convergence([(4, 0.25, 4 * eps), (8, 0.125, eps), (16, 0.0625, eps / 4)])
    assert rows[0][4] is None and rows[0][5] is False
    assert rows[1][4] == pytest.approx(2.0)
    assert rows[2][4] == pytest.approx(2.0)
    assert not rows[1][5] and not rows[2][5]


def test_emit_convergence_guards():
    with pytest.raises(ScenarioError, match="3 refinement levels"):
        emit_convergence([(4, 0.25, 1.0), (8, 0.125, 0.5)])
    rows = emit_convergence([(4, 0.25, 1.0), (8, 0.125, 2.0), (16, 0.0625, 1.0)])
    assert rows[1][5] is True  # error grew: flagged, not fatal
    assert rows[2][5] is False


def test_validate_subcommand_ok(capsys):
    code = main(["validate", str(bundled_scenario("zero_forward.scn"))])
    assert code == 0
    assert "schema ok" in capsys.readouterr().out


def test_schema_error_exits_two(tmp_path, capsys):
    path = write(tmp_path, "task = forward\nbogus = 1\n")
    assert main(["validate", str(path)]) == 2
    assert "schema error" in capsys.readouterr().err
    assert main(["run", str(path)]) == 2


def test_run_forward_zero_driver(tmp_path):
    out = tmp_path / "out"
    code = run_scenario(
        bundled_scenario("zero_forward.scn"), output_dir=out, levels=1
    )
    assert code == 0
    terminal = read_measure_csv(out / "n_terminal.csv")
    assert np.linalg.norm(terminal.weights) == 0.0
    report = (out / "report.csv").read_text().splitlines()
    assert report[0] == "# schema=1"
    assert report[1] == "node,time,symplectic,reality,reconstruction,roundtrip"
    summary = (out / "summary.txt").read_text()
    assert "result: PASS" in summary


def test_run_is_byte_deterministic(tmp_path):
    paths = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        code = run_scenario(
            bundled_scenario("diagonal_inverse.scn"), output_dir=out, levels=1
        )
        assert code == 0
        paths.append(out)
    csvs = sorted(p.name for p in paths[0].glob("*.csv"))
    assert csvs
    for name in csvs:
        assert (paths[0] / name).read_bytes() == (paths[1] / name).read_bytes()


def test_levels_override_controls_convergence_table(tmp_path):
    out1 = tmp_path / "one"
    assert (
        run_scenario(
            bundled_scenario("diagonal_inverse.scn"), output_dir=out1, levels=1
        )
        == 0
    )
    assert not (out1 / "convergence.csv").exists()
    out3 = tmp_path / "three"
    assert (
        run_scenario(
            bundled_scenario("diagonal_inverse.scn"), output_dir=out3, levels=3
        )
        == 0
    )
    table = (out3 / "convergence.csv").read_text().splitlines()
    assert table[0] == "# schema=1"
    assert table[1] == "level,steps,h,error,order,warning"
    assert len(table) == 5


def test_check_failure_exits_one(tmp_path):
    # Laplace recovery at six nodes: the moment system conditioning eats
    # the accuracy budget while staying below the hard raise, so the run
    # completes and the gate verdict is an honest FAIL.
    text = (
        "task = laplace\nT = 8.0\nN = 6\nseed = 7\n"
        "theta = [[0, 1], [-1, 0]]\n"
        "drift = [[-0.5, 0.3], [-0.3, -0.5]]\n"
        "dispersion = [[1, 0], [0, 1]]\n"
        "pi = [[0.2, 0.06], [0.06, 0.16]]\n"
    )
    path = write(tmp_path, text)
    out = tmp_path / "out"
    assert run_scenario(path, output_dir=out) == 1
    summary = (out / "summary.txt").read_text()
    assert "check laplace_recovery: FAIL" in summary
    assert "result: FAIL" in summary


def test_numerical_failure_exits_three(tmp_path, capsys):
    text = GOOD.replace("[[-1, 0.2], [-0.2, -1]]", "[[1, 0], [0, 1]]")
    path = write(tmp_path, text)
    out = tmp_path / "out"
    assert run_scenario(path, output_dir=out) == 3
    summary = (out / "summary.txt").read_text()
    assert "numerical failure:" in summary and "Hurwitz" in summary
    assert "result: FAIL" in summary
    assert "Hurwitz" in capsys.readouterr().err


def test_inadmissible_model_shape_exits_three(tmp_path):
    # Schema-valid but mathematically inadmissible input surfaces as a
    # wrapped rejection, not a schema error.
    text = GOOD.replace("[[0, 0.5], [-0.5, 0]]", "[[1, 0], [0, 1]]")
    path = write(tmp_path, text)
    out = tmp_path / "out"
    assert run_scenario(path, output_dir=out) == 3
    summary = (out / "summary.txt").read_text()
    assert "model rejected:" in summary
    assert "antisymmetric" in summary


def test_seed_override_changes_oracle_draws(tmp_path):
    outs = []
    for seed in (3, 4):
        out = tmp_path / f"seed{seed}"
        code = run_scenario(
            bundled_scenario("oracle_single.scn"), output_dir=out, seed=seed
        )
        assert code == 0
        outs.append((out / "oracle_report.csv").read_text())
    assert outs[0] != outs[1]
