import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import lsq_linear, minimize

from cziswap import mitigation as mt
from cziswap import readout as ro
from cziswap.ramsey import read_trace_csv, sweep
from cziswap.readout import ConfusionMatrix


def random_stochastic(rng, n, dominance=0.8):
    """Row-stochastic matrix with diagonal at least ``dominance``."""
    off = rng.random((n, n))
    np.fill_diagonal(off, 0)
    off *= (1 - dominance) / off.sum(axis=1, keepdims=True) * rng.random((n, 1))
    return off + np.diag(1 - off.sum(axis=1))


def random_simplex(rng, n):
    return rng.dirichlet(np.ones(n))


# -- orientation -------------------------------------------------------------------------

def test_forward_matrix_orientation():
    # prepared |1> is read as |0> with probability 0.1
    t = np.array([[1.0, 0, 0], [0.1, 0.9, 0], [0, 0, 1.0]])
    x = np.array([0.0, 1.0, 0.0])
    assert np.allclose(mt.forward_matrix(t) @ x, [0.1, 0.9, 0.0])
    assert np.allclose(mt.forward_matrix(t.T, "columns") @ x, [0.1, 0.9, 0.0])
    y = np.array([0.1, 0.9, 0.0])
    a = mt.reconstruct(y, t).x
    b = mt.reconstruct(y, t.T, orientation="columns").x
    assert np.abs(a - x).max() <= 1e-9
    assert np.abs(b - x).max() <= 1e-9


def test_non_stochastic_rejected():
    with pytest.raises(mt.MitigationError):
        mt.reconstruct([0.5, 0.5, 0.0], np.full((3, 3), 0.5))
    with pytest.raises(mt.MitigationError):
        mt.forward_matrix(np.eye(3), "diagonal")
    with pytest.raises(mt.MitigationError):
        mt.reconstruct([0.5, 0.5], np.eye(3))
    with pytest.raises(mt.MitigationError):
        mt.reconstruct([1.5, -0.5, 0.0], np.eye(3))


# -- reconstruction --------------------------------------------------------------------------

def test_identity_returns_input():
    y = np.random.default_rng(0).dirichlet(np.ones(9))
    res = mt.reconstruct(y, np.eye(9))
    assert np.abs(res.x - y).max() <= 1e-15
    assert res.converged


@pytest.mark.parametrize("seed", range(5))
def test_consistent_data_recovered(seed):
    rng = np.random.default_rng(seed)
    t = random_stochastic(rng, 9)
    x_true = random_simplex(rng, 9)
    y = t.T @ x_true
    assert np.abs(mt.reconstruct(y, t).x - x_true).max() <= 1e-6


def test_noisy_residual_bounded_by_noise_distance():
    rng = np.random.default_rng(3)
    t = ro.expected_joint_confusion(ro.table1_readout()).matrix
    x_true = random_simplex(rng, 9)
    y_clean = t.T @ x_true
    y = rng.multinomial(25_000, y_clean) / 25_000
    res = mt.reconstruct(y, t)
    assert res.residual <= np.linalg.norm(y - y_clean) + 1e-12


def test_solution_inside_box():
    rng = np.random.default_rng(4)
    t = random_stochastic(rng, 9, 0.6)
    # a y that is not in the image of the box forces active bounds
    y = np.zeros(9)
    y[0] = 1.0
    x = mt.reconstruct(y, t).x
    assert x.min() >= 0.0 and x.max() <= 1.0
    assert np.any(x == 0.0)


def test_non_convergence_reports_residual(monkeypatch):
    rng = np.random.default_rng(5)
    t = random_stochastic(rng, 9, 0.6)
    y = rng.dirichlet(np.ones(9))
    short = mt.solve_box_lsq(mt.forward_matrix(t), y, max_iter=1, tol=0.0)
    assert not short.converged and short.residual > 0
    orig = mt.solve_box_lsq
    monkeypatch.setattr(mt, "solve_box_lsq", lambda a, y: orig(a, y, max_iter=1, tol=0.0))
    with pytest.raises(mt.MitigationError, match="residual"):
        mt.reconstruct(y, t)


def test_ill_conditioned_warns_and_proceeds():
    eps = 1e-4
    t = np.array([[0.5 + eps, 0.5 - eps, 0], [0.5 - eps, 0.5 + eps, 0], [0, 0, 1.0]])
    with pytest.warns(mt.IllConditionedWarning, match="condition number"):
        res = mt.reconstruct([0.5, 0.5, 0.0], t)
    assert res.converged


def test_optional_normalisation():
    t = np.array([[0.9, 0.1, 0], [0.1, 0.9, 0], [0, 0, 1.0]])
    y = np.array([0.5, 0.3, 0.1])
    raw = mt.reconstruct(y, t).x
    norm = mt.reconstruct(y, t, normalize=True).x
    assert raw.sum() == pytest.approx(0.9, abs=1e-9)
    assert norm.sum() == pytest.approx(1.0, abs=1e-12)


# -- properties ---------------------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 9), st.floats(0.3, 0.95))
def test_objective_never_increases(seed, n, dom):
    rng = np.random.default_rng(seed)
    a = mt.forward_matrix(random_stochastic(rng, n, dom))
    y = rng.random(n)
    res = mt.solve_box_lsq(a, y)
    h = np.asarray(res.history)
    assert np.all(np.diff(h) <= 1e-14)
    assert res.x.min() >= 0.0 and res.x.max() <= 1.0


def _grid_oracle(a, y):
    """Exhaustive coarse grid, a 1e-3 grid around its best point, then bounded refinement."""
    def f(x):
        r = a @ x - y
        return 0.5 * float(r @ r)

    def search(axes):
        pts = np.array(np.meshgrid(*axes, indexing="ij")).reshape(3, -1).T
        r = pts @ a.T - y
        vals = 0.5 * np.einsum("ij,ij->i", r, r)
        return pts[int(np.argmin(vals))]

    best = search([np.linspace(0, 1, 51)] * 3)
    best = search([np.clip(np.arange(c - 0.02, c + 0.0205, 1e-3), 0, 1) for c in best])
    ref = minimize(f, best, jac=lambda x: a.T @ (a @ x - y), bounds=[(0, 1)] * 3,
                   method="L-BFGS-B", options={"ftol": 1e-15, "gtol": 1e-12})
    return min(f(best), ref.fun)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.4, 0.95))
def test_grid_search_oracle_equivalence(seed, dom):
    rng = np.random.default_rng(seed)
    t = random_stochastic(rng, 3, dom)
    y = rng.random(3)
    res = mt.reconstruct(y, t)
    assert abs(res.objective - _grid_oracle(mt.forward_matrix(t), y)) <= 1e-6


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_matches_library_bounded_least_squares(seed):
    rng = np.random.default_rng(seed)
    t = random_stochastic(rng, 9, 0.5)
    y = rng.random(9)
    a = mt.forward_matrix(t)
    ref = lsq_linear(a, y, bounds=(0, 1), tol=1e-14, method="bvls")
    assert abs(mt.reconstruct(y, t).objective - 0.5 * float(ref.fun @ ref.fun)) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 9))
def test_idempotent_on_well_conditioned_data(seed, n):
    rng = np.random.default_rng(seed)
    t = random_stochastic(rng, n, 0.7)
    assert np.linalg.cond(t) <= 50
    x = random_simplex(rng, n)
    assert np.abs(mt.reconstruct(t.T @ x, t).x - x).max() <= 1e-6


# -- traces ---------------------------------------------------------------------------------------

PHIS = np.linspace(0, 2 * np.pi, 17)


def test_identity_mitigation_keeps_trace():
    tr = sweep("CZ", 1, PHIS)
    out = mt.mitigate_trace(tr, np.eye(9))
    assert np.abs(out.populations - tr.populations).max() <= 1e-15
    assert out.mitigated and out.backend == "exact+mitigated"


@pytest.mark.parametrize("gate, prep", [("CZ", 0), ("iSWAP", 1), ("SWAP", 0)])
def test_distorted_trace_restored(gate, prep):
    tr = sweep(gate, prep, PHIS)
    t = ro.expected_joint_confusion(ro.table1_readout(), extra_21=(0.1, 0.1)).matrix
    distorted = tr.with_populations(tr.populations @ t)
    assert np.abs(distorted.target - tr.target).max() > 0.05
    out = mt.mitigate_trace(distorted, ConfusionMatrix(t))
    assert np.abs(out.populations - tr.populations).max() <= 1e-6
    assert out.output_label == tr.output_label


def test_mitigated_csv_names_matrix(tmp_path):
    tr = sweep("iSWAP", 0, PHIS)
    t = ro.expected_joint_confusion(ro.table1_readout())
    distorted = tr.with_populations(tr.populations @ t.matrix)
    src, out = tmp_path / "trace.csv", tmp_path / "mitigated.csv"
    distorted.write_csv(src)
    x = mt.mitigate_csv(src, t, out, "confusion_joint.csv")
    assert out.read_text().splitlines()[0] == "# mitigated with confusion matrix: confusion_joint.csv"
    phi, pops, backend, _ = read_trace_csv(out)
    assert np.allclose(phi, PHIS) and backend == "exact+mitigated"
    assert np.abs(pops - tr.populations).max() <= 1e-6
    assert np.array_equal(pops, x)
    # the in-memory writer produces the same rows
    mt.write_mitigated_csv(mt.mitigate_trace(distorted, t), tmp_path / "m2.csv", "confusion_joint.csv")
    assert np.abs(read_trace_csv(tmp_path / "m2.csv")[1] - pops).max() <= 1e-12


def test_shot_noise_end_to_end_mse_band():
    # readout-distorted shot data, mitigated with an independently sampled matrix
    from cziswap.ramsey import ShotBackend, ExactBackend, fit_trace
    models = ro.table1_readout()
    t_true = ro.expected_joint_confusion(models).matrix
    t_est = ro.build_joint_confusion(models, 25_000, seed=21)
    backend = ShotBackend(ExactBackend(), 15_000, seed=4, confusion=t_true)
    phis = np.linspace(0, 2 * np.pi, 25)
    for gate, prep in itertools.product(("CZ", "iSWAP"), (0, 1)):
        fit = fit_trace(mt.mitigate_trace(sweep(gate, prep, phis, backend), t_est))
        assert fit.mse <= 0.02
        assert abs(fit.swing - 1.0) <= 0.05
