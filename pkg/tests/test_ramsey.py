import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cziswap import ramsey as rm
from cziswap.gateset import Circuit, apply_circuit, basis_state, schmidt_rank

SX = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
PHIS32 = np.linspace(0, 2 * np.pi, 32, endpoint=False)
PHIS16 = np.linspace(0, 2 * np.pi, 16, endpoint=False)


def p_label(circuit, output, roles=(0, 1)):
    return rm.ExactBackend().populations(circuit)[rm._label_index(output, roles)]


# -- circuits -----------------------------------------------------------------------------

def test_conditional_ramsey_layout():
    c = rm.build_conditional_ramsey("CZ", 1, 0.3)
    assert [op.kind.value for op in c.ops] == ["X", "SqrtX", "CZ", "VirtualZ", "SqrtX"]
    assert c.ops[3].targets == (1,) and c.ops[3].phase == 0.3


def test_cz_control_zero_at_zero_phase_matches_statevector_oracle():
    # q_c idle in |0>, so q_t sees sqrtX . sqrtX
    qt = SX @ SX @ np.array([1, 0])
    expect = abs(qt[1]) ** 2
    assert p_label(rm.build_conditional_ramsey("CZ", 0, 0.0), (0, 1)) == pytest.approx(expect, abs=1e-12)
    assert expect == pytest.approx(1.0, abs=1e-12)


def test_cz_traces_shifted_by_pi():
    t0 = rm.sweep("CZ", 0, PHIS32)
    t1 = rm.sweep("CZ", 1, PHIS32 + np.pi)
    assert np.abs(t0.target - t1.target).max() <= 1e-12
    fit1 = rm.fit_trace(rm.sweep("CZ", 1, PHIS32))
    assert fit1.swing == pytest.approx(1.0, abs=1e-10)


def test_identity_traces_coincide():
    a = rm.sweep("identity", 0, PHIS32)
    b = rm.sweep("identity", 1, PHIS32)
    # q_c differs, so compare q_t marginals
    qt1 = lambda tr: tr.populations[:, [1, 4]].sum(axis=1)
    assert np.abs(qt1(a) - qt1(b)).max() <= 1e-12


def test_unsupported_gates_rejected():
    with pytest.raises(rm.RamseyError):
        rm.build_conditional_ramsey("iSWAP", 0, 0.0)
    with pytest.raises(rm.RamseyError):
        rm.build_cross_ramsey("CZ", 0, 0.0)
    with pytest.raises(rm.RamseyError):
        rm.build_cross_ramsey("SWAP", 2, 0.0)
    with pytest.raises(rm.RamseyError):
        rm.build_cross_ramsey("SWAP", 0, 0.0, swap_form="bogus")


@pytest.mark.parametrize("prep", [0, 1])
def test_iswap_cross_ramsey_half_at_zero_phase(prep):
    p = p_label(rm.build_cross_ramsey("iSWAP", prep, 0.0), (1, prep))
    assert p == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("prep", [0, 1])
@pytest.mark.parametrize("form", ["short", "hadamard"])
def test_swap_cross_ramsey_rotates_control_to_one(prep, form):
    pops = rm.ExactBackend().populations(rm.build_cross_ramsey("SWAP", prep, 0.0, swap_form=form))
    assert pops[3] + pops[4] == pytest.approx(1.0, abs=1e-12)
    assert pops[rm._label_index((1, prep), (0, 1))] == pytest.approx(1.0, abs=1e-12)


def test_swap_core_keeps_50_product_states_separable():
    rng = np.random.default_rng(5)
    core = Circuit((2, 2)).add("iSWAP", 0, 1).add("CZ", 0, 1).add("SDagger", 0).add("SDagger", 1)
    for _ in range(50):
        a, b = (rng.standard_normal(2) + 1j * rng.standard_normal(2) for _ in range(2))
        psi = np.kron(a / np.linalg.norm(a), b / np.linalg.norm(b))
        assert schmidt_rank(apply_circuit(core, psi)) == 1


@pytest.mark.parametrize("gate", ["iSWAP", "SWAP"])
def test_cross_ramsey_is_2pi_periodic_not_pi(gate):
    a = rm.sweep(gate, 1, PHIS16)
    b = rm.sweep(gate, 1, PHIS16 + 2 * np.pi)
    c = rm.sweep(gate, 1, PHIS16 + np.pi)
    assert np.abs(a.target - b.target).max() <= 1e-12
    assert np.abs(a.target - c.target).max() > 0.5


def test_padding():
    c = rm.build_cross_ramsey("SWAP", 1, 0.0, pad_to=rm.SWAP_CIRCUIT_DURATION)
    assert c.duration == pytest.approx(rm.SWAP_CIRCUIT_DURATION)
    with pytest.raises(rm.RamseyError):
        rm.build_cross_ramsey("SWAP", 1, 0.0, pad_to=100e-9)


# -- sweeps and backends ------------------------------------------------------------------

def test_exact_sweep_matches_analytic_curve():
    tr = rm.sweep("CZ", 0, PHIS32)
    assert np.mean((tr.target - tr.ideal) ** 2) <= 1e-12
    # the ideal curve itself: P = (1 + cos phi) / 2 for q_c = 0
    assert np.abs(tr.ideal - 0.5 * (1 + np.cos(PHIS32))).max() <= 1e-12


def test_empty_grid_rejected():
    with pytest.raises(rm.RamseyError):
        rm.sweep("CZ", 0, [])


def test_shot_noise_matches_binomial_error():
    # iSWAP cross-Ramsey at phi = 0 has p = 1/2, the worst case
    base = rm.ExactBackend()
    circ = rm.build_cross_ramsey("iSWAP", 0, 0.0)
    k = rm._label_index((1, 0), (0, 1))
    draws = np.array([rm.ShotBackend(base, 15_000, seed=s).sample(circ, ("t",))[k] for s in range(400)])
    expect = math.sqrt(0.25 / 15_000)
    assert expect <= 0.0041
    assert draws.std(ddof=1) == pytest.approx(expect, rel=0.1)
    assert draws.mean() == pytest.approx(0.5, abs=4 * expect / math.sqrt(400))


def test_shot_sampling_is_seeded():
    b1 = rm.make_backend("shots", shots=1000, seed=4)
    b2 = rm.make_backend("shots", shots=1000, seed=4)
    b3 = rm.make_backend("shots", shots=1000, seed=5)
    a, b, c = (rm.sweep("CZ", 1, PHIS32, be).populations for be in (b1, b2, b3))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_shot_traces_converge_at_rate_one_over_shots():
    mse = []
    for shots in (1_000, 10_000, 100_000):
        errs = [rm.fit_trace(rm.sweep("CZ", 1, PHIS32, rm.make_backend("shots", shots=shots, seed=s))).mse
                for s in range(8)]
        mse.append(np.mean(errs))
    scaled = np.array(mse) * np.array([1e3, 1e4, 1e5])
    assert mse[0] > mse[1] > mse[2]
    assert scaled.max() / scaled.min() < 2.0


def test_noisy_swing_below_exact(params):
    noisy = rm.make_backend("noisy", params=params)
    kw = {"pad_to": rm.SWAP_CIRCUIT_DURATION}
    f_exact = rm.fit_trace(rm.sweep("SWAP", 1, PHIS16, "exact", **kw))
    f_noisy = rm.fit_trace(rm.sweep("SWAP", 1, PHIS16, noisy, **kw))
    assert f_noisy.swing < f_exact.swing


def test_backend_factory_errors():
    with pytest.raises(rm.RamseyError):
        rm.make_backend("noisy")
    with pytest.raises(rm.RamseyError):
        rm.make_backend("pulse")
    with pytest.raises(rm.RamseyError):
        rm.make_backend("warp")
    with pytest.raises(rm.RamseyError):
        rm.ShotBackend(rm.ExactBackend(), 0)


def test_pulse_backend_cz_traces(prop, cals):
    be = rm.make_backend("pulse", propagator=prop, calibrations=cals)
    for prep in (0, 1):
        fit = rm.fit_trace(rm.sweep("CZ", prep, PHIS32, be))
        assert fit.swing > 0.98
        assert fit.mse < 1e-3
        assert abs(fit.delta_phase) < 0.05


def test_device_backend_gives_valid_states(params, prop, cals):
    from cziswap.noise import check_density
    be = rm.make_backend("device", params=params, propagator=prop, calibrations=cals)
    rho = be.density(rm.build_cross_ramsey("iSWAP", 1, 0.4))
    check_density(rho, tol=1e-10)
    fit = rm.fit_trace(rm.sweep("iSWAP", 0, PHIS16, be))
    assert 0.9 < fit.swing < 1.0


# -- trace records ---------------------------------------------------------------------------

def test_trace_invariants():
    phi = np.zeros(1)
    with pytest.raises(rm.RamseyError):
        rm.RamseyTrace(phi, np.full((1, 9), 0.2), "CZ", 0, (0, 1))
    with pytest.raises(rm.RamseyError):
        rm.RamseyTrace(phi, np.array([[1.1] + [0] * 8]), "CZ", 0, (0, 1))
    ok = rm.RamseyTrace(phi, np.full((1, 9), 0.2), "CZ", 0, (0, 1), mitigated=True)
    assert ok.mitigated


def test_trace_csv_round_trip(tmp_path):
    tr = rm.sweep("iSWAP", 1, PHIS16, rm.make_backend("shots", shots=500, seed=1), roles=(1, 0))
    path = tmp_path / "t.csv"
    tr.write_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "phi_rad,p00,p01,p02,p10,p11,p12,p20,p21,p22,backend,shots"
    phi, pops, backend, shots = rm.read_trace_csv(path)
    assert np.array_equal(phi, tr.phi) and np.array_equal(pops, tr.populations)
    assert (backend, shots) == ("shots", 500)


def test_output_labels_follow_control_target_order():
    assert rm.sweep("CZ", 1, PHIS32).output_label == "11"
    assert rm.sweep("iSWAP", 0, PHIS16).output_label == "10"
    tr = rm.sweep("SWAP", 0, PHIS16, roles=(1, 0))
    # |q_c q_t> = |1 0> with q_c = Q2 is column p01
    assert rm._label_index(tr.output, tr.roles) == 1


# -- fits ---------------------------------------------------------------------------------------

def test_fit_of_ideal_trace():
    fit = rm.fit_trace(rm.sweep("iSWAP", 1, PHIS16))
    assert fit.swing == pytest.approx(1.0, abs=1e-10)
    assert abs(fit.delta_offset) <= 1e-10
    assert abs(fit.delta_phase) <= 1e-10
    assert fit.mse <= 1e-10
    assert min(fit.swing_err, fit.offset_err, fit.phase_err) >= 0


def test_fit_recovers_injected_swing_and_offset():
    rng = np.random.default_rng(2024)
    phi = PHIS32
    y = 0.434 * np.cos(phi + 0.2) + (0.5 - 0.150) + rng.normal(0, 0.01, phi.size)
    (amp, delta, m), err, ok, _ = rm.fit_sinusoid(phi, y)
    assert ok
    assert abs(2 * amp - 0.868) <= 3 * (2 * err[0])
    assert abs((0.5 - m) - 0.150) <= 3 * err[2]
    assert abs(delta - 0.2) <= 3 * err[1]


def test_fit_coverage_rules():
    with pytest.raises(rm.RamseyError, match="at least"):
        rm.fit_trace(rm.sweep("CZ", 0, np.linspace(0, 2 * np.pi, 6, endpoint=False)))
    with pytest.raises(rm.RamseyError, match="period"):
        rm.fit_trace(rm.sweep("CZ", 0, np.linspace(0, np.pi, 10)))


def test_fit_record_fields():
    tr = rm.sweep("CZ", 1, PHIS32, roles=(1, 0))
    rec = rm.fit_record(tr, rm.fit_trace(tr))
    assert {"swing", "delta_offset", "delta_phase_mrad", "mse"} <= rec.keys()
    assert (rec["q_c"], rec["q_t"], rec["output"]) == ("q2", "q1", "11")


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=16, max_size=16))
def test_fit_invariant_under_full_periods(shifts):
    rng = np.random.default_rng(7)
    y = 0.4 * np.cos(PHIS16 - 0.3) + 0.45 + rng.normal(0, 0.02, 16)
    a = rm.fit_sinusoid(PHIS16, y)[0]
    b = rm.fit_sinusoid(PHIS16 + 2 * np.pi * np.array(shifts), y)[0]
    assert np.allclose(a, b, atol=1e-8)


# -- SWAP local-phase tune-up --------------------------------------------------------------

def test_tuneup_on_ideal_unitaries_reaches_one():
    tu = rm.tune_swap_local_phase("exact")
    corr = tu.phases
    for qc in (0, 1):
        c = rm.build_cross_ramsey("SWAP", 1, 0.0, roles=(qc, 1 - qc), swap_correction=corr)
        assert p_label(c, (1, 1), (qc, 1 - qc)) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("beta", [(0.3, -0.7), (-1.2, 0.05)])
def test_tuneup_recovers_injected_offset(beta):
    tu = rm.tune_swap_local_phase("exact", z_offset=beta)
    resolution = 2 * np.pi / 32
    for got, b in zip(tu.phases, beta):
        assert abs(rm._wrap(got + b)) <= resolution
    fixed = tuple(b + p for b, p in zip(beta, tu.phases))
    for qc in (0, 1):
        c = rm.build_cross_ramsey("SWAP", 1, 0.0, roles=(qc, 1 - qc), swap_correction=fixed)
        assert p_label(c, (1, 1), (qc, 1 - qc)) == pytest.approx(1.0, abs=1e-4)


class _Flat:
    name = "flat"

    def populations(self, circuit):
        return np.full(9, 1 / 9)


def test_tuneup_flat_response_fails():
    with pytest.raises(rm.TuneUpError):
        rm.tune_swap_local_phase(_Flat())
