import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import skew

from cziswap import fits
from cziswap.rng import stream

TRUE = {
    "T1": dict(A=1.0, T=77e-6, m=0.0),
    "T2star": dict(A=1.0, T=37e-6, f=100e3, phi=0.0, m=0.0),
    "T2echo": dict(A=1.0, T=93e-6, m=0.0),
}


def synth(model, noise=0.0, seed=0, n=201, span=5.0, **over):
    p = {**TRUE[model], **over}
    t = np.linspace(0, span * p["T"], n)
    if model == "T2star":
        y = p["A"] * np.exp(-t / p["T"]) * np.cos(2 * np.pi * p["f"] * t + p["phi"]) + p["m"]
    else:
        y = p["A"] * np.exp(-t / p["T"]) + p["m"]
    if noise:
        y = y + noise * stream(seed, "fit", model).standard_normal(n)
    return t, y


# -- decay fits ---------------------------------------------------------------------------

def test_noiseless_t1_recovered():
    t, y = synth("T1")
    fit = fits.fit_decoherence(t, y, "T1")
    assert fit.T == pytest.approx(77e-6, rel=1e-3)
    assert fit.A == pytest.approx(1.0, rel=1e-3)
    assert fit.accepted


def test_t2star_with_one_percent_noise():
    t, y = synth("T2star", noise=0.01, seed=1)
    fit = fits.fit_decoherence(t, y, "T2star")
    assert fit.T == pytest.approx(37e-6, rel=0.02)
    assert fit.f == pytest.approx(100e3, rel=0.01)
    assert fit.accepted


def test_t2star_recovers_phase_and_offset():
    t, y = synth("T2star", phi=0.8, m=0.5, A=0.4)
    fit = fits.fit_decoherence(t, y, "T2star")
    assert fit.phi == pytest.approx(0.8, abs=1e-4)
    assert fit.m == pytest.approx(0.5, abs=1e-6)
    assert fit.A == pytest.approx(0.4, rel=1e-4)


def test_pure_noise_rejected():
    t = np.linspace(0, 400e-6, 201)
    y = 0.01 * stream(0, "fit", "noise").standard_normal(201)
    fit = fits.fit_decoherence(t, y, "T1")
    assert not fit.accepted


def test_uncertainty_is_covariance_diagonal():
    from scipy.optimize import curve_fit
    t, y = synth("T1", noise=0.01, seed=2)
    fit = fits.fit_decoherence(t, y, "T1")
    _, pcov = curve_fit(lambda t, a, tau, m: a * np.exp(-t / tau) + m, t, y,
                        p0=[fit.A, fit.T, fit.m])
    assert fit.errors["T"] == pytest.approx(math.sqrt(pcov[1, 1]), rel=1e-3)
    assert fit.rel_err_T == pytest.approx(fit.errors["T"] / fit.T)


def test_acceptance_threshold_is_fifteen_percent():
    f = fits.DecoherenceFit("T1", 1.0, 10e-6, 0.0, errors={"T": 1.5e-6})
    assert f.rel_err_T == pytest.approx(0.15)
    assert fits.MAX_REL_ERR == 0.15


def test_fit_preconditions():
    t, y = synth("T1", n=9)
    with pytest.raises(fits.FitError):
        fits.fit_decoherence(t, y, "T1")
    t, y = synth("T1")
    with pytest.raises(fits.FitError):
        fits.fit_decoherence(t[::-1], y, "T1")
    with pytest.raises(fits.FitError):
        fits.fit_decoherence(t, y, "T3")


def test_non_convergence_is_reported(monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("Optimal parameters not found")
    monkeypatch.setattr(fits, "curve_fit", boom)
    t, y = synth("T1")
    fit = fits.fit_decoherence(t, y, "T1")
    assert not fit.accepted and not fit.converged
    assert "not found" in fit.message


@pytest.mark.parametrize("model", list(TRUE))
def test_returned_parameters_are_a_local_minimum(model):
    t, y = synth(model, noise=0.01, seed=3)
    fit = fits.fit_decoherence(t, y, model)
    base = fits.sum_of_squares(fit, t, y)
    names = ["A", "T", "m"] + (["f", "phi"] if model == "T2star" else [])
    for name in names:
        for s in (0.99, 1.01):
            val = getattr(fit, name)
            bumped = fits.DecoherenceFit(**{**fit.__dict__, name: val * s if val else s - 1})
            assert fits.sum_of_squares(bumped, t, y) >= base


def test_acceptance_monotone_in_noise():
    levels = [0.01, 0.05, 0.2, 0.6, 1.5]
    monotone = 0
    for seed in range(100):
        base = stream(seed, "fit", "mono").standard_normal(201)
        t, clean = synth("T1")
        flags = [fits.fit_decoherence(t, clean + s * base, "T1").accepted for s in levels]
        monotone += all(not (a is False and b is True) for a, b in zip(flags, flags[1:]))
    assert monotone >= 95


# -- Doane ----------------------------------------------------------------------------------

def test_doane_symmetric_256():
    x = np.concatenate([np.arange(128), -np.arange(128)]).astype(float)
    assert skew(x) == pytest.approx(0.0, abs=1e-12)
    assert fits.doane_bins(x) == 9


def test_doane_symmetric_8():
    assert fits.doane_bins([-4, -3, -2, -1, 1, 2, 3, 4]) == 4


def test_doane_skewed_sample():
    x = stream(0, "doane").exponential(size=256)
    g = skew(x)
    sigma = math.sqrt(6 * 254 / (257 * 259))
    assert fits.doane_bins(x) == round(1 + 8 + abs(g) / sigma)
    assert fits.doane_bins(x) > 9


def test_doane_degenerate_and_small():
    assert fits.doane_bins(np.full(50, 3.0)) == 1
    with pytest.raises(fits.FitError):
        fits.doane_bins([1.0, 2.0])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-3, 1e3), st.floats(-1e3, 1e3))
def test_doane_affine_invariant(seed, scale, shift):
    x = np.random.default_rng(seed).gamma(2.0, size=120)
    assert fits.doane_bins(x) == fits.doane_bins(scale * x + shift)


# -- frequency bookkeeping ---------------------------------------------------------------------

def test_error_propagation_table1():
    assert fits.propagate_frequency_error(fits.CZ_COEFFS, (190e3, 156e3, 10e3)) == pytest.approx(246e3, abs=1e3)
    assert fits.propagate_frequency_error(fits.ISWAP_COEFFS, (156e3, 156e3, 82e3)) == pytest.approx(235e3, abs=1e3)
    pre = fits.frequency_error_presets()
    assert pre["dF_CZ"] == pytest.approx(246e3, abs=1e3)
    assert pre["dF_iSWAP"] == pytest.approx(235e3, abs=1e3)


def test_error_propagation_edge_cases():
    assert fits.propagate_frequency_error((1, -1, 1), (0, 0, 0)) == 0.0
    with pytest.raises(fits.FitError):
        fits.propagate_frequency_error((1, 1), (1.0,))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(0, 1e6), st.booleans()), min_size=1, max_size=6))
def test_error_propagation_sign_invariant(terms):
    c = [a for a, _, _ in terms]
    e = [b for _, b, _ in terms]
    flipped = [-a if s else a for a, _, s in terms]
    assert fits.propagate_frequency_error(c, e) == fits.propagate_frequency_error(flipped, e)


def test_detuning_presets_table1():
    d = fits.detuning_presets()
    assert d["dF_CZ"] == pytest.approx(-0.61e6, abs=0.01e6)
    assert d["dF_iSWAP"] == pytest.approx(+1.19e6, abs=0.01e6)


def test_detuning_zero_at_bare_difference():
    tab = dict(fits.TABLE1)
    tab["f_cz_hz"] = tab["f12_q1_hz"] - tab["f01_q2_hz"]
    tab["f_iswap_hz"] = tab["f01_q1_hz"] - tab["f01_q2_hz"]
    d = fits.detuning_presets(tab)
    assert d["dF_CZ"] == 0.0 and d["dF_iSWAP"] == 0.0


# -- batch mode -------------------------------------------------------------------------------

def test_batch_csv(tmp_path):
    paths = []
    for k, seed in enumerate((4, 5)):
        t, y = synth("T1", noise=0.01, seed=seed)
        p = tmp_path / f"s{k}.csv"
        p.write_text("t_s,signal\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(t, y)))
        paths.append(p)
    out = tmp_path / "fits.csv"
    res = fits.fit_batch(paths, "T1", out)
    lines = out.read_text().splitlines()
    assert lines[0] == "source,model,A,T_s,f_hz,phi_rad,m,err_T_frac,accepted"
    assert len(lines) == 3 and lines[1].startswith("s0.csv,T1,")
    assert all(r.accepted for r in res)


def test_batch_rejects_bad_columns(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("time,value\n0,1\n")
    with pytest.raises(fits.FitError):
        fits.read_series(p)
