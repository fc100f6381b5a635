import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from modules.paths import SeedSpec, generate_brownian, uniform_grid
from modules.physics import LangevinParams, kinetic_models, two_particle_models
from modules.sde import Interpretation, SdeModel, to_ito
from modules.solvers import (
    Boundary,
    EventKind,
    HitSpec,
    HittingStats,
    McConfig,
    SolverScheme,
    besq_dimension,
    besq_moments,
    besq_time_change,
    check_scheme,
    exact_kinetic_oracle,
    exact_ou_path,
    hitting_time,
    oracle_hitting_time,
    ou_transition,
    simulate_batch_driven,
    simulate_driven,
    simulate_ensemble,
    simulate_path,
    simulate_reflected,
    strong_convergence_order,
    strong_errors,
)
from modules.utils.errors import InvalidInputError, NumericalError

EM = SolverScheme.EULER_MARUYAMA_ITO
HEUN = SolverScheme.DIRECT_MIDPOINT_HEUN
RPC = SolverScheme.DIRECT_RIGHT_PC


def ou_model(x0=1.0):
    return SdeModel(lambda x, t: -x, lambda x, t: 1.0, Interpretation.ITO, x0=x0)


def hk_model(x0=0.5):
    return SdeModel(lambda x, t: -x, lambda x, t: 1.0 + 0.5 * np.sin(x), Interpretation.HK, x0=x0,
                    dgdx=lambda x, t: 0.5 * np.cos(x))


@pytest.mark.parametrize("name, scheme", [
    ("em", EM), ("euler_maruyama", EM), ("heun", HEUN), ("midpoint", HEUN),
    ("rpc", RPC), ("right", RPC), ("direct_left", SolverScheme.DIRECT_LEFT),
])
def test_scheme_parse(name, scheme):
    assert SolverScheme.parse(name) is scheme


def test_direct_scheme_must_match_interpretation():
    assert check_scheme(hk_model(), RPC) is RPC
    assert check_scheme(hk_model(), "em") is EM
    with pytest.raises(InvalidInputError):
        check_scheme(hk_model(), HEUN)
    assert SolverScheme.direct_for(Interpretation.STRATONOVICH) is HEUN


def test_boundary_fold():
    interval = Boundary.reflect(0.0, 1.0)
    folded, outside = interval.fold(np.array([1.3, -0.2, 2.5, 0.4]))
    assert folded == pytest.approx([0.7, 0.2, 0.5, 0.4])
    assert outside.tolist() == [True, True, True, False]
    half_line, outside = Boundary.reflect(0.0).fold(np.array([-0.3, 0.3]))
    assert half_line.tolist() == [0.3, 0.3]
    same, outside = Boundary.stop().fold(np.array([-5.0]))
    assert same.tolist() == [-5.0] and not outside.any()
    with pytest.raises(InvalidInputError):
        Boundary.reflect(1.0, 1.0)
    with pytest.raises(InvalidInputError):
        Boundary("absorb")


def test_mc_config_validation(seed):
    with pytest.raises(InvalidInputError):
        McConfig(0, 0.1, 1.0, seed)
    with pytest.raises(InvalidInputError):
        McConfig(10, 0.5, 0.1, seed)
    cfg = McConfig(10, 0.01, 1.0, 7)
    assert cfg.seed == SeedSpec(7)
    assert cfg.n_steps == 100
    assert cfg.grid.end == pytest.approx(1.0)
    assert cfg.path_seed(3) == SeedSpec(7, 3)


def test_deterministic_euler_steps():
    model = SdeModel(lambda x, t: -x, lambda x, t: 0.0, Interpretation.ITO, x0=1.0)
    grid = uniform_grid(0.0, 1.0, 10)
    result = simulate_path(model, EM, grid, SeedSpec(1))
    assert result.path.values == pytest.approx(0.9 ** np.arange(11))
    assert result.events == []
    assert not result.terminated_early


def test_direct_and_converted_schemes_agree_pathwise(seed):
    model = hk_model()
    w = generate_brownian(uniform_grid(0.0, 1.0, 2 ** 12), seed)
    direct = simulate_driven(model, RPC, w).terminal
    converted = simulate_driven(model, EM, w).terminal
    ito = simulate_driven(to_ito(model), SolverScheme.DIRECT_LEFT, w).terminal
    assert direct == pytest.approx(converted, abs=0.05)
    assert converted == pytest.approx(ito, abs=1e-12)


def test_ensemble_reproducible_across_threads(seed):
    model = hk_model()
    serial = simulate_ensemble(model, RPC, McConfig(600, 0.01, 0.5, seed, threads=1))
    pooled = simulate_ensemble(model, RPC, McConfig(600, 0.01, 0.5, seed, threads=4))
    assert np.array_equal(serial.terminal_values(), pooled.terminal_values())
    grid = McConfig(600, 0.01, 0.5, seed).grid
    single = simulate_path(model, RPC, grid, seed.substream(417))
    assert np.array_equal(single.path.values, serial.paths[417].path.values)


def test_ensemble_matches_exact_ou(seed):
    n = 4000
    cfg = McConfig(n, 1e-3, 1.0, seed, store_paths=False)
    result = simulate_ensemble(ou_model(), EM, cfg)
    x = result.terminal_values()
    assert x.size == n
    mean, var = math.exp(-1.0), 0.5 * (1.0 - math.exp(-2.0))
    assert abs(x.mean() - mean) < 3 * math.sqrt(var / n) + 2e-3
    assert x.var(ddof=1) == pytest.approx(var, rel=0.08)

    exact = np.array([
        exact_ou_path(1.0, 1.0, 1.0, 1.0, uniform_grid(0.0, 1.0, 4), seed.child(9).substream(i)).values[-1]
        for i in range(n)
    ])
    assert ks_2samp(x, exact).statistic < 0.06


def test_summary_schema(seed, tmp_path):
    cfg = McConfig(200, 0.01, 1.0, seed)
    result = simulate_ensemble(ou_model(), EM, cfg)
    data = result.summary.to_dict()
    assert set(data) == {"n_paths", "dt", "horizon", "scheme", "interpretation",
                         "terminal_mean", "terminal_var", "events", "hitting"}
    assert data["n_paths"] == 200
    assert data["scheme"] == "em_ito"
    assert data["events"] == {"violations": 0, "reflections": 0}
    assert data["hitting"] == {"fraction": None, "mean_time": None, "ci95": None}
    assert len(result.summary.histogram_rows()) == 40
    lines = result.summary.write_histogram(tmp_path / "histogram.csv").read_text().splitlines()
    assert lines[0] == "bin_left,bin_right,density"
    assert len(lines) == 41


def drain_model():
    return SdeModel(lambda x, t: -1.0, lambda x, t: np.sqrt(x), Interpretation.ITO,
                    domain=(0.0, math.inf), x0=0.0)


def test_stop_boundary_keeps_the_violating_state():
    result = simulate_path(drain_model(), EM, uniform_grid(0.0, 0.01, 10), SeedSpec(3), Boundary.stop())
    assert result.terminated_early
    assert result.violated
    assert result.path.grid.n_steps == 1
    assert result.terminal == pytest.approx(-0.001)
    assert result.events[0].kind is EventKind.DOMAIN_VIOLATION


def test_unbounded_mode_flags_violation_on_next_evaluation():
    result = simulate_path(drain_model(), EM, uniform_grid(0.0, 0.01, 10), SeedSpec(3))
    assert result.violated
    assert result.path.grid.n_steps == 1
    assert result.path.values[1] == pytest.approx(-0.001)
    assert result.events[0].time == pytest.approx(0.001)


def test_hk_kinetic_at_rest_violates_in_the_predictor(unit_params):
    hk = kinetic_models(unit_params).hk
    result = simulate_path(hk, RPC, uniform_grid(0.0, 0.1, 100), SeedSpec(3), Boundary.stop())
    assert result.terminated_early
    assert result.violated
    assert result.path.grid.n_steps == 0
    assert result.events[0].value < 0.0



def test_stratonovich_kinetic_stays_at_rest(unit_params):
    strat = kinetic_models(unit_params).strat
    result = simulate_path(strat, HEUN, uniform_grid(0.0, 1.0, 1000), SeedSpec(3), Boundary.reflect(0.0))
    assert np.all(result.path.values == 0.0)
    assert not result.violated


def test_ito_kinetic_leaves_rest(unit_params):
    ito = kinetic_models(unit_params).ito
    result = simulate_path(ito, EM, uniform_grid(0.0, 1.0, 1000), SeedSpec(3), Boundary.reflect(0.0))
    assert result.terminal > 0.0
    assert np.all(result.path.values >= 0.0)


def test_reflections_grow_with_noise(seed):
    counts = []
    for sigma in (0.5, 1.0, 2.0):
        model = SdeModel(lambda x, t: 0.0, lambda x, t, s=sigma: s, Interpretation.ITO, domain=(-1.0, 1.0))
        result = simulate_reflected(model, EM, (-1.0, 1.0), McConfig(50, 0.01, 2.0, seed))
        for p in result.paths:
            assert np.all(np.abs(p.path.values) <= 1.0)
        counts.append(result.summary.reflections)
    assert counts[0] < counts[1] < counts[2]


def test_reflected_start_must_be_inside(seed):
    with pytest.raises(InvalidInputError):
        simulate_reflected(ou_model(x0=2.0), EM, (-1.0, 1.0), McConfig(5, 0.01, 1.0, seed))


def test_batch_driven_shape(seed):
    grid = uniform_grid(0.0, 1.0, 10)
    with pytest.raises(InvalidInputError):
        simulate_batch_driven(ou_model(), EM, grid, np.zeros((3, 9)))
    results = simulate_batch_driven(ou_model(), EM, grid, np.zeros((3, 10)), store=False)
    assert len(results) == 3
    assert results[0].path.grid.n_steps == 1
    assert results[0].terminal == pytest.approx(0.9 ** 10)


def test_hit_spec_direction():
    above = HitSpec.for_start(0.0, 1e-3, 0.5)
    below = HitSpec.for_start(1.0, 1e-3, 0.5)
    assert above.from_above and not below.from_above
    assert above.reached(np.array([0.0005, 0.01])).tolist() == [True, False]
    assert below.reached(np.array([0.9995, 0.9])).tolist() == [True, False]
    with pytest.raises(InvalidInputError):
        HitSpec.for_start(0.0, 0.0, 1.0)


def test_hitting_stats_from_times():
    stats = HittingStats.from_times(0.0, 1e-4, [np.nan, 1.0, 3.0], n_terminated=1)
    assert stats.fraction_hit == pytest.approx(2 / 3)
    assert stats.mean_hit_time == pytest.approx(2.0)
    assert stats.ci95 == pytest.approx(1.96 * math.sqrt(2.0) / math.sqrt(2.0))
    assert stats.to_dict()["n_terminated"] == 1
    empty = HittingStats.from_times(0.0, 1e-4, [np.nan])
    assert empty.mean_hit_time is None
    assert empty.to_dict()["mean_time"] is None


def test_hitting_time_of_ou(seed):
    stats = hitting_time(ou_model(), EM, 0.0, 1e-3, McConfig(4000, 1e-3, 5.0, seed))
    assert stats.n_paths == 4000
    assert stats.fraction_hit > 0.9
    assert stats.ci95 / stats.mean_hit_time < 0.05


def test_hitting_time_from_inside_band(seed):
    stats = hitting_time(ou_model(x0=0.0), EM, 0.0, 1e-3, McConfig(10, 0.01, 1.0, seed))
    assert stats.fraction_hit == 1.0
    assert stats.mean_hit_time == 0.0


def test_ou_transition_is_exact_in_distribution():
    assert ou_transition(2.0, 1.0, 1.0, 1.0, 1.0, 0.0) == pytest.approx(2.0 * math.exp(-1.0))
    sd = math.sqrt(0.5 * (1.0 - math.exp(-2.0)))
    assert ou_transition(0.0, 1.0, 1.0, 1.0, 1.0, 1.0) == pytest.approx(sd)


@pytest.mark.parametrize("delta, v0s", [(1, [1.0]), (2, [1.0, 0.0])])
def test_kinetic_oracle_matches_squared_bessel_moments(delta, v0s, seed):
    n, t = 4000, 1.0
    grid = uniform_grid(0.0, t, 10)
    k = np.array([exact_kinetic_oracle(delta, 1.0, 1.0, 1.0, v0s, grid, seed.substream(i)).values[-1]
                  for i in range(n)])
    s = besq_time_change(t, 1.0, 1.0, 1.0)
    mean, var = besq_moments(delta, 0.5, s)
    scale = math.exp(-2.0 * t)
    assert abs(k.mean() - scale * mean) < 3 * math.sqrt(scale ** 2 * var / n)
    assert k.var(ddof=1) == pytest.approx(scale ** 2 * var, rel=0.15)


def test_besq_helpers():
    assert besq_dimension("langevin1") == 1
    assert besq_dimension("pair") == 2
    with pytest.raises(InvalidInputError):
        besq_dimension("triple")
    assert besq_time_change(0.0, 1.0, 1.0, 1.0) == 0.0
    assert besq_moments(2, 0.0, 1.0) == (2.0, 4.0)
    with pytest.raises(InvalidInputError):
        exact_kinetic_oracle(3, 1.0, 1.0, 1.0, [0.0, 0.0, 0.0], uniform_grid(0.0, 1.0, 4), SeedSpec(0))


@pytest.mark.parametrize("delta, v0s", [(1, [1.0]), (2, [0.6, -0.8])])
def test_streamed_oracle_hits_match_stored_paths(delta, v0s, seed):
    cfg = McConfig(20, 0.01, 3.0, seed)
    stats = oracle_hitting_time(delta, 1.0, 1.0, 1.0, v0s, 0.0, 0.02, cfg, block=7)
    times = []
    for i in range(cfg.n_paths):
        path = exact_kinetic_oracle(delta, 1.0, 1.0, 1.0, v0s, cfg.grid, cfg.path_seed(i))
        hits = np.flatnonzero(path.values <= 0.02)
        times.append(path.times[hits[0]] if hits.size else np.nan)
    expected = HittingStats.from_times(0.0, 0.02, times)
    assert stats.fraction_hit == expected.fraction_hit
    if expected.mean_hit_time is not None:
        assert stats.mean_hit_time == pytest.approx(expected.mean_hit_time)


def test_one_particle_oracle_hits_rest(seed):
    cfg = McConfig(1000, 1e-3, 20.0, seed)
    assert oracle_hitting_time(1, 1.0, 1.0, 1.0, [1.0], 0.0, 1e-4, cfg).fraction_hit > 0.95


def test_two_particle_oracle_stays_off_rest(seed):
    cfg = McConfig(4000, 1e-2, 20.0, seed)
    fractions = [
        oracle_hitting_time(2, 1.0, 1.0, 1.0, [1.0, 0.0], 0.0, eps, cfg).fraction_hit
        for eps in (1e-4, 1e-6, 1e-8)
    ]
    assert fractions[0] >= fractions[1] >= fractions[2]
    assert fractions[1] <= 0.01


def test_two_particle_band_is_entered_more_often_on_finer_monitoring(seed):
    # about 2 * eps of the two-dimensional velocity law sits in the band per sample
    fine = oracle_hitting_time(2, 1.0, 1.0, 1.0, [1.0, 0.0], 0.0, 1e-6, McConfig(1000, 1e-3, 20.0, seed))
    coarse = oracle_hitting_time(2, 1.0, 1.0, 1.0, [1.0, 0.0], 0.0, 1e-6, McConfig(1000, 1e-2, 20.0, seed))
    assert fine.fraction_hit > 0.015
    assert coarse.fraction_hit < fine.fraction_hit


@pytest.mark.parametrize("n_paths, dt", [
    (4000, 1e-3),
    pytest.param(10_000, 1e-4, marks=pytest.mark.slow),
])
def test_one_particle_sde_hits_like_the_oracle(n_paths, dt, seed):
    ito = kinetic_models(LangevinParams(v0=1.0)).ito
    sde = hitting_time(ito, EM, 0.0, 1e-4, McConfig(n_paths, dt, 20.0, seed, Boundary.reflect(0.0)))
    oracle = oracle_hitting_time(1, 1.0, 1.0, 1.0, [1.0], 0.0, 1e-4, McConfig(n_paths, dt, 20.0, seed.child(1)))
    assert abs(sde.fraction_hit - oracle.fraction_hit) <= 0.03
    assert sde.ci95 < 0.05 * sde.mean_hit_time


def test_two_particle_sde_stays_off_rest(seed):
    ito = two_particle_models(LangevinParams(v0=1.0)).ito
    cfg = McConfig(4000, 1e-2, 20.0, seed, Boundary.reflect(0.0))
    fractions = [hitting_time(ito, EM, 0.0, eps, cfg).fraction_hit for eps in (1e-4, 1e-6, 1e-8)]
    assert fractions[0] >= fractions[1] >= fractions[2]
    assert fractions[1] <= 0.01


def _coupled_kinetic_terminals(n_paths, dt, horizon, seed, batch=250):
    """
    Terminal K of EM on the Ito kinetic equation and of the exact oracle.

    Path i of both uses seed.substream(i): the oracle velocity V is exact,
    and EM is driven by sign(V) dW built from the same normal draws.
    """
    grid = uniform_grid(0.0, horizon, int(round(horizon / dt)))
    ito = kinetic_models(LangevinParams(v0=1.0)).ito
    decay = math.exp(-dt)
    sd = math.sqrt(0.5 * (1.0 - decay ** 2))
    em, exact = [], []
    for start in range(0, n_paths, batch):
        rows = []
        for i in range(start, min(n_paths, start + batch)):
            s = seed.substream(i)
            v = exact_ou_path(1.0, 1.0, 1.0, 1.0, grid, s).values
            exact.append(exact_kinetic_oracle(1, 1.0, 1.0, 1.0, [1.0], grid, s).values[-1])
            z = (v[1:] - decay * v[:-1]) / sd
            rows.append(np.sign(v[:-1]) * z * np.sqrt(grid.steps))
        results = simulate_batch_driven(ito, EM, grid, np.array(rows), Boundary.reflect(0.0), store=False)
        em.extend(r.terminal for r in results)
    return np.array(em), np.array(exact)


def test_kinetic_oracle_is_the_square_of_the_ou_path(seed):
    grid = uniform_grid(0.0, 1.0, 50)
    v = exact_ou_path(2.0, 1.0, 1.0, 0.5, grid, seed).values
    k = exact_kinetic_oracle(1, 2.0, 1.0, 1.0, [0.5], grid, seed).values
    assert np.allclose(k, v ** 2)


def test_kinetic_em_mean_matches_oracle(seed):
    em, exact = _coupled_kinetic_terminals(1000, 1e-3, 5.0, seed)
    pooled = math.sqrt(em.var(ddof=1) / em.size + exact.var(ddof=1) / exact.size)
    assert abs(em.mean() - exact.mean()) < 2 * pooled
    assert np.all(em >= 0.0)


@pytest.mark.slow
def test_kinetic_em_terminal_law_matches_oracle(seed):
    em, exact = _coupled_kinetic_terminals(10_000, 1e-4, 1.0, seed)
    assert ks_2samp(em, exact).statistic < 0.03


def _sqrt_model():
    return SdeModel(lambda x, t: -x, lambda x, t: np.sqrt(1.0 + x ** 2), Interpretation.ITO, x0=1.0)


def test_strong_order_of_euler_maruyama(seed):
    dts = [2.0 ** -k for k in range(3, 7)]
    order = strong_convergence_order(_sqrt_model(), EM, dts, McConfig(500, dts[0], 1.0, seed))
    assert 0.4 <= order <= 0.6


def test_strong_order_without_noise(seed):
    model = SdeModel(lambda x, t: -x, lambda x, t: 0.0, Interpretation.ITO, x0=1.0)
    dts = [2.0 ** -k for k in range(3, 7)]
    assert strong_convergence_order(model, EM, dts, McConfig(5, dts[0], 1.0, seed)) >= 0.9


def test_strong_errors_edge_cases(seed):
    dts = [0.25, 0.125, 0.0625]
    cfg = McConfig(20, dts[0], 1.0, seed)
    errors = strong_errors(_sqrt_model(), EM, dts, cfg, reference_factor=1)
    assert errors[-1] == 0.0
    with pytest.raises(NumericalError):
        strong_convergence_order(_sqrt_model(), EM, dts, cfg, reference_factor=1)
    with pytest.raises(InvalidInputError):
        strong_errors(_sqrt_model(), EM, dts[:2], cfg)
    with pytest.raises(InvalidInputError):
        strong_errors(_sqrt_model(), EM, [0.25, 0.1, 0.05], cfg)


def test_repeated_time_step_reuses_the_driver(seed):
    cfg = McConfig(20, 0.25, 1.0, seed)
    errors = strong_errors(_sqrt_model(), EM, [0.25, 0.25, 0.25], cfg, reference_factor=1)
    assert np.all(errors == 0.0)
    with pytest.raises(InvalidInputError):
        strong_convergence_order(_sqrt_model(), EM, [0.25, 0.25, 0.25], cfg)


def test_direct_hk_and_converted_ensembles_agree(seed):
    model = hk_model()
    cfg = McConfig(4000, 1e-3, 1.0, seed, store_paths=False)
    direct = simulate_ensemble(model, RPC, cfg).terminal_values()
    converted = simulate_ensemble(to_ito(model), EM, cfg).terminal_values()
    pooled = math.sqrt(direct.var(ddof=1) / direct.size + converted.var(ddof=1) / converted.size)
    assert abs(direct.mean() - converted.mean()) < 3 * pooled


def test_scalar_math_domain_error_is_a_violation():
    model = SdeModel(lambda x, t: -1.0, lambda x, t: math.sqrt(x), Interpretation.ITO, x0=0.0)
    result = simulate_path(model, EM, uniform_grid(0.0, 0.01, 10), SeedSpec(3))
    assert result.violated
    assert result.path.values[1] == pytest.approx(-0.001)
