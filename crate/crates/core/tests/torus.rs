use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strucdamp_core::verifier::{l2_norm_lattice, Lattice};
use strucdamp_core::{
    run_experiment, Forcing, FrequencyProfile, Kernel, ModelParams, RunConfig, SpectralState,
    Stepping, TorusGrid, TorusSolver, Verdict,
};

const GAUSS: FrequencyProfile = FrequencyProfile::Gaussian { width: 1.0 };

fn beam() -> ModelParams {
    ModelParams::new(1, 2.0, 1.0, 1.0).unwrap()
}

fn random_state(s: &TorusSolver, seed: u64) -> SpectralState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = s.grid().len();
    let mut smooth = |_: ()| -> Vec<f64> {
        let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // low-pass so the fields are smooth and Nyquist-free
        let c = s.to_spectral(&raw);
        let c: Vec<Complex64> = c
            .iter()
            .zip(s.radii())
            .map(|(z, &r)| z * (-(r * r)).exp())
            .collect();
        s.to_physical(&c)
    };
    let u0 = smooth(());
    let u1 = smooth(());
    s.state_from_fields(&u0, &u1).unwrap()
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn symmetry_defect(s: &TorusSolver, c: &[Complex64]) -> f64 {
    // û(−k) = conj(û(k)) ⇔ the inverse transform is real
    let n = s.grid().modes;
    let neg = |i: usize| -> usize {
        match s.grid().n {
            1 => (n - i) % n,
            _ => ((n - i / n) % n) * n + (n - i % n) % n,
        }
    };
    (0..c.len()).map(|i| (c[neg(i)] - c[i].conj()).norm()).fold(0.0, f64::max)
}

#[test]
fn fractional_symbol_examples() {
    let grid = TorusGrid::new(1, 10.0, 32).unwrap();
    let s = TorusSolver::new(grid, beam(), Forcing::Off).unwrap();
    let st = random_state(&s, 1);
    assert_eq!(s.apply_fractional_symbol(&st.u_hat, 0.0).unwrap(), st.u_hat);

    let mut single = vec![Complex64::new(0.0, 0.0); 32];
    single[1] = Complex64::new(1.0, 0.0);
    let out = s.apply_fractional_symbol(&single, 2.0).unwrap();
    let k = 2.0 * std::f64::consts::PI / 10.0;
    assert!((out[1].re - k * k).abs() < 1e-15);

    for n in [1, 2] {
        let p = ModelParams::new(n, 2.0, 1.0, 1.0).unwrap();
        let s = TorusSolver::new(TorusGrid::new(n, 10.0, 32).unwrap(), p, Forcing::Off).unwrap();
        let st = random_state(&s, 2);
        let once = s.apply_fractional_symbol(&st.u_hat, 2.0).unwrap();
        let half = s.apply_fractional_symbol(&st.u_hat, 1.0).unwrap();
        let twice = s.apply_fractional_symbol(&half, 1.0).unwrap();
        assert!(max_diff(&once, &twice) < 1e-10);
        assert_eq!(once[0], Complex64::new(0.0, 0.0));
    }
    assert!(s.apply_fractional_symbol(&st.u_hat, -1.0).is_err());
}

#[test]
fn linear_steps_compose_exactly() {
    for n in [1, 2] {
        let p = ModelParams::new(n, 2.0, 0.5, 1.0).unwrap();
        let mut s = TorusSolver::new(TorusGrid::new(n, 20.0, 32).unwrap(), p, Forcing::Off).unwrap();
        let mut a = random_state(&s, 3);
        let mut b = a.clone();
        s.step(&mut a, 0.4, Stepping::Etd2).unwrap();
        s.step(&mut b, 0.2, Stepping::Etd2).unwrap();
        s.step(&mut b, 0.2, Stepping::Etd2).unwrap();
        let scale = a.u_hat.iter().chain(&a.v_hat).map(|z| z.norm()).fold(0.0, f64::max);
        assert!(max_diff(&a.u_hat, &b.u_hat) <= 1e-12 * scale);
        assert!(max_diff(&a.v_hat, &b.v_hat) <= 1e-12 * scale);
        assert!((a.t - b.t).abs() < 1e-15);
    }
}

#[test]
fn zero_data_stays_zero() {
    let mut s = TorusSolver::new(TorusGrid::new(1, 20.0, 64).unwrap(), beam(), Forcing::Power { p: 2.0 }).unwrap();
    let mut st = SpectralState::zeros(64);
    for _ in 0..50 {
        s.step(&mut st, 0.1, Stepping::Etd2).unwrap();
    }
    assert!(st.u_hat.iter().chain(&st.v_hat).all(|z| *z == Complex64::new(0.0, 0.0)));
}

#[test]
fn step_rejects_bad_input() {
    let mut s = TorusSolver::new(TorusGrid::new(1, 20.0, 16).unwrap(), beam(), Forcing::Power { p: 2.0 }).unwrap();
    let mut st = SpectralState::zeros(16);
    assert!(s.step(&mut st, 0.0, Stepping::Etd1).is_err());
    st.v_hat[3] = Complex64::new(f64::NAN, 0.0);
    assert!(matches!(
        s.step(&mut st, 0.1, Stepping::Etd1),
        Err(strucdamp_core::Error::BlowUpDetected { .. })
    ));
}

#[test]
fn conjugate_symmetry_is_preserved() {
    for n in [1, 2] {
        let p = ModelParams::new(n, 2.0, 1.0, 1.0).unwrap();
        let mut s = TorusSolver::new(TorusGrid::new(n, 20.0, 32).unwrap(), p, Forcing::Power { p: 3.0 }).unwrap();
        let mut st = random_state(&s, 4);
        for _ in 0..20 {
            s.step(&mut st, 0.05, Stepping::Etd2).unwrap();
            assert!(symmetry_defect(&s, &st.u_hat) < 1e-12);
            assert!(symmetry_defect(&s, &st.v_hat) < 1e-12);
        }
    }
}

#[test]
fn norm_conventions() {
    let len = 20.0;
    let s = TorusSolver::new(TorusGrid::new(1, len, 64).unwrap(), beam(), Forcing::Off).unwrap();
    // constant field c: ‖c‖_{L^κ} = |c| L^{1/κ}
    let mut c = vec![Complex64::new(0.0, 0.0); 64];
    c[0] = Complex64::new(-1.5, 0.0);
    for kappa in [2.0, 3.0, 12.0] {
        let v = s.lebesgue_norm(&c, kappa).unwrap();
        assert!((v - 1.5 * len.powf(1.0 / kappa)).abs() < 1e-12);
    }
    assert!((s.lebesgue_norm(&c, f64::INFINITY).unwrap() - 1.5).abs() < 1e-14);
    // A cos(ξx) has û_{±1} = A/2 and L² norm A (L/2)^{1/2}
    let a = 0.7;
    let mut m = vec![Complex64::new(0.0, 0.0); 64];
    m[1] = Complex64::new(a / 2.0, 0.0);
    m[63] = Complex64::new(a / 2.0, 0.0);
    let expected = a * (len / 2.0).sqrt();
    assert!((s.sobolev_seminorm(&m, 0.0) - expected).abs() < 1e-12);
    assert!((s.lebesgue_norm(&m, 2.0).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn parseval_on_random_fields() {
    for n in [1, 2] {
        let p = ModelParams::new(n, 2.0, 1.0, 1.0).unwrap();
        let s = TorusSolver::new(TorusGrid::new(n, 15.0, 32).unwrap(), p, Forcing::Off).unwrap();
        let st = random_state(&s, 5);
        let grid = s.lebesgue_norm(&st.u_hat, 2.0).unwrap();
        let spectral = s.sobolev_seminorm(&st.u_hat, 0.0);
        assert!((grid - spectral).abs() <= 1e-10 * spectral);
    }
}

#[test]
fn linear_energy_dissipation() {
    let grid = TorusGrid::new(1, 50.0, 256).unwrap();
    for p in [beam(), ModelParams::new(1, 2.0, 0.5, 1.0).unwrap()] {
        let mut s = TorusSolver::new(grid, p, Forcing::Off).unwrap();
        let mut st = s.state_from_profiles(None, Some(&GAUSS), 1.0).unwrap();
        let h = 1e-3;
        let (e0, mut d_prev) = s.energy(&st);
        let mut e_prev = e0;
        let mut residual = 0.0;
        for k in 1..=5000 {
            s.step(&mut st, h, Stepping::Etd2).unwrap();
            let (e, d) = s.energy(&st);
            assert!(e <= e_prev, "energy increased at step {k}");
            residual += (e - e_prev) + 0.5 * h * (d + d_prev);
            if k % 1000 == 0 {
                assert!(residual.abs() <= 1e-6 * e0, "{p:?} residual {residual:e}");
                residual = 0.0;
            }
            e_prev = e;
            d_prev = d;
        }
    }
}

#[test]
fn linear_solver_matches_lattice_quadrature() {
    let p = beam();
    let grid = TorusGrid::new(1, 100.0, 256).unwrap();
    let lattice = Lattice { n: 1, length: 100.0, modes: 256 };
    let mut s = TorusSolver::new(grid, p, Forcing::Off).unwrap();
    let mut st = s.state_from_profiles(None, Some(&GAUSS), 1.0).unwrap();
    let t_end = grid.horizon(&p);
    let h = 0.25;
    let mut checked = 0;
    while st.t < t_end {
        s.step(&mut st, h, Stepping::Etd2).unwrap();
        let k = (st.t / h).round() as usize;
        if k.is_multiple_of(20) {
            let n = s.norms(&st, 2.0).unwrap();
            let ut = l2_norm_lattice(&p, Kernel::K1, 1, 0.0, st.t, &GAUSS, &lattice).unwrap();
            let u = l2_norm_lattice(&p, Kernel::K1, 0, 0.0, st.t, &GAUSS, &lattice).unwrap();
            assert!((n.l2_ut - ut).abs() <= 1e-8 * ut, "t={} {} {}", st.t, n.l2_ut, ut);
            assert!((n.l2_u - u).abs() <= 1e-8 * u, "t={}", st.t);
            checked += 1;
        }
    }
    assert!(checked >= 10);
}

fn richardson_order(stepping: Stepping) -> f64 {
    let grid = TorusGrid::new(1, 40.0, 128).unwrap();
    let mut finals = Vec::new();
    for h in [0.1f64, 0.05, 0.025] {
        let mut s = TorusSolver::new(grid, beam(), Forcing::Power { p: 6.0 }).unwrap();
        let mut st = s.state_from_profiles(None, Some(&GAUSS), 1.0).unwrap();
        for _ in 0..(1.0 / h).round() as usize {
            s.step(&mut st, h, stepping).unwrap();
        }
        finals.push(st);
    }
    let dist = |a: &SpectralState, b: &SpectralState| {
        a.u_hat
            .iter()
            .zip(&b.u_hat)
            .chain(a.v_hat.iter().zip(&b.v_hat))
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    (dist(&finals[0], &finals[1]) / dist(&finals[1], &finals[2])).log2()
}

#[test]
fn self_convergence_orders() {
    let etd2 = richardson_order(Stepping::Etd2);
    let etd1 = richardson_order(Stepping::Etd1);
    assert!(etd2 >= 1.8, "{etd2}");
    assert!((etd1 - 1.0).abs() < 0.2, "{etd1}");
}

fn supercritical() -> RunConfig {
    let p = beam();
    let grid = TorusGrid::new(1, 100.0, 256).unwrap();
    RunConfig {
        params: p,
        grid,
        forcing: Forcing::Power { p: 6.0 },
        m: 2.0,
        q: 12.0,
        u0: None,
        u1: Some(GAUSS),
        amplitude: 1e-2,
        t_end: grid.recommended_end(&p),
        output_every: 0.1,
        h_max: 0.1,
        stepping: Stepping::Etd2,
        snapshots: false,
    }
}

#[test]
fn supercritical_monitors_stay_bounded() {
    let rec = run_experiment(&supercritical()).unwrap();
    assert_eq!(rec.verdict, Verdict::BoundedZNorm);
    for g in rec.z_growth() {
        assert!(g.unwrap() < 2.0);
    }
    assert!(rec.rows.last().unwrap().t >= rec.config.t_end - 1e-9);
}

#[test]
fn subcritical_run_blows_up_with_growing_mean() {
    let cfg = RunConfig {
        forcing: Forcing::Power { p: 2.0 },
        m: 1.0,
        q: 2.0,
        amplitude: 1.0,
        grid: TorusGrid::new(1, 40.0, 128).unwrap(),
        t_end: 200.0,
        output_every: 0.5,
        ..supercritical()
    };
    let rec = run_experiment(&cfg).unwrap();
    assert!(matches!(rec.verdict, Verdict::BlowUpAt { .. }), "{}", rec.verdict);
    let means: Vec<f64> = rec.rows.iter().map(|r| r.norms.mean_ut).collect();
    assert!(means[0] > 0.0);
    assert!(means.windows(2).all(|w| w[1] >= w[0]));
    let l2: Vec<f64> = rec.rows.iter().map(|r| r.norms.l2_ut).collect();
    assert!(l2.iter().cloned().fold(0.0, f64::max) > 1e3 * l2[0]);
}

#[test]
fn theta_zero_monitors_bounded() {
    let p = ModelParams::new(1, 1.0, 0.0, 1.0).unwrap();
    let grid = TorusGrid::new(1, 100.0, 256).unwrap();
    let cfg = RunConfig {
        params: p,
        grid,
        forcing: Forcing::Power { p: 2.0 },
        m: 1.0,
        q: 2.0,
        amplitude: 1e-2,
        t_end: 50.0,
        ..supercritical()
    };
    let rec = run_experiment(&cfg).unwrap();
    let growth = rec.z_growth();
    assert!(growth[2].is_none() && growth[4].is_none());
    for g in growth.iter().flatten() {
        assert!(*g < 2.0, "{growth:?}");
    }
    assert_eq!(rec.verdict, Verdict::BoundedZNorm);
}

#[test]
fn record_csv_columns() {
    let cfg = RunConfig { t_end: 1.0, ..supercritical() };
    let rec = run_experiment(&cfg).unwrap();
    let mut buf = Vec::new();
    rec.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("t,E,L2_u,L2_ut,Lq_ut,Halpha_u,Z_term_1,Z_term_2,Z_term_3,Z_term_4,Z_term_5,verdict")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 11);
    assert!(rows.last().unwrap().ends_with(&rec.verdict.to_string()));
}

#[test]
fn invalid_configs_are_rejected() {
    let bad_q = RunConfig { q: 1.5, ..supercritical() };
    assert!(run_experiment(&bad_q).is_err());
    let bad_grid = RunConfig { grid: TorusGrid { n: 1, length: 10.0, modes: 100 }, ..supercritical() };
    assert!(run_experiment(&bad_grid).is_err());
    let p2 = ModelParams::new(2, 2.0, 1.0, 1.0).unwrap();
    assert!(TorusSolver::new(TorusGrid::new(1, 10.0, 16).unwrap(), p2, Forcing::Off).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear_flow_composes_for_random_params(
        alpha in 0.5f64..3.0, ft in 0.0f64..=1.0, fd in 0.0f64..=1.0, h in 0.01f64..2.0, seed in 0u64..1000,
    ) {
        let p = ModelParams::new(1, alpha, 0.5 * alpha * ft, alpha * fd).unwrap();
        let mut s = TorusSolver::new(TorusGrid::new(1, 20.0, 32).unwrap(), p, Forcing::Off).unwrap();
        let mut a = random_state(&s, seed);
        let mut b = a.clone();
        s.step(&mut a, h, Stepping::Etd1).unwrap();
        s.step(&mut b, 0.5 * h, Stepping::Etd1).unwrap();
        s.step(&mut b, 0.5 * h, Stepping::Etd1).unwrap();
        let scale = a.u_hat.iter().chain(&a.v_hat).map(|z| z.norm()).fold(1e-300, f64::max);
        prop_assert!(max_diff(&a.u_hat, &b.u_hat) <= 1e-11 * scale);
        prop_assert!(max_diff(&a.v_hat, &b.v_hat) <= 1e-11 * scale);
    }

    #[test]
    fn forcing_keeps_symmetry_and_finiteness(p in 1.5f64..4.0, seed in 0u64..1000) {
        let params = ModelParams::new(1, 2.0, 0.5, 1.0).unwrap();
        let mut s = TorusSolver::new(TorusGrid::new(1, 20.0, 32).unwrap(), params, Forcing::Power { p }).unwrap();
        let mut st = random_state(&s, seed);
        for _ in 0..5 {
            s.step(&mut st, 0.05, Stepping::Etd2).unwrap();
        }
        prop_assert!(st.is_finite());
        prop_assert!(symmetry_defect(&s, &st.v_hat) < 1e-12);
    }
}
