use proptest::prelude::*;
use strucdamp_core::verifier::{
    geometric_grid, l2_norm_lattice, l2_norm_radial_with, Lattice, RadialOptions,
};
use strucdamp_core::{
    energy_curve, fit_decay, l2_norm_radial, FrequencyProfile, Kernel, ModelParams,
};

const GAUSS: FrequencyProfile = FrequencyProfile::Gaussian { width: 1.0 };

#[test]
fn time_zero_norms() {
    let p = ModelParams::new(2, 2.0, 0.5, 1.0).unwrap();
    let psi = l2_norm_radial(&p, Kernel::K0, 0, 0.0, 0.0, &GAUSS).unwrap();
    // 2π ∫ e^{−r²} r dr = π
    assert!((psi * psi - std::f64::consts::PI).abs() < 1e-9);
    assert_eq!(l2_norm_radial(&p, Kernel::K1, 0, 0.0, 0.0, &GAUSS).unwrap(), 0.0);
    // ∂_t K̂₁(0) = 1
    let d = l2_norm_radial(&p, Kernel::K1, 1, 0.0, 0.0, &GAUSS).unwrap();
    assert!((d - psi).abs() < 1e-9);
}

#[test]
fn beam_time_derivative_slope() {
    let p = ModelParams::new(1, 2.0, 1.0, 1.0).unwrap();
    let t = geometric_grid(1e2, 1e4, 20);
    let c = fit_decay(&p, Kernel::K1, 1, 0.0, &GAUSS, 1.0, &t).unwrap();
    assert!((c.fitted_slope + 0.25).abs() <= 0.05, "{}", c.fitted_slope);
    assert_eq!(c.predicted_power, Some(-0.25));
    assert_eq!(c.fit_window, (1e2, 1e4));
}

#[test]
fn k0_regularity_loss_params_slope() {
    let p = ModelParams::new(1, 2.0, 0.5, 1.0).unwrap();
    let t = geometric_grid(1e2, 1e4, 20);
    let c = fit_decay(&p, Kernel::K0, 0, 0.0, &GAUSS, 1.0, &t).unwrap();
    assert!((c.fitted_slope + 1.0 / 6.0).abs() <= 0.05, "{}", c.fitted_slope);
}

#[test]
fn log_exception_growth() {
    // σ = 2(1 − 1/2) − 1 = 0 with real low-frequency roots (α > 2θ)
    let p = ModelParams::new(2, 2.0, 0.5, 1.0).unwrap();
    let t = geometric_grid(1e3, 1e4, 20);
    let c = fit_decay(&p, Kernel::K1, 0, 0.0, &GAUSS, 1.0, &t).unwrap();
    let ratios: Vec<f64> = c
        .times
        .iter()
        .zip(&c.values)
        .map(|(t, v)| v / (std::f64::consts::E + t).ln())
        .collect();
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(max / min <= 2.0);
    // the norm itself grows
    assert!(c.values.last().unwrap() > c.values.first().unwrap());
}

#[test]
fn regularity_loss_slope() {
    // s = (δ−θ)/β with β = 1/2, predicted −s/(2(δ−θ)) = −1/2
    let p = ModelParams::new(1, 1.0, 0.1, 0.9).unwrap();
    let hp = FrequencyProfile::HighPass { s: 0.8, cutoff: 1.0 };
    let t = geometric_grid(1e2, 1e4, 20);
    let c = fit_decay(&p, Kernel::K1, 1, 0.0, &hp, 1.0, &t).unwrap();
    assert!((c.fitted_slope + 0.5).abs() <= 0.05, "{}", c.fitted_slope);
}

#[test]
fn split_insensitivity() {
    let cases = [
        (ModelParams::new(1, 2.0, 0.5, 1.0).unwrap(), GAUSS),
        (
            ModelParams::new(2, 1.0, 0.25, 0.75).unwrap(),
            FrequencyProfile::AlgebraicTail { s: 1.0 },
        ),
    ];
    for (p, prof) in cases {
        for &t in &[0.5, 10.0, 1e3] {
            for (k, j) in [(Kernel::K0, 0), (Kernel::K1, 1), (Kernel::E1, 0)] {
                let base = l2_norm_radial(&p, k, j, 0.0, t, &prof).unwrap();
                for scale in [0.5, 2.0] {
                    let opts = RadialOptions {
                        split_scale: scale,
                        ..RadialOptions::default()
                    };
                    let moved = l2_norm_radial_with(&p, k, j, 0.0, t, &prof, &opts).unwrap();
                    assert!((moved - base).abs() <= 1e-7 * base, "t={t} {k:?} {base} {moved}");
                }
            }
        }
    }
}

#[test]
fn e1_approaches_k1_for_concentrated_data() {
    let p = ModelParams::new(1, 2.0, 0.5, 1.0).unwrap();
    let narrow = FrequencyProfile::Gaussian { width: 1e3 };
    for &t in &[1.0, 100.0] {
        let k1 = l2_norm_radial(&p, Kernel::K1, 0, 0.0, t, &narrow).unwrap();
        let e1 = l2_norm_radial(&p, Kernel::E1, 0, 0.0, t, &narrow).unwrap();
        assert!(e1 <= k1 && e1 / k1 > 0.999, "{e1} {k1}");
    }
}

#[test]
fn energy_decreases_and_balances_dissipation() {
    for p in [
        ModelParams::new(1, 2.0, 1.0, 1.0).unwrap(),
        ModelParams::new(2, 2.0, 0.5, 1.0).unwrap(),
        ModelParams::new(1, 1.0, 0.0, 0.5).unwrap(),
    ] {
        let times: Vec<f64> = (0..100).map(|i| 0.05 * i as f64).collect();
        let c = energy_curve(&p, None, Some(&GAUSS), &times).unwrap();
        assert!(c.energy.windows(2).all(|w| w[1] < w[0]), "{p:?}");

        let e0 = c.energy[0];
        // E(0) = ½‖u₁‖² + ½‖|D|^δ u₁‖² computed independently
        let plain = l2_norm_radial(&p, Kernel::K1, 1, 0.0, 0.0, &GAUSS).unwrap();
        let lifted = l2_norm_radial(&p, Kernel::K1, 1, p.delta, 0.0, &GAUSS).unwrap();
        assert!((e0 - 0.5 * (plain * plain + lifted * lifted)).abs() < 1e-9 * e0);

        let h = 1e-3;
        for &t in &[0.5, 1.0, 3.0] {
            let w = energy_curve(&p, None, Some(&GAUSS), &[t - h, t, t + h]).unwrap();
            let de = (w.energy[2] - w.energy[0]) / (2.0 * h);
            assert!((de + w.dissipation[1]).abs() <= 1e-6 * e0, "{p:?} t={t}");
        }
    }
}

#[test]
fn theta_zero_dissipation_is_velocity_norm() {
    let p = ModelParams::new(1, 1.0, 0.0, 0.5).unwrap();
    let c = energy_curve(&p, Some(&GAUSS), Some(&GAUSS), &[2.0]).unwrap();
    // D = ‖u_t‖² with û_t = ∂_t K̂₀ψ̂ + ∂_t K̂₁ψ̂
    let two = FrequencyProfile::Gaussian { width: 1.0 };
    let d0 = l2_norm_radial(&p, Kernel::K0, 1, 0.0, 2.0, &two).unwrap();
    let d1 = l2_norm_radial(&p, Kernel::K1, 1, 0.0, 2.0, &two).unwrap();
    assert!(c.dissipation[0] <= (d0 + d1).powi(2) * (1.0 + 1e-9));
    assert!(c.dissipation[0] > 0.0);
}

#[test]
fn lattice_sum_approaches_integral_for_large_boxes() {
    // L^{−n} Σ_k ≈ (2π)^{−n} ∫ dξ
    let p = ModelParams::new(1, 2.0, 1.0, 1.0).unwrap();
    let lat = Lattice { n: 1, length: 200.0, modes: 1024 };
    let t = 3.0;
    let sum = l2_norm_lattice(&p, Kernel::K1, 1, 0.0, t, &GAUSS, &lat).unwrap();
    let int = l2_norm_radial(&p, Kernel::K1, 1, 0.0, t, &GAUSS).unwrap();
    let scaled = int / (2.0 * std::f64::consts::PI).sqrt();
    assert!((sum - scaled).abs() < 1e-8 * scaled, "{sum} {scaled}");
}

#[test]
fn decay_curve_csv() {
    let p = ModelParams::new(1, 2.0, 1.0, 1.0).unwrap();
    let t = geometric_grid(1.0, 10.0, 20);
    let c = fit_decay(&p, Kernel::K0, 0, 0.0, &GAUSS, 1.0, &t).unwrap();
    let mut buf = Vec::new();
    c.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,N,predicted_power"));
    assert_eq!(lines.count(), t.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn e1_never_exceeds_k1(
        n in 1usize..=2, alpha in 0.5f64..3.0, ft in 0.0f64..=1.0, fd in 0.0f64..=1.0,
        lt in -1.0f64..3.0, j in 0u8..=1,
    ) {
        let p = ModelParams::new(n, alpha, 0.5 * alpha * ft, alpha * fd).unwrap();
        let t = 10f64.powf(lt);
        let k1 = l2_norm_radial(&p, Kernel::K1, j, 0.0, t, &GAUSS).unwrap();
        let e1 = l2_norm_radial(&p, Kernel::E1, j, 0.0, t, &GAUSS).unwrap();
        prop_assert!(k1.is_finite() && e1.is_finite());
        prop_assert!(e1 <= k1 * (1.0 + 1e-9));
    }
}
