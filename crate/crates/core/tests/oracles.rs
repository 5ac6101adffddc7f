use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use rlen::ar::{ar2_rlen, arp_rlen, matched_noise_variance, ArSpec};
use rlen::entropy::select_bandwidth;
use rlen::grid::GridSpec;
use rlen::quad::adaptive_simpson;
use rlen::simulate::{gen_series, gen_series_stream, logistic, ModelSpec};
use rlen::KernelSpec;

fn stationary_pair(rng: &mut impl Rng) -> (f64, f64) {
    // triangle phi2 in (-1, 1 - |phi1|), kept 1e-3 away from its edges
    loop {
        let phi1: f64 = rng.random_range(-1.99..1.99);
        let phi2: f64 = rng.random_range(-1.0..1.0);
        if phi2 > -1.0 + 1e-3 && phi2 < 1.0 - phi1.abs() - 1e-3 {
            return (phi1, phi2);
        }
    }
}

#[test]
fn ar2_closed_form_equals_general_form() {
    assert_eq!(ar2_rlen(0.0, 0.0).unwrap(), 0.0);
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for _ in 0..100 {
        let (a, b) = stationary_pair(&mut rng);
        let x = ar2_rlen(a, b).unwrap();
        let y = arp_rlen(&[a, b], 2, 1).unwrap();
        assert!((x - y).abs() < 1e-9, "({a}, {b}): {x} vs {y}");
    }
}

#[test]
fn matched_variances_agree_in_long_runs() {
    let (px, py) = (vec![0.8, -0.3, 0.1], vec![0.7, -0.3, 0.1]);
    let s2 = matched_noise_variance(&px, &py, 0.1).unwrap();
    assert_abs_diff_eq!(s2, 0.1168, epsilon = 1e-4);
    let var = |x: &[f64]| {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
    };
    let n = 1_000_000;
    let vx = var(&gen_series(&ModelSpec::ar(px.clone(), 0.1), n, 21).unwrap());
    let vy = var(&gen_series(&ModelSpec::ar(py, s2), n, 22).unwrap());
    let target = ArSpec::new(px, 0.1).unwrap().variance().unwrap();
    assert!((vx / target - 1.0).abs() < 0.01, "{vx} vs {target}");
    assert!((vy / vx - 1.0).abs() < 0.01, "{vy} vs {vx}");
}

#[test]
fn interior_mass_is_one() {
    let k = KernelSpec::default();
    for h in [0.05, 0.1, 0.2] {
        let mut y = 2.0 * h;
        while y <= 1.0 - 2.0 * h + 1e-12 {
            // integrate between the kinks of x -> K_h^J(x, y)
            let mut cuts = vec![0.0, h, 1.0 - h, 1.0];
            cuts.extend([-2.0, -1.0, 1.0, 2.0].iter().map(|o| y + o * h).filter(|p| *p > 0.0 && *p < 1.0));
            cuts.sort_by(f64::total_cmp);
            let mass: f64 = cuts
                .windows(2)
                .map(|w| adaptive_simpson(|x| k.jackknife_eval(x, y, h).unwrap(), w[0], w[1], 1e-12))
                .sum();
            assert!((mass - 1.0).abs() < 1e-6, "h = {h}, y = {y}: {mass}");
            y += 0.037;
        }
    }
}

#[test]
fn boundary_kernel_at_rho_one_is_the_base_kernel() {
    let k = KernelSpec::default();
    let worst = (0..=2000)
        .map(|i| -1.0 + i as f64 / 1000.0)
        .map(|u| (k.boundary_kernel(1.0, u).unwrap() - k.base_eval(u)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-10);
}

#[test]
fn interior_product_kernel_is_symmetric() {
    let k = KernelSpec::default();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let h = 0.1;
    for _ in 0..200 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(h..1.0 - h)).collect();
        let y: Vec<f64> = x.iter().map(|v| (v + rng.random_range(-h..h)).clamp(h, 1.0 - h)).collect();
        assert_eq!(
            k.product_kernel_eval(&x, &y, h).unwrap(),
            k.product_kernel_eval(&y, &x, h).unwrap()
        );
    }
}

/// Mean estimate over 30 AR(1) replications squashed by `logistic(a x)`.
fn squashed_ar1_mean(a: f64) -> f64 {
    let k = KernelSpec::default();
    let spec = ModelSpec::ar(vec![0.5], 1.0);
    let total: f64 = (0..30)
        .map(|rep| {
            let x: Vec<f64> = gen_series_stream(&spec, 1000, 11, rep)
                .unwrap()
                .iter()
                .map(|v| logistic(a * v))
                .collect();
            let grid = GridSpec::entropy_default().resolve_for(&x, 1).unwrap();
            select_bandwidth(&k, &x, 1, &grid).unwrap().1.value
        })
        .sum();
    total / 30.0
}

#[test]
fn estimator_tracks_gaussian_oracle_under_monotone_maps() {
    let oracle = arp_rlen(&[0.5], 1, 1).unwrap();
    let e1 = squashed_ar1_mean(1.0);
    let e3 = squashed_ar1_mean(3.0);
    assert!((e1 - oracle).abs() < 0.02, "{e1} vs {oracle}");
    assert!((e1 - e3).abs() < 0.05, "{e1} vs {e3}");
}
