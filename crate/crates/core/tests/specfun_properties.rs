use proptest::prelude::*;
use shellcap_core::quadrature::integrate_weighted;
use shellcap_core::specfun::{amos_upper_bound, bessel_ratio};
use shellcap_core::{Chi2Params, QuadratureSpec};

const DOFS: [u32; 4] = [2, 4, 6, 8];
const LAMBDAS: [f64; 5] = [0.0, 1.0, 10.0, 1e3, 4e3];

#[test]
fn densities_are_normalized_with_the_right_mean() {
    let spec = QuadratureSpec::default();
    for k in DOFS {
        for l in LAMBDAS {
            let w = Chi2Params::new(k, l).unwrap();
            let mass = integrate_weighted(|_| 1.0, w, &spec).unwrap();
            let mean = integrate_weighted(|y| y, w, &spec).unwrap();
            assert!((mass - 1.0).abs() <= 1e-8, "k={k} λ={l}: mass {mass}");
            assert!(((mean - (k as f64 + l)) / (k as f64 + l)).abs() <= 1e-6, "k={k} λ={l}: mean {mean}");
        }
    }
}

#[test]
fn cdf_difference_quotient_converges_quadratically() {
    for k in DOFS {
        for l in LAMBDAS {
            let w = Chi2Params::new(k, l).unwrap();
            let sd = w.variance().sqrt();
            for z in [-1.0, 0.3, 2.0] {
                let y = (w.mean() + z * sd).max(0.5);
                let fd = |h: f64| (w.cdf(y + h) - w.cdf(y - h)) / (2.0 * h);
                let h = 0.05 * sd.min(y);
                let e1 = (fd(h) - w.pdf(y)).abs();
                let e2 = (fd(0.5 * h) - w.pdf(y)).abs();
                // either already at rounding level or shrinking like h²
                let floor = 1e-11 / h;
                assert!(e2 <= floor || (e1 / e2 > 3.0 && e1 / e2 < 5.0), "k={k} λ={l} y={y}: {e1:e} {e2:e}");
            }
        }
    }
}

#[test]
fn density_derivative_identity() {
    // d/dy f_{2N}(y) = ½ f_{2N−2}(y) − ½ f_{2N}(y)
    for n in 2..=4u32 {
        for l in [0.5, 9.0, 400.0] {
            let f = Chi2Params::new(2 * n, l).unwrap();
            let g = Chi2Params::new(2 * n - 2, l).unwrap();
            for z in [-1.5, 0.0, 1.0, 2.5] {
                let y = (f.mean() + z * f.variance().sqrt()).max(0.2);
                let h = 1e-4 * y.max(1.0);
                let fd = (f.pdf(y + h) - f.pdf(y - h)) / (2.0 * h);
                let exact = 0.5 * g.pdf(y) - 0.5 * f.pdf(y);
                assert!((fd - exact).abs() <= 1e-7 * f.pdf(y).max(1e-3), "N={n} λ={l} y={y}: {fd} vs {exact}");
            }
        }
    }
}

#[test]
fn scaled_ratio_is_strictly_decreasing() {
    // s_{N−1}(t) = I_{N−1}(t) / (t I_{N−2}(t)), with I_{−1} = I_1
    for n in 1..=4u32 {
        let mut prev = f64::INFINITY;
        for j in 0..=600 {
            let t = 10f64.powf(-3.0 + 6.0 * j as f64 / 600.0);
            let s = bessel_ratio(n as f64 - 1.0, t).unwrap() / t;
            assert!(s < prev, "N={n} t={t}");
            prev = s;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn three_term_recurrence(nu in 1u32..20, z in 1e-3f64..5e3) {
        // I_{ν−1} − I_{ν+1} = (2ν/z) I_ν, in ratio form
        let r0 = bessel_ratio(nu as f64, z).unwrap();
        let r1 = bessel_ratio(nu as f64 + 1.0, z).unwrap();
        let rhs = 2.0 * nu as f64 / z;
        prop_assert!(((1.0 / r0 - r1) - rhs).abs() < 1e-10 * rhs.max(1.0));
    }

    #[test]
    fn amos_bound_dominates(nu in 1.0f64..8.0, z in 0.0f64..1e3) {
        let r = bessel_ratio(nu, z).unwrap();
        let b = amos_upper_bound(nu - 1.0, z).unwrap();
        prop_assert!(r <= b * (1.0 + 1e-14), "{r} > {b}");
        prop_assert!((0.0..1.0).contains(&b));
    }

    #[test]
    fn cdf_is_a_distribution_function(k in 1u32..6, l in 0.0f64..5e3, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let w = Chi2Params::new(2 * k, l).unwrap();
        let top = w.mean() + 12.0 * w.variance().sqrt();
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        let (ca, cb) = (w.cdf(a * top), w.cdf(b * top));
        prop_assert!((0.0..=1.0).contains(&ca) && (0.0..=1.0).contains(&cb));
        prop_assert!(ca <= cb + 1e-15);
    }

    #[test]
    fn log_pdf_stays_finite(k in 1u32..6, l in 0.0f64..1e5, z in -4.0f64..8.0) {
        let w = Chi2Params::new(2 * k, l).unwrap();
        let y = (w.mean() + z * w.variance().sqrt()).max(1e-6);
        let v = w.log_pdf(y);
        prop_assert!(v.is_finite());
        prop_assert!(v < 0.0);
    }
}
