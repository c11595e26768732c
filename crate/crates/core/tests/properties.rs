use hypdim::catalog::{MapDescriptor, MapValue};
use hypdim::export::fmt17;
use hypdim::julia::Verdict;
use hypdim::nevanlinna::{borel_from_counting, borel_series, counting_function};
use hypdim::pipeline::{verify, GateConfig};
use hypdim::poly::Polynomial;
use hypdim::sigma::{koebe_check, log_sigma_derivative_iterate, KoebeConfig, MetricVariant, SigmaMetric};
use num_complex::Complex;
use proptest::prelude::*;

type C = Complex<f64>;

fn c(re: f64, im: f64) -> C {
    Complex::new(re, im)
}

fn family(kind: u8, p: C, q: C) -> MapDescriptor<f64> {
    let p = if p.norm() < 0.1 { p + c(0.3, 0.0) } else { p };
    match kind {
        0 => MapDescriptor::exponential(p),
        1 => MapDescriptor::sine(p, q),
        2 => MapDescriptor::tangent(p),
        3 => MapDescriptor::cosine_root(p, q),
        4 => MapDescriptor::weierstrass(c(1.0, 0.0), c(0.2 * q.re, 1.0 + 0.3 * p.norm())),
        _ => MapDescriptor::poly_exp(
            Polynomial::new(vec![p]),
            Polynomial::new(vec![c(1.0, 0.0), q]),
        ),
    }
    .unwrap()
}

fn any_c(r: f64) -> impl Strategy<Value = C> {
    (-r..r, -r..r).prop_map(|(a, b)| c(a, b))
}

fn any_map() -> impl Strategy<Value = MapDescriptor<f64>> {
    (0u8..6, any_c(1.5), any_c(1.0)).prop_map(|(k, p, q)| family(k, p, q))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn preimages_solve_the_equation(f in any_map(), w in any_c(4.0)) {
        prop_assume!(f.omitted_values().iter().all(|o| (o - w).norm() > 1e-3));
        let list = f.preimages(w, 15.0).unwrap();
        let tol = f.tolerances().eval_tol;
        for b in &list.branches {
            let v = f.evaluate(b.point).finite().unwrap();
            let slack = tol * w.norm().max(1.0) + 8.0 * f64::EPSILON * b.point.norm() * b.derivative.norm();
            prop_assert!((v - w).norm() <= slack, "{} -> {} vs {}", b.point, v, w);
            prop_assert!(b.point.norm() <= 15.0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn exponential_preimage_count(lam in 0.05f64..2.0, r in 2.0f64..400.0) {
        // λe^z = λe: z = 1 + 2πik
        let f = MapDescriptor::exponential(c(lam, 0.0)).unwrap();
        let w = c(lam * 1f64.exp(), 0.0);
        let k = ((r * r - 1.0).sqrt() / std::f64::consts::TAU).floor();
        let edge = (r * r - 1.0).sqrt() / std::f64::consts::TAU - k;
        prop_assume!(edge > 1e-9 && edge < 1.0 - 1e-9);
        prop_assert_eq!(f.preimages(w, r).unwrap().len(), 1 + 2 * k as usize);
    }

    #[test]
    fn derivative_matches_central_difference(f in any_map(), z in any_c(2.5)) {
        prop_assume!(f.pole_distance(z).map_or(true, |d| d > 0.3));
        let d = f.derivative(z).unwrap();
        let h = 1e-5;
        let at = |x: C| match f.evaluate(x) {
            MapValue::Finite(v) => Some(v),
            _ => None,
        };
        let (Some(a), Some(b), Some(u), Some(v)) = (at(z + h), at(z - h), at(z + c(0.0, h)), at(z - c(0.0, h))) else {
            return Err(TestCaseError::reject("near a pole"));
        };
        // both directions agree for a holomorphic map
        let fd_re = (a - b) / (2.0 * h);
        let fd_im = (u - v) / c(0.0, 2.0 * h);
        let scale = d.norm().max(1.0) * (1.0 + at(z).unwrap().norm() * 1e-3);
        prop_assert!((d - fd_re).norm() / scale <= 1e-6, "{d} vs {fd_re}");
        prop_assert!((d - fd_im).norm() / scale <= 1e-6, "{d} vs {fd_im}");
    }

    #[test]
    fn growth_exponents_are_admissible(f in any_map()) {
        let g = f.growth_exponents();
        prop_assert!(g.alpha2 > 0.0 && g.alpha2 > -g.alpha1);
        prop_assert!((g.alpha - (g.alpha1 + g.alpha2)).abs() <= 1e-15);
        prop_assert!(g.order_rho > 0.0);
    }

    #[test]
    fn sigma_chain_rule(a in 0.3f64..0.9, x0 in -3.0f64..3.0, y0 in -0.5f64..0.5, n in 1usize..=10) {
        let z = c(x0, y0);
        let f = MapDescriptor::sine(c(a, 0.0), c(0.0, 0.0)).unwrap();
        let m = SigmaMetric::for_map(&f);
        let mut x = z;
        let mut euclid = 0.0;
        for _ in 0..n {
            euclid += f.derivative(x).unwrap().norm().ln();
            x = f.evaluate(x).finite().unwrap();
        }
        prop_assume!(z.norm() > 1e-6 && x.norm() > 1e-6);
        let expect = euclid + m.log_density(x) - m.log_density(z);
        let got = log_sigma_derivative_iterate(&f, &m, z, n).unwrap();
        prop_assert!((got - expect).abs() <= 1e-9 * (1.0 + expect.abs()), "{got} vs {expect}");
    }

    #[test]
    fn punctured_and_regularized_densities_compare(a2 in 0.1f64..3.0, z in any_c(1e3)) {
        prop_assume!(z.norm() >= 1.0);
        let p = SigmaMetric::new(a2, MetricVariant::Punctured).unwrap();
        let r = SigmaMetric::new(a2, MetricVariant::Regularized).unwrap();
        let ratio = p.density(z) / r.density(z);
        prop_assert!(ratio > 1.0 && ratio <= 2.0 * (1.0 + 1e-12), "{ratio}");
    }

    #[test]
    fn counting_function_of_exponential(r in 1.5f64..300.0) {
        let f = MapDescriptor::exponential(c(1.0, 0.0)).unwrap();
        let x = (r * r - 1.0).sqrt() / std::f64::consts::TAU;
        prop_assume!(x.fract() > 1e-9 && x.fract() < 1.0 - 1e-9);
        let prof = counting_function(&f, c(1f64.exp(), 0.0), &[r / 2.0, r], None).unwrap();
        prop_assert_eq!(prof.n_at(r), 1 + 2 * x.floor() as usize);
        for s in [r / 3.0, r / 2.0, r] {
            let (a, b) = (prof.big_n_at(s), prof.big_n_steps(s));
            prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn fmt17_round_trips(x in any::<f64>()) {
        prop_assume!(x.is_finite());
        let back: f64 = fmt17(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn descriptor_json_round_trips(f in any_map(), s in any_c(1.0)) {
        let f = f.with_shift(s);
        let text = serde_json::to_string(&f).unwrap();
        let back: MapDescriptor<f64> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, f);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn borel_identity_on_targets(z in any_c(3.0)) {
        let f = MapDescriptor::exponential(c(1.0, 0.0)).unwrap();
        prop_assume!(z.norm() > 0.05);
        let r = 500.0;
        let s = borel_series(&f, 2.0, z, r).unwrap();
        let grid: Vec<f64> = (0..=40).map(|k| r.powf(k as f64 / 40.0)).collect();
        let prof = counting_function(&f, z, &grid, None).unwrap();
        let q = borel_from_counting(&prof, 2.0, r, s.tail_estimate);
        prop_assert!(q.converged);
        prop_assert!((q.value - s.value()).abs() <= 1e-6 * s.value(), "{} vs {}", q.value, s.value());
    }

    #[test]
    fn hyperbolic_verdict_expands(lam in 0.05f64..0.35, im in -0.05f64..0.05) {
        let f = MapDescriptor::exponential(c(lam, im)).unwrap();
        let v = verify(&f, &GateConfig::default()).unwrap();
        let h = &v.report.hyperbolicity;
        prop_assert_eq!(h.verdict, Verdict::Hyperbolic);
        prop_assert!(h.expansion_lambda.unwrap() > 1.0, "{:?}", h.expansion_lambda);
    }
}

#[test]
fn koebe_constant_shrinks_with_the_ball() {
    let f = MapDescriptor::exponential(c(0.2, 0.0)).unwrap();
    let m = SigmaMetric::for_map(&f);
    let mut x = 3.0f64;
    for _ in 0..100 {
        x -= (0.2 * x.exp() - x) / (0.2 * x.exp() - 1.0);
    }
    let cfg = KoebeConfig::default();
    let mut last = f64::INFINITY;
    for radius in [0.4, 0.2, 0.1, 0.05] {
        let k = koebe_check(&f, &m, c(x, 0.0), 2, radius, &cfg).unwrap().measured_k_sigma;
        assert!(k >= 1.0);
        assert!(k <= last * (1.0 + 1e-9), "K = {k} at {radius} after {last}");
        last = k;
    }
}
