use noisectl::analysis::empirical_eta;
use noisectl::quadrature::integrate;
use noisectl::rng::UniformStream;
use noisectl::NoiseSpec;
use proptest::prelude::*;

fn grid() -> Vec<NoiseSpec> {
    let mut out = Vec::new();
    for s in 0..=10 {
        out.push(NoiseSpec::PolynomialSymmetric { s });
    }
    for l in 1..=10 {
        out.push(NoiseSpec::DiscreteUniform { l });
        let width = 1.0 / f64::from(2 * l - 1);
        for frac in [0.02, 0.3, 0.9] {
            out.push(NoiseSpec::PiecewiseUniform { l, delta: frac * width });
        }
    }
    out
}

fn continuous(spec: &NoiseSpec) -> bool {
    !matches!(spec, NoiseSpec::DiscreteUniform { .. })
}

#[test]
fn densities_integrate_to_one() {
    for spec in grid().iter().filter(|s| continuous(s)) {
        // Split at the window edges so the integrator never straddles a jump.
        let mut knots = vec![-1.0, 1.0];
        if let NoiseSpec::PiecewiseUniform { l, delta } = *spec {
            for w in NoiseSpec::windows(l, delta) {
                knots.extend([w.lo, w.hi]);
            }
        }
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let total: f64 = knots.windows(2).map(|k| integrate(|x| spec.density(x), k[0], k[1], 1e-12)).sum();
        assert!((total - 1.0).abs() < 1e-9, "{spec:?}: {total}");
    }
}

#[test]
fn cdf_is_a_distribution_function() {
    for spec in grid() {
        assert_eq!(spec.cdf(-1.5), 0.0, "{spec:?}");
        assert!((spec.cdf(1.5) - 1.0).abs() < 1e-12, "{spec:?}");
        assert!((spec.cdf(0.0) - 0.5).abs() < 1e-12, "{spec:?}");
    }
}

/// Kolmogorov-Smirnov distance between the sample and `cdf`, accounting for
/// atoms by comparing against both one-sided limits.
fn ks_distance(spec: &NoiseSpec, mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let below = spec.cdf(x - 1e-12);
        let at = spec.cdf(x);
        d = d.max((i as f64 / n - below).abs()).max((j as f64 / n - at).abs());
        i = j;
    }
    d
}

#[test]
fn inverse_transform_passes_ks() {
    let n = 100_000;
    // Asymptotic 99.9% quantile of the KS statistic.
    let critical = 1.9495 / (n as f64).sqrt();
    let specs = [
        NoiseSpec::PolynomialSymmetric { s: 0 },
        NoiseSpec::PolynomialSymmetric { s: 1 },
        NoiseSpec::PolynomialSymmetric { s: 3 },
        NoiseSpec::PolynomialSymmetric { s: 10 },
        NoiseSpec::DiscreteUniform { l: 1 },
        NoiseSpec::DiscreteUniform { l: 4 },
        NoiseSpec::PiecewiseUniform { l: 1, delta: 0.2 },
        NoiseSpec::PiecewiseUniform { l: 3, delta: 0.05 },
    ];
    for (k, spec) in specs.iter().enumerate() {
        let sampler = spec.sampler();
        let mut stream = UniformStream::new(1000 + k as u64);
        let xs: Vec<f64> = (0..n).map(|_| sampler.sample(stream.next_u01())).collect();
        let d = ks_distance(spec, xs);
        assert!(d < critical, "{spec:?}: D = {d}, critical {critical}");
    }
}

#[test]
fn monte_carlo_eta_agrees_with_closed_forms() {
    let cases = [
        (NoiseSpec::PolynomialSymmetric { s: 0 }, 1.0),
        (NoiseSpec::PolynomialSymmetric { s: 3 }, 1.0),
        (NoiseSpec::PolynomialSymmetric { s: 6 }, 0.8),
        (NoiseSpec::DiscreteUniform { l: 1 }, 0.865),
        (NoiseSpec::DiscreteUniform { l: 3 }, 0.9),
        (NoiseSpec::PiecewiseUniform { l: 2, delta: 0.02 }, 0.7),
        (NoiseSpec::PiecewiseUniform { l: 1, delta: 0.3 }, 0.95),
    ];
    for (k, (spec, sigma)) in cases.iter().enumerate() {
        let eta = spec.log_gain_eta(*sigma).unwrap();
        let (mc, se) = empirical_eta(spec, *sigma, 1_000_000, 77 + k as u64).unwrap();
        assert!((mc - eta).abs() < 4.0 * se, "{spec:?} σ={sigma}: {mc} vs {eta} (se {se})");
    }
}

fn any_spec() -> impl Strategy<Value = NoiseSpec> {
    prop_oneof![
        (0u32..=10).prop_map(|s| NoiseSpec::PolynomialSymmetric { s }),
        (1u32..=10).prop_map(|l| NoiseSpec::DiscreteUniform { l }),
        (1u32..=10, 0.01f64..0.99).prop_map(|(l, frac)| NoiseSpec::PiecewiseUniform {
            l,
            delta: frac / f64::from(2 * l - 1)
        }),
    ]
}

proptest! {
    #[test]
    fn density_is_even(spec in any_spec(), x in -1.0f64..1.0) {
        prop_assert_eq!(spec.density(x), spec.density(-x));
    }

    #[test]
    fn samples_lie_in_the_support(spec in any_spec(), u in 0.0f64..1.0) {
        let x = spec.sample(u);
        prop_assert!((-1.0..=1.0).contains(&x));
        if continuous(&spec) {
            prop_assert!(spec.density(x) > 0.0 || x.abs() == 1.0);
        }
    }

    #[test]
    fn sample_is_monotone_in_u(spec in any_spec(), u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let (a, b) = if u <= v { (u, v) } else { (v, u) };
        prop_assert!(spec.sample(a) <= spec.sample(b));
    }
}
