use std::f64::consts::PI;

use gsp_core::spectral::{MeasureSpec, Moment};
use gsp_core::{catalog, Atom, DensityForm, DensitySegment, Domain, SpectralMeasure};
use proptest::prelude::*;

fn domain() -> impl Strategy<Value = Domain> {
    prop_oneof![Just(Domain::IntegerTime), Just(Domain::ContinuousTime)]
}

fn form() -> impl Strategy<Value = DensityForm> {
    prop_oneof![
        (0.05..2.0f64).prop_map(|c| DensityForm::Constant { c }),
        (0.05..2.0f64, -0.9..2.0f64).prop_map(|(c, alpha)| DensityForm::Power { c, alpha }),
        (0.05..2.0f64, 0.5..3.0f64).prop_map(|(c, a)| DensityForm::ExpWell { c, a, scale: 1.0 }),
    ]
}

fn measure() -> impl Strategy<Value = SpectralMeasure> {
    (
        domain(),
        prop::collection::vec((0.0..3.0f64, 0.01..1.0f64), 0..3),
        form(),
        0.5..3.0f64,
    )
        .prop_map(|(d, atoms, form, b)| {
            let atoms = atoms
                .into_iter()
                .map(|(location, mass)| Atom { location, mass })
                .collect();
            SpectralMeasure::new(d, atoms, vec![DensitySegment::new(0.0, b, form)]).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn covariance_at_zero_is_mass(rho in measure()) {
        prop_assert!((rho.covariance(0.0) - rho.total_mass()).abs() < 1e-10);
    }

    #[test]
    fn covariance_is_dominated_by_variance(rho in measure(), ts in prop::collection::vec(0.0..40.0f64, 8)) {
        let r0 = rho.covariance(0.0);
        for t in ts {
            prop_assert!(rho.covariance(t).abs() <= r0 + 1e-10);
        }
    }

    #[test]
    fn moments_monotone_below_one(a in 0.0..0.5f64, w in 0.1..0.5f64, alpha in -0.5..1.5f64) {
        let rho = SpectralMeasure::new(
            Domain::ContinuousTime,
            vec![],
            vec![DensitySegment::new(a, a + w, DensityForm::Power { c: 1.0, alpha })],
        ).unwrap();
        let deltas = [-0.4, 0.0, 0.5, 1.0, 2.0, 4.0];
        let m: Vec<f64> = deltas.iter().map(|&d| rho.moment(d).value()).collect();
        for p in m.windows(2) {
            prop_assert!(p[1] <= p[0] * (1.0 + 1e-10));
        }
    }

    #[test]
    fn moments_monotone_above_one(a in 1.0..2.0f64, w in 0.1..5.0f64, c in 0.1..2.0f64) {
        let rho = SpectralMeasure::new(
            Domain::ContinuousTime,
            vec![],
            vec![DensitySegment::new(a, a + w, DensityForm::Constant { c })],
        ).unwrap();
        let deltas = [-4.0, -2.0, -0.5, 0.0, 1.0, 3.0];
        let m: Vec<f64> = deltas.iter().map(|&d| rho.moment(d).value()).collect();
        for p in m.windows(2) {
            prop_assert!(p[1] >= p[0] * (1.0 - 1e-10));
        }
    }

    #[test]
    fn sigma_sq_nonincreasing(rho in measure(), zero in 0.0..1.0f64) {
        let mut atoms = rho.atoms().to_vec();
        atoms.push(Atom { location: 0.0, mass: zero });
        let rho = SpectralMeasure::new(rho.domain(), atoms, rho.segments().to_vec()).unwrap();
        let ns = [1.0, 2.0, 5.0, 10.0, 100.0, 1e4, 1e8];
        let s: Vec<f64> = ns.iter().map(|&n| rho.sigma_sq(n)).collect();
        for p in s.windows(2) {
            prop_assert!(p[1] <= p[0] + 1e-15);
        }
        let last = s[s.len() - 1];
        prop_assert!(last >= zero);
        prop_assert!(last - zero <= 0.5 * (s[0] - zero) + 1e-12);
    }

    #[test]
    fn power_observation(alpha in -0.9..2.0f64, c in 0.1..3.0f64, n in 1.0..500.0f64) {
        let rho = SpectralMeasure::new(
            Domain::IntegerTime,
            vec![],
            vec![DensitySegment::new(0.0, PI, DensityForm::Power { c, alpha })],
        ).unwrap();
        let b = c / (1.0 + alpha);
        prop_assert!(rho.sigma_sq(n) <= b * n.powf(-(1.0 + alpha)) * (1.0 + 1e-9));
        for gamma in [0.25, 0.5, 1.0, 1.5, 2.0, 2.5] {
            prop_assert_eq!(rho.moment(-gamma).is_finite(), gamma < 1.0 + alpha);
        }
    }

    #[test]
    fn rescale_preserves_mass(b in 0.5..20.0f64, alpha in -0.5..1.0f64, atom in 0.1..15.0f64) {
        let rho = SpectralMeasure::new(
            Domain::ContinuousTime,
            vec![Atom { location: atom, mass: 0.3 }],
            vec![DensitySegment::new(0.0, b, DensityForm::Power { c: 1.0, alpha })],
        ).unwrap();
        let (r, q) = rho.rescale_to_pi().unwrap();
        prop_assert!(q >= 1.0 && r.support_sup() <= PI * (1.0 + 1e-12));
        prop_assert!((r.total_mass() - rho.total_mass()).abs() <= 1e-12 * rho.total_mass());
        let m2 = rho.moment(2.0).value();
        prop_assert!((r.moment(2.0).value() - m2 / (q * q)).abs() <= 1e-9 * m2);
    }

    #[test]
    fn spec_round_trip_is_bit_stable(rho in measure()) {
        let spec = rho.to_spec();
        let text = serde_json::to_string(&spec).unwrap();
        let back: MeasureSpec = serde_json::from_str(&text).unwrap();
        let rebuilt = SpectralMeasure::from_spec(&back).unwrap();
        prop_assert_eq!(&rebuilt, &rho);
        prop_assert_eq!(rebuilt.digest(), rho.digest());
    }
}

#[test]
fn power_moment_divergence_matches_quadrature_growth() {
    // m_{-γ} over [ε, π] grows without bound exactly when γ ≥ 1 + α
    let alpha = 0.5;
    for gamma in [1.2, 1.6] {
        let part = |eps: f64| {
            SpectralMeasure::new(
                Domain::IntegerTime,
                vec![],
                vec![DensitySegment::new(eps, PI, DensityForm::Power { c: 1.0, alpha })],
            )
            .unwrap()
            .moment(-gamma)
            .value()
        };
        let growth = part(1e-8) / part(1e-4);
        let full = catalog::power(alpha, Domain::IntegerTime).unwrap().moment(-gamma);
        if gamma < 1.0 + alpha {
            assert!(growth < 1.05 && full.is_finite());
        } else {
            assert!(growth > 2.0 && full == Moment::Infinite);
        }
    }
}

#[test]
fn uniform_lattice_section_is_identity() {
    let rho = catalog::sinc();
    let g = rho.riesz_lattice_gap((-PI, PI), 0.5 / PI, 40).unwrap();
    assert!((g.step - 1.0).abs() < 1e-15);
    let row = rho.covariance_row(g.step, 40);
    assert!((row[0] - 1.0).abs() < 1e-12);
    assert!(row[1..].iter().all(|v| v.abs() < 1e-12));
    assert!((g.min_eigenvalue - 1.0).abs() < 1e-10 && g.certified);
}

#[test]
fn rescale_moments_transform_at_minus_two() {
    let rho = SpectralMeasure::new(
        Domain::ContinuousTime,
        vec![],
        vec![DensitySegment::new(1.0, 9.0, DensityForm::Constant { c: 0.25 })],
    )
    .unwrap();
    let (r, q) = rho.rescale_to_pi().unwrap();
    let m = rho.moment(-2.0).value();
    assert!((r.moment(-2.0).value() - m * q * q).abs() < 1e-10 * m * q * q);
}
