use num_bigint::BigUint;
use perm1324::asymptotics::{fit_least_squares, fit_profile, fit_three_term, to_reals, Real};
use perm1324::bundled_a1324;

/// `1.7 * 8^m * m^(-2.5)` for m = 20..=31, to 60 significant digits.
const SYNTHETIC: [&str; 12] = [
    "1095654614234454.88436617931246740849421112403882923295846611",
    "7758725935294704.77095920449967926352075720020400333985212628",
    "55255044517387845.8547441602151726280219654744468443191185595",
    "395547853552733033.057251829260114383101065381537433327655988",
    "2844988432359498950.78019865147588138716340464801809210353593",
    "20551738933448695970.004992",
    "149057973742489002341.130999644366464958943751210325739352755",
    "1085098491590445077570.11842760116772032011981690261062051208",
    "7926354260616483683298.487213072442366147218787626124080475",
    "58084940577381041965331.7216475698369635233745180958565618326",
    "426918912371940111807499.249803854502842936007256253672171674",
    "3146547437250448509209251.29024220671503392312942785984084237",
];

fn synthetic() -> Vec<Real> {
    // terms before a_20 are never read by fits at n >= 22
    let mut a = vec![Real::one(); 19];
    a.extend(SYNTHETIC.iter().map(|s| s.parse::<Real>().unwrap()));
    a
}

fn rel(x: f64, want: f64) -> f64 {
    ((x - want) / want).abs()
}

#[test]
fn recovers_frozen_synthetic_sequence() {
    for fit in fit_profile(&synthetic(), 22, 31).unwrap() {
        assert!(rel(fit.mu, 8.0) < 1e-9, "{fit:?}");
        assert!(rel(fit.theta, -2.5) < 1e-9, "{fit:?}");
    }
}

#[test]
fn recovers_rational_ansatz() {
    // 3^m / m^2, exact rationals
    let a: Vec<Real> = (1..=30)
        .map(|m: u32| {
            Real::from_biguint(&BigUint::from(3u8).pow(m))
                .div(&Real::from_int((m * m) as i64))
                .unwrap()
        })
        .collect();
    for n in 3..=30 {
        let fit = fit_three_term(&a, n).unwrap();
        assert!(rel(fit.mu, 3.0) < 1e-9, "{fit:?}");
        assert!(rel(fit.theta, -2.0) < 1e-9, "{fit:?}");
    }
}

#[test]
fn scale_invariance() {
    let a = to_reals(&bundled_a1324());
    let scaled: Vec<Real> = a.iter().map(|x| x.mul(&"7.25".parse().unwrap())).collect();
    for n in [10, 20, 31] {
        let (p, q) = (
            fit_three_term(&a, n).unwrap(),
            fit_three_term(&scaled, n).unwrap(),
        );
        assert!(rel(p.mu, q.mu) < 1e-12 && rel(p.theta, q.theta) < 1e-12);
    }
}

#[test]
fn fixture_profile_is_stable() {
    // regression values, checked against an independent 60-digit evaluation
    let expected = [
        (29, 9.93141318245457, -5.19025408560403),
        (30, 9.95910408316665, -5.26959945358641),
        (31, 9.98545834644492, -5.34755320856295),
    ];
    let a = to_reals(&bundled_a1324());
    let fits = fit_profile(&a, 29, 31).unwrap();
    for (fit, (n, mu, theta)) in fits.iter().zip(expected) {
        assert_eq!(fit.n, n);
        assert!(rel(fit.mu, mu) < 1e-12, "{fit:?}");
        assert!(rel(fit.theta, theta) < 1e-12, "{fit:?}");
    }
    assert!(fits.windows(2).all(|w| w[0].mu < w[1].mu));
}

#[test]
fn least_squares_is_labelled() {
    let a = synthetic();
    let fit = fit_least_squares(&a, 31, 8).unwrap();
    assert_eq!(fit.method.to_string(), "least-squares(window=8)");
    assert!(rel(fit.mu, 8.0) < 1e-9 && rel(fit.theta, -2.5) < 1e-9);
}
