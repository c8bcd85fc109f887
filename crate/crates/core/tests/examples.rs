//! Worked values for the closed-form layers, frozen from an independent
//! evaluation of the formulas.

use std::f64::consts::{LN_2, PI};

use approx::assert_relative_eq;
use sinhpoisson::bubbles::{
    ansatz, bubble, bubble_z, delta_choice, interaction_energy, proj_bubble, proj_z1, AnsatzSpec, BubbleParams,
    Configuration,
};
use sinhpoisson::green::{green, green_dx, robin, robin_dxi};
use sinhpoisson::quadrature::integrate;
use sinhpoisson::reduced::{maximize, reduced_grad, reduced_value};
use sinhpoisson::Error;

const T: f64 = 0.577_350_269_189_625_8;

#[test]
fn green_values() {
    assert_relative_eq!(green(0.0, 0.5).unwrap(), 0.419_200_718_278_982_7, max_relative = 1e-14);
    assert_eq!(green(0.3, 1.0).unwrap(), 0.0);
    assert_eq!(green(0.3, -1.7).unwrap(), 0.0);
    assert_eq!(green(0.2, 0.7).unwrap(), green(0.7, 0.2).unwrap());
    assert_eq!(green(0.4, 0.4), Err(Error::SingularPoint(0.4)));
    assert!(green(1.0, 0.2).is_err());
    assert!(green(-1.2, 0.2).is_err());
}

#[test]
fn robin_values() {
    assert_relative_eq!(robin(0.0, 0.0).unwrap(), LN_2 / PI, max_relative = 1e-15);
    assert_relative_eq!(robin(0.5, 0.5).unwrap(), 0.129_063_552_413_408_2, max_relative = 1e-14);
    let mut prev = f64::INFINITY;
    for j in 0..50 {
        let xi = 1.0 - 0.5f64.powi(j);
        let h = robin(xi, xi).unwrap();
        assert!(h < prev);
        prev = h;
    }
    assert!(prev < -10.0);
    assert!(robin(0.2, 1.5).is_err());
}

#[test]
fn derivative_values() {
    assert_relative_eq!(green_dx(0.0, 0.5).unwrap(), -0.735_105_193_895_722_8, max_relative = 1e-14);
    assert_relative_eq!(green_dx(0.0, -0.5).unwrap(), 0.735_105_193_895_722_8, max_relative = 1e-14);
    assert!(green_dx(0.2, 0.9).unwrap() < 0.0);
    assert!(green_dx(0.2, 0.2).is_err());
    assert_eq!(robin_dxi(0.0, 0.0).unwrap(), 0.0);
    assert_relative_eq!(robin_dxi(0.0, 0.5).unwrap(), -0.085_290_876_945_789_3, max_relative = 1e-13);
    assert_relative_eq!(robin_dxi(0.3, 2.0).unwrap(), -0.187_241_109_519_876_88, max_relative = 1e-14);
}

#[test]
fn bubble_values() {
    let unit = BubbleParams::new(1.0, 0.0).unwrap();
    assert_relative_eq!(bubble(unit, 0.0).unwrap(), LN_2, max_relative = 1e-15);
    let p = BubbleParams::new(0.01, 0.3).unwrap();
    assert_relative_eq!(bubble(p, 0.3).unwrap(), 5.298_317_366_548_036, max_relative = 1e-14);
    assert!(BubbleParams::new(0.0, 0.0).is_err());
    assert_eq!(bubble_z(unit, 0, 0.0).unwrap(), 1.0);
    assert_eq!(bubble_z(unit, 1, 0.0).unwrap(), 0.0);
    assert!(bubble_z(unit, 2, 0.0).is_err());

    // int_R e^U over the whole line, mapped to (-pi/2, pi/2) by y = xi + delta tan(t)
    let mass = integrate(
        |t: f64| {
            let y = p.xi + p.delta * t.tan();
            bubble(p, y).unwrap().exp() * p.delta / t.cos().powi(2)
        },
        -PI / 2.0,
        PI / 2.0,
        &[0.0],
        1e-13,
        1e-13,
    );
    assert_relative_eq!(mass.value, 2.0 * PI, max_relative = 1e-11);

    let orth = integrate(
        |t: f64| {
            let y = t.tan();
            2.0 / (1.0 + y * y) * bubble_z(unit, 0, y).unwrap() * bubble_z(unit, 1, y).unwrap() / t.cos().powi(2)
        },
        -PI / 2.0,
        PI / 2.0,
        &[0.0],
        1e-14,
        1e-14,
    );
    assert!(orth.value.abs() < 1e-12);
}

#[test]
fn projected_values() {
    let p = BubbleParams::new(1e-3, 0.0).unwrap();
    assert!((proj_bubble(p, 0.0).unwrap() - 15.201_804_919_084_164).abs() < 1e-5);
    assert!((proj_bubble(p, 0.8).unwrap() - 2.0 * LN_2).abs() < 1e-5);
    assert_eq!(proj_bubble(p, 1.5).unwrap(), 0.0);
    assert!(proj_bubble(BubbleParams::new(1.0, 0.0).unwrap(), 0.0).is_err());
    assert_eq!(proj_z1(p, 0.0).unwrap(), 0.0);
    assert_relative_eq!(proj_z1(p, 0.5).unwrap(), 0.003_464_085_615_201_754_6, max_relative = 1e-12);
}

#[test]
fn interaction_and_delta_values() {
    let c1 = Configuration::alternating(vec![0.0]).unwrap();
    assert_relative_eq!(interaction_energy(&c1, 0).unwrap(), 2.0 * LN_2, max_relative = 1e-15);
    assert!(interaction_energy(&c1, 1).is_err());
    let c2 = Configuration::alternating(vec![-T, T]).unwrap();
    let f = -0.523_248_143_764_547_8;
    assert_relative_eq!(interaction_energy(&c2, 0).unwrap(), f, max_relative = 1e-13);
    assert_relative_eq!(interaction_energy(&c2.negated(), 1).unwrap(), f, max_relative = 1e-13);

    assert_relative_eq!(delta_choice(&c1, 0.01).unwrap()[0], 0.02, max_relative = 1e-14);
    assert_relative_eq!(delta_choice(&c1, 1e-9).unwrap()[0] / 1e-9, 2.0, max_relative = 1e-14);
    for d in delta_choice(&c2, 0.01).unwrap() {
        assert_relative_eq!(d, 2.0 / 675.0, max_relative = 1e-13);
    }
    assert!(delta_choice(&c1, 0.0).is_err());
    let mut prev = 0.0;
    for j in 1..20 {
        let d = delta_choice(&c2, 0.01 * j as f64).unwrap()[0];
        assert!(d > prev);
        prev = d;
    }
}

#[test]
fn ansatz_values() {
    let c1 = Configuration::alternating(vec![0.2]).unwrap();
    let s1 = AnsatzSpec::new(c1, 0.05).unwrap();
    let p = s1.bubbles().next().unwrap();
    for x in [-0.9, 0.0, 0.2, 0.7] {
        assert_eq!(ansatz(&s1, x).unwrap(), proj_bubble(p, x).unwrap());
    }
    let c2 = Configuration::alternating(vec![-T, T]).unwrap();
    let s2 = AnsatzSpec::new(c2, 0.01).unwrap();
    assert!(ansatz(&s2, 0.0).unwrap().abs() < 1e-14);
    assert_eq!(ansatz(&s2, 1.2).unwrap(), 0.0);
    // far field approaches the limit profile like lambda^2
    let far = |lambda: f64| {
        let s = AnsatzSpec::new(s2.config.clone(), lambda).unwrap();
        let x = 0.9;
        let g = 2.0 * PI * (green(-T, x).unwrap() - green(T, x).unwrap());
        (ansatz(&s, x).unwrap() - g).abs()
    };
    let ratio = far(1e-2) / far(1e-3);
    assert!((80.0..120.0).contains(&ratio), "{ratio}");
}

#[test]
fn reduced_values() {
    let c1 = Configuration::alternating(vec![0.0]).unwrap();
    assert_relative_eq!(reduced_value(&c1), LN_2 / PI, max_relative = 1e-15);
    assert_eq!(reduced_grad(&c1), vec![0.0]);
    let c2 = Configuration::alternating(vec![-T, T]).unwrap();
    assert_relative_eq!(reduced_value(&c2), -0.166_555_057_087_572_96, max_relative = 1e-13);
    assert!(reduced_grad(&c2).iter().all(|g| g.abs() < 1e-10));

    let k1 = maximize(1, &[1], 8, 1e-12).unwrap();
    assert!(k1.config.xis()[0].abs() < 1e-8);
    let k2 = maximize(2, &[1, -1], 8, 1e-12).unwrap();
    assert!((k2.config.xis()[0] + T).abs() < 1e-6 && (k2.config.xis()[1] - T).abs() < 1e-6);
    assert_eq!(maximize(2, &[1, 1], 8, 1e-12), Err(Error::NoCriticalPoint));
}
