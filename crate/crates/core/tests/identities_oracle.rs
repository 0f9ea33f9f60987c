//! Overlap identities against the exact nested-partition law of a cascade.

mod common;

use common::{cascade_expectation, cascade_overlap_law, one_level, two_level};
use rost_core::estimators::{identity_report, ObservableSpec, TermLayout};
use rost_core::{ParametricCdf, Replicas, RpcSource, Seed};

/// Exact identity terms in `TermLayout` order.
fn exact_terms(x: &ParametricCdf, s: usize, r: u32, obs: &ObservableSpec) -> Vec<f64> {
    let layout = TermLayout { s };
    let law = cascade_overlap_law(x, s + 2);
    let mut m = vec![0.0; layout.len()];
    let ri = r as i32;
    for (p, q) in &law {
        let f = obs.eval(|a, b| q[a][b]);
        m[TermLayout::F] += p * f;
        m[TermLayout::Q2] += p * q[0][1].powi(ri);
        for l in 0..s {
            m[layout.a(l)] += p * q[l][s].powi(ri) * f;
            for lp in (l + 1)..s {
                m[layout.p(l, lp)] += p * q[l][lp].powi(ri) * f;
            }
        }
        m[layout.b()] += p * q[s][s + 1].powi(ri) * f;
    }
    m
}

fn suite(x: &ParametricCdf) -> Vec<(usize, u32, ObservableSpec)> {
    let low = x.atoms()[0].0;
    vec![
        (2, 1, ObservableSpec::monomial(2, (1, 2), 1)),
        (2, 2, ObservableSpec::monomial(2, (1, 2), 2)),
        (3, 1, ObservableSpec::indicator_at_most(3, &[(1, 2), (2, 3)], low)),
        (3, 2, ObservableSpec::indicator_at_most(3, &[(1, 2), (2, 3)], low)),
    ]
}

#[test]
fn law_is_a_probability_with_the_right_pair_marginal() {
    for x in [one_level(), two_level()] {
        for n in 2..=5 {
            let total: f64 = cascade_overlap_law(&x, n).iter().map(|e| e.0).sum();
            assert!((total - 1.0).abs() < 1e-12, "n={n} total={total}");
        }
        for q in [0.0, 0.3, 0.5, 0.7, 0.99, 1.0] {
            let p = cascade_expectation(&x, 2, |m| f64::from(u8::from(m[0][1] <= q)));
            assert!((p - x.eval(q)).abs() < 1e-12, "q={q}: {p} vs {}", x.eval(q));
        }
    }
}

#[test]
fn law_reproduces_poisson_dirichlet_moments() {
    let m = 0.5;
    let x = one_level();
    let same2 = cascade_expectation(&x, 2, |q| f64::from(u8::from(q[0][1] == 1.0)));
    let same3 = cascade_expectation(&x, 3, |q| f64::from(u8::from(q[0][1] == 1.0 && q[1][2] == 1.0)));
    assert!((same2 - (1.0 - m)).abs() < 1e-12);
    assert!((same3 - (1.0 - m) * (2.0 - m) / 2.0).abs() < 1e-12);
}

#[test]
fn exact_terms_satisfy_both_identities() {
    for x in [one_level(), two_level()] {
        for (s, r, obs) in suite(&x) {
            let layout = TermLayout { s };
            let m = exact_terms(&x, s, r, &obs);
            for l in 0..s {
                assert!(layout.gg_slot(&m, l).abs() < 1e-12, "slot {l} s={s} r={r}");
            }
            assert!(layout.gg_next(&m).abs() < 1e-12);
            assert!(layout.ac(&m).abs() < 1e-12, "s={s} r={r}: {}", layout.ac(&m));
            assert!((layout.ac(&m) - layout.ac_from_gg(&m)).abs() < 1e-12);
        }
    }
}

/// `(s-1)/2 P_12 - s A_s + (s+1)/2 B` on the exact law.
fn unsymmetrized_ac(x: &ParametricCdf, s: usize, r: u32, obs: &ObservableSpec) -> f64 {
    let layout = TermLayout { s };
    let m = exact_terms(x, s, r, obs);
    let sf = s as f64;
    (sf - 1.0) / 2.0 * m[layout.p(0, 1)] - sf * m[layout.a(s - 1)] + (sf + 1.0) / 2.0 * m[layout.b()]
}

#[test]
fn unsymmetrized_form_holds_for_slot_symmetric_observables_only() {
    let x = two_level();
    let symmetric = ObservableSpec::constant(3);
    assert!(unsymmetrized_ac(&x, 3, 1, &symmetric).abs() < 1e-12);
    for (s, r, obs) in suite(&x).into_iter().filter(|c| c.0 == 2) {
        assert!(unsymmetrized_ac(&x, s, r, &obs).abs() < 1e-12);
    }
    let chain = ObservableSpec::indicator_at_most(3, &[(1, 2), (2, 3)], 0.3);
    let residual = unsymmetrized_ac(&x, 3, 1, &chain);
    assert!(residual.abs() > 1e-4, "residual {residual}");
}

#[test]
fn estimated_terms_match_the_exact_law() {
    let seed = Seed(20_241);
    for (fixture, x) in [one_level(), two_level()].into_iter().enumerate() {
        let source = RpcSource::new(x.clone(), 256).unwrap();
        for (case, (s, r, obs)) in suite(&x).into_iter().enumerate() {
            let tag = seed.path(&[fixture as u64, case as u64]);
            let report =
                identity_report(Replicas::generated(&source, 400, tag.child(0)), s, r, &obs, 32, tag.child(1))
                    .unwrap();
            let exact = exact_terms(&x, s, r, &obs);
            for (c, (est, want)) in report.terms.iter().zip(&exact).enumerate() {
                let z = est.z_against(*want);
                assert!(z.abs() < 4.5, "fixture {fixture} s={s} r={r} term {c}: {est:?} vs {want} (z={z})");
            }
            assert!(report.gg.z_against(0.0).abs() < 4.5, "{report:?}");
            assert!(report.ac.z_against(0.0).abs() < 4.5, "{report:?}");
        }
    }
}
