use vallab::geometry::Polytope;
use vallab::harmonics::{project, quadrature_design, sph_dim, HarmonicBasis, HarmonicExpansion};
use vallab::spherical::{
    evaluate_top, hr_form, is_primitive_deg1, lefschetz_up, make_valuation, pairing_sign, pairing_sign_factor,
    poincare_pair, SphericalValuation,
};
use vallab::{Error, Verdict};

#[test]
fn dimensions_of_harmonic_spaces() {
    assert_eq!(sph_dim(2, 0), 1);
    assert_eq!(sph_dim(2, 5), 2);
    assert_eq!((0..5).map(|q| sph_dim(3, q)).collect::<Vec<_>>(), vec![1, 3, 5, 7, 9]);
    assert_eq!(sph_dim(4, 2), 9);
}

#[test]
fn quadrature_reproduces_orthonormality() {
    for n in 2..=4 {
        let basis = HarmonicBasis::get(n, 4).unwrap();
        let design = quadrature_design(n, 8).unwrap();
        let total = (0..=4).map(|q| sph_dim(n, q)).sum::<usize>();
        let mut gram = vec![vec![0.0; total]; total];
        for (x, w) in design.points.iter().zip(&design.weights) {
            let v: Vec<f64> = basis.eval_all(x).into_iter().flatten().collect();
            for i in 0..total {
                for j in 0..total {
                    gram[i][j] += w * v[i] * v[j];
                }
            }
        }
        for (i, row) in gram.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((g - target).abs() < 1e-10, "n={n} ({i},{j}) = {g}");
            }
        }
    }
}

#[test]
fn projection_recovers_synthesized_function() {
    let mut e = HarmonicExpansion::zeros(3, 4).unwrap();
    e.block_mut(0)[0] = 0.5;
    e.block_mut(2)[3] = -1.25;
    e.block_mut(4)[7] = 2.0;
    let design = quadrature_design(3, 10).unwrap();
    let samples: Vec<(Vec<f64>, f64)> = design.points.iter().map(|x| (x.clone(), e.synth(x).unwrap())).collect();
    let p = project(&samples, 3, 4).unwrap();
    assert!(p.residual_rms < 1e-10);
    for (a, b) in p.expansion.blocks().iter().flatten().zip(e.blocks().iter().flatten()) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn hr_sign_law_on_pure_degrees() {
    for n in 2..=6 {
        for q in 2..=10 {
            let v = make_valuation(n, 1, HarmonicExpansion::unit(n, q, q, 0).unwrap()).unwrap();
            let c = hr_form(&v).unwrap();
            let claimed = if q % 2 == 0 { -1 } else { 1 };
            assert_eq!(c[0].total_sign, claimed, "n={n}, q={q}");
            assert_eq!(pairing_sign(n, q).unwrap(), claimed);
            assert_eq!(c[0].verdict, Verdict::Pass);
        }
    }
}

#[test]
fn pairing_factor_closed_form() {
    // n=3: (-1)^q (1 - q(q+1)/2).
    for q in [0usize, 2, 3, 4, 7] {
        let expected = if q % 2 == 0 { 1.0 } else { -1.0 } * (1.0 - (q * (q + 1)) as f64 / 2.0);
        assert_eq!(pairing_sign_factor(3, q).unwrap(), expected);
    }
    assert!(pairing_sign_factor(5, 1).is_err());
}

#[test]
fn top_degree_valuation_of_constant_is_surface_area() {
    let one = make_valuation(3, 1, HarmonicExpansion::unit(3, 2, 0, 0).unwrap()).unwrap();
    let top = lefschetz_up(&one).unwrap();
    let b = Polytope::axis_box(&[1.0, 2.0, 3.0]).unwrap();
    assert!((evaluate_top(&top, &b).unwrap() - 22.0).abs() < 1e-12);
    assert!(evaluate_top(&one, &b).is_err());
}

#[test]
fn primitivity_and_contract_errors() {
    let mut e = HarmonicExpansion::unit(4, 3, 2, 0).unwrap();
    e.block_mut(0)[0] = 1e-3;
    let v = make_valuation(4, 1, e).unwrap();
    assert!(!is_primitive_deg1(&v).unwrap());
    assert!(matches!(hr_form(&v), Err(Error::Contract(_))));
    let v2 = make_valuation(4, 2, HarmonicExpansion::unit(4, 3, 2, 0).unwrap()).unwrap();
    assert!(is_primitive_deg1(&v2).is_err());
}

#[test]
fn pairing_is_symmetric_between_complementary_degrees() {
    let f = HarmonicExpansion::unit(4, 4, 2, 1).unwrap().add(&HarmonicExpansion::unit(4, 4, 4, 3).unwrap()).unwrap();
    let g = HarmonicExpansion::unit(4, 4, 2, 1).unwrap().scaled(2.0);
    let a = poincare_pair(&make_valuation(4, 1, f.clone()).unwrap(), &make_valuation(4, 3, g.clone()).unwrap()).unwrap();
    let b = poincare_pair(&make_valuation(4, 3, g).unwrap(), &make_valuation(4, 1, f).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, 2.0 * pairing_sign_factor(4, 2).unwrap());
}

#[test]
fn valuation_json_rejects_bad_shapes() {
    let v = make_valuation(3, 1, HarmonicExpansion::unit(3, 2, 2, 0).unwrap()).unwrap();
    let text = v.to_json().unwrap();
    assert_eq!(SphericalValuation::from_json(&text).unwrap(), v);
    assert!(SphericalValuation::from_json(r#"{"n":3,"k":1,"coeffs":[[1.0],[0,0]]}"#).is_err());
    assert!(SphericalValuation::from_json(r#"{"n":3,"k":5,"coeffs":[[1.0]]}"#).is_err());
}
