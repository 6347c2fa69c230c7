//! Spherical valuations `mu_{k,f}` at the level of harmonic coefficients,
//! and the degree-1 Hodge-Riemann form with its sign certificate.
//!
//! Every positive constant relating Lefschetz shifts and pairings is set to
//! 1; the exported statements are signs, zero patterns and ratios.

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::geometry::{surface_area_measure, Polytope};
use crate::harmonics::{degree_norm_sq, HarmonicExpansion};
use crate::verdict::Verdict;

/// `mu_{k,f}` with the degree-1 block of `f` removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ValuationFile", into = "ValuationFile")]
pub struct SphericalValuation {
    n: usize,
    k: usize,
    f: HarmonicExpansion,
}

/// On-disk form: the expansion fields plus the degree `k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValuationFile {
    pub n: usize,
    pub k: usize,
    pub coeffs: Vec<Vec<f64>>,
}

impl TryFrom<ValuationFile> for SphericalValuation {
    type Error = Error;

    fn try_from(v: ValuationFile) -> Result<Self> {
        make_valuation(v.n, v.k, HarmonicExpansion::new(v.n, v.coeffs)?)
    }
}

impl From<SphericalValuation> for ValuationFile {
    fn from(v: SphericalValuation) -> Self {
        ValuationFile {
            n: v.n,
            k: v.k,
            coeffs: v.f.blocks().to_vec(),
        }
    }
}

impl SphericalValuation {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn expansion(&self) -> &HarmonicExpansion {
        &self.f
    }

    pub fn is_zero(&self) -> bool {
        self.f.is_zero()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Linear functions on the sphere give the zero valuation, so the degree-1
/// block is dropped.
pub fn make_valuation(n: usize, k: usize, mut e: HarmonicExpansion) -> Result<SphericalValuation> {
    if e.n() != n {
        return input(format!("expansion on S^{} used for a valuation on R^{n}", e.n() - 1));
    }
    if k >= n {
        return input(format!("spherical valuations have degree 0..={}, got {k}", n - 1));
    }
    if e.max_degree() >= 1 {
        e.block_mut(1).iter_mut().for_each(|c| *c = 0.0);
    }
    Ok(SphericalValuation { n, k, f: e })
}

/// `sum over facets f(u_F) vol_{n-1}(F)` for a valuation of degree `n - 1`.
pub fn evaluate_top(v: &SphericalValuation, body: &Polytope) -> Result<f64> {
    if body.dim() != v.n {
        return input(format!("valuation on R^{} evaluated on a body in R^{}", v.n, body.dim()));
    }
    if v.k + 1 != v.n {
        return input(format!("top-degree evaluation needs k = {}, got {}", v.n - 1, v.k));
    }
    let measure = surface_area_measure(body)?;
    Ok(measure.atoms.iter().map(|(u, mass)| v.f.synth_unchecked(u) * mass).sum())
}

pub fn lefschetz_up(v: &SphericalValuation) -> Result<SphericalValuation> {
    if v.k + 2 > v.n {
        return input(format!("cannot raise degree {} in dimension {}", v.k, v.n));
    }
    Ok(SphericalValuation { k: v.k + 1, ..v.clone() })
}

pub fn lefschetz_down(v: &SphericalValuation) -> Result<SphericalValuation> {
    if v.k == 0 {
        return input("cannot lower degree 0");
    }
    Ok(SphericalValuation { k: v.k - 1, ..v.clone() })
}

/// A degree-1 spherical valuation is primitive iff `f` has no constant term.
pub fn is_primitive_deg1(v: &SphericalValuation) -> Result<bool> {
    if v.k != 1 {
        return input(format!("primitivity test is for degree 1, got {}", v.k));
    }
    Ok(v.f.is_zero_block(0))
}

/// `(-1)^q (1 - q(n+q-2)/(n-1))`.
pub fn pairing_sign_factor(n: usize, q: usize) -> Result<f64> {
    if q == 1 {
        return input("the pairing factor is undefined on degree 1");
    }
    if n < 2 {
        return input("the pairing factor needs n >= 2");
    }
    let (nf, qf) = (n as f64, q as f64);
    let sign = if q.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * (1.0 - qf * (nf + qf - 2.0) / (nf - 1.0)))
}

/// Exact sign of [`pairing_sign_factor`]: `1 - q(n+q-2)/(n-1)` has the sign
/// of `(1-q)(n-1+q)`.
pub fn pairing_sign(n: usize, q: usize) -> Result<i32> {
    pairing_sign_factor(n, q)?;
    let inner = (1 - q as i64) * (n as i64 - 1 + q as i64);
    let parity = if q.is_multiple_of(2) { 1 } else { -1 };
    Ok(parity * inner.signum() as i32)
}

/// `mu_{k,f} . mu_{n-k,g}` with unit constants.
pub fn poincare_pair(v: &SphericalValuation, w: &SphericalValuation) -> Result<f64> {
    if v.n != w.n || v.k + w.k != v.n {
        return input(format!(
            "pairing needs complementary degrees in one dimension, got ({}, {}) in R^{} and R^{}",
            v.k, w.k, v.n, w.n
        ));
    }
    let top = v.f.max_degree().min(w.f.max_degree());
    let mut total = 0.0;
    for q in (0..=top).filter(|&q| q != 1) {
        let inner: f64 = v.f.block(q).iter().zip(w.f.block(q)).map(|(a, b)| a * b).sum();
        total += pairing_sign_factor(v.n, q)? * inner;
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize)]
pub struct DegreeContribution {
    pub q: usize,
    pub sign: i32,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HrCertificate {
    pub n: usize,
    pub s: usize,
    pub per_degree: Vec<DegreeContribution>,
    pub total: f64,
    pub total_sign: i32,
    pub claimed_sign: i32,
    pub verdict: Verdict,
}

/// Degree-1 Hodge-Riemann form of a primitive valuation.
///
/// Each non-zero block `q >= 2` contributes `pairing_sign_factor(n, q)`
/// times its squared norm. A pure-parity input yields one certificate; a
/// mixed input is split into its even and odd parts, which are orthogonal
/// for the form. The zero valuation yields one inconclusive certificate.
pub fn hr_form(v: &SphericalValuation) -> Result<Vec<HrCertificate>> {
    if !is_primitive_deg1(v)? {
        return Err(Error::Contract("the Hodge-Riemann form needs a primitive valuation (f^(0) = 0)".into()));
    }
    if v.f.is_zero() {
        return Ok(vec![certificate(v, 0)?]);
    }
    let parities: Vec<usize> = (0..2).filter(|&s| !v.f.parity_part(s).is_zero()).collect();
    if parities.len() == 1 {
        return Ok(vec![certificate(v, parities[0])?]);
    }
    parities
        .into_iter()
        .map(|s| {
            let part = SphericalValuation {
                f: v.f.parity_part(s),
                ..v.clone()
            };
            certificate(&part, s)
        })
        .collect()
}

fn certificate(v: &SphericalValuation, s: usize) -> Result<HrCertificate> {
    let mut per_degree = Vec::new();
    let mut total = 0.0;
    for q in 2..=v.f.max_degree() {
        if v.f.is_zero_block(q) {
            continue;
        }
        let norm = degree_norm_sq(&v.f, q)?;
        let factor = pairing_sign_factor(v.n, q)?;
        total += factor * norm;
        per_degree.push(DegreeContribution {
            q,
            sign: pairing_sign(v.n, q)?,
            magnitude: factor.abs() * norm,
        });
    }
    let total_sign = if per_degree.is_empty() {
        0
    } else if total > 0.0 {
        1
    } else if total < 0.0 {
        -1
    } else {
        0
    };
    let claimed_sign = if s.is_multiple_of(2) { -1 } else { 1 };
    let verdict = if total_sign == 0 {
        Verdict::Inconclusive
    } else {
        Verdict::from_bool(total_sign == claimed_sign)
    };
    Ok(HrCertificate {
        n: v.n,
        s,
        per_degree,
        total,
        total_sign,
        claimed_sign,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::sph_dim;

    #[test]
    fn pairing_factor_examples() {
        assert_eq!(pairing_sign_factor(3, 0).unwrap(), 1.0);
        assert_eq!(pairing_sign_factor(3, 2).unwrap(), -2.0);
        assert_eq!(pairing_sign_factor(3, 3).unwrap(), 5.0);
        assert!(pairing_sign_factor(3, 1).is_err());
        assert_eq!(pairing_sign(3, 2).unwrap(), -1);
        assert_eq!(pairing_sign(3, 3).unwrap(), 1);
    }

    #[test]
    fn valuation_construction() {
        let one = HarmonicExpansion::unit(3, 2, 0, 0).unwrap();
        let v = make_valuation(3, 1, one).unwrap();
        assert!(!is_primitive_deg1(&v).unwrap());
        let lin = HarmonicExpansion::unit(3, 2, 1, 1).unwrap();
        assert!(make_valuation(3, 1, lin).unwrap().is_zero());
        let h2 = HarmonicExpansion::unit(3, 3, 2, 0).unwrap();
        let v2 = make_valuation(3, 1, h2.clone()).unwrap();
        assert_eq!(make_valuation(3, 1, v2.expansion().clone()).unwrap(), v2);
        assert!(is_primitive_deg1(&v2).unwrap());
        let mixed = h2.add(&HarmonicExpansion::unit(3, 3, 0, 0).unwrap()).unwrap();
        assert!(!is_primitive_deg1(&make_valuation(3, 1, mixed).unwrap()).unwrap());
        assert!(make_valuation(3, 3, HarmonicExpansion::zeros(3, 1).unwrap()).is_err());
    }

    #[test]
    fn lefschetz_shifts() {
        let v = make_valuation(4, 1, HarmonicExpansion::unit(4, 2, 2, 3).unwrap()).unwrap();
        let up = lefschetz_up(&v).unwrap();
        assert_eq!(up.k(), 2);
        assert_eq!(up.expansion(), v.expansion());
        assert_eq!(lefschetz_down(&up).unwrap(), v);
        let top = lefschetz_up(&up).unwrap();
        assert!(lefschetz_up(&top).is_err());
        assert!(lefschetz_down(&lefschetz_down(&v).unwrap()).is_err());
    }

    #[test]
    fn top_degree_evaluation() {
        let cube = Polytope::unit_cube(3).unwrap();
        let one = make_valuation(3, 2, HarmonicExpansion::unit(3, 3, 0, 0).unwrap()).unwrap();
        assert!((evaluate_top(&one, &cube).unwrap() - 6.0).abs() < 1e-12);
        let odd = make_valuation(3, 2, HarmonicExpansion::unit(3, 3, 3, 4).unwrap()).unwrap();
        let sym = cube.translate(&[-0.5, -0.5, -0.5]).unwrap();
        assert!(evaluate_top(&odd, &sym).unwrap().abs() < 1e-12);
        assert!(evaluate_top(&lefschetz_down(&one).unwrap(), &cube).is_err());
    }

    #[test]
    fn hr_examples() {
        let v2 = make_valuation(3, 1, HarmonicExpansion::unit(3, 3, 2, 1).unwrap()).unwrap();
        let c = hr_form(&v2).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].total, -2.0);
        assert_eq!(c[0].total_sign, -1);
        assert_eq!(c[0].verdict, Verdict::Pass);
        let v3 = make_valuation(3, 1, HarmonicExpansion::unit(3, 3, 3, 0).unwrap()).unwrap();
        let c = hr_form(&v3).unwrap();
        assert_eq!((c[0].total, c[0].total_sign, c[0].s), (5.0, 1, 1));
        let zero = make_valuation(3, 1, HarmonicExpansion::zeros(3, 3).unwrap()).unwrap();
        let c = hr_form(&zero).unwrap();
        assert_eq!(c[0].total_sign, 0);
        assert_eq!(c[0].verdict, Verdict::Inconclusive);
        let both = make_valuation(3, 1, v2.expansion().add(v3.expansion()).unwrap()).unwrap();
        let c = hr_form(&both).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(|x| x.verdict == Verdict::Pass));
        let not_primitive = make_valuation(3, 1, HarmonicExpansion::unit(3, 2, 0, 0).unwrap()).unwrap();
        assert!(matches!(hr_form(&not_primitive), Err(Error::Contract(_))));
    }

    #[test]
    fn pairing_zero_pattern() {
        let f = make_valuation(3, 1, HarmonicExpansion::unit(3, 3, 2, 0).unwrap()).unwrap();
        let g = make_valuation(3, 2, HarmonicExpansion::unit(3, 3, 3, 0).unwrap()).unwrap();
        assert_eq!(poincare_pair(&f, &g).unwrap(), 0.0);
        let f2 = make_valuation(3, 2, f.expansion().clone()).unwrap();
        assert_eq!(poincare_pair(&f, &f2).unwrap(), -2.0);
        assert!(poincare_pair(&f, &f).is_err());
        assert_eq!(sph_dim(3, 2), f.expansion().block(2).len());
    }

    #[test]
    fn valuation_json_round_trip() {
        let v = make_valuation(3, 1, HarmonicExpansion::unit(3, 2, 2, 4).unwrap()).unwrap();
        let back = SphericalValuation::from_json(&v.to_json().unwrap()).unwrap();
        assert_eq!(v, back);
    }
}
