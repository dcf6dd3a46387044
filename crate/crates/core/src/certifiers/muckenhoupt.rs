use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{dyadic, relative_budget, CertificateReport, Provenance};
use crate::error::{ErrorKind, Result};
use crate::numerics::field::SpaceTimeField;
use crate::numerics::grid::MAX_DIM;
use crate::numerics::region::ball_integral;

/// Reverse-Hölder exponent and whether it is a convention rather than the
/// Sobolev exponent: `n/(n-2)` for `n ≥ 3`, 3 for `n = 2`, 3 by convention for
/// `n = 1`.
pub fn muckenhoupt_exponent(dim: usize) -> (f64, bool) {
    match dim {
        1 => (3.0, true),
        2 => (3.0, false),
        n => (n as f64 / (n as f64 - 2.0), false),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MuckenhouptOptions {
    /// Lattice spacing of the centers in `B_{1/2}`.
    pub center_spacing: f64,
    pub radii: Vec<f64>,
    /// Shift applied to every center.
    #[serde(default)]
    pub offset: [f64; MAX_DIM],
}

impl Default for MuckenhouptOptions {
    fn default() -> Self {
        Self { center_spacing: 0.25, radii: dyadic(5)[2..].to_vec(), offset: [0.0; MAX_DIM] }
    }
}

fn ball_volume(dim: usize, r: f64) -> f64 {
    match dim {
        1 => 2.0 * r,
        2 => PI * r * r,
        _ => 4.0 / 3.0 * PI * r.powi(3),
    }
}

fn centers(dim: usize, spacing: f64) -> Vec<[f64; MAX_DIM]> {
    let m = (0.5 / spacing + 1e-9).floor() as i64;
    let mut out = vec![[0.0; MAX_DIM]];
    for d in 0..dim {
        out = out
            .into_iter()
            .flat_map(|c| {
                (-m..=m).map(move |i| {
                    let mut c = c;
                    c[d] = i as f64 * spacing;
                    c
                })
            })
            .collect();
    }
    out.retain(|c| c.iter().map(|v| v * v).sum::<f64>() <= 0.25 + 1e-12);
    out
}

/// Reverse-Hölder and doubling constants of `w = u²(·, 0)` over balls
/// `B_r(z)` with `z` on a lattice in `B_{1/2}` and `B_{4r}(z) ⊂ B_1`.
pub fn muckenhoupt_check(u: &dyn SpaceTimeField, opts: &MuckenhouptOptions) -> Result<CertificateReport> {
    let op = "muckenhoupt";
    let n = u.dim();
    let (p, flagged) = muckenhoupt_exponent(n);
    if !(opts.center_spacing > 0.0) {
        return Err(ErrorKind::Precondition("center spacing must be positive".into()).at("certifiers", op));
    }
    let mut balls = Vec::new();
    for c in centers(n, opts.center_spacing) {
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        for &r in &opts.radii {
            if norm + 4.0 * r <= 1.0 + 1e-12 {
                let mut z = c;
                for d in 0..n {
                    z[d] += opts.offset[d];
                }
                balls.push((z, r));
            }
        }
    }
    if balls.is_empty() {
        return Err(ErrorKind::Precondition("no ball satisfies B_4r(z) ⊂ B_1".into()).at("certifiers", op));
    }
    let mut rows = Vec::with_capacity(balls.len());
    let (mut rh, mut dbl): (f64, f64) = (0.0, 0.0);
    for (z, r) in &balls {
        let z = &z[..n];
        let w = ball_integral(u, 0.0, z, *r, &|j| j.value * j.value)?;
        if !(w > 0.0) {
            return Err(ErrorKind::Degenerate(format!("∫ w = {w} on B_{r}({z:?})")).at("certifiers", op));
        }
        let wp = ball_integral(u, 0.0, z, *r, &|j| (j.value * j.value).powf(p))?;
        let w2 = ball_integral(u, 0.0, z, 2.0 * r, &|j| j.value * j.value)?;
        let vol = ball_volume(n, *r);
        let lp_avg = (wp / vol).powf(1.0 / p);
        let avg = w / vol;
        rh = rh.max(lp_avg / avg);
        dbl = dbl.max(w2 / w);
        rows.push((z.to_vec(), *r, lp_avg, avg, w2, w));
    }
    let c = rh.max(dbl);
    let mut report = CertificateReport::new(op, Provenance::of(u));
    for (z, r, lp_avg, avg, w2, w) in &rows {
        let mut params: Vec<(&str, f64)> = vec![("r", *r)];
        let names = ["z1", "z2", "z3"];
        for d in 0..n {
            params.push((names[d], z[d]));
        }
        let mut rh_params = params.clone();
        rh_params.push(("kind", 1.0));
        report.push(&rh_params, *lp_avg, c * avg);
        params.push(("kind", 2.0));
        report.push(&params, *w2, c * w);
    }
    report.detail("exponent", p);
    report.detail("exponent_is_convention", flagged);
    report.detail("reverse_holder_constant", rh);
    report.detail("doubling_constant", dbl);
    report.detail("kind", "1 = reverse Hölder, 2 = doubling");
    let budget = relative_budget(u) * report.rhs.iter().copied().fold(0.0, f64::max);
    report.finish(Some(c), budget, true);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::transform::Translated;
    use crate::oracles::find;

    #[test]
    fn constant_weight() {
        for name in ["const1", "const1_n2"] {
            let u = find(name).unwrap();
            let r = muckenhoupt_check(&*u, &MuckenhouptOptions::default()).unwrap();
            let n = u.dim() as f64;
            assert!((r.details["reverse_holder_constant"].as_f64().unwrap() - 1.0).abs() < 1e-10);
            assert!((r.details["doubling_constant"].as_f64().unwrap() - 2f64.powf(n)).abs() < 1e-8);
        }
    }

    #[test]
    fn polynomial_weight_is_finite() {
        let u = find("x1_n2").unwrap();
        let r = muckenhoupt_check(&*u, &MuckenhouptOptions::default()).unwrap();
        assert!(r.constant.unwrap().is_finite() && r.pass);
    }

    #[test]
    fn translation_covariance() {
        let u = find("heat2").unwrap();
        let z = [0.3, 0.0, 0.0];
        let moved = Translated::new(u.clone(), &z[..1], 0.0);
        let a = muckenhoupt_check(&*u, &MuckenhouptOptions::default()).unwrap();
        let b = muckenhoupt_check(&moved, &MuckenhouptOptions { offset: z, ..Default::default() }).unwrap();
        let (ca, cb) = (a.constant.unwrap(), b.constant.unwrap());
        assert!((ca - cb).abs() < 1e-12 * ca, "{ca} {cb}");
    }

    #[test]
    fn exponents() {
        assert_eq!(muckenhoupt_exponent(3), (3.0, false));
        assert!(muckenhoupt_exponent(1).1);
    }
}
