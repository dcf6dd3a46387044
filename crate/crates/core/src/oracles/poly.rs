use std::collections::BTreeMap;

/// Sparse real polynomial in `(x_1, x_2, x_3, t)`.
///
/// Terms are kept in a sorted map from exponent tuples so that evaluation
/// order, and therefore rounding, is reproducible.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    terms: BTreeMap<[u8; 4], f64>,
}

/// Index of the time variable in an exponent tuple.
pub const T: usize = 3;

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, [0; 4])
    }

    pub fn monomial(c: f64, exponents: [u8; 4]) -> Self {
        let mut p = Self::zero();
        p.add_term(c, exponents);
        p
    }

    /// The coordinate `x_i` (`i < 3`) or `t` (`i = 3`).
    pub fn var(i: usize) -> Self {
        let mut e = [0; 4];
        e[i] = 1;
        Self::monomial(1.0, e)
    }

    fn add_term(&mut self, c: f64, e: [u8; 4]) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(e).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&e);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u8; 4], &f64)> {
        self.terms.iter()
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(*c, *e);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = Poly::zero();
        for (e, c) in &self.terms {
            out.add_term(s * c, *e);
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2], ea[3] + eb[3]];
                out.add_term(ca * cb, e);
            }
        }
        out
    }

    pub fn derivative(&self, var: usize) -> Poly {
        let mut out = Poly::zero();
        for (e, c) in &self.terms {
            if e[var] > 0 {
                let mut f = *e;
                f[var] -= 1;
                out.add_term(c * e[var] as f64, f);
            }
        }
        out
    }

    pub fn laplacian(&self, dim: usize) -> Poly {
        (0..dim).fold(Poly::zero(), |acc, i| acc.add(&self.derivative(i).derivative(i)))
    }

    /// Largest `sum_i e_i + 2 e_t` over the terms, or `None` when the terms
    /// have different parabolic weights.
    pub fn parabolic_degree(&self) -> Option<u32> {
        let mut degrees = self.terms.keys().map(|e| e[0] as u32 + e[1] as u32 + e[2] as u32 + 2 * e[T] as u32);
        let first = degrees.next()?;
        degrees.all(|d| d == first).then_some(first)
    }

    /// Largest total degree in the space variables.
    pub fn spatial_degree(&self) -> u32 {
        self.terms.keys().map(|e| e[0] as u32 + e[1] as u32 + e[2] as u32).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        let mut v = [0.0; 4];
        v[..x.len()].copy_from_slice(x);
        v[T] = t;
        self.terms
            .iter()
            .map(|(e, c)| c * (0..4).map(|i| v[i].powi(e[i] as i32)).product::<f64>())
            .sum()
    }

    /// Sum of absolute term values, the natural scale for rounding errors.
    pub fn eval_abs(&self, x: &[f64], t: f64) -> f64 {
        let mut v = [0.0; 4];
        v[..x.len()].copy_from_slice(x);
        v[T] = t;
        self.terms
            .iter()
            .map(|(e, c)| (c * (0..4).map(|i| v[i].powi(e[i] as i32)).product::<f64>()).abs())
            .sum()
    }
}

impl std::fmt::Display for Poly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        const NAMES: [&str; 4] = ["x1", "x2", "x3", "t"];
        for (k, (e, c)) in self.terms.iter().rev().enumerate() {
            let sign = if *c < 0.0 { "-" } else if k > 0 { "+" } else { "" };
            let mag = c.abs();
            let mut factors: Vec<String> = Vec::new();
            for (i, &p) in e.iter().enumerate() {
                match p {
                    0 => {}
                    1 => factors.push(NAMES[i].to_string()),
                    _ => factors.push(format!("{}^{}", NAMES[i], p)),
                }
            }
            let body = if factors.is_empty() {
                format!("{mag}")
            } else if mag == 1.0 {
                factors.join("*")
            } else {
                format!("{mag}*{}", factors.join("*"))
            };
            write!(f, "{sign}{body}")?;
        }
        Ok(())
    }
}

/// Backward heat polynomials in one variable, `p_0 = 1`, `p_1 = x`,
/// `p_{k+1} = x p_k - 2k t p_{k-1}`, written in the coordinate `var`.
pub fn backward_heat_polynomials(var: usize, max_degree: usize) -> Vec<Poly> {
    let x = Poly::var(var);
    let t = Poly::var(T);
    let mut out = vec![Poly::constant(1.0), x.clone()];
    for k in 1..max_degree {
        let next = x.mul(&out[k]).sub(&t.mul(&out[k - 1]).scale(2.0 * k as f64));
        out.push(next);
    }
    out.truncate(max_degree + 1);
    out
}

/// Real and imaginary parts of `(x_1 + i x_2)^k`.
pub fn complex_power(k: u32) -> (Poly, Poly) {
    let mut re = Poly::zero();
    let mut im = Poly::zero();
    let mut binom = 1.0;
    for j in 0..=k {
        let c = binom * if (j / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let term = Poly::monomial(c, [(k - j) as u8, j as u8, 0, 0]);
        if j % 2 == 0 {
            re = re.add(&term);
        } else {
            im = im.add(&term);
        }
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    (re, im)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_polynomials_match_closed_forms() {
        let p = backward_heat_polynomials(0, 4);
        let (x, t) = (0.7, 0.3);
        assert_eq!(p[2].eval(&[x], t), x * x - 2.0 * t);
        assert!((p[3].eval(&[x], t) - (x.powi(3) - 6.0 * x * t)).abs() < 1e-15);
        assert!((p[4].eval(&[x], t) - (x.powi(4) - 12.0 * x * x * t + 12.0 * t * t)).abs() < 1e-15);
        for q in &p {
            assert!(q.laplacian(1).add(&q.derivative(T)).is_zero());
        }
        assert_eq!(p[4].parabolic_degree(), Some(4));
    }

    #[test]
    fn complex_powers_are_harmonic() {
        for k in 1..=6 {
            let (re, im) = complex_power(k);
            assert!(re.laplacian(2).is_zero() && im.laplacian(2).is_zero());
            let (x, y) = (0.6_f64, -0.8_f64);
            let th = y.atan2(x) * k as f64;
            assert!((re.eval(&[x, y], 0.0) - th.cos()).abs() < 1e-14);
            assert!((im.eval(&[x, y], 0.0) - th.sin()).abs() < 1e-14);
        }
        assert_eq!(complex_power(2).0.to_string(), "x1^2-x2^2");
    }
}
