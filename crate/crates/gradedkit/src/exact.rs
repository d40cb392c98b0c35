//! Exact scalar and polynomial arithmetic, vector fields, and differential
//! forms on the affine base.
//!
//! The base ring is a polynomial ring over the rationals in a fixed, ordered
//! list of variables, declared once per session as a [`Ring`]. Polynomials are
//! stored sparsely as exponent-vector maps with exact [`Rational`]
//! coefficients; no zero coefficient is ever stored, so structural equality is
//! semantic equality. Differential forms are stored with strictly increasing
//! multi-indices, signs normalized at insertion, giving a single canonical
//! representative per form.

use num::{BigInt, BigRational, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::{Error, Result};

/// Exact rational scalar: arbitrary-precision numerator and positive
/// denominator, always reduced to lowest terms.
pub type Rational = BigRational;

/// Build a rational from an integer.
pub fn q(n: i64) -> Rational {
    Rational::from(BigInt::from(n))
}

/// Build a rational from a numerator/denominator pair.
pub fn qr(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// An ordered set of coordinate names; the polynomial ring 𝒪(U).
///
/// Cheap to clone (shared internally); two rings are equal when their variable
/// lists are equal, so independently declared rings over the same variables
/// interoperate.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Ring {
    vars: Arc<Vec<String>>,
}

impl fmt::Debug for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q[{}]", self.vars.join(","))
    }
}

impl Ring {
    /// Declare a ring with the given ordered variable names.
    ///
    /// Panics if names repeat; variable order is significant and fixed.
    pub fn new<S: Into<String>>(vars: Vec<S>) -> Self {
        let vars: Vec<String> = vars.into_iter().map(Into::into).collect();
        for (i, v) in vars.iter().enumerate() {
            assert!(
                !vars[..i].contains(v),
                "duplicate ring variable {v:?}"
            );
        }
        Ring { vars: Arc::new(vars) }
    }

    /// Number of variables.
    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    /// Variable names in declaration order.
    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// Index of a variable name, if declared.
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    /// The zero polynomial.
    pub fn zero(&self) -> Poly {
        Poly { ring: self.clone(), terms: BTreeMap::new() }
    }

    /// The constant polynomial 1.
    pub fn one(&self) -> Poly {
        self.constant(q(1))
    }

    /// A constant polynomial.
    pub fn constant(&self, c: Rational) -> Poly {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(vec![0u32; self.nvars()], c);
        }
        Poly { ring: self.clone(), terms }
    }

    /// The i-th coordinate as a polynomial.
    pub fn var(&self, i: usize) -> Poly {
        assert!(i < self.nvars(), "variable index out of range");
        let mut exp = vec![0u32; self.nvars()];
        exp[i] = 1;
        let mut terms = BTreeMap::new();
        terms.insert(exp, q(1));
        Poly { ring: self.clone(), terms }
    }

    /// Look up a variable by name and return it as a polynomial.
    pub fn var_named(&self, name: &str) -> Option<Poly> {
        self.var_index(name).map(|i| self.var(i))
    }

    /// The zero vector field.
    pub fn zero_vf(&self) -> VectorField {
        VectorField { ring: self.clone(), comps: vec![self.zero(); self.nvars()] }
    }

    /// The coordinate vector field ∂/∂xᵢ.
    pub fn partial(&self, i: usize) -> VectorField {
        let mut comps = vec![self.zero(); self.nvars()];
        comps[i] = self.one();
        VectorField { ring: self.clone(), comps }
    }

    /// The zero p-form.
    pub fn zero_form(&self, degree: usize) -> BaseForm {
        BaseForm { ring: self.clone(), degree, terms: BTreeMap::new() }
    }

    /// The basis 1-form dxᵢ.
    pub fn dvar(&self, i: usize) -> BaseForm {
        assert!(i < self.nvars(), "variable index out of range");
        let mut terms = BTreeMap::new();
        terms.insert(vec![i], self.one());
        BaseForm { ring: self.clone(), degree: 1, terms }
    }

    /// A 0-form from a polynomial.
    pub fn form_from_poly(&self, f: Poly) -> BaseForm {
        assert_eq!(&f.ring, self, "polynomial from a different ring");
        let mut terms = BTreeMap::new();
        if !f.is_zero() {
            terms.insert(Vec::new(), f);
        }
        BaseForm { ring: self.clone(), degree: 0, terms }
    }
}

/// Sparse multivariate polynomial with exact rational coefficients.
///
/// Terms map exponent vectors (one entry per ring variable) to nonzero
/// coefficients; the representation is canonical, so `==` is semantic
/// equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Poly {
    ring: Ring,
    terms: BTreeMap<Vec<u32>, Rational>,
}

impl Poly {
    /// The ring this polynomial lives in.
    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    /// True for the zero polynomial.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True for the constant polynomial 1.
    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .iter()
                .all(|(e, c)| e.iter().all(|&k| k == 0) && c == &q(1))
    }

    /// The constant term.
    pub fn constant_term(&self) -> Rational {
        self.terms
            .get(&vec![0u32; self.ring.nvars()])
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// If constant, its value.
    pub fn as_constant(&self) -> Option<Rational> {
        if self.terms.keys().all(|e| e.iter().all(|&k| k == 0)) {
            Some(self.constant_term())
        } else {
            None
        }
    }

    /// Total degree, or None for the zero polynomial.
    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    /// Iterate over (exponent-vector, coefficient) pairs in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Rational)> {
        self.terms.iter()
    }

    fn assert_same_ring(&self, other: &Poly) {
        assert_eq!(self.ring, other.ring, "polynomials from different rings");
    }

    /// Sum.
    pub fn add(&self, other: &Poly) -> Poly {
        self.assert_same_ring(other);
        let mut terms = self.terms.clone();
        for (e, c) in &other.terms {
            let entry = terms.entry(e.clone()).or_insert_with(Rational::zero);
            *entry += c;
            if entry.is_zero() {
                terms.remove(e);
            }
        }
        Poly { ring: self.ring.clone(), terms }
    }

    /// Difference.
    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    /// Negation.
    pub fn neg(&self) -> Poly {
        let terms = self.terms.iter().map(|(e, c)| (e.clone(), -c.clone())).collect();
        Poly { ring: self.ring.clone(), terms }
    }

    /// Product.
    pub fn mul(&self, other: &Poly) -> Poly {
        self.assert_same_ring(other);
        let mut terms: BTreeMap<Vec<u32>, Rational> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                let entry = terms.entry(e).or_insert_with(Rational::zero);
                *entry += ca * cb;
            }
        }
        terms.retain(|_, c| !c.is_zero());
        Poly { ring: self.ring.clone(), terms }
    }

    /// Scalar multiple.
    pub fn scale(&self, c: &Rational) -> Poly {
        if c.is_zero() {
            return self.ring.zero();
        }
        let terms = self.terms.iter().map(|(e, k)| (e.clone(), k * c)).collect();
        Poly { ring: self.ring.clone(), terms }
    }

    /// Integer power.
    pub fn pow(&self, n: u32) -> Poly {
        let mut acc = self.ring.one();
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Partial derivative with respect to the i-th variable.
    pub fn partial(&self, i: usize) -> Poly {
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut e2 = e.clone();
                e2[i] -= 1;
                terms.insert(e2, c * q(e[i] as i64));
            }
        }
        Poly { ring: self.ring.clone(), terms }
    }

    /// Evaluate at a rational point (one value per variable).
    pub fn eval(&self, point: &[Rational]) -> Rational {
        assert_eq!(point.len(), self.ring.nvars(), "point dimension mismatch");
        let mut acc = Rational::zero();
        for (e, c) in &self.terms {
            let mut term = c.clone();
            for (i, &k) in e.iter().enumerate() {
                for _ in 0..k {
                    term *= &point[i];
                }
            }
            acc += term;
        }
        acc
    }

    /// Substitute a polynomial for each variable (simultaneous substitution).
    pub fn substitute(&self, images: &[Poly]) -> Poly {
        assert_eq!(images.len(), self.ring.nvars(), "substitution arity mismatch");
        let target = images
            .first()
            .map(|p| p.ring.clone())
            .unwrap_or_else(|| self.ring.clone());
        let mut acc = target.zero();
        for (e, c) in &self.terms {
            let mut term = target.constant(c.clone());
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    term = term.mul(&images[i].pow(k));
                }
            }
            acc = acc.add(&term);
        }
        acc
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms.iter().rev() {
            let is_const = e.iter().all(|&k| k == 0);
            let abs = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
                first = false;
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut wrote_factor = false;
            if abs != q(1) || is_const {
                write!(f, "{abs}")?;
                wrote_factor = true;
            }
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                if wrote_factor {
                    write!(f, "*")?;
                }
                write!(f, "{}", self.ring.vars[i])?;
                if k > 1 {
                    write!(f, "^{k}")?;
                }
                wrote_factor = true;
            }
        }
        Ok(())
    }
}

/// Polynomial vector field on the base: Σ fᵢ ∂/∂xᵢ.
#[derive(Clone, PartialEq, Eq)]
pub struct VectorField {
    ring: Ring,
    comps: Vec<Poly>,
}

impl VectorField {
    /// Build from components (coefficient of ∂/∂xᵢ at position i).
    pub fn new(ring: &Ring, comps: Vec<Poly>) -> Self {
        assert_eq!(comps.len(), ring.nvars(), "component count must equal variable count");
        for c in &comps {
            assert_eq!(&c.ring, ring, "component from a different ring");
        }
        VectorField { ring: ring.clone(), comps }
    }

    /// The ring this field lives over.
    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    /// Components in variable order.
    pub fn comps(&self) -> &[Poly] {
        &self.comps
    }

    /// True for the zero field.
    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Poly::is_zero)
    }

    /// Apply to a function as a derivation: v(f) = Σ fᵢ ∂f/∂xᵢ.
    pub fn apply(&self, f: &Poly) -> Poly {
        assert_eq!(self.ring, f.ring, "function from a different ring");
        let mut acc = self.ring.zero();
        for (i, c) in self.comps.iter().enumerate() {
            acc = acc.add(&c.mul(&f.partial(i)));
        }
        acc
    }

    /// Sum of vector fields.
    pub fn add(&self, other: &VectorField) -> VectorField {
        assert_eq!(self.ring, other.ring, "fields from different rings");
        let comps = self.comps.iter().zip(&other.comps).map(|(a, b)| a.add(b)).collect();
        VectorField { ring: self.ring.clone(), comps }
    }

    /// Negation.
    pub fn neg(&self) -> VectorField {
        VectorField {
            ring: self.ring.clone(),
            comps: self.comps.iter().map(Poly::neg).collect(),
        }
    }

    /// Multiply by a function.
    pub fn scale(&self, f: &Poly) -> VectorField {
        VectorField {
            ring: self.ring.clone(),
            comps: self.comps.iter().map(|c| c.mul(f)).collect(),
        }
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.comps.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "({c}) d/d{}", self.ring.vars[i])?;
            first = false;
        }
        Ok(())
    }
}

/// Commutator of vector fields: [v,w] = v∘w − w∘v as a derivation.
pub fn lie_bracket_vf(v: &VectorField, w: &VectorField) -> Result<VectorField> {
    if v.ring != w.ring {
        return Err(Error::RingMismatch(format!(
            "{:?} vs {:?}",
            v.ring, w.ring
        )));
    }
    let comps = (0..v.ring.nvars())
        .map(|j| v.apply(&w.comps[j]).sub(&w.apply(&v.comps[j])))
        .collect();
    Ok(VectorField { ring: v.ring.clone(), comps })
}

/// Differential p-form on the base with polynomial coefficients.
///
/// Terms map strictly increasing index tuples (the dx multi-index) to nonzero
/// polynomial coefficients. Insertion through [`BaseForm::add_term`]
/// normalizes arbitrary index tuples by sorting and sign.
#[derive(Clone, PartialEq, Eq)]
pub struct BaseForm {
    ring: Ring,
    degree: usize,
    terms: BTreeMap<Vec<usize>, Poly>,
}

/// Sort an index tuple, returning the permutation sign, or None if an index
/// repeats (in which case the corresponding form term vanishes).
pub fn sort_indices(idx: &[usize]) -> Option<(Vec<usize>, i32)> {
    let mut v: Vec<usize> = idx.to_vec();
    let mut sign = 1i32;
    // Insertion sort, counting transpositions.
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    for w in v.windows(2) {
        if w[0] == w[1] {
            return None;
        }
    }
    Some((v, sign))
}

impl BaseForm {
    /// The ring this form lives over.
    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    /// Form degree p.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// True for the zero form.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Iterate over (multi-index, coefficient) pairs in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (&Vec<usize>, &Poly)> {
        self.terms.iter()
    }

    /// Add `coeff · dx_{i₁}∧…∧dx_{iₚ}` for an arbitrary index tuple,
    /// normalizing order and sign; repeated indices contribute nothing.
    pub fn add_term(&mut self, idx: &[usize], coeff: &Poly) {
        assert_eq!(idx.len(), self.degree, "index tuple length must equal form degree");
        assert_eq!(coeff.ring, self.ring, "coefficient from a different ring");
        if coeff.is_zero() {
            return;
        }
        for &i in idx {
            assert!(i < self.ring.nvars(), "form index out of range");
        }
        if let Some((sorted, sign)) = sort_indices(idx) {
            let signed = if sign < 0 { coeff.neg() } else { coeff.clone() };
            let entry = self
                .terms
                .entry(sorted)
                .or_insert_with(|| self.ring.zero());
            *entry = entry.add(&signed);
            if entry.is_zero() {
                let key: Vec<usize> = idx.to_vec();
                let (sorted, _) = sort_indices(&key).unwrap();
                self.terms.remove(&sorted);
            }
        }
    }

    /// Sum (degrees must match).
    pub fn add(&self, other: &BaseForm) -> BaseForm {
        assert_eq!(self.ring, other.ring, "forms from different rings");
        assert_eq!(self.degree, other.degree, "forms of different degrees");
        let mut out = self.clone();
        for (idx, c) in &other.terms {
            out.add_term(idx, c);
        }
        out
    }

    /// Difference.
    pub fn sub(&self, other: &BaseForm) -> BaseForm {
        self.add(&other.neg())
    }

    /// Negation.
    pub fn neg(&self) -> BaseForm {
        BaseForm {
            ring: self.ring.clone(),
            degree: self.degree,
            terms: self.terms.iter().map(|(i, c)| (i.clone(), c.neg())).collect(),
        }
    }

    /// Multiply by a function.
    pub fn scale(&self, f: &Poly) -> BaseForm {
        let mut out = self.ring.zero_form(self.degree);
        for (idx, c) in &self.terms {
            out.add_term(idx, &c.mul(f));
        }
        out
    }

    /// Multiply by a rational scalar.
    pub fn scale_rat(&self, c: &Rational) -> BaseForm {
        let mut out = self.ring.zero_form(self.degree);
        for (idx, p) in &self.terms {
            out.add_term(idx, &p.scale(c));
        }
        out
    }

    /// Wedge product.
    pub fn wedge(&self, other: &BaseForm) -> BaseForm {
        assert_eq!(self.ring, other.ring, "forms from different rings");
        let mut out = self.ring.zero_form(self.degree + other.degree);
        for (ia, ca) in &self.terms {
            for (ib, cb) in &other.terms {
                let idx: Vec<usize> = ia.iter().chain(ib).copied().collect();
                out.add_term(&idx, &ca.mul(cb));
            }
        }
        out
    }
}

impl fmt::Debug for BaseForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (idx, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for &i in idx {
                write!(f, " d{}", self.ring.vars[i])?;
            }
            first = false;
        }
        Ok(())
    }
}

/// De Rham differential: degree p → p+1, with d∘d = 0.
pub fn de_rham_d(omega: &BaseForm) -> BaseForm {
    let ring = omega.ring.clone();
    let mut out = ring.zero_form(omega.degree + 1);
    for (idx, c) in &omega.terms {
        for i in 0..ring.nvars() {
            let dc = c.partial(i);
            if dc.is_zero() {
                continue;
            }
            let mut new_idx = Vec::with_capacity(idx.len() + 1);
            new_idx.push(i);
            new_idx.extend_from_slice(idx);
            out.add_term(&new_idx, &dc);
        }
    }
    out
}

/// Interior contraction ι_v: degree p → p−1.
///
/// Errors on degree-0 input; ι_v ι_v = 0 on any form of degree ≥ 2.
pub fn contract(v: &VectorField, omega: &BaseForm) -> Result<BaseForm> {
    if omega.degree == 0 {
        return Err(Error::Degree("cannot contract a 0-form".into()));
    }
    if v.ring != omega.ring {
        return Err(Error::RingMismatch(format!("{:?} vs {:?}", v.ring, omega.ring)));
    }
    let ring = omega.ring.clone();
    let mut out = ring.zero_form(omega.degree - 1);
    for (idx, c) in &omega.terms {
        for (slot, &i) in idx.iter().enumerate() {
            let vi = &v.comps[i];
            if vi.is_zero() {
                continue;
            }
            let rest: Vec<usize> = idx
                .iter()
                .enumerate()
                .filter(|&(s, _)| s != slot)
                .map(|(_, &j)| j)
                .collect();
            let mut coeff = c.mul(vi);
            if slot % 2 == 1 {
                coeff = coeff.neg();
            }
            out.add_term(&rest, &coeff);
        }
    }
    Ok(out)
}

/// Lie derivative via the Cartan formula 𝓛_v = d ι_v + ι_v d.
pub fn lie_derivative(v: &VectorField, omega: &BaseForm) -> Result<BaseForm> {
    if v.ring != omega.ring {
        return Err(Error::RingMismatch(format!("{:?} vs {:?}", v.ring, omega.ring)));
    }
    let term2 = contract(v, &de_rham_d(omega))?;
    if omega.degree == 0 {
        return Ok(term2);
    }
    let term1 = de_rham_d(&contract(v, omega)?);
    Ok(term1.add(&term2))
}
