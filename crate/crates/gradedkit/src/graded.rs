//! Free graded-commutative algebras on finitely many graded generators over
//! the polynomial base ring, with Koszul signs, a weight grading, and
//! derivations determined by their values on generators.
//!
//! Base coordinates are carried by the polynomial coefficients (a [`Ring`]),
//! so the generator table lists only the proper graded generators: dual-bundle
//! generators (one per basis covector of the underlying complex) and form
//! symbols (`dx` for each coordinate, `d`⟨generator⟩ for each dual-bundle
//! generator). Each generator carries an *internal* (cohomological) degree, a
//! *form* degree (0 or 1), and a nonnegative *weight*; Koszul parity is the
//! parity of internal + form degree.
//!
//! Monomials are stored sorted in declaration order with the Koszul sign
//! absorbed into the polynomial coefficient, so every element has a unique
//! normal form and `==` is semantic equality.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::exact::{Poly, Rational, Ring};
use crate::{Error, Result};

/// Maximum absolute generator degree accepted by the engine.
///
/// Small shifts need tiny amplitude; a hard bound catches input errors.
pub const MAX_DEGREE: i32 = 8;

/// What a generator stands for.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GeneratorKind {
    /// Dual to a basis section of the underlying complex (degree j+1, weight 1
    /// for a basis covector of the degree −j piece).
    DualBundle,
    /// A form symbol: `dx` over a coordinate, or `d`⟨generator⟩.
    FormSymbol,
}

/// One graded generator.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Generator {
    /// Unique name.
    pub name: String,
    /// Internal (cohomological) degree.
    pub degree: i32,
    /// Form degree: 0 for dual-bundle generators, 1 for form symbols.
    pub form_degree: u32,
    /// Weight (symmetric-power grading).
    pub weight: u32,
    /// Role of the generator.
    pub kind: GeneratorKind,
}

impl Generator {
    /// Koszul parity: internal + form degree mod 2. True when odd.
    pub fn is_odd(&self) -> bool {
        (self.degree + self.form_degree as i32).rem_euclid(2) == 1
    }
}

/// Ordered table of graded generators over a base ring.
///
/// Declaration order is the canonical monomial order (base coordinates sort
/// before all generators by living inside the polynomial coefficients).
/// Cheap to clone; tables are equal when ring and generator lists are equal.
#[derive(Clone, PartialEq, Eq)]
pub struct GenTable {
    ring: Ring,
    gens: Arc<Vec<Generator>>,
}

impl fmt::Debug for GenTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GenTable[{:?}; ", self.ring)?;
        for (i, g) in self.gens.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}:{}", g.name, g.degree)?;
        }
        write!(f, "]")
    }
}

impl GenTable {
    /// Build a table; rejects duplicate names and degrees outside
    /// [−MAX_DEGREE, MAX_DEGREE].
    pub fn new(ring: &Ring, gens: Vec<Generator>) -> Result<Self> {
        for (i, g) in gens.iter().enumerate() {
            if g.degree.abs() > MAX_DEGREE {
                return Err(Error::Generator(format!(
                    "generator {} has degree {} outside [-{MAX_DEGREE}, {MAX_DEGREE}]",
                    g.name, g.degree
                )));
            }
            if g.form_degree > 1 {
                return Err(Error::Generator(format!(
                    "generator {} has form degree {} > 1",
                    g.name, g.form_degree
                )));
            }
            if gens[..i].iter().any(|h| h.name == g.name) {
                return Err(Error::Generator(format!("duplicate generator {}", g.name)));
            }
            if ring.var_index(&g.name).is_some() {
                return Err(Error::Generator(format!(
                    "generator {} collides with a ring variable",
                    g.name
                )));
            }
        }
        Ok(GenTable { ring: ring.clone(), gens: Arc::new(gens) })
    }

    /// The base ring.
    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    /// Generators in declaration order.
    pub fn gens(&self) -> &[Generator] {
        &self.gens
    }

    /// Number of generators.
    pub fn len(&self) -> usize {
        self.gens.len()
    }

    /// True when the table has no generators.
    pub fn is_empty(&self) -> bool {
        self.gens.is_empty()
    }

    /// Index of a generator by name.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.gens.iter().position(|g| g.name == name)
    }

    /// The zero element.
    pub fn zero(&self) -> GCAElement {
        GCAElement { table: self.clone(), terms: BTreeMap::new() }
    }

    /// The unit element.
    pub fn one(&self) -> GCAElement {
        self.scalar(self.ring.one())
    }

    /// A scalar (weight-0, degree-0) element from a polynomial coefficient.
    pub fn scalar(&self, f: Poly) -> GCAElement {
        let mut terms = BTreeMap::new();
        if !f.is_zero() {
            terms.insert(Vec::new(), f);
        }
        GCAElement { table: self.clone(), terms }
    }

    /// The generator with the given index, as an element.
    pub fn gen_elem(&self, i: usize) -> GCAElement {
        assert!(i < self.len(), "generator index out of range");
        let mut terms = BTreeMap::new();
        terms.insert(vec![i as u16], self.ring.one());
        GCAElement { table: self.clone(), terms }
    }

    /// The generator with the given name, as an element.
    pub fn gen_named(&self, name: &str) -> Option<GCAElement> {
        self.index_of(name).map(|i| self.gen_elem(i))
    }
}

/// Merge two sorted generator words, computing the Koszul sign.
///
/// Returns None when an odd generator would repeat (the product vanishes).
fn merge_words(a: &[u16], b: &[u16], gens: &[Generator]) -> Option<(Vec<u16>, i32)> {
    let mut sign = 1i32;
    // Count odd-odd inversions between the words, and detect odd squares.
    for &ga in a {
        for &gb in b {
            if ga == gb && gens[ga as usize].is_odd() {
                return None;
            }
            if ga > gb && gens[ga as usize].is_odd() && gens[gb as usize].is_odd() {
                sign = -sign;
            }
        }
    }
    let mut word: Vec<u16> = a.iter().chain(b).copied().collect();
    word.sort_unstable();
    Some((word, sign))
}

/// Element of the free graded-commutative algebra on a generator table, with
/// polynomial coefficients.
#[derive(Clone, PartialEq, Eq)]
pub struct GCAElement {
    table: GenTable,
    terms: BTreeMap<Vec<u16>, Poly>,
}

impl GCAElement {
    /// The generator table.
    pub fn table(&self) -> &GenTable {
        &self.table
    }

    /// True for zero.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Iterate over (sorted word, coefficient) pairs.
    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u16>, &Poly)> {
        self.terms.iter()
    }

    fn word_degrees(word: &[u16], gens: &[Generator]) -> (i32, u32, u32) {
        let mut internal = 0i32;
        let mut form = 0u32;
        let mut weight = 0u32;
        for &g in word {
            let gen = &gens[g as usize];
            internal += gen.degree;
            form += gen.form_degree;
            weight += gen.weight;
        }
        (internal, form, weight)
    }

    /// Insert `coeff · word` for an arbitrary (unsorted) word, normalizing
    /// order and sign.
    pub fn add_term(&mut self, word: &[u16], coeff: &Poly) {
        if coeff.is_zero() {
            return;
        }
        let gens = self.table.gens().to_vec();
        // Sort by repeated adjacent transpositions, tracking the Koszul sign.
        let mut w: Vec<u16> = word.to_vec();
        let mut sign = 1i32;
        for i in 1..w.len() {
            let mut j = i;
            while j > 0 && w[j - 1] > w[j] {
                if gens[w[j - 1] as usize].is_odd() && gens[w[j] as usize].is_odd() {
                    sign = -sign;
                }
                w.swap(j - 1, j);
                j -= 1;
            }
        }
        // An odd generator squared kills the term.
        for pair in w.windows(2) {
            if pair[0] == pair[1] && gens[pair[0] as usize].is_odd() {
                return;
            }
        }
        let signed = if sign < 0 { coeff.neg() } else { coeff.clone() };
        let entry = self
            .terms
            .entry(w)
            .or_insert_with(|| self.table.ring().zero());
        *entry = entry.add(&signed);
        if entry.is_zero() {
            let mut key = word.to_vec();
            key.sort_unstable();
            self.terms.remove(&key);
        }
    }

    fn assert_same_table(&self, other: &GCAElement) {
        assert_eq!(self.table, other.table, "elements over different generator tables");
    }

    /// Sum.
    pub fn add(&self, other: &GCAElement) -> GCAElement {
        self.assert_same_table(other);
        let mut out = self.clone();
        for (w, c) in &other.terms {
            let entry = out
                .terms
                .entry(w.clone())
                .or_insert_with(|| out.table.ring().zero());
            *entry = entry.add(c);
            if entry.is_zero() {
                out.terms.remove(w);
            }
        }
        out
    }

    /// Difference.
    pub fn sub(&self, other: &GCAElement) -> GCAElement {
        self.add(&other.neg())
    }

    /// Negation.
    pub fn neg(&self) -> GCAElement {
        GCAElement {
            table: self.table.clone(),
            terms: self.terms.iter().map(|(w, c)| (w.clone(), c.neg())).collect(),
        }
    }

    /// Graded-commutative product.
    pub fn mul(&self, other: &GCAElement) -> GCAElement {
        self.assert_same_table(other);
        let gens = self.table.gens();
        let mut out = self.table.zero();
        for (wa, ca) in &self.terms {
            for (wb, cb) in &other.terms {
                if let Some((word, sign)) = merge_words(wa, wb, gens) {
                    let mut coeff = ca.mul(cb);
                    if sign < 0 {
                        coeff = coeff.neg();
                    }
                    let entry = out
                        .terms
                        .entry(word)
                        .or_insert_with(|| out.table.ring().zero());
                    *entry = entry.add(&coeff);
                }
            }
        }
        out.terms.retain(|_, c| !c.is_zero());
        out
    }

    /// Multiply by a polynomial scalar.
    pub fn scale(&self, f: &Poly) -> GCAElement {
        let mut out = self.table.zero();
        for (w, c) in &self.terms {
            let p = c.mul(f);
            if !p.is_zero() {
                out.terms.insert(w.clone(), p);
            }
        }
        out
    }

    /// Multiply by a rational scalar.
    pub fn scale_rat(&self, c: &Rational) -> GCAElement {
        let mut out = self.table.zero();
        for (w, p) in &self.terms {
            let p = p.scale(c);
            if !p.is_zero() {
                out.terms.insert(w.clone(), p);
            }
        }
        out
    }

    /// Total degree (internal + form) if homogeneous, else None. Zero is
    /// homogeneous of every degree (returns None).
    pub fn homogeneous_degree(&self) -> Option<i32> {
        let gens = self.table.gens();
        let mut deg = None;
        for w in self.terms.keys() {
            let (i, f, _) = Self::word_degrees(w, gens);
            let d = i + f as i32;
            match deg {
                None => deg = Some(d),
                Some(prev) if prev != d => return None,
                _ => {}
            }
        }
        deg
    }

    /// The homogeneous component with the given internal degree, form degree,
    /// and weight.
    pub fn component(&self, internal: i32, form: u32, weight: u32) -> GCAElement {
        let gens = self.table.gens();
        let mut out = self.table.zero();
        for (w, c) in &self.terms {
            if Self::word_degrees(w, gens) == (internal, form, weight) {
                out.terms.insert(w.clone(), c.clone());
            }
        }
        out
    }

    /// Split into components keyed by (internal degree, form degree, weight).
    pub fn components(&self) -> BTreeMap<(i32, u32, u32), GCAElement> {
        let gens = self.table.gens();
        let mut out: BTreeMap<(i32, u32, u32), GCAElement> = BTreeMap::new();
        for (w, c) in &self.terms {
            let key = Self::word_degrees(w, gens);
            out.entry(key)
                .or_insert_with(|| self.table.zero())
                .terms
                .insert(w.clone(), c.clone());
        }
        out
    }

    /// Maximum weight among the terms (0 for zero).
    pub fn max_weight(&self) -> u32 {
        let gens = self.table.gens();
        self.terms
            .keys()
            .map(|w| Self::word_degrees(w, gens).2)
            .max()
            .unwrap_or(0)
    }

    /// The scalar (empty-word) coefficient.
    pub fn scalar_part(&self) -> Poly {
        self.terms
            .get(&Vec::new())
            .cloned()
            .unwrap_or_else(|| self.table.ring().zero())
    }
}

impl fmt::Debug for GCAElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let gens = self.table.gens();
        let mut first = true;
        for (w, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for &g in w {
                write!(f, "·{}", gens[g as usize].name)?;
            }
            first = false;
        }
        Ok(())
    }
}

/// Koszul sign of a permutation of graded elements.
///
/// Input: for each element in its original order, the target position and the
/// degree (parity) of the element. Returns ±1; errors if the positions are not
/// a permutation of 0..n.
pub fn koszul_sign(permutation: &[(usize, i32)]) -> Result<i32> {
    let n = permutation.len();
    let mut seen = vec![false; n];
    for &(p, _) in permutation {
        if p >= n || seen[p] {
            return Err(Error::Generator(format!(
                "malformed permutation: positions are not a permutation of 0..{n}"
            )));
        }
        seen[p] = true;
    }
    let mut sign = 1i32;
    for i in 0..n {
        for j in (i + 1)..n {
            if permutation[i].0 > permutation[j].0
                && permutation[i].1.rem_euclid(2) == 1
                && permutation[j].1.rem_euclid(2) == 1
            {
                sign = -sign;
            }
        }
    }
    Ok(sign)
}

/// A derivation of the free graded-commutative algebra, determined by its
/// values on generators together with a *base action* on ring coordinates.
///
/// The base action is mandatory data (zero by default): differentials of
/// algebroid type act nontrivially on the base ring through the anchor, so a
/// derivation is only fully specified once its coordinate values are given.
/// On a polynomial coefficient the derivation acts by
/// `D(f) = Σᵢ ∂f/∂xᵢ · base_action(xᵢ)`.
#[derive(Clone, PartialEq, Eq)]
pub struct Derivation {
    table: GenTable,
    /// Internal-degree shift.
    pub degree: i32,
    /// Form-degree shift (may be negative, e.g. for contractions).
    pub form_degree: i32,
    values: Vec<GCAElement>,
    base_action: Vec<GCAElement>,
}

impl Derivation {
    /// The zero derivation of the given bidegree.
    pub fn new(table: &GenTable, degree: i32, form_degree: i32) -> Self {
        Derivation {
            table: table.clone(),
            degree,
            form_degree,
            values: vec![table.zero(); table.len()],
            base_action: vec![table.zero(); table.ring().nvars()],
        }
    }

    /// The generator table.
    pub fn table(&self) -> &GenTable {
        &self.table
    }

    /// Koszul parity of the derivation. True when odd.
    pub fn is_odd(&self) -> bool {
        (self.degree + self.form_degree).rem_euclid(2) == 1
    }

    /// Set the value on a generator by name.
    pub fn set_value(&mut self, name: &str, value: GCAElement) -> Result<()> {
        let i = self
            .table
            .index_of(name)
            .ok_or_else(|| Error::Generator(format!("unknown generator {name}")))?;
        assert_eq!(value.table, self.table, "value over a different table");
        self.values[i] = value;
        Ok(())
    }

    /// Set the value on a ring coordinate by name.
    pub fn set_base(&mut self, var: &str, value: GCAElement) -> Result<()> {
        let i = self
            .table
            .ring()
            .var_index(var)
            .ok_or_else(|| Error::Generator(format!("unknown coordinate {var}")))?;
        assert_eq!(value.table, self.table, "value over a different table");
        self.base_action[i] = value;
        Ok(())
    }

    /// Value on the i-th generator.
    pub fn value(&self, i: usize) -> &GCAElement {
        &self.values[i]
    }

    /// Value on the i-th ring coordinate.
    pub fn base_value(&self, i: usize) -> &GCAElement {
        &self.base_action[i]
    }

    /// True when every generator value and base value is zero.
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(GCAElement::is_zero)
            && self.base_action.iter().all(GCAElement::is_zero)
    }

    /// Apply to a polynomial coefficient via the base action.
    pub fn apply_poly(&self, f: &Poly) -> GCAElement {
        let mut out = self.table.zero();
        for i in 0..self.table.ring().nvars() {
            if self.base_action[i].is_zero() {
                continue;
            }
            let df = f.partial(i);
            if !df.is_zero() {
                out = out.add(&self.base_action[i].scale(&df));
            }
        }
        out
    }

    /// Apply to an element by the graded Leibniz rule.
    pub fn apply(&self, a: &GCAElement) -> GCAElement {
        assert_eq!(a.table, self.table, "element over a different table");
        let gens = self.table.gens();
        let odd_d = self.is_odd();
        let mut out = self.table.zero();
        for (word, coeff) in &a.terms {
            // Coefficient part: D(f)·g₁⋯g_k (polynomials are even).
            let dcoeff = self.apply_poly(coeff);
            if !dcoeff.is_zero() {
                let mut mono = self.table.one();
                for &g in word {
                    mono = mono.mul(&self.table.gen_elem(g as usize));
                }
                out = out.add(&dcoeff.mul(&mono));
            }
            // Generator part: Σ ± g₁⋯D(g_t)⋯g_k with the Koszul sign for
            // moving D past g₁⋯g_{t−1}.
            for t in 0..word.len() {
                let value = &self.values[word[t] as usize];
                if value.is_zero() {
                    continue;
                }
                let mut sign_neg = false;
                if odd_d {
                    for &g in &word[..t] {
                        if gens[g as usize].is_odd() {
                            sign_neg = !sign_neg;
                        }
                    }
                }
                let mut acc = self.table.scalar(coeff.clone());
                for &g in &word[..t] {
                    acc = acc.mul(&self.table.gen_elem(g as usize));
                }
                acc = acc.mul(value);
                for &g in &word[t + 1..] {
                    acc = acc.mul(&self.table.gen_elem(g as usize));
                }
                if sign_neg {
                    acc = acc.neg();
                }
                out = out.add(&acc);
            }
        }
        out
    }

    /// Sum of derivations (same bidegree).
    pub fn add(&self, other: &Derivation) -> Derivation {
        assert_eq!(self.table, other.table, "derivations over different tables");
        assert_eq!(
            (self.degree, self.form_degree),
            (other.degree, other.form_degree),
            "derivations of different bidegrees"
        );
        Derivation {
            table: self.table.clone(),
            degree: self.degree,
            form_degree: self.form_degree,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.add(b))
                .collect(),
            base_action: self
                .base_action
                .iter()
                .zip(&other.base_action)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    /// Negation.
    pub fn neg(&self) -> Derivation {
        Derivation {
            table: self.table.clone(),
            degree: self.degree,
            form_degree: self.form_degree,
            values: self.values.iter().map(GCAElement::neg).collect(),
            base_action: self.base_action.iter().map(GCAElement::neg).collect(),
        }
    }

    /// Scale by a rational.
    pub fn scale_rat(&self, c: &Rational) -> Derivation {
        Derivation {
            table: self.table.clone(),
            degree: self.degree,
            form_degree: self.form_degree,
            values: self.values.iter().map(|v| v.scale_rat(c)).collect(),
            base_action: self.base_action.iter().map(|v| v.scale_rat(c)).collect(),
        }
    }
}

impl fmt::Debug for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Derivation(deg {}, form {})", self.degree, self.form_degree)?;
        for (i, v) in self.base_action.iter().enumerate() {
            if !v.is_zero() {
                writeln!(f, "  {} ↦ {:?}", self.table.ring().vars()[i], v)?;
            }
        }
        for (i, v) in self.values.iter().enumerate() {
            if !v.is_zero() {
                writeln!(f, "  {} ↦ {:?}", self.table.gens()[i].name, v)?;
            }
        }
        Ok(())
    }
}

/// A base-preserving algebra map between free graded-commutative algebras:
/// each source generator is sent to an element of the target algebra (over
/// the same polynomial ring), and the map extends multiplicatively.
///
/// Images must have even total parity matched to the source generator for the
/// extension to be well defined on the quotient by odd squares; this holds
/// automatically for degree-preserving maps, which is the only kind built
/// here, so no parity check is enforced beyond the source's own relations.
#[derive(Clone, Debug)]
pub struct AlgebraMap {
    from: GenTable,
    to: GenTable,
    images: Vec<GCAElement>,
}

impl AlgebraMap {
    /// Build from per-generator images (indexed like the source table).
    pub fn new(from: &GenTable, to: &GenTable, images: Vec<GCAElement>) -> Result<Self> {
        if from.ring() != to.ring() {
            return Err(Error::Generator(
                "algebra map endpoints live over different rings".into(),
            ));
        }
        if images.len() != from.len() {
            return Err(Error::Generator(format!(
                "expected {} generator images, got {}",
                from.len(),
                images.len()
            )));
        }
        for img in &images {
            if img.table != *to {
                return Err(Error::Generator(
                    "generator image over a different target table".into(),
                ));
            }
        }
        Ok(AlgebraMap { from: from.clone(), to: to.clone(), images })
    }

    /// The identity map of a table.
    pub fn identity(table: &GenTable) -> Self {
        let images = (0..table.len()).map(|i| table.gen_elem(i)).collect();
        AlgebraMap { from: table.clone(), to: table.clone(), images }
    }

    /// The source table.
    pub fn from_table(&self) -> &GenTable {
        &self.from
    }

    /// The target table.
    pub fn to_table(&self) -> &GenTable {
        &self.to
    }

    /// Image of the i-th source generator.
    pub fn image(&self, i: usize) -> &GCAElement {
        &self.images[i]
    }

    /// Apply to an element: polynomial coefficients pass through unchanged.
    pub fn apply(&self, a: &GCAElement) -> GCAElement {
        assert_eq!(a.table, self.from, "element over a different source table");
        let mut out = self.to.zero();
        for (word, c) in a.terms() {
            let mut prod = self.to.scalar(c.clone());
            for &g in word {
                prod = prod.mul(&self.images[g as usize]);
            }
            out = out.add(&prod);
        }
        out
    }
}

/// Graded commutator [D₁,D₂] = D₁D₂ − (−1)^{|D₁||D₂|} D₂D₁, returned by its
/// generator values (a derivation again).
pub fn derivation_commutator(d1: &Derivation, d2: &Derivation) -> Derivation {
    assert_eq!(d1.table, d2.table, "derivations over different tables");
    let sign = if d1.is_odd() && d2.is_odd() { -1 } else { 1 };
    let table = d1.table.clone();
    let mut out = Derivation::new(
        &table,
        d1.degree + d2.degree,
        d1.form_degree + d2.form_degree,
    );
    for i in 0..table.len() {
        let a = d1.apply(d2.value(i));
        let b = d2.apply(d1.value(i));
        out.values[i] = if sign < 0 { a.add(&b) } else { a.sub(&b) };
    }
    for i in 0..table.ring().nvars() {
        let a = d1.apply(d2.base_value(i));
        let b = d2.apply(d1.base_value(i));
        out.base_action[i] = if sign < 0 { a.add(&b) } else { a.sub(&b) };
    }
    out
}

/// Outcome of a square-zero check.
#[derive(Clone, Debug)]
pub enum SquareZero {
    /// D² vanishes on every generator and coordinate, hence identically.
    Pass,
    /// D² is nonzero on the named generator or coordinate.
    Fail {
        /// Name of the witness generator or coordinate.
        name: String,
        /// The nonzero value D(D(name)).
        value: GCAElement,
    },
}

impl SquareZero {
    /// True for Pass.
    pub fn passed(&self) -> bool {
        matches!(self, SquareZero::Pass)
    }
}

/// Check D² = 0 for an odd derivation.
///
/// A derivation vanishes iff it vanishes on all algebra generators (and base
/// coordinates), so checking D∘D there decides the question exactly. Rejects
/// even derivations, for which the test as stated is meaningless.
pub fn check_square_zero(d: &Derivation) -> Result<SquareZero> {
    if !d.is_odd() {
        return Err(Error::Structure(
            "square-zero check requires an odd derivation".into(),
        ));
    }
    let table = d.table.clone();
    for i in 0..table.ring().nvars() {
        let v = d.apply(d.base_value(i));
        if !v.is_zero() {
            return Ok(SquareZero::Fail { name: table.ring().vars()[i].clone(), value: v });
        }
    }
    for i in 0..table.len() {
        let v = d.apply(d.value(i));
        if !v.is_zero() {
            return Ok(SquareZero::Fail { name: table.gens()[i].name.clone(), value: v });
        }
    }
    Ok(SquareZero::Pass)
}
