//! Nondegeneracy and closure verification for shifted symplectic structures
//! at shifts 0 and 2, plus the shift-specific classification checks and
//! amplitude truncation.
//!
//! A shift-0 structure on a Lie algebroid is a base two-form; a shift-2
//! structure on a two-term algebroid is recorded by its weight components: an
//! 𝒪-linear map φ from level 1 to one-forms, a pairing-valued form ψ on level
//! 0 satisfying the Leibniz rule ψ(x, fy) = fψ(x, y) + Q(x, y)df with Q a
//! symmetric bilinear form, and a closed four-form on the base.
//!
//! Nondegeneracy is the requirement that the comparison map from the tangent
//! complex to the shifted dual complex is a quasi-isomorphism; it is decided
//! either strictly (square blocks with unit determinant over the polynomial
//! ring) or by sampling (acyclicity of the mapping cone at rational points).

use num::{One, Zero};
use rand::{Rng, SeedableRng};

use crate::algebroid::{Algebroid, Complex, Morphism, Retract, transfer_structure};
use crate::exact::{contract, de_rham_d, lie_derivative, q, BaseForm, Poly, Rational, Ring, VectorField};
use crate::matrix::{rational_rank, Matrix};
use crate::verdict::Verdict;
use crate::{Error, Result};

/// Verification mode for nondegeneracy checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Unit-determinant comparison blocks over the polynomial ring; sound and
    /// complete for strictly nondegenerate data.
    Strict,
    /// Mapping-cone acyclicity at rational sample points; complete only over
    /// the sample set.
    Sampled,
}

/// A shifted symplectic structure on an algebroid, in weight components.
#[derive(Clone, Debug)]
pub struct ShiftedSymplecticData {
    shift: u8,
    algebroid: Algebroid,
    /// Shift 0: the base two-form.
    base_two_form: Option<BaseForm>,
    /// Shift 2: one one-form per level-1 basis element (𝒪-linear).
    phi: Vec<BaseForm>,
    /// Shift 2: ψ on level-0 basis pairs (skew matrix of one-forms).
    psi: Vec<Vec<BaseForm>>,
    /// Shift 2: symmetric bilinear form on level 0.
    q_pairing: Matrix,
    /// Shift 2: closed four-form on the base.
    k_form: BaseForm,
}

impl ShiftedSymplecticData {
    /// Shift-0 data: a Lie algebroid concentrated in degree 0 and a two-form.
    pub fn shift_zero(a: &Algebroid, b: BaseForm) -> Result<Self> {
        if a.complex().len() > 1 {
            return Err(Error::Structure(
                "shift-0 data needs an algebroid concentrated in degree 0".into(),
            ));
        }
        if b.degree() != 2 {
            return Err(Error::Degree("shift-0 form must be a two-form".into()));
        }
        let ring = a.ring().clone();
        Ok(ShiftedSymplecticData {
            shift: 0,
            algebroid: a.clone(),
            base_two_form: Some(b),
            phi: Vec::new(),
            psi: Vec::new(),
            q_pairing: Matrix::zero(&ring, 0, 0),
            k_form: ring.zero_form(4),
        })
    }

    /// Shift-2 data on a two-term algebroid, from its weight components.
    pub fn shift_two(
        a: &Algebroid,
        phi: Vec<BaseForm>,
        psi: Vec<Vec<BaseForm>>,
        q_pairing: Matrix,
        k_form: BaseForm,
    ) -> Result<Self> {
        if !a.is_two_term() {
            return Err(Error::Structure(
                "shift-2 data needs a two-term algebroid".into(),
            ));
        }
        let r0 = a.complex().rank(0);
        let r1 = a.complex().rank(1);
        if phi.len() != r1 {
            return Err(Error::Structure("one φ-form per level-1 basis element".into()));
        }
        if phi.iter().any(|f| f.degree() != 1) {
            return Err(Error::Degree("φ takes values in one-forms".into()));
        }
        if psi.len() != r0 || psi.iter().any(|row| row.len() != r0) {
            return Err(Error::Structure("ψ must be a square table on level 0".into()));
        }
        for i in 0..r0 {
            for j in 0..r0 {
                if psi[i][j].degree() != 1 {
                    return Err(Error::Degree("ψ takes values in one-forms".into()));
                }
                if !psi[i][j].add(&psi[j][i]).is_zero() {
                    return Err(Error::Structure("ψ must be skew-symmetric".into()));
                }
            }
        }
        if q_pairing.rows() != r0 || q_pairing.cols() != r0 {
            return Err(Error::Structure("Q must be a square matrix on level 0".into()));
        }
        if !q_pairing.sub(&q_pairing.transpose()).is_zero() {
            return Err(Error::Structure("Q must be symmetric".into()));
        }
        if k_form.degree() != 4 {
            return Err(Error::Degree("K must be a four-form".into()));
        }
        Ok(ShiftedSymplecticData {
            shift: 2,
            algebroid: a.clone(),
            base_two_form: None,
            phi,
            psi,
            q_pairing,
            k_form,
        })
    }

    /// The shift.
    pub fn shift(&self) -> u8 {
        self.shift
    }

    /// The underlying algebroid.
    pub fn algebroid(&self) -> &Algebroid {
        &self.algebroid
    }

    /// The base ring.
    pub fn ring(&self) -> &Ring {
        self.algebroid.ring()
    }

    /// Shift-0 two-form.
    pub fn base_two_form(&self) -> Option<&BaseForm> {
        self.base_two_form.as_ref()
    }

    /// Shift-2 φ on the level-1 basis.
    pub fn phi(&self) -> &[BaseForm] {
        &self.phi
    }

    /// Shift-2 ψ table on the level-0 basis.
    pub fn psi_table(&self) -> &[Vec<BaseForm>] {
        &self.psi
    }

    /// Shift-2 symmetric pairing on level 0.
    pub fn q_pairing(&self) -> &Matrix {
        &self.q_pairing
    }

    /// Shift-2 four-form.
    pub fn k_form(&self) -> &BaseForm {
        &self.k_form
    }

    /// φ applied 𝒪-linearly to the level-1 part of a section.
    pub fn phi_of(&self, u: &crate::algebroid::Section) -> BaseForm {
        let mut out = self.ring().zero_form(1);
        for (&(level, idx), c) in u.terms() {
            if level == 1 {
                out = out.add(&self.phi[idx].scale(c));
            }
        }
        out
    }

    /// Q applied bilinearly to the level-0 parts of two sections.
    pub fn q_of(&self, x: &crate::algebroid::Section, y: &crate::algebroid::Section) -> Poly {
        let mut out = self.ring().zero();
        for (&(lx, i), cx) in x.terms() {
            if lx != 0 {
                continue;
            }
            for (&(ly, j), cy) in y.terms() {
                if ly != 0 {
                    continue;
                }
                out = out.add(&self.q_pairing.at(i, j).mul(cx).mul(cy));
            }
        }
        out
    }

    /// ψ extended to sections by the Leibniz rule in both slots:
    /// ψ(fx, gy) = fg·ψ(x, y) + fQ(x, y)dg − gQ(x, y)df.
    pub fn psi_of(&self, x: &crate::algebroid::Section, y: &crate::algebroid::Section) -> BaseForm {
        let ring = self.ring().clone();
        let mut out = ring.zero_form(1);
        for (&(lx, i), f) in x.terms() {
            if lx != 0 {
                continue;
            }
            let df = poly_differential(f);
            for (&(ly, j), g) in y.terms() {
                if ly != 0 {
                    continue;
                }
                let dg = poly_differential(g);
                let qij = self.q_pairing.at(i, j);
                out = out.add(&self.psi[i][j].scale(&f.mul(g)));
                out = out.add(&dg.scale(&f.mul(qij)));
                out = out.sub(&df.scale(&g.mul(qij)));
            }
        }
        out
    }
}

/// Exterior differential of a polynomial as a one-form.
fn poly_differential(f: &Poly) -> BaseForm {
    let ring = f.ring().clone();
    let mut out = ring.zero_form(1);
    for i in 0..ring.nvars() {
        let p = f.partial(i);
        if !p.is_zero() {
            out.add_term(&[i], &p);
        }
    }
    out
}

/// The coefficient of a zero-form as a polynomial.
fn poly_of_zero_form(f: &BaseForm) -> Poly {
    let ring = f.ring().clone();
    let mut out = ring.zero();
    for (idx, c) in f.terms() {
        debug_assert!(idx.is_empty());
        out = out.add(c);
    }
    out
}

/// Contraction of a one-form with a vector field, as a polynomial.
fn pair_vf_form(v: &VectorField, alpha: &BaseForm) -> Poly {
    poly_of_zero_form(&contract(v, alpha).expect("one-form contraction"))
}

/// Deterministic sample points: the origin plus `extra` pseudorandom rational
/// points drawn from the given seed.
pub fn default_sample_points(ring: &Ring, seed: u64, extra: usize) -> Vec<Vec<Rational>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = ring.nvars();
    let mut pts = vec![vec![Rational::zero(); n]];
    for _ in 0..extra {
        let mut p = Vec::with_capacity(n);
        for _ in 0..n {
            let num: i64 = rng.gen_range(-9..=9);
            let den: i64 = rng.gen_range(1..=4);
            p.push(Rational::new(num.into(), den.into()));
        }
        pts.push(p);
    }
    pts
}

/// A chain comparison: two complexes (as composable matrix sequences, written
/// left to right) with a levelwise map between them.
struct Comparison {
    /// Differentials of the source complex; `top_dims` has one more entry.
    top_diffs: Vec<Matrix>,
    top_dims: Vec<usize>,
    bottom_diffs: Vec<Matrix>,
    bottom_dims: Vec<usize>,
    /// Vertical maps, one per level.
    verticals: Vec<Matrix>,
}

impl Comparison {
    /// Strict nondegeneracy: every vertical block is square with a unit
    /// (nonzero constant) determinant.
    fn strict(&self, v: &mut Verdict) {
        let mut ok = true;
        let mut witness = String::new();
        for (k, m) in self.verticals.iter().enumerate() {
            if m.rows() != m.cols() {
                ok = false;
                witness = format!("block {k} is {}×{}, not square", m.rows(), m.cols());
                break;
            }
            let det = m.det();
            match det.as_constant() {
                Some(c) if !c.is_zero() => {}
                _ => {
                    ok = false;
                    witness = format!("block {k} has non-unit determinant {det}");
                    break;
                }
            }
        }
        v.record("unit-determinant", ok, || witness);
    }

    /// Sampled nondegeneracy: the mapping cone of the comparison is acyclic
    /// at every sample point.
    fn sampled(&self, v: &mut Verdict, points: &[Vec<Rational>]) {
        // Cone spaces C_k = Top_k ⊕ Bottom_{k−1} with differential
        // (t, b) ↦ (d t, f(t) − d b); acyclicity at a point is rank-nullity
        // exactness in every degree.
        let levels = self.top_dims.len();
        let mut ok = true;
        let mut witness = String::new();
        'points: for p in points {
            let mut dims = Vec::new();
            for k in 0..=levels {
                let t = if k < levels { self.top_dims[k] } else { 0 };
                let b = if k >= 1 { self.bottom_dims[k - 1] } else { 0 };
                dims.push(t + b);
            }
            // Cone differential C_k → C_{k+1} evaluated at p.
            let mut diffs: Vec<Vec<Vec<Rational>>> = Vec::new();
            for k in 0..levels {
                let rows = dims[k + 1];
                let cols = dims[k];
                let mut m = vec![vec![Rational::zero(); cols]; rows];
                let t_in = self.top_dims[k];
                let t_out = if k + 1 < levels { self.top_dims[k + 1] } else { 0 };
                if k + 1 < levels {
                    let d = self.top_diffs[k].eval(p);
                    for (r, row) in d.iter().enumerate() {
                        for (c, x) in row.iter().enumerate() {
                            m[r][c] = x.clone();
                        }
                    }
                }
                let f = self.verticals[k].eval(p);
                for (r, row) in f.iter().enumerate() {
                    for (c, x) in row.iter().enumerate() {
                        m[t_out + r][c] = x.clone();
                    }
                }
                if k >= 1 {
                    let d = self.bottom_diffs[k - 1].eval(p);
                    for (r, row) in d.iter().enumerate() {
                        for (c, x) in row.iter().enumerate() {
                            m[t_out + r][t_in + c] = -x.clone();
                        }
                    }
                }
                diffs.push(m);
            }
            let mut prev_rank = 0usize;
            for k in 0..=levels {
                let rank = if k < levels { rational_rank(diffs[k].clone()) } else { 0 };
                if prev_rank + rank != dims[k] {
                    ok = false;
                    witness = format!(
                        "cone cohomology nonzero in degree {k} at point ({})",
                        p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
                    );
                    break 'points;
                }
                prev_rank = rank;
            }
        }
        v.record("cone-acyclic", ok, || witness);
    }
}

/// Build the comparison map of complexes for the given data.
fn comparison_of(s: &ShiftedSymplecticData) -> Comparison {
    let ring = s.ring().clone();
    let n = ring.nvars();
    let a = s.algebroid();
    match s.shift {
        0 => {
            let r = a.complex().rank(0);
            let anchor = a.anchor_matrix();
            // ι_{∂_i}B as the matrix of the map 𝒯 → 𝒯^∨.
            let b = s.base_two_form().expect("shift-0 data has a two-form");
            let bmat = Matrix::from_fn(&ring, n, n, |row, col| {
                let contracted = contract(&ring.partial(col), b).expect("two-form contraction");
                let mut out = ring.zero();
                for (idx, c) in contracted.terms() {
                    if idx == &[row] {
                        out = out.add(c);
                    }
                }
                out
            });
            Comparison {
                top_dims: vec![r, n, 0],
                top_diffs: vec![anchor.clone(), Matrix::zero(&ring, 0, n)],
                bottom_dims: vec![0, n, r],
                bottom_diffs: vec![Matrix::zero(&ring, n, 0), anchor.transpose()],
                verticals: vec![Matrix::zero(&ring, 0, r), bmat, Matrix::zero(&ring, r, 0)],
            }
        }
        2 => {
            let r0 = a.complex().rank(0);
            let r1 = a.complex().rank(1);
            let delta = a
                .complex()
                .diff(1)
                .cloned()
                .unwrap_or_else(|| Matrix::zero(&ring, r0, 0));
            let anchor = a.anchor_matrix();
            let phi_mat = Matrix::from_fn(&ring, n, r1, |row, col| {
                let mut out = ring.zero();
                for (idx, c) in s.phi[col].terms() {
                    if idx == &[row] {
                        out = out.add(c);
                    }
                }
                out
            });
            let half_q = Matrix::from_fn(&ring, r0, r0, |row, col| {
                s.q_pairing.at(row, col).scale(&crate::exact::qr(1, 2))
            });
            Comparison {
                top_dims: vec![r1, r0, n],
                top_diffs: vec![delta.clone(), anchor.clone()],
                bottom_dims: vec![n, r0, r1],
                bottom_diffs: vec![anchor.transpose(), delta.transpose()],
                verticals: vec![phi_mat.clone(), half_q, phi_mat.transpose()],
            }
        }
        other => unreachable!("unsupported shift {other}"),
    }
}

/// Verify nondegeneracy of the comparison map from the tangent complex to the
/// shifted dual complex.
///
/// In sampled mode the point list must be nonempty.
pub fn verify_nondegenerate(
    s: &ShiftedSymplecticData,
    mode: Mode,
    sample_points: &[Vec<Rational>],
) -> Result<Verdict> {
    let mut v = Verdict::new();
    let cmp = comparison_of(s);
    match mode {
        Mode::Strict => cmp.strict(&mut v),
        Mode::Sampled => {
            if sample_points.is_empty() {
                return Err(Error::Structure("sampled mode needs at least one point".into()));
            }
            cmp.sampled(&mut v, sample_points);
        }
    }
    Ok(v)
}

/// Verify the four closure equations of a shift-2 structure on all basis
/// tuples, plus coefficient probes (each slot rescaled by a ring variable)
/// that pin the tensoriality of the cubic equation.
pub fn verify_closure_shift2(s: &ShiftedSymplecticData) -> Result<Verdict> {
    if s.shift != 2 {
        return Err(Error::Structure("closure equations require shift-2 data".into()));
    }
    let a = s.algebroid().clone();
    let ring = s.ring().clone();
    let r0 = a.complex().rank(0);
    let r1 = a.complex().rank(1);
    let mut v = Verdict::new();

    // Chain compatibility of the pairing: 2Q(δu, x) + ι_{ax}φ(u) = 0.
    let mut ok = true;
    let mut witness = String::new();
    'eq4: for ui in 0..r1 {
        for xi in 0..r0 {
            let u = a.complex().basis_elem(1, ui);
            let x = a.complex().basis_elem(0, xi);
            let du = a.complex().apply_diff(&u);
            let lhs = s
                .q_of(&du, &x)
                .scale(&q(2))
                .add(&pair_vf_form(&a.anchor(&x), &s.phi_of(&u)));
            if !lhs.is_zero() {
                ok = false;
                witness = format!(
                    "({}, {}): 2Q(∂u, x) + ι_{{ax}}φ(u) = {lhs}",
                    a.complex().basis(1)[ui],
                    a.complex().basis(0)[xi]
                );
                break 'eq4;
            }
        }
    }
    v.record("chain-pairing", ok, || witness);

    // Action compatibility: 𝓛_{ax}φ(u) − φ([x,u]) − ψ(x,∂u) + dQ(x,∂u) = 0.
    let mut ok = true;
    let mut witness = String::new();
    'eq2: for xi in 0..r0 {
        for ui in 0..r1 {
            let x = a.complex().basis_elem(0, xi);
            let u = a.complex().basis_elem(1, ui);
            let du = a.complex().apply_diff(&u);
            let lhs = lie_derivative(&a.anchor(&x), &s.phi_of(&u))?
                .sub(&s.phi_of(&a.bracket(&x, &u)))
                .sub(&s.psi_of(&x, &du))
                .add(&poly_differential(&s.q_of(&x, &du)));
            if !lhs.is_zero() {
                ok = false;
                witness = format!(
                    "({}, {}): action closure fails: {lhs:?}",
                    a.complex().basis(0)[xi],
                    a.complex().basis(1)[ui]
                );
                break 'eq2;
            }
        }
    }
    v.record("action-closure", ok, || witness);

    // Pairing invariance on triples:
    // [3𝓛_{ay}Q(x,z) − 2Q(x,[y,z]) + ι_{ax}ψ(y,z)] − (x↔y)
    //   + 4Q([x,y],z) − 2ι_{az}ψ(x,y) = 0.
    let half_term = |x: &crate::algebroid::Section,
                     y: &crate::algebroid::Section,
                     z: &crate::algebroid::Section|
     -> Poly {
        a.anchor(y)
            .apply(&s.q_of(x, z))
            .scale(&q(3))
            .sub(&s.q_of(x, &a.bracket(y, z)).scale(&q(2)))
            .add(&pair_vf_form(&a.anchor(x), &s.psi_of(y, z)))
    };
    let mut ok = true;
    let mut witness = String::new();
    'eq3: for xi in 0..r0 {
        for yi in 0..r0 {
            for zi in 0..r0 {
                let x = a.complex().basis_elem(0, xi);
                let y = a.complex().basis_elem(0, yi);
                let z = a.complex().basis_elem(0, zi);
                let lhs = half_term(&x, &y, &z)
                    .sub(&half_term(&y, &x, &z))
                    .add(&s.q_of(&a.bracket(&x, &y), &z).scale(&q(4)))
                    .sub(&pair_vf_form(&a.anchor(&z), &s.psi_of(&x, &y)).scale(&q(2)));
                if !lhs.is_zero() {
                    ok = false;
                    witness = format!(
                        "({}, {}, {}): pairing invariance fails: {lhs}",
                        a.complex().basis(0)[xi],
                        a.complex().basis(0)[yi],
                        a.complex().basis(0)[zi]
                    );
                    break 'eq3;
                }
            }
        }
    }
    v.record("pairing-invariance", ok, || witness);

    // Cubic closure on triples, cyclic in the first three terms:
    // Σ_cyc [𝓛_{ax}ψ(y,z) + ψ(x,[y,z]) − ⅓d(Q(x,[y,z]) + ι_{ax}ψ(y,z))]
    //   + ι_{ax}ι_{ay}ι_{az}K = φ(l₃(x,y,z)).
    let cyc_term = |x: &crate::algebroid::Section,
                    y: &crate::algebroid::Section,
                    z: &crate::algebroid::Section|
     -> Result<BaseForm> {
        let byz = a.bracket(y, z);
        let inner = s
            .q_of(x, &byz)
            .add(&pair_vf_form(&a.anchor(x), &s.psi_of(y, z)));
        Ok(lie_derivative(&a.anchor(x), &s.psi_of(y, z))?
            .add(&s.psi_of(x, &byz))
            .sub(&poly_differential(&inner).scale_rat(&crate::exact::qr(1, 3))))
    };
    let cubic = |x: &crate::algebroid::Section,
                 y: &crate::algebroid::Section,
                 z: &crate::algebroid::Section|
     -> Result<BaseForm> {
        let mut lhs = cyc_term(x, y, z)?
            .add(&cyc_term(y, z, x)?)
            .add(&cyc_term(z, x, y)?);
        lhs = lhs.sub(&s.phi_of(&a.bracket3(x, y, z)));
        let kxyz = contract(
            &a.anchor(z),
            &contract(&a.anchor(y), &contract(&a.anchor(x), &s.k_form)?)?,
        )?;
        Ok(lhs.add(&kxyz))
    };
    let mut ok = true;
    let mut witness = String::new();
    'eq1: for xi in 0..r0 {
        for yi in (xi + 1)..r0 {
            for zi in (yi + 1)..r0 {
                let x = a.complex().basis_elem(0, xi);
                let y = a.complex().basis_elem(0, yi);
                let z = a.complex().basis_elem(0, zi);
                let lhs = cubic(&x, &y, &z)?;
                if !lhs.is_zero() {
                    ok = false;
                    witness = format!(
                        "({}, {}, {}): cubic closure fails",
                        a.complex().basis(0)[xi],
                        a.complex().basis(0)[yi],
                        a.complex().basis(0)[zi]
                    );
                    break 'eq1;
                }
                // Coefficient probe: the equation is tensorial, so rescaling
                // one argument by a variable must preserve it.
                for var in 0..ring.nvars().min(2) {
                    let fx = x.scale(&ring.var(var));
                    let lhs = cubic(&fx, &y, &z)?;
                    if !lhs.is_zero() {
                        ok = false;
                        witness = format!(
                            "({}·{}, {}, {}): cubic closure probe fails",
                            ring.vars()[var],
                            a.complex().basis(0)[xi],
                            a.complex().basis(0)[yi],
                            a.complex().basis(0)[zi]
                        );
                        break 'eq1;
                    }
                }
            }
        }
    }
    v.record("cubic-closure", ok, || witness);
    Ok(v)
}

/// Verify a zero-shifted symplectic structure: the two-form is closed,
/// annihilated by anchor contraction, the anchor has full rank at every
/// sample point (regular foliation), and the transverse pairing is
/// nondegenerate at every sample point.
pub fn verify_zero_shifted(
    a: &Algebroid,
    b: &BaseForm,
    sample_points: &[Vec<Rational>],
) -> Result<Verdict> {
    let s = ShiftedSymplecticData::shift_zero(a, b.clone())?;
    let mut v = Verdict::new();
    let db = de_rham_d(b);
    v.record("base-closed", db.is_zero(), || "dB ≠ 0".into());
    let mut ok = true;
    let mut witness = String::new();
    for i in 0..a.complex().rank(0) {
        let c = contract(a.anchor_of_basis(i), b)?;
        if !c.is_zero() {
            ok = false;
            witness = format!(
                "ι_{{a {}}}B ≠ 0",
                a.complex().basis(0)[i]
            );
            break;
        }
    }
    v.record("anchor-isotropic", ok, || witness);
    let r = a.complex().rank(0);
    let anchor = a.anchor_matrix();
    let mut ok = true;
    let mut witness = String::new();
    for p in sample_points {
        if anchor.rank_at(p) != r {
            ok = false;
            witness = format!(
                "anchor rank drops at ({})",
                p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
            );
            break;
        }
    }
    v.record("foliation-regular", ok, || witness);
    comparison_of(&s).sampled(&mut v, sample_points);
    Ok(v)
}

/// Verify an invariant pairing on the kernel of a transitive Lie algebroid.
///
/// The kernel is framed by a subset of the level-0 basis (indices with zero
/// anchor); `g` is a bilinear form on that framing. Errors when the framing
/// is inconsistent with the anchor.
pub fn verify_transitive_pairing(
    a: &Algebroid,
    kernel: &[usize],
    g: &Matrix,
    sample_points: &[Vec<Rational>],
) -> Result<Verdict> {
    let r0 = a.complex().rank(0);
    for &k in kernel {
        if k >= r0 {
            return Err(Error::Structure("kernel index out of range".into()));
        }
        if !a.anchor_of_basis(k).is_zero() {
            return Err(Error::Structure(format!(
                "kernel framing inconsistent with anchor: a({}) ≠ 0",
                a.complex().basis(0)[k]
            )));
        }
    }
    if g.rows() != kernel.len() || g.cols() != kernel.len() {
        return Err(Error::Structure("pairing must be square on the kernel framing".into()));
    }
    let pos = |idx: usize| kernel.iter().position(|&k| k == idx);
    let mut v = Verdict::new();
    let mut ok = true;
    let mut witness = String::new();
    for p in sample_points {
        if a.anchor_matrix().rank_at(p) != a.ring().nvars() {
            ok = false;
            witness = format!(
                "anchor not surjective at ({})",
                p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
            );
            break;
        }
    }
    v.record("anchor-surjective", ok, || witness);
    v.record("pairing-symmetric", g.sub(&g.transpose()).is_zero(), || {
        "g is not symmetric".into()
    });
    let det = g.det();
    v.record(
        "pairing-nondegenerate",
        matches!(det.as_constant(), Some(c) if !c.is_zero()),
        || format!("det g = {det} is not a unit"),
    );
    // Evaluate g on a kernel-supported section against a framing element.
    let g_of = |sec: &crate::algebroid::Section, vj: usize| -> Option<Poly> {
        let mut out = a.ring().zero();
        for (&(level, idx), c) in sec.terms() {
            if level != 0 {
                return None;
            }
            let i = pos(idx)?;
            out = out.add(&g.at(i, vj).mul(c));
        }
        Some(out)
    };
    let mut ok = true;
    let mut witness = String::new();
    'inv: for xi in 0..r0 {
        for (ui, &u) in kernel.iter().enumerate() {
            for (vi, &w) in kernel.iter().enumerate() {
                let x = a.complex().basis_elem(0, xi);
                let us = a.complex().basis_elem(0, u);
                let ws = a.complex().basis_elem(0, w);
                let bxu = a.bracket(&x, &us);
                let bxw = a.bracket(&x, &ws);
                let (gu, gw) = match (g_of(&bxu, vi), g_of(&bxw, ui)) {
                    (Some(gu), Some(gw)) => (gu, gw),
                    _ => {
                        ok = false;
                        witness = format!(
                            "bracket [{}, kernel] leaves the kernel framing",
                            a.complex().basis(0)[xi]
                        );
                        break 'inv;
                    }
                };
                let lhs = a.anchor(&x).apply(&g.at(ui, vi).clone());
                let rhs = gu.add(&gw);
                if !lhs.sub(&rhs).is_zero() {
                    ok = false;
                    witness = format!(
                        "({}, {}, {}): invariance fails: {} vs {}",
                        a.complex().basis(0)[xi],
                        a.complex().basis(0)[u],
                        a.complex().basis(0)[w],
                        lhs,
                        rhs
                    );
                    break 'inv;
                }
            }
        }
    }
    v.record("pairing-invariant", ok, || witness);
    Ok(v)
}

/// Truncate an algebroid to the amplitude allowed by a shift-q symplectic
/// structure, transferring the brackets along the evident retract.
///
/// For q = 2 a two-term algebroid is already in amplitude; for q = 1 the
/// quotient by the image of the differential must be framed by a subset of
/// the level-0 basis (`split`, found automatically when omitted), and the
/// differential must be a constant injective matrix — otherwise the quotient
/// is not free on the given data and an error is reported.
pub fn amplitude_truncate(
    a: &Algebroid,
    shift: u8,
    split: Option<&[usize]>,
) -> Result<(Algebroid, Morphism)> {
    match shift {
        2 => {
            if !a.is_two_term() {
                return Err(Error::Structure(
                    "shift-2 truncation expects at most two terms".into(),
                ));
            }
            let (t, m) = (a.clone(), Morphism::identity(a));
            Ok((t, m))
        }
        1 => {
            let ring = a.ring().clone();
            let r0 = a.complex().rank(0);
            let r1 = a.complex().rank(1);
            if r1 == 0 {
                return Ok((a.clone(), Morphism::identity(a)));
            }
            let delta = a.complex().diff(1).expect("two-term complex").clone();
            let mut dmat = vec![vec![Rational::zero(); r1]; r0];
            for i in 0..r0 {
                for j in 0..r1 {
                    match delta.at(i, j).as_constant() {
                        Some(c) => dmat[i][j] = c,
                        None => {
                            return Err(Error::Structure(
                                "quotient by a non-constant differential is not framed".into(),
                            ))
                        }
                    }
                }
            }
            if rational_rank(dmat.clone()) != r1 {
                return Err(Error::Structure(
                    "differential is not injective; cohomology survives below the shift".into(),
                ));
            }
            // Choose complement indices S with [∂ | e_S] invertible.
            let choose = |candidate: &[usize]| -> Option<Vec<Vec<Rational>>> {
                if candidate.len() != r0 - r1 {
                    return None;
                }
                let mut m = vec![vec![Rational::zero(); r0]; r0];
                for (j, col) in (0..r1).enumerate() {
                    for i in 0..r0 {
                        m[i][j] = dmat[i][col].clone();
                    }
                }
                for (j, &s) in candidate.iter().enumerate() {
                    m[s][r1 + j] = Rational::one();
                }
                invert_rational(&m)
            };
            let (subset, inv) = match split {
                Some(s) => match choose(s) {
                    Some(inv) => (s.to_vec(), inv),
                    None => {
                        return Err(Error::Structure(
                            "provided split does not complement the differential image".into(),
                        ))
                    }
                },
                None => {
                    let mut found = None;
                    let mut subset = first_subset(r0, r0 - r1);
                    loop {
                        if let Some(inv) = choose(&subset) {
                            found = Some((subset.clone(), inv));
                            break;
                        }
                        if !next_subset(&mut subset, r0) {
                            break;
                        }
                    }
                    found.ok_or_else(|| {
                        Error::Structure("no basis subset frames the quotient".into())
                    })?
                }
            };
            // Retract data: p = S-rows of M⁻¹, h = first r1 rows of M⁻¹,
            // i = inclusion of the chosen basis subset.
            let rs = subset.len();
            let p0 = Matrix::from_fn(&ring, rs, r0, |r, c| {
                ring.constant(inv[r1 + r][c].clone())
            });
            // Retract convention here is ip − id = ∂h + h∂, hence the sign.
            let h0 = Matrix::from_fn(&ring, r1, r0, |r, c| ring.constant(-inv[r][c].clone()));
            let i0 = Matrix::from_fn(&ring, r0, rs, |r, c| {
                if subset[c] == r { ring.one() } else { ring.zero() }
            });
            let names: Vec<String> = subset
                .iter()
                .map(|&s| a.complex().basis(0)[s].clone())
                .collect();
            let sub = Complex::new(
                &ring,
                vec![names, Vec::new()],
                vec![Matrix::zero(&ring, rs, 0)],
            )?;
            let retract = Retract::new(
                sub,
                a.complex().clone(),
                vec![i0, Matrix::zero(&ring, r1, 0)],
                vec![p0, Matrix::zero(&ring, 0, r1)],
                vec![h0],
            )?;
            transfer_structure(a, &retract)
        }
        // Shift 0 forces the same amplitude as shift 1: a single bundle.
        0 => amplitude_truncate(a, 1, split),
        other => Err(Error::Structure(format!("unsupported shift {other}"))),
    }
}

/// Invert a square rational matrix, returning None when singular.
fn invert_rational(m: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = m.len();
    let mut a: Vec<Vec<Rational>> = m.to_vec();
    let mut inv = vec![vec![Rational::zero(); n]; n];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = Rational::one();
    }
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].clone();
        for x in a[col].iter_mut() {
            *x /= p.clone();
        }
        for x in inv[col].iter_mut() {
            *x /= p.clone();
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in 0..n {
                    let ac = a[col][c].clone();
                    a[r][c] -= f.clone() * ac;
                    let ic = inv[col][c].clone();
                    inv[r][c] -= f.clone() * ic;
                }
            }
        }
    }
    Some(inv)
}

fn first_subset(_n: usize, k: usize) -> Vec<usize> {
    (0..k).collect()
}

/// Advance a strictly increasing index subset in lexicographic order.
fn next_subset(s: &mut [usize], n: usize) -> bool {
    let k = s.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if s[i] + 1 <= n - (k - i) {
            s[i] += 1;
            for j in i + 1..k {
                s[j] = s[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
