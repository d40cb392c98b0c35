//! Line-oriented textual definition format for the structures in this crate,
//! with a canonical pretty-printer, a command dispatcher, and machine-readable
//! verification reports.
//!
//! A document declares one structure. It opens with a `kind` line
//! (`linfty | courant | dirac | symplectic | retract | morphism`), optional
//! `label` and `expect pass|fail` metadata, and a `ring` line naming the base
//! variables; the body is a sequence of keyword lines whose right-hand sides
//! are infix polynomial expressions over the declared names. Atoms are
//! rational literals (`3`, `1/2`), ring variables (`x`), coordinate
//! differentials (`dx`), coordinate vector fields (`@x`), and declared basis
//! names; `*` and `^` both denote the graded product (wedge on forms), with
//! `^` doubling as integer exponentiation on scalars. All referenced names
//! must be declared before use; diagnostics carry exact line/column positions.
//!
//! The pretty-printer emits canonicalized documents, and parsing is a left
//! inverse of printing. Reports serialize deterministically: identical
//! (document, command, seed) inputs produce byte-identical JSON.

use std::collections::BTreeMap;

use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::algebroid::{
    build_ce_differential, extract_brackets, transfer_structure, verify_linfty, verify_morphism,
    verify_retract, Algebroid, Complex, Morphism, Retract, Section,
};
use crate::courant::{
    check_coisotropic, courant_to_symplectic, graph_dirac, make_h_twist, make_standard,
    symplectic_to_courant, verify_courant_axioms, verify_dirac, BracketExtension, CourantData,
    DiracData, MetricConnection,
};
use crate::exact::{BaseForm, Poly, Rational, Ring, VectorField};
use crate::forms::FormsContext;
use crate::graded::{check_square_zero, GCAElement, GenTable};
use crate::matrix::Matrix;
use crate::symplectic::{
    default_sample_points, verify_closure_shift2, verify_nondegenerate, verify_zero_shifted, Mode,
    ShiftedSymplecticData,
};
use crate::verdict::Verdict;
use crate::{Error, Result};

/// Version identifier of the JSON report schema.
pub const REPORT_SCHEMA: &str = "gradedkit-report/1";

/// Structure kinds expressible as documents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// An L∞ algebroid (optionally carrying a mixed-form cocycle).
    Linfty,
    /// A (twisted) Courant structure.
    Courant,
    /// A Dirac structure in an ambient Courant structure.
    Dirac,
    /// Shifted symplectic data (shift 0 or 2).
    Symplectic,
    /// A special deformation retract of complexes.
    Retract,
    /// A morphism of L∞ algebroids.
    Morphism,
}

impl Kind {
    /// The keyword used in documents and reports.
    pub fn name(self) -> &'static str {
        match self {
            Kind::Linfty => "linfty",
            Kind::Courant => "courant",
            Kind::Dirac => "dirac",
            Kind::Symplectic => "symplectic",
            Kind::Retract => "retract",
            Kind::Morphism => "morphism",
        }
    }
}

/// How a Dirac subbundle is presented.
#[derive(Clone, Debug)]
pub enum DiracFrame {
    /// Graph of a skew bivector matrix over the untwisted standard structure.
    Graph(Matrix),
    /// An explicit rank × (rank/2) generator matrix.
    Explicit(Matrix),
}

/// A parsed document: one structure plus corpus metadata.
#[derive(Clone, Debug)]
pub struct SpecDocument {
    /// Structure kind.
    pub kind: Kind,
    /// Optional fixture label.
    pub label: Option<String>,
    /// Expected overall verdict, for corpus regression tests.
    pub expect: Option<bool>,
    /// The declared base ring.
    pub ring: Ring,
    /// The structure payload.
    pub body: Body,
}

/// Kind-specific payload of a document.
#[derive(Clone, Debug)]
pub enum Body {
    /// An algebroid, optionally with a mixed-form cocycle to normalize.
    Linfty {
        /// The algebroid.
        algebroid: Algebroid,
        /// Form degree and cocycle for the `normalize` command.
        cocycle: Option<(u32, GCAElement)>,
    },
    /// A Courant structure.
    Courant {
        /// The structure data.
        data: CourantData,
    },
    /// A Dirac structure with its ambient Courant structure.
    Dirac {
        /// The ambient structure.
        ambient: CourantData,
        /// The subbundle presentation.
        frame: DiracFrame,
        /// Indices of support variables (coordinate subvariety).
        killed: Vec<usize>,
    },
    /// Shifted symplectic data.
    Symplectic {
        /// The structure data.
        data: ShiftedSymplecticData,
    },
    /// A special deformation retract.
    Retract {
        /// The retract data.
        retract: Retract,
    },
    /// An algebroid morphism.
    Morphism {
        /// The morphism data.
        morphism: Morphism,
    },
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum TokKind {
    Ident(String),
    Num(Rational),
    Sym(char),
}

#[derive(Clone, Debug)]
struct Tok {
    kind: TokKind,
    /// 1-based column of the first character.
    col: usize,
}

fn lex_line(file: &str, line_no: usize, text: &str) -> Result<Vec<Tok>> {
    let mut toks = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let num: String = chars[start..i].iter().collect();
            let mut den = String::new();
            if i + 1 < chars.len() && chars[i] == '/' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                den = chars[start + num.len() + 1..i].iter().collect();
            }
            let n: num::BigInt = num.parse().expect("digits parse");
            let d: num::BigInt = if den.is_empty() {
                num::BigInt::one()
            } else {
                den.parse().expect("digits parse")
            };
            if d.is_zero() {
                return Err(parse_err(file, line_no, col, "rational literal with zero denominator"));
            }
            toks.push(Tok { kind: TokKind::Num(Rational::new(n, d)), col });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            while i < chars.len() && chars[i] == '\'' {
                i += 1;
            }
            toks.push(Tok {
                kind: TokKind::Ident(chars[start..i].iter().collect()),
                col,
            });
            continue;
        }
        if "+-*^()[],;=@".contains(c) {
            toks.push(Tok { kind: TokKind::Sym(c), col });
            i += 1;
            continue;
        }
        return Err(parse_err(file, line_no, col, &format!("unexpected character `{c}`")));
    }
    Ok(toks)
}

fn parse_err(file: &str, line: usize, col: usize, msg: &str) -> Error {
    Error::Parse {
        file: file.to_string(),
        line,
        col,
        msg: msg.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Expression values
// ---------------------------------------------------------------------------

/// A value of the expression language.
#[derive(Clone, Debug)]
enum Value {
    Scalar(Poly),
    Form(BaseForm),
    Vf(VectorField),
    Sec(Section),
    Mixed(GCAElement),
}

impl Value {
    fn is_zero(&self) -> bool {
        match self {
            Value::Scalar(p) => p.is_zero(),
            Value::Form(f) => f.is_zero(),
            Value::Vf(v) => v.is_zero(),
            Value::Sec(s) => s.is_zero(),
            Value::Mixed(e) => e.is_zero(),
        }
    }

    fn neg(&self) -> Value {
        match self {
            Value::Scalar(p) => Value::Scalar(p.neg()),
            Value::Form(f) => Value::Form(f.neg()),
            Value::Vf(v) => Value::Vf(v.neg()),
            Value::Sec(s) => Value::Sec(s.neg()),
            Value::Mixed(e) => Value::Mixed(e.neg()),
        }
    }
}

/// Name-resolution scope for expression atoms.
enum Scope<'a> {
    /// Scalars, base forms, and vector fields only.
    Base,
    /// Additionally resolves basis names to sections via the given map.
    Sections(&'a BTreeMap<String, (usize, usize)>),
    /// Mixed-form elements over the given generator table.
    Mixed(&'a GenTable),
}

struct EvalCx<'a> {
    ring: &'a Ring,
    scope: Scope<'a>,
    file: &'a str,
    line: usize,
}

impl<'a> EvalCx<'a> {
    fn err(&self, col: usize, msg: &str) -> Error {
        parse_err(self.file, self.line, col, msg)
    }

    fn resolve(&self, name: &str, col: usize) -> Result<Value> {
        if let Scope::Mixed(table) = &self.scope {
            // Dual generators are written with a trailing apostrophe in the
            // surface syntax (their table names end in `^`).
            let table_name = if let Some(stripped) = name.strip_suffix('\'') {
                format!("{stripped}^")
            } else {
                name.to_string()
            };
            if let Some(e) = table.gen_named(&table_name) {
                return Ok(Value::Mixed(e));
            }
            if let Some(p) = self.ring.var_named(name) {
                return Ok(Value::Mixed(table.scalar(p)));
            }
            return Err(self.err(col, &format!("unknown generator or variable `{name}`")));
        }
        if let Scope::Sections(map) = &self.scope {
            if let Some(&(level, idx)) = map.get(name) {
                let mut s = Section::zero(self.ring);
                s.add_term(level, idx, &self.ring.one());
                return Ok(Value::Sec(s));
            }
        }
        if let Some(p) = self.ring.var_named(name) {
            return Ok(Value::Scalar(p));
        }
        if let Some(var) = name.strip_prefix('d') {
            if let Some(i) = self.ring.vars().iter().position(|v| v == var) {
                return Ok(Value::Form(self.ring.dvar(i)));
            }
        }
        Err(self.err(col, &format!("unknown name `{name}`")))
    }

    fn add(&self, a: Value, b: Value, col: usize) -> Result<Value> {
        if a.is_zero() {
            return Ok(b);
        }
        if b.is_zero() {
            return Ok(a);
        }
        match (a, b) {
            (Value::Scalar(p), Value::Scalar(q)) => Ok(Value::Scalar(p.add(&q))),
            (Value::Form(f), Value::Form(g)) => {
                if f.degree() != g.degree() {
                    return Err(self.err(col, "cannot add forms of different degrees"));
                }
                Ok(Value::Form(f.add(&g)))
            }
            (Value::Scalar(p), Value::Form(g)) | (Value::Form(g), Value::Scalar(p)) => {
                if g.degree() != 0 {
                    return Err(self.err(col, "cannot add a scalar to a form of positive degree"));
                }
                Ok(Value::Form(g.add(&self.ring.form_from_poly(p))))
            }
            (Value::Vf(v), Value::Vf(w)) => Ok(Value::Vf(v.add(&w))),
            (Value::Sec(s), Value::Sec(t)) => Ok(Value::Sec(s.add(&t))),
            (Value::Mixed(e), Value::Mixed(f)) => Ok(Value::Mixed(e.add(&f))),
            _ => Err(self.err(col, "cannot add values of different types")),
        }
    }

    fn mul(&self, a: Value, b: Value, col: usize) -> Result<Value> {
        match (a, b) {
            (Value::Scalar(p), Value::Scalar(q)) => Ok(Value::Scalar(p.mul(&q))),
            (Value::Scalar(p), Value::Form(f)) | (Value::Form(f), Value::Scalar(p)) => {
                Ok(Value::Form(f.scale(&p)))
            }
            (Value::Form(f), Value::Form(g)) => Ok(Value::Form(f.wedge(&g))),
            (Value::Scalar(p), Value::Vf(v)) | (Value::Vf(v), Value::Scalar(p)) => {
                Ok(Value::Vf(v.scale(&p)))
            }
            (Value::Scalar(p), Value::Sec(s)) | (Value::Sec(s), Value::Scalar(p)) => {
                Ok(Value::Sec(s.scale(&p)))
            }
            (Value::Mixed(e), Value::Mixed(f)) => Ok(Value::Mixed(e.mul(&f))),
            (Value::Scalar(p), Value::Mixed(e)) | (Value::Mixed(e), Value::Scalar(p)) => {
                Ok(Value::Mixed(e.scale(&p)))
            }
            _ => Err(self.err(col, "cannot multiply values of these types")),
        }
    }
}

// ---------------------------------------------------------------------------
// Line parser
// ---------------------------------------------------------------------------

struct LineParser<'a> {
    file: &'a str,
    line: usize,
    toks: &'a [Tok],
    pos: usize,
}

impl<'a> LineParser<'a> {
    fn new(file: &'a str, line: usize, toks: &'a [Tok]) -> Self {
        LineParser { file, line, toks, pos: 0 }
    }

    fn err_here(&self, msg: &str) -> Error {
        let col = self
            .toks
            .get(self.pos)
            .map(|t| t.col)
            .unwrap_or_else(|| self.toks.last().map(|t| t.col + 1).unwrap_or(1));
        parse_err(self.file, self.line, col, msg)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if matches!(self.peek(), Some(Tok { kind: TokKind::Sym(s), .. }) if *s == c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            Err(self.err_here(&format!("expected `{c}`")))
        }
    }

    fn expect_ident(&mut self) -> Result<(String, usize)> {
        match self.peek().cloned() {
            Some(Tok { kind: TokKind::Ident(s), col }) => {
                self.pos += 1;
                Ok((s, col))
            }
            _ => Err(self.err_here("expected a name")),
        }
    }

    fn expect_usize(&mut self) -> Result<usize> {
        match self.peek().cloned() {
            Some(Tok { kind: TokKind::Num(r), col }) => {
                if r.is_integer() && !r.is_negative() {
                    self.pos += 1;
                    r.to_integer().try_into().map_err(|_| {
                        parse_err(self.file, self.line, col, "integer literal too large")
                    })
                } else {
                    Err(parse_err(self.file, self.line, col, "expected a nonnegative integer"))
                }
            }
            _ => Err(self.err_here("expected a nonnegative integer")),
        }
    }

    fn expect_end(&self) -> Result<()> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            Err(self.err_here("unexpected trailing tokens"))
        }
    }

    /// expr := term { (+|-) term }
    fn parse_expr(&mut self, cx: &EvalCx) -> Result<Value> {
        let mut acc = self.parse_term(cx)?;
        loop {
            let (op, col) = match self.peek() {
                Some(Tok { kind: TokKind::Sym(c @ ('+' | '-')), col }) => (*c, *col),
                _ => break,
            };
            self.pos += 1;
            let rhs = self.parse_term(cx)?;
            let rhs = if op == '-' { rhs.neg() } else { rhs };
            acc = cx.add(acc, rhs, col)?;
        }
        Ok(acc)
    }

    /// term := factor { (*|^) factor }, with `^ <integer>` as exponentiation
    /// on scalar bases.
    fn parse_term(&mut self, cx: &EvalCx) -> Result<Value> {
        let mut acc = self.parse_factor(cx)?;
        loop {
            let (op, col) = match self.peek() {
                Some(Tok { kind: TokKind::Sym(c @ ('*' | '^')), col }) => (*c, *col),
                _ => break,
            };
            self.pos += 1;
            if op == '^' {
                if let (Value::Scalar(base), Some(Tok { kind: TokKind::Num(r), col: ncol })) =
                    (&acc, self.peek())
                {
                    if r.is_integer() && !r.is_negative() {
                        let e: u32 = r.to_integer().try_into().map_err(|_| {
                            parse_err(self.file, self.line, *ncol, "exponent too large")
                        })?;
                        self.pos += 1;
                        acc = Value::Scalar(base.pow(e));
                        continue;
                    }
                }
            }
            let rhs = self.parse_factor(cx)?;
            acc = cx.mul(acc, rhs, col)?;
        }
        Ok(acc)
    }

    /// factor := '-' factor | atom
    fn parse_factor(&mut self, cx: &EvalCx) -> Result<Value> {
        if self.eat_sym('-') {
            return Ok(self.parse_factor(cx)?.neg());
        }
        self.parse_atom(cx)
    }

    fn parse_atom(&mut self, cx: &EvalCx) -> Result<Value> {
        match self.peek().cloned() {
            Some(Tok { kind: TokKind::Num(r), .. }) => {
                self.pos += 1;
                Ok(Value::Scalar(cx.ring.constant(r)))
            }
            Some(Tok { kind: TokKind::Ident(name), col }) => {
                self.pos += 1;
                cx.resolve(&name, col)
            }
            Some(Tok { kind: TokKind::Sym('@'), col }) => {
                self.pos += 1;
                let (name, ncol) = self.expect_ident()?;
                match cx.ring.vars().iter().position(|v| *v == name) {
                    Some(i) => Ok(Value::Vf(cx.ring.partial(i))),
                    None => Err(parse_err(self.file, self.line, ncol, &format!("unknown variable `{name}`"))),
                }
                .map_err(|e| {
                    let _ = col;
                    e
                })
            }
            Some(Tok { kind: TokKind::Sym('('), .. }) => {
                self.pos += 1;
                let v = self.parse_expr(cx)?;
                self.expect_sym(')')?;
                Ok(v)
            }
            _ => Err(self.err_here(
                "expected a number, name, `@` vector field, or parenthesized expression",
            )),
        }
    }

    /// matrix := '[' [ row { ';' row } ] ']'; row := expr { ',' expr }
    fn parse_matrix(&mut self, cx: &EvalCx) -> Result<Matrix> {
        self.expect_sym('[')?;
        let mut rows: Vec<Vec<Poly>> = Vec::new();
        if !self.eat_sym(']') {
            loop {
                let mut row = Vec::new();
                loop {
                    let col = self.peek().map(|t| t.col).unwrap_or(1);
                    let v = self.parse_expr(cx)?;
                    row.push(self.value_to_scalar(v, col)?);
                    if !self.eat_sym(',') {
                        break;
                    }
                }
                if let Some(prev) = rows.first() {
                    if prev.len() != row.len() {
                        return Err(self.err_here("matrix rows have unequal lengths"));
                    }
                }
                rows.push(row);
                if self.eat_sym(']') {
                    break;
                }
                self.expect_sym(';')?;
            }
        }
        let nrows = rows.len();
        let ncols = rows.first().map(Vec::len).unwrap_or(0);
        Ok(Matrix::from_fn(cx.ring, nrows, ncols, |r, c| rows[r][c].clone()))
    }

    fn value_to_scalar(&self, v: Value, col: usize) -> Result<Poly> {
        match v {
            Value::Scalar(p) => Ok(p),
            Value::Form(f) if f.degree() == 0 => {
                let mut acc = f.ring().zero();
                for (_, c) in f.terms() {
                    acc = acc.add(c);
                }
                Ok(acc)
            }
            _ => Err(parse_err(self.file, self.line, col, "expected a scalar expression")),
        }
    }
}

// ---------------------------------------------------------------------------
// Document parsing
// ---------------------------------------------------------------------------

/// One lexed source line.
struct Line {
    no: usize,
    toks: Vec<Tok>,
}

fn lex_document(file: &str, text: &str) -> Result<Vec<Line>> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let toks = lex_line(file, i + 1, raw)?;
        if !toks.is_empty() {
            lines.push(Line { no: i + 1, toks });
        }
    }
    Ok(lines)
}

/// Accumulated body of an algebroid (shared by linfty, symplectic, and
/// morphism blocks).
#[derive(Default)]
struct AlgebroidBuilder {
    levels: Vec<Vec<String>>,
    names: BTreeMap<String, (usize, usize)>,
    diffs: BTreeMap<usize, Matrix>,
    anchors: Vec<(String, usize, usize, VectorField)>,
    binaries: Vec<((usize, usize), (usize, usize), Section)>,
    ternaries: Vec<(usize, usize, usize, Section)>,
}

impl AlgebroidBuilder {
    fn lookup(&self, file: &str, line: usize, name: &str, col: usize) -> Result<(usize, usize)> {
        self.names
            .get(name)
            .copied()
            .ok_or_else(|| parse_err(file, line, col, &format!("undeclared basis name `{name}`")))
    }

    /// Try to consume one body line; returns false when the keyword is not an
    /// algebroid keyword.
    fn handle(&mut self, ring: &Ring, kw: &str, p: &mut LineParser) -> Result<bool> {
        match kw {
            "level" => {
                let n = p.expect_usize()?;
                if n != self.levels.len() {
                    return Err(p.err_here(&format!(
                        "levels must be declared in order; expected level {}",
                        self.levels.len()
                    )));
                }
                p.expect_sym('=')?;
                let mut basis = Vec::new();
                while p.peek().is_some() {
                    let (name, col) = p.expect_ident()?;
                    if self.names.contains_key(&name) {
                        return Err(parse_err(p.file, p.line, col, &format!("duplicate basis name `{name}`")));
                    }
                    self.names.insert(name.clone(), (n, basis.len()));
                    basis.push(name);
                }
                self.levels.push(basis);
                Ok(true)
            }
            "diff" => {
                let n = p.expect_usize()?;
                if n == 0 || n >= self.levels.len().max(1) {
                    return Err(p.err_here("differential index must name a declared positive level"));
                }
                p.expect_sym('=')?;
                let cx = EvalCx { ring, scope: Scope::Base, file: p.file, line: p.line };
                let m = p.parse_matrix(&cx)?;
                p.expect_end()?;
                self.diffs.insert(n, m);
                Ok(true)
            }
            "anchor" => {
                let (name, col) = p.expect_ident()?;
                let (level, idx) = self.lookup(p.file, p.line, &name, col)?;
                if level != 0 {
                    return Err(parse_err(p.file, p.line, col, "anchors live on level-0 basis elements"));
                }
                p.expect_sym('=')?;
                let cx = EvalCx { ring, scope: Scope::Base, file: p.file, line: p.line };
                let col2 = p.peek().map(|t| t.col).unwrap_or(1);
                let v = p.parse_expr(&cx)?;
                p.expect_end()?;
                let vf = match v {
                    Value::Vf(vf) => vf,
                    v if v.is_zero() => ring.zero_vf(),
                    _ => return Err(parse_err(p.file, p.line, col2, "expected a vector field expression")),
                };
                self.anchors.push((name, level, idx, vf));
                Ok(true)
            }
            "binary" => {
                let (n1, c1) = p.expect_ident()?;
                let (n2, c2) = p.expect_ident()?;
                let a = self.lookup(p.file, p.line, &n1, c1)?;
                let b = self.lookup(p.file, p.line, &n2, c2)?;
                p.expect_sym('=')?;
                let s = self.parse_section(ring, p)?;
                self.binaries.push((a, b, s));
                Ok(true)
            }
            "ternary" => {
                let (n1, c1) = p.expect_ident()?;
                let (n2, c2) = p.expect_ident()?;
                let (n3, c3) = p.expect_ident()?;
                let a = self.lookup(p.file, p.line, &n1, c1)?;
                let b = self.lookup(p.file, p.line, &n2, c2)?;
                let c = self.lookup(p.file, p.line, &n3, c3)?;
                for ((l, _), col) in [(a, c1), (b, c2), (c, c3)] {
                    if l != 0 {
                        return Err(parse_err(p.file, p.line, col, "ternary brackets take level-0 arguments"));
                    }
                }
                p.expect_sym('=')?;
                let s = self.parse_section(ring, p)?;
                self.ternaries.push((a.1, b.1, c.1, s));
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    fn parse_section(&self, ring: &Ring, p: &mut LineParser) -> Result<Section> {
        let cx = EvalCx { ring, scope: Scope::Sections(&self.names), file: p.file, line: p.line };
        let col = p.peek().map(|t| t.col).unwrap_or(1);
        let v = p.parse_expr(&cx)?;
        p.expect_end()?;
        match v {
            Value::Sec(s) => Ok(s),
            v if v.is_zero() => Ok(Section::zero(ring)),
            _ => Err(parse_err(p.file, p.line, col, "expected a section expression")),
        }
    }

    fn finalize(self, file: &str, ring: &Ring) -> Result<Algebroid> {
        let nlevels = self.levels.len();
        let mut diffs = Vec::new();
        for n in 1..nlevels {
            let expected = (self.levels[n - 1].len(), self.levels[n].len());
            let m = match self.diffs.get(&n) {
                Some(m) if m.rows() == 0 && m.cols() == 0 && (expected.0 == 0 || expected.1 == 0) => {
                    Matrix::zero(ring, expected.0, expected.1)
                }
                Some(m) => m.clone(),
                None => Matrix::zero(ring, expected.0, expected.1),
            };
            diffs.push(m);
        }
        let complex = Complex::new(ring, self.levels, diffs)?;
        let mut anchor = vec![ring.zero_vf(); complex.rank(0)];
        for (_, _, idx, vf) in &self.anchors {
            anchor[*idx] = vf.clone();
        }
        let mut a = Algebroid::new(complex, anchor)?;
        for (x, y, s) in self.binaries {
            a.set_binary(x, y, s)?;
        }
        for (i, j, k, s) in self.ternaries {
            a.set_ternary(i, j, k, s)?;
        }
        let _ = file;
        Ok(a)
    }
}

/// Accumulated body of a Courant structure.
#[derive(Default)]
struct CourantBuilder {
    template: bool,
    twist: Option<BaseForm>,
    basis: Vec<String>,
    names: BTreeMap<String, (usize, usize)>,
    gram: Option<Matrix>,
    anchors: Vec<(usize, VectorField)>,
    brackets: Vec<(usize, usize, Vec<Poly>)>,
    kform: Option<BaseForm>,
    extension: Vec<(String, Rational)>,
}

impl CourantBuilder {
    fn handle(&mut self, ring: &Ring, kw: &str, p: &mut LineParser) -> Result<bool> {
        match kw {
            "template" => {
                let (name, col) = p.expect_ident()?;
                if name != "standard" {
                    return Err(parse_err(p.file, p.line, col, "the only template is `standard`"));
                }
                p.expect_end()?;
                self.template = true;
                let mut idx = 0;
                for prefix in ["t", "c"] {
                    for v in ring.vars() {
                        self.names.insert(format!("{prefix}_{v}"), (0, idx));
                        idx += 1;
                    }
                }
                Ok(true)
            }
            "twist" => {
                p.expect_sym('=')?;
                let f = parse_form(ring, p, 3)?;
                self.twist = Some(f);
                Ok(true)
            }
            "basis" => {
                if !self.basis.is_empty() {
                    return Err(p.err_here("duplicate basis declaration"));
                }
                while p.peek().is_some() {
                    let (name, col) = p.expect_ident()?;
                    if self.names.contains_key(&name) {
                        return Err(parse_err(p.file, p.line, col, &format!("duplicate basis name `{name}`")));
                    }
                    self.names.insert(name.clone(), (0, self.basis.len()));
                    self.basis.push(name);
                }
                Ok(true)
            }
            "gram" => {
                p.expect_sym('=')?;
                let cx = EvalCx { ring, scope: Scope::Base, file: p.file, line: p.line };
                let m = p.parse_matrix(&cx)?;
                p.expect_end()?;
                self.gram = Some(m);
                Ok(true)
            }
            "anchor" => {
                let (name, col) = p.expect_ident()?;
                let Some(&(_, idx)) = self.names.get(&name) else {
                    return Err(parse_err(p.file, p.line, col, &format!("undeclared basis name `{name}`")));
                };
                p.expect_sym('=')?;
                let cx = EvalCx { ring, scope: Scope::Base, file: p.file, line: p.line };
                let col2 = p.peek().map(|t| t.col).unwrap_or(1);
                let v = p.parse_expr(&cx)?;
                p.expect_end()?;
                let vf = match v {
                    Value::Vf(vf) => vf,
                    v if v.is_zero() => ring.zero_vf(),
                    _ => return Err(parse_err(p.file, p.line, col2, "expected a vector field expression")),
                };
                self.anchors.push((idx, vf));
                Ok(true)
            }
            "bracket" => {
                let (n1, c1) = p.expect_ident()?;
                let (n2, c2) = p.expect_ident()?;
                let Some(&(_, i)) = self.names.get(&n1) else {
                    return Err(parse_err(p.file, p.line, c1, &format!("undeclared basis name `{n1}`")));
                };
                let Some(&(_, j)) = self.names.get(&n2) else {
                    return Err(parse_err(p.file, p.line, c2, &format!("undeclared basis name `{n2}`")));
                };
                p.expect_sym('=')?;
                let cx = EvalCx { ring, scope: Scope::Sections(&self.names), file: p.file, line: p.line };
                let col = p.peek().map(|t| t.col).unwrap_or(1);
                let v = p.parse_expr(&cx)?;
                p.expect_end()?;
                let sec = match v {
                    Value::Sec(s) => s,
                    v if v.is_zero() => Section::zero(ring),
                    _ => return Err(parse_err(p.file, p.line, col, "expected a section expression")),
                };
                let rank = self.names.len();
                let mut coeffs = vec![ring.zero(); rank];
                for ((_, idx), c) in sec.terms() {
                    coeffs[*idx] = c.clone();
                }
                self.brackets.push((i, j, coeffs));
                Ok(true)
            }
            "kform" => {
                p.expect_sym('=')?;
                let f = parse_form(ring, p, 4)?;
                self.kform = Some(f);
                Ok(true)
            }
            "extension" => {
                let (name, col) = p.expect_ident()?;
                if !matches!(
                    name.as_str(),
                    "bilinear" | "second_derivation" | "first_derivation" | "first_pairing"
                ) {
                    return Err(parse_err(p.file, p.line, col, "unknown extension coefficient"));
                }
                p.expect_sym('=')?;
                let cx = EvalCx { ring, scope: Scope::Base, file: p.file, line: p.line };
                let col2 = p.peek().map(|t| t.col).unwrap_or(1);
                let v = p.parse_expr(&cx)?;
                p.expect_end()?;
                let c = match v {
                    Value::Scalar(p) => p,
                    _ => return Err(parse_err(p.file, p.line, col2, "expected a rational constant")),
                };
                let Some(r) = c.as_constant() else {
                    return Err(parse_err(p.file, p.line, col2, "expected a rational constant"));
                };
                self.extension.push((name, r));
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    fn finalize(self, file: &str, ring: &Ring) -> Result<CourantData> {
        let mut data = if self.template {
            if self.gram.is_some() || !self.basis.is_empty() || !self.brackets.is_empty() {
                return Err(parse_err(file, 1, 1, "template documents cannot also declare explicit data"));
            }
            let mut e = make_standard(ring);
            if let Some(h) = &self.twist {
                e = make_h_twist(&e, h)?;
            }
            e
        } else {
            if self.twist.is_some() {
                return Err(parse_err(file, 1, 1, "`twist` requires `template standard`"));
            }
            let rank = self.basis.len();
            let gram = self
                .gram
                .ok_or_else(|| parse_err(file, 1, 1, "explicit documents must declare `gram`"))?;
            let mut anchor = vec![ring.zero_vf(); rank];
            for (i, vf) in self.anchors {
                anchor[i] = vf;
            }
            let kform = self.kform.unwrap_or_else(|| ring.zero_form(4));
            let mut e = CourantData::new(ring, self.basis, gram, anchor, kform)?;
            for (i, j, coeffs) in self.brackets {
                e.set_bracket(i, j, coeffs)?;
            }
            e
        };
        if !self.extension.is_empty() {
            let mut ext = BracketExtension::default();
            for (name, c) in self.extension {
                match name.as_str() {
                    "bilinear" => ext.bilinear = c,
                    "second_derivation" => ext.second_derivation = c,
                    "first_derivation" => ext.first_derivation = c,
                    "first_pairing" => ext.first_pairing = c,
                    _ => unreachable!(),
                }
            }
            data = data.with_extension(ext);
        }
        Ok(data)
    }
}

fn parse_form(ring: &Ring, p: &mut LineParser, degree: usize) -> Result<BaseForm> {
    let cx = EvalCx { ring, scope: Scope::Base, file: p.file, line: p.line };
    let col = p.peek().map(|t| t.col).unwrap_or(1);
    let v = p.parse_expr(&cx)?;
    p.expect_end()?;
    match v {
        Value::Form(f) if f.degree() == degree => Ok(f),
        v if v.is_zero() => Ok(ring.zero_form(degree)),
        Value::Form(f) => Err(parse_err(
            p.file,
            p.line,
            col,
            &format!("expected a form of degree {degree}, got degree {}", f.degree()),
        )),
        _ => Err(parse_err(p.file, p.line, col, &format!("expected a form of degree {degree}"))),
    }
}

/// Parse a document from text. `file` labels diagnostics (use the file name
/// or `"<input>"`).
pub fn parse_spec(file: &str, text: &str) -> Result<SpecDocument> {
    let lines = lex_document(file, text)?;
    let mut iter = lines.iter();

    // `kind` line.
    let first = iter
        .next()
        .ok_or_else(|| parse_err(file, 1, 1, "empty document; expected a `kind` line"))?;
    let mut p = LineParser::new(file, first.no, &first.toks);
    let (kw, col) = p.expect_ident()?;
    if kw != "kind" {
        return Err(parse_err(file, first.no, col, "document must start with a `kind` line"));
    }
    let (kind_name, kcol) = p.expect_ident()?;
    let kind = match kind_name.as_str() {
        "linfty" => Kind::Linfty,
        "courant" => Kind::Courant,
        "dirac" => Kind::Dirac,
        "symplectic" => Kind::Symplectic,
        "retract" => Kind::Retract,
        "morphism" => Kind::Morphism,
        _ => {
            return Err(parse_err(
                file,
                first.no,
                kcol,
                "expected one of linfty, courant, dirac, symplectic, retract, morphism",
            ))
        }
    };
    p.expect_end()?;

    // Metadata lines, then the `ring` line.
    let mut label = None;
    let mut expect = None;
    let mut ring: Option<Ring> = None;
    let mut body_lines: Vec<&Line> = Vec::new();
    for line in iter {
        if ring.is_none() {
            let mut p = LineParser::new(file, line.no, &line.toks);
            let (kw, _) = p.expect_ident()?;
            match kw.as_str() {
                "label" => {
                    let (name, _) = p.expect_ident()?;
                    let mut full = name;
                    while let Some(Tok { kind: TokKind::Ident(more), .. }) = p.peek() {
                        full.push('-');
                        full.push_str(more);
                        p.pos += 1;
                    }
                    while p.eat_sym('-') {
                        let (more, _) = p.expect_ident()?;
                        full.push('-');
                        full.push_str(&more);
                    }
                    p.expect_end()?;
                    label = Some(full);
                }
                "expect" => {
                    let (v, col) = p.expect_ident()?;
                    expect = Some(match v.as_str() {
                        "pass" => true,
                        "fail" => false,
                        _ => return Err(parse_err(file, line.no, col, "expected `pass` or `fail`")),
                    });
                    p.expect_end()?;
                }
                "ring" => {
                    let mut vars = Vec::new();
                    while p.peek().is_some() {
                        let (v, col) = p.expect_ident()?;
                        if vars.contains(&v) {
                            return Err(parse_err(file, line.no, col, &format!("duplicate variable `{v}`")));
                        }
                        vars.push(v);
                    }
                    ring = Some(Ring::new(vars));
                }
                _ => {
                    return Err(parse_err(
                        file,
                        line.no,
                        line.toks[0].col,
                        "expected `label`, `expect`, or `ring` before the body",
                    ))
                }
            }
        } else {
            body_lines.push(line);
        }
    }
    let ring = ring.ok_or_else(|| parse_err(file, 1, 1, "document is missing a `ring` line"))?;

    let body = parse_body(file, kind, &ring, &body_lines)?;
    Ok(SpecDocument { kind, label, expect, ring, body })
}

fn parse_body(file: &str, kind: Kind, ring: &Ring, lines: &[&Line]) -> Result<Body> {
    match kind {
        Kind::Linfty => {
            let mut ab = AlgebroidBuilder::default();
            let mut cocycle_raw: Vec<(usize, usize, Vec<Tok>)> = Vec::new();
            for line in lines {
                let mut p = LineParser::new(file, line.no, &line.toks);
                let (kw, col) = p.expect_ident()?;
                if ab.handle(ring, &kw, &mut p)? {
                    continue;
                }
                if kw == "cocycle" {
                    let deg = p.expect_usize()?;
                    p.expect_sym('=')?;
                    cocycle_raw.push((line.no, deg, line.toks[p.pos..].to_vec()));
                    continue;
                }
                return Err(parse_err(file, line.no, col, &format!("unknown keyword `{kw}`")));
            }
            let algebroid = ab.finalize(file, ring)?;
            let mut cocycle = None;
            if let Some((line_no, deg, toks)) = cocycle_raw.into_iter().next() {
                let ctx = FormsContext::new(&algebroid)?;
                let cx = EvalCx { ring, scope: Scope::Mixed(ctx.table()), file, line: line_no };
                let mut p = LineParser::new(file, line_no, &toks);
                let col = p.peek().map(|t| t.col).unwrap_or(1);
                let v = p.parse_expr(&cx)?;
                p.expect_end()?;
                let e = match v {
                    Value::Mixed(e) => e,
                    v if v.is_zero() => ctx.table().zero(),
                    _ => return Err(parse_err(file, line_no, col, "expected a mixed-form expression")),
                };
                cocycle = Some((deg as u32, e));
            }
            Ok(Body::Linfty { algebroid, cocycle })
        }
        Kind::Courant => {
            let mut cb = CourantBuilder::default();
            for line in lines {
                let mut p = LineParser::new(file, line.no, &line.toks);
                let (kw, col) = p.expect_ident()?;
                if cb.handle(ring, &kw, &mut p)? {
                    continue;
                }
                return Err(parse_err(file, line.no, col, &format!("unknown keyword `{kw}`")));
            }
            Ok(Body::Courant { data: cb.finalize(file, ring)? })
        }
        Kind::Dirac => {
            let mut cb = CourantBuilder::default();
            let mut graph: Option<Matrix> = None;
            let mut generators: Option<Matrix> = None;
            let mut killed: Vec<usize> = Vec::new();
            for line in lines {
                let mut p = LineParser::new(file, line.no, &line.toks);
                let (kw, col) = p.expect_ident()?;
                if cb.handle(ring, &kw, &mut p)? {
                    continue;
                }
                match kw.as_str() {
                    "graph" | "generators" => {
                        p.expect_sym('=')?;
                        let cx = EvalCx { ring, scope: Scope::Base, file, line: line.no };
                        let m = p.parse_matrix(&cx)?;
                        p.expect_end()?;
                        if kw == "graph" {
                            graph = Some(m);
                        } else {
                            generators = Some(m);
                        }
                    }
                    "support" => {
                        while p.peek().is_some() {
                            let (v, vcol) = p.expect_ident()?;
                            match ring.vars().iter().position(|w| *w == v) {
                                Some(i) => killed.push(i),
                                None => {
                                    return Err(parse_err(file, line.no, vcol, &format!("unknown variable `{v}`")))
                                }
                            }
                        }
                    }
                    _ => return Err(parse_err(file, line.no, col, &format!("unknown keyword `{kw}`"))),
                }
            }
            match (graph, generators) {
                (Some(pi), None) => {
                    let pair = graph_dirac(&pi)?;
                    Ok(Body::Dirac { ambient: pair.courant, frame: DiracFrame::Graph(pi), killed })
                }
                (None, Some(m)) => {
                    let ambient = cb.finalize(file, ring)?;
                    Ok(Body::Dirac { ambient, frame: DiracFrame::Explicit(m), killed })
                }
                (Some(_), Some(_)) => {
                    Err(parse_err(file, 1, 1, "declare either `graph` or `generators`, not both"))
                }
                (None, None) => Err(parse_err(file, 1, 1, "dirac documents need `graph` or `generators`")),
            }
        }
        Kind::Symplectic => {
            let mut ab = AlgebroidBuilder::default();
            let mut shift: Option<usize> = None;
            let mut bform: Option<BaseForm> = None;
            let mut kform: Option<BaseForm> = None;
            let mut qpair: Option<Matrix> = None;
            let mut phi: Vec<(usize, BaseForm)> = Vec::new();
            let mut psi: Vec<(usize, usize, BaseForm)> = Vec::new();
            for line in lines {
                let mut p = LineParser::new(file, line.no, &line.toks);
                let (kw, col) = p.expect_ident()?;
                if ab.handle(ring, &kw, &mut p)? {
                    continue;
                }
                match kw.as_str() {
                    "shift" => {
                        let n = p.expect_usize()?;
                        if n != 0 && n != 2 {
                            return Err(p.err_here("supported shifts are 0 and 2"));
                        }
                        p.expect_end()?;
                        shift = Some(n);
                    }
                    "bform" => {
                        p.expect_sym('=')?;
                        bform = Some(parse_form(ring, &mut p, 2)?);
                    }
                    "kform" => {
                        p.expect_sym('=')?;
                        kform = Some(parse_form(ring, &mut p, 4)?);
                    }
                    "qpair" => {
                        p.expect_sym('=')?;
                        let cx = EvalCx { ring, scope: Scope::Base, file, line: line.no };
                        let m = p.parse_matrix(&cx)?;
                        p.expect_end()?;
                        qpair = Some(m);
                    }
                    "phi" => {
                        let (name, ncol) = p.expect_ident()?;
                        let (level, idx) = ab.lookup(file, line.no, &name, ncol)?;
                        if level != 1 {
                            return Err(parse_err(file, line.no, ncol, "phi is indexed by level-1 basis elements"));
                        }
                        p.expect_sym('=')?;
                        phi.push((idx, parse_form(ring, &mut p, 1)?));
                    }
                    "psi" => {
                        let (n1, c1) = p.expect_ident()?;
                        let (n2, c2) = p.expect_ident()?;
                        let (l1, i) = ab.lookup(file, line.no, &n1, c1)?;
                        let (l2, j) = ab.lookup(file, line.no, &n2, c2)?;
                        if l1 != 0 || l2 != 0 {
                            return Err(parse_err(file, line.no, c2, "psi is indexed by level-0 basis pairs"));
                        }
                        p.expect_sym('=')?;
                        psi.push((i, j, parse_form(ring, &mut p, 1)?));
                    }
                    _ => return Err(parse_err(file, line.no, col, &format!("unknown keyword `{kw}`"))),
                }
            }
            let a = ab.finalize(file, ring)?;
            let data = match shift {
                Some(0) => {
                    let b = bform.unwrap_or_else(|| ring.zero_form(2));
                    ShiftedSymplecticData::shift_zero(&a, b)?
                }
                Some(2) => {
                    let r0 = a.complex().rank(0);
                    let r1 = a.complex().rank(1);
                    let mut phi_vec = vec![ring.zero_form(1); r1];
                    for (i, f) in phi {
                        phi_vec[i] = f;
                    }
                    let mut psi_table = vec![vec![ring.zero_form(1); r0]; r0];
                    for (i, j, f) in psi {
                        psi_table[i][j] = f.clone();
                        psi_table[j][i] = f.neg();
                    }
                    let q = qpair.unwrap_or_else(|| Matrix::zero(ring, r0, r0));
                    let k = kform.unwrap_or_else(|| ring.zero_form(4));
                    ShiftedSymplecticData::shift_two(&a, phi_vec, psi_table, q, k)?
                }
                _ => return Err(parse_err(file, 1, 1, "symplectic documents need a `shift` line")),
            };
            Ok(Body::Symplectic { data })
        }
        Kind::Retract => {
            let mut ambient = AlgebroidBuilder::default();
            let mut sub = AlgebroidBuilder::default();
            let mut include: BTreeMap<usize, Matrix> = BTreeMap::new();
            let mut project: BTreeMap<usize, Matrix> = BTreeMap::new();
            let mut homotopy: BTreeMap<usize, Matrix> = BTreeMap::new();
            for line in lines {
                let mut p = LineParser::new(file, line.no, &line.toks);
                let (kw, col) = p.expect_ident()?;
                match kw.as_str() {
                    "ambient" | "sub" => {
                        let builder = if kw == "ambient" { &mut ambient } else { &mut sub };
                        let (inner, icol) = p.expect_ident()?;
                        if !builder.handle(ring, &inner, &mut p)? {
                            return Err(parse_err(file, line.no, icol, &format!("unknown keyword `{inner}`")));
                        }
                    }
                    "include" | "project" | "homotopy" => {
                        let n = p.expect_usize()?;
                        p.expect_sym('=')?;
                        let cx = EvalCx { ring, scope: Scope::Base, file, line: line.no };
                        let m = p.parse_matrix(&cx)?;
                        p.expect_end()?;
                        match kw.as_str() {
                            "include" => include.insert(n, m),
                            "project" => project.insert(n, m),
                            _ => homotopy.insert(n, m),
                        };
                    }
                    _ => return Err(parse_err(file, line.no, col, &format!("unknown keyword `{kw}`"))),
                }
            }
            let ambient = ambient.finalize(file, ring)?.complex().clone();
            let sub = sub.finalize(file, ring)?.complex().clone();
            let nlevels = ambient.len();
            let i: Vec<Matrix> = (0..nlevels)
                .map(|l| {
                    include
                        .get(&l)
                        .cloned()
                        .unwrap_or_else(|| Matrix::zero(ring, ambient.rank(l), sub.rank(l)))
                })
                .collect();
            let pmaps: Vec<Matrix> = (0..nlevels)
                .map(|l| {
                    project
                        .get(&l)
                        .cloned()
                        .unwrap_or_else(|| Matrix::zero(ring, sub.rank(l), ambient.rank(l)))
                })
                .collect();
            let h: Vec<Matrix> = (0..nlevels.saturating_sub(1))
                .map(|l| {
                    homotopy
                        .get(&l)
                        .cloned()
                        .unwrap_or_else(|| Matrix::zero(ring, ambient.rank(l + 1), ambient.rank(l)))
                })
                .collect();
            Ok(Body::Retract { retract: Retract::new(sub, ambient, i, pmaps, h)? })
        }
        Kind::Morphism => {
            let mut source: Option<AlgebroidBuilder> = None;
            let mut target: Option<AlgebroidBuilder> = None;
            let mut maps: BTreeMap<usize, Matrix> = BTreeMap::new();
            let mut map2_raw: Vec<(usize, Vec<Tok>)> = Vec::new();
            let mut idx = 0;
            while idx < lines.len() {
                let line = lines[idx];
                let mut p = LineParser::new(file, line.no, &line.toks);
                let (kw, col) = p.expect_ident()?;
                match kw.as_str() {
                    "begin" => {
                        let (which, wcol) = p.expect_ident()?;
                        p.expect_end()?;
                        let mut builder = AlgebroidBuilder::default();
                        idx += 1;
                        loop {
                            let Some(inner) = lines.get(idx) else {
                                return Err(parse_err(file, line.no, wcol, "unterminated block; expected `end`"));
                            };
                            let mut ip = LineParser::new(file, inner.no, &inner.toks);
                            let (ikw, icol) = ip.expect_ident()?;
                            if ikw == "end" {
                                ip.expect_end()?;
                                break;
                            }
                            if !builder.handle(ring, &ikw, &mut ip)? {
                                return Err(parse_err(file, inner.no, icol, &format!("unknown keyword `{ikw}`")));
                            }
                            idx += 1;
                        }
                        match which.as_str() {
                            "source" => source = Some(builder),
                            "target" => target = Some(builder),
                            _ => return Err(parse_err(file, line.no, wcol, "expected `source` or `target`")),
                        }
                    }
                    "map" => {
                        let n = p.expect_usize()?;
                        p.expect_sym('=')?;
                        let cx = EvalCx { ring, scope: Scope::Base, file, line: line.no };
                        let m = p.parse_matrix(&cx)?;
                        p.expect_end()?;
                        maps.insert(n, m);
                    }
                    "map2" => {
                        map2_raw.push((line.no, line.toks[1..].to_vec()));
                    }
                    _ => return Err(parse_err(file, line.no, col, &format!("unknown keyword `{kw}`"))),
                }
                idx += 1;
            }
            let source = source
                .ok_or_else(|| parse_err(file, 1, 1, "morphism documents need a `begin source` block"))?;
            let target_b = target
                .ok_or_else(|| parse_err(file, 1, 1, "morphism documents need a `begin target` block"))?;
            let source_names = source.names.clone();
            let target_names = target_b.names.clone();
            let src = source.finalize(file, ring)?;
            let tgt = target_b.finalize(file, ring)?;
            let nlevels = src.complex().len().max(tgt.complex().len());
            let f1: Vec<Matrix> = (0..nlevels)
                .map(|l| {
                    maps.get(&l)
                        .cloned()
                        .unwrap_or_else(|| Matrix::zero(ring, tgt.complex().rank(l), src.complex().rank(l)))
                })
                .collect();
            let mut f2 = Vec::new();
            for (line_no, toks) in map2_raw {
                let mut p = LineParser::new(file, line_no, &toks);
                let (n1, c1) = p.expect_ident()?;
                let (n2, c2) = p.expect_ident()?;
                let Some(&(l1, i)) = source_names.get(&n1) else {
                    return Err(parse_err(file, line_no, c1, &format!("undeclared source basis name `{n1}`")));
                };
                let Some(&(l2, j)) = source_names.get(&n2) else {
                    return Err(parse_err(file, line_no, c2, &format!("undeclared source basis name `{n2}`")));
                };
                if l1 != 0 || l2 != 0 {
                    return Err(parse_err(file, line_no, c2, "map2 is indexed by level-0 source pairs"));
                }
                p.expect_sym('=')?;
                let cx = EvalCx { ring, scope: Scope::Sections(&target_names), file, line: line_no };
                let col = p.peek().map(|t| t.col).unwrap_or(1);
                let v = p.parse_expr(&cx)?;
                p.expect_end()?;
                let sec = match v {
                    Value::Sec(s) => s,
                    v if v.is_zero() => Section::zero(ring),
                    _ => return Err(parse_err(file, line_no, col, "expected a section expression")),
                };
                f2.push(((i, j), sec));
            }
            Ok(Body::Morphism { morphism: Morphism::new(src, tgt, f1, f2)? })
        }
    }
}

// ---------------------------------------------------------------------------
// Pretty-printer
// ---------------------------------------------------------------------------

fn fmt_matrix(m: &Matrix) -> String {
    if m.rows() == 0 || m.cols() == 0 {
        return "[]".to_string();
    }
    let mut rows = Vec::new();
    for r in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|c| m.at(r, c).to_string()).collect();
        rows.push(row.join(", "));
    }
    format!("[{}]", rows.join("; "))
}

fn fmt_vf(v: &VectorField, ring: &Ring) -> String {
    if v.is_zero() {
        return "0".to_string();
    }
    let mut parts = Vec::new();
    for (i, c) in v.comps().iter().enumerate() {
        if !c.is_zero() {
            parts.push(format!("({c})*@{}", ring.vars()[i]));
        }
    }
    parts.join(" + ")
}

fn fmt_form(f: &BaseForm, ring: &Ring) -> String {
    if f.is_zero() {
        return "0".to_string();
    }
    let mut parts = Vec::new();
    for (idx, c) in f.terms() {
        let mut word: Vec<String> = idx.iter().map(|&i| format!("d{}", ring.vars()[i])).collect();
        if word.is_empty() {
            word.push("1".to_string());
        }
        parts.push(format!("({c})*{}", word.join("^")));
    }
    parts.join(" + ")
}

fn fmt_section(s: &Section, name_of: &dyn Fn(usize, usize) -> String) -> String {
    if s.is_zero() {
        return "0".to_string();
    }
    let mut parts = Vec::new();
    for ((l, i), c) in s.terms() {
        parts.push(format!("({c})*{}", name_of(*l, *i)));
    }
    parts.join(" + ")
}

fn surface_gen_name(table_name: &str) -> String {
    match table_name.strip_suffix('^') {
        Some(stripped) => format!("{stripped}'"),
        None => table_name.to_string(),
    }
}

/// Render a mixed-form element in the document syntax.
pub fn fmt_mixed(e: &GCAElement) -> String {
    if e.is_zero() {
        return "0".to_string();
    }
    let table = e.table();
    let mut parts = Vec::new();
    for (word, c) in e.terms() {
        let mut factors: Vec<String> = word
            .iter()
            .map(|&g| surface_gen_name(&table.gens()[g as usize].name))
            .collect();
        if factors.is_empty() {
            factors.push("1".to_string());
        }
        parts.push(format!("({c})*{}", factors.join("^")));
    }
    parts.join(" + ")
}

fn print_algebroid_body(a: &Algebroid, out: &mut String, indent: &str) {
    let ring = a.ring();
    let complex = a.complex();
    for l in 0..complex.len() {
        out.push_str(&format!("{indent}level {l} = {}\n", complex.basis(l).join(" ")));
    }
    for l in 1..complex.len() {
        if let Some(d) = complex.diff(l) {
            if !d.is_zero() {
                out.push_str(&format!("{indent}diff {l} = {}\n", fmt_matrix(d)));
            }
        }
    }
    let name_of = |l: usize, i: usize| complex.basis(l)[i].clone();
    for i in 0..complex.rank(0) {
        let vf = a.anchor_of_basis(i);
        if !vf.is_zero() {
            out.push_str(&format!("{indent}anchor {} = {}\n", name_of(0, i), fmt_vf(vf, ring)));
        }
    }
    let mut keys: Vec<(usize, usize)> = Vec::new();
    for i in 0..complex.rank(0) {
        keys.push((0, i));
    }
    for i in 0..complex.rank(1) {
        keys.push((1, i));
    }
    for (ai, a_key) in keys.iter().enumerate() {
        for b_key in keys.iter().skip(ai + 1) {
            if a_key.0 + b_key.0 > 1 {
                continue;
            }
            let v = a.binary_basis(*a_key, *b_key);
            if !v.is_zero() {
                out.push_str(&format!(
                    "{indent}binary {} {} = {}\n",
                    name_of(a_key.0, a_key.1),
                    name_of(b_key.0, b_key.1),
                    fmt_section(&v, &name_of)
                ));
            }
        }
    }
    let r0 = complex.rank(0);
    for i in 0..r0 {
        for j in i + 1..r0 {
            for k in j + 1..r0 {
                let v = a.ternary_basis(i, j, k);
                if !v.is_zero() {
                    out.push_str(&format!(
                        "{indent}ternary {} {} {} = {}\n",
                        name_of(0, i),
                        name_of(0, j),
                        name_of(0, k),
                        fmt_section(&v, &name_of)
                    ));
                }
            }
        }
    }
}

fn print_courant_body(e: &CourantData, out: &mut String) {
    let ring = e.ring();
    out.push_str(&format!("basis {}\n", e.basis().join(" ")));
    out.push_str(&format!("gram = {}\n", fmt_matrix(e.gram())));
    for i in 0..e.rank() {
        let vf = e.anchor_of_basis(i);
        if !vf.is_zero() {
            out.push_str(&format!("anchor {} = {}\n", e.basis()[i], fmt_vf(vf, ring)));
        }
    }
    let name_of = |_l: usize, i: usize| e.basis()[i].clone();
    for i in 0..e.rank() {
        for j in 0..e.rank() {
            let coeffs = e.bracket_of_basis(i, j);
            if coeffs.iter().any(|c| !c.is_zero()) {
                let mut s = Section::zero(ring);
                for (k, c) in coeffs.iter().enumerate() {
                    s.add_term(0, k, c);
                }
                out.push_str(&format!(
                    "bracket {} {} = {}\n",
                    e.basis()[i],
                    e.basis()[j],
                    fmt_section(&s, &name_of)
                ));
            }
        }
    }
    let ext = e.extension();
    let one = Rational::one();
    for (name, c) in [
        ("bilinear", &ext.bilinear),
        ("second_derivation", &ext.second_derivation),
        ("first_derivation", &ext.first_derivation),
        ("first_pairing", &ext.first_pairing),
    ] {
        if *c != one {
            out.push_str(&format!("extension {name} = {c}\n"));
        }
    }
    if !e.k_form().is_zero() {
        out.push_str(&format!("kform = {}\n", fmt_form(e.k_form(), ring)));
    }
}

impl SpecDocument {
    /// Render the document in canonical form; parsing the result reproduces
    /// the same structure.
    pub fn print(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("kind {}\n", self.kind.name()));
        if let Some(label) = &self.label {
            out.push_str(&format!("label {label}\n"));
        }
        if let Some(expect) = self.expect {
            out.push_str(&format!("expect {}\n", if expect { "pass" } else { "fail" }));
        }
        out.push_str(&format!("ring {}\n", self.ring.vars().join(" ")));
        match &self.body {
            Body::Linfty { algebroid, cocycle } => {
                print_algebroid_body(algebroid, &mut out, "");
                if let Some((p, w)) = cocycle {
                    out.push_str(&format!("cocycle {p} = {}\n", fmt_mixed(w)));
                }
            }
            Body::Courant { data } => print_courant_body(data, &mut out),
            Body::Dirac { ambient, frame, killed } => {
                match frame {
                    DiracFrame::Graph(pi) => {
                        out.push_str(&format!("graph = {}\n", fmt_matrix(pi)));
                    }
                    DiracFrame::Explicit(m) => {
                        print_courant_body(ambient, &mut out);
                        out.push_str(&format!("generators = {}\n", fmt_matrix(m)));
                    }
                }
                if !killed.is_empty() {
                    let names: Vec<String> =
                        killed.iter().map(|&i| self.ring.vars()[i].clone()).collect();
                    out.push_str(&format!("support {}\n", names.join(" ")));
                }
            }
            Body::Symplectic { data } => {
                out.push_str(&format!("shift {}\n", data.shift()));
                print_algebroid_body(data.algebroid(), &mut out, "");
                if let Some(b) = data.base_two_form() {
                    if !b.is_zero() {
                        out.push_str(&format!("bform = {}\n", fmt_form(b, &self.ring)));
                    }
                }
                if data.shift() == 2 {
                    let complex = data.algebroid().complex();
                    for (i, f) in data.phi().iter().enumerate() {
                        if !f.is_zero() {
                            out.push_str(&format!(
                                "phi {} = {}\n",
                                complex.basis(1)[i],
                                fmt_form(f, &self.ring)
                            ));
                        }
                    }
                    let psi = data.psi_table();
                    for i in 0..psi.len() {
                        for j in i + 1..psi.len() {
                            if !psi[i][j].is_zero() {
                                out.push_str(&format!(
                                    "psi {} {} = {}\n",
                                    complex.basis(0)[i],
                                    complex.basis(0)[j],
                                    fmt_form(&psi[i][j], &self.ring)
                                ));
                            }
                        }
                    }
                    out.push_str(&format!("qpair = {}\n", fmt_matrix(data.q_pairing())));
                    if !data.k_form().is_zero() {
                        out.push_str(&format!("kform = {}\n", fmt_form(data.k_form(), &self.ring)));
                    }
                }
            }
            Body::Retract { retract } => {
                let print_complex = |prefix: &str, c: &Complex, out: &mut String| {
                    for l in 0..c.len() {
                        out.push_str(&format!("{prefix} level {l} = {}\n", c.basis(l).join(" ")));
                    }
                    for l in 1..c.len() {
                        if let Some(d) = c.diff(l) {
                            if !d.is_zero() {
                                out.push_str(&format!("{prefix} diff {l} = {}\n", fmt_matrix(d)));
                            }
                        }
                    }
                };
                print_complex("ambient", retract.ambient(), &mut out);
                print_complex("sub", retract.sub(), &mut out);
                let ambient = retract.ambient();
                let sub = retract.sub();
                for l in 0..ambient.len() {
                    let im = matrix_of_map(&self.ring, sub.rank(l), ambient.rank(l), l, l, &|s| {
                        retract.include(s)
                    });
                    if !im.is_zero() {
                        out.push_str(&format!("include {l} = {}\n", fmt_matrix(&im)));
                    }
                    let pm = matrix_of_map(&self.ring, ambient.rank(l), sub.rank(l), l, l, &|s| {
                        retract.project(s)
                    });
                    if !pm.is_zero() {
                        out.push_str(&format!("project {l} = {}\n", fmt_matrix(&pm)));
                    }
                    if l + 1 < ambient.len() {
                        let hm =
                            matrix_of_map(&self.ring, ambient.rank(l), ambient.rank(l + 1), l, l + 1, &|s| {
                                retract.homotopy(s)
                            });
                        if !hm.is_zero() {
                            out.push_str(&format!("homotopy {l} = {}\n", fmt_matrix(&hm)));
                        }
                    }
                }
            }
            Body::Morphism { morphism } => {
                out.push_str("begin source\n");
                print_algebroid_body(morphism.source(), &mut out, "");
                out.push_str("end\n");
                out.push_str("begin target\n");
                print_algebroid_body(morphism.target(), &mut out, "");
                out.push_str("end\n");
                let src = morphism.source().complex();
                let tgt = morphism.target().complex();
                let nlevels = src.len().max(tgt.len());
                for l in 0..nlevels {
                    let m = matrix_of_map(&self.ring, src.rank(l), tgt.rank(l), l, l, &|s| {
                        morphism.apply_linear(s)
                    });
                    if !m.is_zero() {
                        out.push_str(&format!("map {l} = {}\n", fmt_matrix(&m)));
                    }
                }
                let tgt_name = |l: usize, i: usize| tgt.basis(l)[i].clone();
                for i in 0..src.rank(0) {
                    for j in i + 1..src.rank(0) {
                        let v = morphism.binary_component(i, j);
                        if !v.is_zero() {
                            out.push_str(&format!(
                                "map2 {} {} = {}\n",
                                src.basis(0)[i],
                                src.basis(0)[j],
                                fmt_section(&v, &tgt_name)
                            ));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Reconstruct the matrix of a levelwise linear map from its action on basis
/// sections (`in_level` → `out_level`).
fn matrix_of_map(
    ring: &Ring,
    in_rank: usize,
    out_rank: usize,
    in_level: usize,
    out_level: usize,
    f: &dyn Fn(&Section) -> Section,
) -> Matrix {
    Matrix::from_fn(ring, out_rank, in_rank, |r, c| {
        let mut s = Section::zero(ring);
        s.add_term(in_level, c, &ring.one());
        f(&s).coeff(out_level, r)
    })
}

// ---------------------------------------------------------------------------
// Commands and reports
// ---------------------------------------------------------------------------

/// CLI commands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    /// Verify the document's defining identities.
    Verify,
    /// Emit the structure differential on generators (and cross-check it).
    Ce,
    /// Normalize the document's closed mixed form.
    Normalize,
    /// Round-trip between Courant and shifted symplectic presentations.
    Convert,
    /// Dirac/Poisson/coisotropy checks.
    Dirac,
    /// Homotopy transfer along a companion retract document.
    Transfer,
}

impl Command {
    /// Parse a command name.
    pub fn from_name(s: &str) -> Option<Command> {
        Some(match s {
            "verify" => Command::Verify,
            "ce" => Command::Ce,
            "normalize" => Command::Normalize,
            "convert" => Command::Convert,
            "dirac" => Command::Dirac,
            "transfer" => Command::Transfer,
            _ => return None,
        })
    }

    /// The command keyword.
    pub fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Ce => "ce",
            Command::Normalize => "normalize",
            Command::Convert => "convert",
            Command::Dirac => "dirac",
            Command::Transfer => "transfer",
        }
    }
}

/// Runtime options shared by all commands.
#[derive(Clone, Copy, Debug)]
pub struct Options {
    /// Strict (symbolic) or sampled nondegeneracy comparisons.
    pub mode: Mode,
    /// Seed for deterministic sample points.
    pub seed: u64,
    /// Number of extra sample points beyond the deterministic base set.
    pub samples: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options { mode: Mode::Strict, seed: 7, samples: 4 }
    }
}

/// A machine-readable verification report.
///
/// Serialization is deterministic: identical (document, command, seed)
/// inputs produce byte-identical JSON. Timing is deliberately omitted.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    /// Versioned schema identifier.
    pub schema: String,
    /// The command that produced the report.
    pub command: String,
    /// The document kind.
    pub kind: String,
    /// The document label, if declared.
    pub label: Option<String>,
    /// Seed used for sample points.
    pub seed: u64,
    /// Comparison mode ("strict" or "sampled").
    pub mode: String,
    /// Overall verdict: "pass" or "fail".
    pub verdict: String,
    /// The individual checks, in a deterministic order.
    pub checks: Vec<crate::verdict::Check>,
    /// Command-specific structured output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<serde_json::Value>,
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Strict => "strict",
        Mode::Sampled => "sampled",
    }
}

fn make_report(
    cmd: Command,
    doc: &SpecDocument,
    opts: &Options,
    verdict: Verdict,
    payload: Option<serde_json::Value>,
) -> Report {
    Report {
        schema: REPORT_SCHEMA.to_string(),
        command: cmd.name().to_string(),
        kind: doc.kind.name().to_string(),
        label: doc.label.clone(),
        seed: opts.seed,
        mode: mode_name(opts.mode).to_string(),
        verdict: if verdict.passed() { "pass" } else { "fail" }.to_string(),
        checks: verdict.checks,
        payload,
    }
}

fn kind_error(cmd: Command, doc: &SpecDocument) -> Error {
    Error::Structure(format!(
        "command `{}` does not apply to kind `{}`",
        cmd.name(),
        doc.kind.name()
    ))
}

/// List the components in which two Courant structures differ.
fn courant_diff(a: &CourantData, b: &CourantData) -> Vec<String> {
    let mut out = Vec::new();
    if a.basis() != b.basis() {
        out.push("basis".to_string());
    }
    if !a.gram().sub(b.gram()).is_zero() {
        out.push("gram".to_string());
    }
    for i in 0..a.rank().min(b.rank()) {
        if a.anchor_of_basis(i) != b.anchor_of_basis(i) {
            out.push(format!("anchor {}", a.basis()[i]));
        }
        for j in 0..a.rank().min(b.rank()) {
            let x = a.bracket_of_basis(i, j);
            let y = b.bracket_of_basis(i, j);
            if x.iter().zip(y.iter()).any(|(u, v)| !u.sub(v).is_zero()) {
                out.push(format!("bracket {} {}", a.basis()[i], a.basis()[j]));
            }
        }
    }
    if !a.k_form().sub(b.k_form()).is_zero() {
        out.push("kform".to_string());
    }
    out
}

/// List the components in which two shift-2 structures differ.
fn symplectic_diff(a: &ShiftedSymplecticData, b: &ShiftedSymplecticData) -> Vec<String> {
    let mut out = Vec::new();
    if a.algebroid() != b.algebroid() {
        out.push("algebroid".to_string());
    }
    for (i, (f, g)) in a.phi().iter().zip(b.phi().iter()).enumerate() {
        if !f.sub(g).is_zero() {
            out.push(format!("phi {i}"));
        }
    }
    let (pa, pb) = (a.psi_table(), b.psi_table());
    for i in 0..pa.len().min(pb.len()) {
        for j in 0..pa.len().min(pb.len()) {
            if !pa[i][j].sub(&pb[i][j]).is_zero() {
                out.push(format!("psi {i} {j}"));
            }
        }
    }
    if !a.q_pairing().sub(b.q_pairing()).is_zero() {
        out.push("qpair".to_string());
    }
    if !a.k_form().sub(b.k_form()).is_zero() {
        out.push("kform".to_string());
    }
    out
}

/// Run a command on a document (with an optional companion document for
/// binary commands) and assemble the report.
pub fn run_command(
    cmd: Command,
    doc: &SpecDocument,
    companion: Option<&SpecDocument>,
    opts: &Options,
) -> Result<Report> {
    let points = default_sample_points(&doc.ring, opts.seed, opts.samples);
    match cmd {
        Command::Verify => {
            let verdict = match &doc.body {
                Body::Linfty { algebroid, .. } => verify_linfty(algebroid),
                Body::Courant { data } => verify_courant_axioms(data),
                Body::Dirac { ambient, frame, killed } => {
                    let d = match frame {
                        DiracFrame::Graph(_) => DiracData {
                            generators: dirac_generators(frame),
                            killed: Vec::new(),
                        },
                        DiracFrame::Explicit(m) => {
                            DiracData { generators: m.clone(), killed: killed.clone() }
                        }
                    };
                    verify_dirac(ambient, &d, &points)?
                }
                Body::Symplectic { data } => match data.shift() {
                    0 => {
                        let b = data.base_two_form().cloned().unwrap_or_else(|| doc.ring.zero_form(2));
                        verify_zero_shifted(data.algebroid(), &b, &points)?
                    }
                    _ => {
                        let mut v = Verdict::new();
                        v.merge("closure", verify_closure_shift2(data)?);
                        v.merge("nondegeneracy", verify_nondegenerate(data, opts.mode, &points)?);
                        v
                    }
                },
                Body::Retract { retract } => verify_retract(retract),
                Body::Morphism { morphism } => verify_morphism(morphism),
            };
            Ok(make_report(cmd, doc, opts, verdict, None))
        }
        Command::Ce => {
            let Body::Linfty { algebroid, .. } = &doc.body else {
                return Err(kind_error(cmd, doc));
            };
            let delta = build_ce_differential(algebroid)?;
            let mut v = Verdict::new();
            match check_square_zero(&delta)? {
                sq if sq.passed() => v.pass("square-zero"),
                crate::graded::SquareZero::Fail { name, value } => {
                    v.fail("square-zero", format!("D²({name}) = {}", fmt_mixed(&value)));
                }
                _ => unreachable!(),
            }
            let recovered = extract_brackets(&delta)?;
            v.record("bracket-roundtrip", &recovered == algebroid, || {
                "extracted brackets differ from the declared table".into()
            });
            let table = delta.table();
            let mut gens = Vec::new();
            for (i, g) in table.gens().iter().enumerate() {
                gens.push(serde_json::json!({
                    "generator": surface_gen_name(&g.name),
                    "degree": g.degree,
                    "differential": fmt_mixed(delta.value(i)),
                }));
            }
            let mut base = Vec::new();
            for (i, var) in doc.ring.vars().iter().enumerate() {
                base.push(serde_json::json!({
                    "variable": var,
                    "differential": fmt_mixed(delta.base_value(i)),
                }));
            }
            let payload = serde_json::json!({ "base": base, "generators": gens });
            Ok(make_report(cmd, doc, opts, v, Some(payload)))
        }
        Command::Normalize => {
            let Body::Linfty { algebroid, cocycle: Some((p, w)) } = &doc.body else {
                return Err(Error::Structure(
                    "normalize needs a linfty document with a `cocycle` line".into(),
                ));
            };
            let ctx = FormsContext::new(algebroid)?;
            let mut v = Verdict::new();
            match ctx.check_cocycle(w, *p) {
                Ok(()) => v.pass("cocycle"),
                Err(e) => v.fail("cocycle", e.to_string()),
            }
            if !v.passed() {
                return Ok(make_report(cmd, doc, opts, v, None));
            }
            let n = ctx.normalize_closed_form(w, *p)?;
            v.merge("normalized", ctx.verify_normalized_closed(&n));
            let realized = ctx.realize_closed_form(&n)?;
            let again = ctx.normalize_closed_form(&realized, *p)?;
            v.record("normal-form-stable", again == n, || {
                "normalizing the realized cocycle changed the normal form".into()
            });
            let payload = serde_json::json!({
                "potential": fmt_mixed(&n.beta),
                "base": fmt_mixed(&n.base),
            });
            Ok(make_report(cmd, doc, opts, v, Some(payload)))
        }
        Command::Convert => match &doc.body {
            Body::Courant { data } => {
                let conn = MetricConnection::trivial(&doc.ring, data.rank());
                let s = courant_to_symplectic(data, &conn)?;
                let mut v = Verdict::new();
                v.merge("closure", verify_closure_shift2(&s)?);
                v.merge("linfty", verify_linfty(s.algebroid()));
                let back = symplectic_to_courant(&s, &conn)?;
                let diff = courant_diff(data, &back);
                v.record("round-trip", diff.is_empty(), || {
                    format!("differs in: {}", diff.join(", "))
                });
                let payload = serde_json::json!({ "diff": diff });
                Ok(make_report(cmd, doc, opts, v, Some(payload)))
            }
            Body::Symplectic { data } if data.shift() == 2 => {
                let rank = data.algebroid().complex().rank(0);
                let conn = MetricConnection::trivial(&doc.ring, rank);
                let e = symplectic_to_courant(data, &conn)?;
                let mut v = Verdict::new();
                v.merge("axioms", verify_courant_axioms(&e));
                let s2 = courant_to_symplectic(&e, &conn)?;
                let diff = symplectic_diff(data, &s2);
                v.record("round-trip", diff.is_empty(), || {
                    format!("differs in: {}", diff.join(", "))
                });
                let payload = serde_json::json!({ "diff": diff });
                Ok(make_report(cmd, doc, opts, v, Some(payload)))
            }
            _ => Err(kind_error(cmd, doc)),
        },
        Command::Dirac => {
            let Body::Dirac { ambient, frame, killed } = &doc.body else {
                return Err(kind_error(cmd, doc));
            };
            let mut v = Verdict::new();
            let d = match frame {
                DiracFrame::Graph(_) => {
                    DiracData { generators: dirac_generators(frame), killed: Vec::new() }
                }
                DiracFrame::Explicit(m) => DiracData { generators: m.clone(), killed: killed.clone() },
            };
            let dirac_v = verify_dirac(ambient, &d, &points)?;
            let dirac_ok = dirac_v.passed();
            v.merge("dirac", dirac_v);
            if let DiracFrame::Graph(pi) = frame {
                v.record("poisson", dirac_ok, || {
                    "the graph of the bivector is not involutive".into()
                });
                if !killed.is_empty() {
                    if dirac_ok {
                        v.merge("support", check_coisotropic(pi, killed, &points)?);
                    } else {
                        v.fail(
                            "support.coisotropic",
                            "bivector is not Poisson; coisotropy is undefined".into(),
                        );
                    }
                }
            }
            Ok(make_report(cmd, doc, opts, v, None))
        }
        Command::Transfer => {
            let Body::Linfty { algebroid, .. } = &doc.body else {
                return Err(kind_error(cmd, doc));
            };
            let Some(companion) = companion else {
                return Err(Error::Structure(
                    "transfer needs a companion retract document".into(),
                ));
            };
            let Body::Retract { retract } = &companion.body else {
                return Err(Error::Structure(
                    "the companion document must have kind `retract`".into(),
                ));
            };
            if retract.ambient() != algebroid.complex() {
                return Err(Error::Structure(
                    "the retract's ambient complex must match the algebroid's complex".into(),
                ));
            }
            let mut v = Verdict::new();
            v.merge("retract", verify_retract(retract));
            let (transferred, extension) = transfer_structure(algebroid, retract)?;
            v.merge("transferred", verify_linfty(&transferred));
            v.merge("extension", verify_morphism(&extension));
            let tdoc = SpecDocument {
                kind: Kind::Linfty,
                label: doc.label.as_ref().map(|l| format!("{l}-transferred")),
                expect: None,
                ring: doc.ring.clone(),
                body: Body::Linfty { algebroid: transferred, cocycle: None },
            };
            let payload = serde_json::json!({ "transferred": tdoc.print() });
            Ok(make_report(cmd, doc, opts, v, Some(payload)))
        }
    }
}

fn dirac_generators(frame: &DiracFrame) -> Matrix {
    match frame {
        DiracFrame::Explicit(m) => m.clone(),
        DiracFrame::Graph(pi) => {
            let ring = pi.ring().clone();
            let n = pi.rows();
            Matrix::from_fn(&ring, 2 * n, n, |r, c| {
                if r < n {
                    pi.at(r, c).clone()
                } else if r - n == c {
                    ring.one()
                } else {
                    ring.zero()
                }
            })
        }
    }
}

/// Serialize a report in the requested format (`"json"` or `"text"`).
pub fn emit_report(r: &Report, format: &str) -> Result<String> {
    match format {
        "json" => Ok(serde_json::to_string_pretty(r).expect("report serializes") + "\n"),
        "text" => {
            let mut out = String::new();
            out.push_str(&format!("command: {}\n", r.command));
            out.push_str(&format!("kind: {}\n", r.kind));
            if let Some(label) = &r.label {
                out.push_str(&format!("label: {label}\n"));
            }
            out.push_str(&format!("seed: {}\n", r.seed));
            out.push_str(&format!("mode: {}\n", r.mode));
            for c in &r.checks {
                if c.pass {
                    out.push_str(&format!("  PASS {}\n", c.id));
                } else {
                    let witness = c.witness.as_deref().unwrap_or("");
                    out.push_str(&format!("  FAIL {} — {}\n", c.id, witness));
                }
            }
            out.push_str(&format!("overall: {}\n", r.verdict.to_uppercase()));
            Ok(out)
        }
        _ => Err(Error::Structure(format!("unknown report format `{format}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::q;

    fn parse(text: &str) -> SpecDocument {
        parse_spec("<test>", text).expect("document parses")
    }

    #[test]
    fn minimal_document_parses_to_an_abelian_algebroid() {
        let doc = parse("kind linfty\nring x\nlevel 0 = e\n");
        let Body::Linfty { algebroid, .. } = &doc.body else {
            panic!("expected a linfty body");
        };
        assert_eq!(algebroid.ring().vars(), &["x".to_string()]);
        assert_eq!(algebroid.complex().rank(0), 1);
        assert!(algebroid.anchor_of_basis(0).is_zero());
        assert!(verify_linfty(algebroid).passed());
    }

    #[test]
    fn unbalanced_bracket_reports_exact_position() {
        let text = "kind linfty\nring x\nlevel 0 = e f\nlevel 1 = u\ndiff 1 = [1, 0\n";
        let err = parse_spec("<test>", text).unwrap_err();
        match err {
            Error::Parse { line, col, .. } => {
                assert_eq!(line, 5);
                // The diagnostic points just past the last token of the
                // unterminated matrix literal.
                assert_eq!(col, 15);
            }
            other => panic!("expected a parse diagnostic, got {other:?}"),
        }
    }

    fn sl2_text(corrupt: bool) -> String {
        let hb = if corrupt { "binary e f = h + e\n" } else { "binary e f = h\n" };
        format!(
            "kind linfty\nlabel sl2\nring x\nlevel 0 = e f h\n{hb}binary h e = 2*e\nbinary h f = -2*f\n"
        )
    }

    #[test]
    fn sl2_fixture_round_trips_and_verifies() {
        let doc = parse(&sl2_text(false));
        let Body::Linfty { algebroid, .. } = &doc.body else {
            panic!("expected a linfty body");
        };
        assert!(verify_linfty(algebroid).passed());
        let printed = doc.print();
        let reparsed = parse(&printed);
        assert_eq!(reparsed.print(), printed);

        let bad = parse(&sl2_text(true));
        let Body::Linfty { algebroid: bad_a, .. } = &bad.body else {
            panic!("expected a linfty body");
        };
        let v = verify_linfty(bad_a);
        assert!(!v.passed());
        assert_eq!(v.first_failure().unwrap().id, "jacobi");
    }

    #[test]
    fn print_parse_identity_on_fixture_corpus() {
        let fixtures = [
            "kind courant\nlabel standard\nring x y z\ntemplate standard\n".to_string(),
            "kind courant\nring x y z\ntemplate standard\ntwist = (x)*dx^dy^dz\n".to_string(),
            "kind dirac\nring x y\ngraph = [0, x; -x, 0]\nsupport y\n".to_string(),
            sl2_text(false),
            concat!(
                "kind retract\nring x\n",
                "ambient level 0 = a b\nambient level 1 = u\nambient diff 1 = [1; 1]\n",
                "sub level 0 = s\n",
                "include 0 = [1; 0]\nproject 0 = [1, 0]\nhomotopy 0 = [0, 0]\n",
            )
            .to_string(),
            concat!(
                "kind morphism\nring x\n",
                "begin source\nlevel 0 = e\nanchor e = @x\nend\n",
                "begin target\nlevel 0 = f\nanchor f = @x\nend\n",
                "map 0 = [1]\n",
            )
            .to_string(),
        ];
        for text in fixtures {
            let doc = parse_spec("<fixture>", &text).expect("fixture parses");
            let printed = doc.print();
            let reparsed = parse_spec("<fixture>", &printed).expect("printed fixture parses");
            assert_eq!(reparsed.print(), printed, "non-canonical print for:\n{text}");
        }
    }

    #[test]
    fn symplectic_print_round_trip_via_conversion() {
        let ring = Ring::new(vec!["x", "y"]);
        let e = make_standard(&ring);
        let conn = MetricConnection::trivial(&ring, e.rank());
        let s = courant_to_symplectic(&e, &conn).expect("conversion succeeds");
        let doc = SpecDocument {
            kind: Kind::Symplectic,
            label: None,
            expect: None,
            ring: ring.clone(),
            body: Body::Symplectic { data: s },
        };
        let printed = doc.print();
        let reparsed = parse_spec("<fixture>", &printed).expect("printed symplectic parses");
        assert_eq!(reparsed.print(), printed);
        let report =
            run_command(Command::Verify, &reparsed, None, &Options::default()).expect("verify runs");
        assert_eq!(report.verdict, "pass");
    }

    #[test]
    fn verify_standard_courant_document_passes() {
        let doc = parse("kind courant\nlabel standard\nring x y\ntemplate standard\n");
        let report =
            run_command(Command::Verify, &doc, None, &Options::default()).expect("verify runs");
        assert_eq!(report.verdict, "pass");
        assert!(report.checks.iter().any(|c| c.id == "jacobi"));
    }

    #[test]
    fn convert_round_trips_the_twisted_fixture() {
        let doc = parse("kind courant\nring x y z\ntemplate standard\ntwist = (x)*dx^dy^dz\n");
        let report =
            run_command(Command::Convert, &doc, None, &Options::default()).expect("convert runs");
        assert_eq!(report.verdict, "pass");
        let diff = report.payload.unwrap()["diff"].as_array().unwrap().len();
        assert_eq!(diff, 0);
    }

    #[test]
    fn ce_command_reports_square_zero_and_round_trip() {
        let doc = parse(&sl2_text(false));
        let report = run_command(Command::Ce, &doc, None, &Options::default()).expect("ce runs");
        assert_eq!(report.verdict, "pass");
        let payload = report.payload.unwrap();
        assert_eq!(payload["generators"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn normalize_command_recovers_the_base_part() {
        // An abelian algebroid with zero anchor has vanishing internal
        // differential, so an embedded closed base form is already a cocycle
        // of the total complex with trivial potential part.
        let ring = Ring::new(vec!["x", "y"]);
        let doc0 = parse("kind linfty\nring x y\nlevel 0 = e\n");
        let Body::Linfty { algebroid: a, .. } = &doc0.body else {
            panic!("expected a linfty body");
        };
        let ctx = FormsContext::new(a).expect("forms context builds");
        let base = {
            let mut f = ring.zero_form(2);
            f.add_term(&[0, 1], &ring.one());
            f
        };
        let n = crate::forms::NormalizedClosedForm {
            p: 2,
            beta: ctx.table().zero(),
            base: ctx.embed_base_form(&base),
        };
        let w = ctx.realize_closed_form(&n).expect("realization succeeds");
        let text = format!(
            "kind linfty\nring x y\nlevel 0 = e\ncocycle 2 = {}\n",
            fmt_mixed(&w)
        );
        let doc = parse(&text);
        let printed = doc.print();
        assert_eq!(parse(&printed).print(), printed);
        let report =
            run_command(Command::Normalize, &doc, None, &Options::default()).expect("normalize runs");
        assert_eq!(report.verdict, "pass");
        let payload = report.payload.unwrap();
        assert_eq!(payload["base"].as_str().unwrap(), "(1)*dx^dy");
    }

    #[test]
    fn transfer_command_runs_against_a_retract_document() {
        let main = parse(concat!(
            "kind linfty\nring x\n",
            "level 0 = a b\nlevel 1 = u\ndiff 1 = [0; 1]\n",
            "anchor a = @x\n",
        ));
        let retract = parse(concat!(
            "kind retract\nring x\n",
            "ambient level 0 = a b\nambient level 1 = u\nambient diff 1 = [0; 1]\n",
            "sub level 0 = s\n",
            "include 0 = [1; 0]\nproject 0 = [1, 0]\nhomotopy 0 = [0, -1]\n",
        ));
        let report = run_command(Command::Transfer, &main, Some(&retract), &Options::default())
            .expect("transfer runs");
        assert_eq!(report.verdict, "pass");
        let transferred = report.payload.unwrap()["transferred"].as_str().unwrap().to_string();
        let tdoc = parse(&transferred);
        let Body::Linfty { algebroid, .. } = &tdoc.body else {
            panic!("expected a linfty body");
        };
        assert_eq!(algebroid.complex().rank(0), 1);
    }

    #[test]
    fn dirac_command_checks_poisson_and_coisotropy() {
        let doc = parse("kind dirac\nring x y z\ngraph = [0, z, 0; -z, 0, 0; 0, 0, 0]\nsupport z\n");
        let report =
            run_command(Command::Dirac, &doc, None, &Options::default()).expect("dirac runs");
        assert_eq!(report.verdict, "pass");
        assert!(report.checks.iter().any(|c| c.id == "poisson" && c.pass));
        assert!(report.checks.iter().any(|c| c.id == "support.coisotropic" && c.pass));
    }

    #[test]
    fn reports_are_deterministic_and_json_round_trips() {
        let doc = parse("kind courant\nlabel standard\nring x y\ntemplate standard\n");
        let opts = Options::default();
        let r1 = run_command(Command::Verify, &doc, None, &opts).expect("verify runs");
        let r2 = run_command(Command::Verify, &doc, None, &opts).expect("verify runs");
        let j1 = emit_report(&r1, "json").expect("json serializes");
        let j2 = emit_report(&r2, "json").expect("json serializes");
        assert_eq!(j1, j2);
        let back: Report = serde_json::from_str(&j1).expect("report deserializes");
        assert_eq!(emit_report(&back, "json").expect("json serializes"), j1);
        assert!(j1.contains("\"verdict\": \"pass\""));
        assert!(emit_report(&r1, "yaml").is_err());
    }

    #[test]
    fn expression_parser_handles_powers_and_rationals() {
        let doc = parse(concat!(
            "kind courant\nring x y\n",
            "basis a b\n",
            "gram = [0, 1/2; 1/2, 0]\n",
            "anchor a = (x^2 + 1)*@x - y*@y\n",
            "bracket a b = (3/2*x)*a - b\n",
        ));
        let Body::Courant { data } = &doc.body else {
            panic!("expected a courant body");
        };
        let x = data.ring().var(0);
        let expected = x.mul(&x).add(&data.ring().one());
        assert_eq!(data.anchor_of_basis(0).comps()[0], expected);
        assert_eq!(
            data.bracket_of_basis(0, 1)[0],
            x.scale(&num::BigRational::new(3.into(), 2.into()))
        );
        assert_eq!(data.bracket_of_basis(0, 1)[1], data.ring().constant(q(-1)));
        let printed = doc.print();
        assert_eq!(parse(&printed).print(), printed);
    }
}
