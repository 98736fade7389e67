//! Dense square complex matrices and words in a matrix and its adjoint.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gemm::{gemm, rm, rm_mut};

/// Dense `N x N` complex matrix stored row-major.
///
/// Every constructor that accepts external data checks that `N >= 1` and that
/// all entries are finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// The zero matrix. Panics if `dim == 0`.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        ComplexMatrix { dim, data: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidMatrix("empty diagonal".into()));
        }
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_row_major(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMatrix("dimension must be at least 1".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        let m = ComplexMatrix { dim, data };
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidMatrix("rows must form a square matrix".into()));
        }
        Self::from_row_major(dim, rows.concat())
    }

    /// Real-valued convenience constructor, mostly for tests and examples.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> =
            rows.iter().map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            Some(p) => Err(Error::InvalidMatrix(format!("non-finite entry at ({}, {})", p / self.dim, p % self.dim))),
            None => Ok(()),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major entries.
    #[inline]
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        ComplexMatrix { dim: self.dim, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        ComplexMatrix { dim: self.dim, data: self.data.iter().map(|&z| z * s).collect() }
    }

    /// Matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matmul");
        let n = self.dim;
        let mut out = Self::zeros(n);
        if n == 0 {
            return out;
        }
        gemm(n, n, n, 1.0, rm(&self.data, n, 0, 0), rm(&rhs.data, n, 0, 0), 0.0, rm_mut(&mut out.data, n, 0, 0));
        out
    }

    /// Unnormalized trace.
    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// `tr m = (1/N) Tr m`.
    pub fn normalized_trace(&self) -> Complex64 {
        self.trace() / self.dim as f64
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sqr().sqrt()
    }

    /// Exact structural test: every entry strictly below the diagonal is zero.
    pub fn is_upper_triangular(&self) -> bool {
        (0..self.dim).all(|i| self.row(i)[..i].iter().all(|z| z.re == 0.0 && z.im == 0.0))
    }

    /// Exact structural test: every off-diagonal entry is zero.
    pub fn is_diagonal(&self) -> bool {
        let n = self.dim;
        self.data.iter().enumerate().all(|(p, z)| p / n == p % n || (z.re == 0.0 && z.im == 0.0))
    }

    /// `|| m m* - m* m ||_F`.
    pub fn commutator_norm(&self) -> f64 {
        let a = self.adjoint();
        let d = &self.matmul(&a) - &a.matmul(self);
        d.frobenius_norm()
    }

    /// `|| m* m - I ||_F`, the departure from unitarity.
    pub fn unitarity_defect(&self) -> f64 {
        let g = self.adjoint().matmul(self);
        (&g - &Self::identity(self.dim)).frobenius_norm()
    }

    pub fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    /// Panics if `m` is not square or empty.
    pub fn from_nalgebra(m: &DMatrix<Complex64>) -> Self {
        assert!(m.is_square() && m.nrows() >= 1);
        let n = m.nrows();
        Self::from_fn(n, |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in add");
        ComplexMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in sub");
        ComplexMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// One letter of a word: the variable itself or its adjoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StarLetter {
    Id,
    Star,
}

impl StarLetter {
    pub fn flip(self) -> Self {
        match self {
            StarLetter::Id => StarLetter::Star,
            StarLetter::Star => StarLetter::Id,
        }
    }

    fn symbol(self) -> char {
        match self {
            StarLetter::Id => '1',
            StarLetter::Star => '*',
        }
    }
}

/// Nonempty word over `{1, *}`; `"1*"` stands for `m m*`.
///
/// Parsing also accepts `⋆` for the adjoint letter; display always uses `*`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StarWord(Vec<StarLetter>);

impl StarWord {
    pub fn new(letters: Vec<StarLetter>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::InvalidWord("words must have at least one letter".into()));
        }
        Ok(StarWord(letters))
    }

    pub fn letters(&self) -> &[StarLetter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; words are nonempty by construction.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Word of the adjoint product: letters reversed and flipped.
    pub fn adjoint(&self) -> StarWord {
        StarWord(self.0.iter().rev().map(|l| l.flip()).collect())
    }

    /// `(#1, #*)`.
    pub fn letter_counts(&self) -> (usize, usize) {
        let ids = self.0.iter().filter(|&&l| l == StarLetter::Id).count();
        (ids, self.0.len() - ids)
    }

    pub fn rotate_left(&self, by: usize) -> StarWord {
        let mut v = self.0.clone();
        let len = v.len();
        v.rotate_left(by % len);
        StarWord(v)
    }

    /// All `2^len` words of exactly this length, in lexicographic order with `1 < *`.
    pub fn all_of_length(len: usize) -> Vec<StarWord> {
        assert!(len >= 1);
        (0..1usize << len)
            .map(|bits| {
                StarWord(
                    (0..len)
                        .map(|p| if bits >> (len - 1 - p) & 1 == 0 { StarLetter::Id } else { StarLetter::Star })
                        .collect(),
                )
            })
            .collect()
    }

    /// All words of length `1..=max_len`, shortest first.
    pub fn all_up_to(max_len: usize) -> Vec<StarWord> {
        (1..=max_len).flat_map(Self::all_of_length).collect()
    }
}

impl fmt::Display for StarWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{}", l.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for StarWord {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| match c {
                '1' => Ok(StarLetter::Id),
                '*' | '⋆' => Ok(StarLetter::Star),
                other => Err(Error::InvalidWord(format!("unexpected letter {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        StarWord::new(letters)
    }
}

impl TryFrom<String> for StarWord {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<StarWord> for String {
    fn from(w: StarWord) -> String {
        w.to_string()
    }
}

/// `sum_ij a_ij b_ji`, i.e. `Tr(a b)` without forming the product.
fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    let n = a.dim;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let a_row = a.row(i);
        for (j, &x) in a_row.iter().enumerate() {
            acc += x * b.data[j * n + i];
        }
    }
    acc
}

/// `sum_ij a_ij conj(m_ij)`, i.e. `Tr(a m*)`.
fn trace_of_product_adjoint(a: &ComplexMatrix, m: &ComplexMatrix) -> Complex64 {
    a.data.iter().zip(&m.data).map(|(x, y)| x * y.conj()).sum()
}

/// Normalized trace `(1/N) Tr(m^{s_1} ... m^{s_p})` of the word `w` evaluated at `m`.
pub fn trace_word(m: &ComplexMatrix, w: &StarWord) -> Complex64 {
    let n = m.dim as f64;
    let letters = w.letters();
    if letters.len() == 1 {
        let t = m.trace();
        return match letters[0] {
            StarLetter::Id => t / n,
            StarLetter::Star => t.conj() / n,
        };
    }
    let adj = m.adjoint();
    let factor = |l: StarLetter| if l == StarLetter::Id { m } else { &adj };
    let (head, last) = letters.split_at(letters.len() - 1);
    let mut prefix = factor(head[0]).clone();
    for &l in &head[1..] {
        prefix = prefix.matmul(factor(l));
    }
    let t = match last[0] {
        StarLetter::Id => trace_of_product(&prefix, m),
        StarLetter::Star => trace_of_product_adjoint(&prefix, m),
    };
    t / n
}

/// Normalized traces of every word of length `1..=max_len`.
///
/// Each word is split into a left half of length `ceil(p/2)` and a right half,
/// and the trace is contracted from the two half products in `O(N^2)`. Only
/// words up to length `ceil(max_len/2)` are ever multiplied out, and a product
/// whose adjoint word is already known is obtained by taking the adjoint. For
/// `max_len <= 4` that is three matrix products in total. Output order matches
/// [`StarWord::all_up_to`].
pub fn trace_all_words(m: &ComplexMatrix, max_len: usize) -> Vec<(StarWord, Complex64)> {
    assert!(max_len >= 1);
    let n = m.dim as f64;
    let half = max_len.div_ceil(2);
    let mut products: HashMap<StarWord, ComplexMatrix> = HashMap::new();
    products.insert(StarWord(vec![StarLetter::Id]), m.clone());
    products.insert(StarWord(vec![StarLetter::Star]), m.adjoint());
    for len in 2..=half {
        for w in StarWord::all_of_length(len) {
            if products.contains_key(&w) {
                continue;
            }
            let adj = w.adjoint();
            let product = match products.get(&adj) {
                Some(p) => p.adjoint(),
                None => {
                    let (head, last) = w.0.split_at(len - 1);
                    let left = &products[&StarWord(head.to_vec())];
                    left.matmul(&products[&StarWord(last.to_vec())])
                }
            };
            products.insert(w, product);
        }
    }
    StarWord::all_up_to(max_len)
        .into_iter()
        .map(|w| {
            let p = w.len();
            let t = if p == 1 {
                products[&w].trace()
            } else {
                let (l, r) = w.0.split_at(p.div_ceil(2));
                trace_of_product(&products[&StarWord(l.to_vec())], &products[&StarWord(r.to_vec())])
            };
            (w, t / n)
        })
        .collect()
}
