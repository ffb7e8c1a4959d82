//! Linear algebra over GF(2) and graded chain complexes.
//!
//! Matrices are stored as packed bit rows and reduced by plain Gaussian
//! elimination; sizes in this crate are tiny, so determinism beats speed.
//! Complexes come in two flavours: [`GradedComplexZ2`] over a contiguous
//! degree range, and [`PeriodicComplexZ2`], a Z-indexed complex described by
//! one period block plus a linking matrix between consecutive copies.
//! Both support homology dimensions, a brute-force cross-check, and
//! quotients by a free cyclic action on generators.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::tolerances::BRUTE_FORCE_CAP;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ComplexError {
    #[error("boundary at degree {degree} has shape {rows}x{cols}, expected {want_rows}x{want_cols}")]
    BoundaryShape {
        degree: i64,
        rows: usize,
        cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("boundary composition at degree {0} is nonzero; not a chain complex")]
    NotAComplex(i64),
    #[error("{got} labels at degree {degree}, but the degree has {want} generators")]
    LabelMismatch { degree: i64, got: usize, want: usize },
    #[error("period block must span exactly period_shift contiguous degrees (block spans {block}, shift {shift})")]
    BlockSpanMismatch { block: usize, shift: i64 },
    #[error("linking matrix has shape {rows}x{cols}, expected {want_rows}x{want_cols}")]
    LinkingShape {
        rows: usize,
        cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("window covers {got} full periods, need at least {need}")]
    WindowTooSmall { need: usize, got: usize },
    #[error("action permutation missing or not a bijection at degree {0}")]
    ActionNotPermutation(i64),
    #[error("action has order {found} at degree {degree}, which does not divide {order}")]
    ActionOrderMismatch { degree: i64, found: usize, order: usize },
    #[error("action is not free: generator {generator} at degree {degree} is fixed by a nontrivial power")]
    ActionNotFree { degree: i64, generator: usize },
    #[error("action does not commute with the boundary at degree {0}")]
    ActionNotChainMap(i64),
    #[error("total dimension {0} exceeds the brute-force cap {1}")]
    BruteForceTooLarge(usize, usize),
}

/// Dense bit matrix over GF(2), packed row-major into 64-bit words.
#[derive(Clone, PartialEq, Eq)]
pub struct Gf2Matrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl Gf2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64).max(1);
        Gf2Matrix {
            rows,
            cols,
            words_per_row,
            bits: vec![0; rows * words_per_row],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// All-ones matrix.
    pub fn ones(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, true);
            }
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                if f(i, j) {
                    m.set(i, j, true);
                }
            }
        }
        m
    }

    /// Builds from dense 0/1 rows; panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<u8>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self::from_fn(rows.len(), cols, |i, j| rows[i][j] != 0)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        assert!(i < self.rows && j < self.cols);
        self.bits[i * self.words_per_row + j / 64] >> (j % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        assert!(i < self.rows && j < self.cols);
        let w = &mut self.bits[i * self.words_per_row + j / 64];
        if v {
            *w |= 1 << (j % 64);
        } else {
            *w &= !(1 << (j % 64));
        }
    }

    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    fn row_words(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    /// GF(2) matrix product; panics on inner-dimension mismatch.
    pub fn mul(&self, rhs: &Gf2Matrix) -> Gf2Matrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Gf2Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let mut acc = vec![0u64; rhs.words_per_row];
            for k in 0..self.cols {
                if self.get(i, k) {
                    for (a, w) in acc.iter_mut().zip(rhs.row_words(k)) {
                        *a ^= w;
                    }
                }
            }
            let dst = i * out.words_per_row;
            out.bits[dst..dst + rhs.words_per_row].copy_from_slice(&acc);
        }
        out
    }

    pub fn transpose(&self) -> Gf2Matrix {
        Gf2Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Rank via Gaussian elimination on a scratch copy.
    pub fn rank(&self) -> usize {
        let mut work: Vec<Vec<u64>> = (0..self.rows).map(|i| self.row_words(i).to_vec()).collect();
        let mut rank = 0;
        for col in 0..self.cols {
            let (w, b) = (col / 64, col % 64);
            let Some(pivot) = (rank..self.rows).find(|&r| work[r][w] >> b & 1 == 1) else {
                continue;
            };
            work.swap(rank, pivot);
            let pivot_row = work[rank].clone();
            for (r, row) in work.iter_mut().enumerate() {
                if r != rank && row[w] >> b & 1 == 1 {
                    for (x, p) in row.iter_mut().zip(&pivot_row) {
                        *x ^= p;
                    }
                }
            }
            rank += 1;
            if rank == self.rows {
                break;
            }
        }
        rank
    }

    /// Basis of the null space, returned as columns of a `cols × k` matrix.
    pub fn kernel_basis(&self) -> Gf2Matrix {
        let mut work: Vec<Vec<u64>> = (0..self.rows).map(|i| self.row_words(i).to_vec()).collect();
        let mut pivot_col_of_row = Vec::new();
        let mut r = 0;
        for col in 0..self.cols {
            let (w, b) = (col / 64, col % 64);
            let Some(pivot) = (r..self.rows).find(|&row| work[row][w] >> b & 1 == 1) else {
                continue;
            };
            work.swap(r, pivot);
            let pivot_row = work[r].clone();
            for (row, data) in work.iter_mut().enumerate() {
                if row != r && data[w] >> b & 1 == 1 {
                    for (x, p) in data.iter_mut().zip(&pivot_row) {
                        *x ^= p;
                    }
                }
            }
            pivot_col_of_row.push(col);
            r += 1;
            if r == self.rows {
                break;
            }
        }
        let pivot_cols: HashSet<usize> = pivot_col_of_row.iter().copied().collect();
        let free_cols: Vec<usize> = (0..self.cols).filter(|c| !pivot_cols.contains(c)).collect();
        let mut basis = Gf2Matrix::zeros(self.cols, free_cols.len());
        for (k, &fc) in free_cols.iter().enumerate() {
            basis.set(fc, k, true);
            for (row, &pc) in pivot_col_of_row.iter().enumerate() {
                if work[row][fc / 64] >> (fc % 64) & 1 == 1 {
                    basis.set(pc, k, true);
                }
            }
        }
        basis
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) as u8).collect())
            .collect()
    }
}

impl fmt::Debug for Gf2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Gf2Matrix {}x{}", self.rows, self.cols)?;
        for row in self.to_dense() {
            writeln!(f, "  {row:?}")?;
        }
        Ok(())
    }
}

impl Serialize for Gf2Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_dense().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Gf2Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let dense = Vec::<Vec<u8>>::deserialize(deserializer)?;
        let cols = dense.first().map_or(0, Vec::len);
        if dense.iter().any(|r| r.len() != cols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        if dense.iter().flatten().any(|&e| e > 1) {
            return Err(D::Error::custom("matrix entries must be 0 or 1"));
        }
        Ok(Gf2Matrix::from_rows(&dense))
    }
}

/// Finitely supported Z-graded chain complex of GF(2) vector spaces.
///
/// Degrees form the contiguous range `lo..=hi`; the boundary at degree `k`
/// maps degree `k` to degree `k − 1` and so has shape `dim(k−1) × dim(k)`.
/// Construction verifies shape consistency and `∂∘∂ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedComplexZ2 {
    lo: i64,
    dims: Vec<usize>,
    boundaries: BTreeMap<i64, Gf2Matrix>,
    labels: BTreeMap<i64, Vec<String>>,
}

impl GradedComplexZ2 {
    pub fn new(
        lo: i64,
        dims: Vec<usize>,
        boundaries: BTreeMap<i64, Gf2Matrix>,
        labels: Option<BTreeMap<i64, Vec<String>>>,
    ) -> Result<Self, ComplexError> {
        let hi = lo + dims.len() as i64 - 1;
        let dim_at = |k: i64| -> usize {
            if k < lo || k > hi {
                0
            } else {
                dims[(k - lo) as usize]
            }
        };
        for (&k, m) in &boundaries {
            let (want_rows, want_cols) = (dim_at(k - 1), dim_at(k));
            if m.rows() != want_rows || m.cols() != want_cols {
                return Err(ComplexError::BoundaryShape {
                    degree: k,
                    rows: m.rows(),
                    cols: m.cols(),
                    want_rows,
                    want_cols,
                });
            }
        }
        let labels = labels.unwrap_or_default();
        for (&k, names) in &labels {
            if names.len() != dim_at(k) {
                return Err(ComplexError::LabelMismatch {
                    degree: k,
                    got: names.len(),
                    want: dim_at(k),
                });
            }
        }
        let c = GradedComplexZ2 {
            lo,
            dims,
            boundaries,
            labels,
        };
        c.verify()?;
        Ok(c)
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.dims.len() as i64 - 1
    }

    pub fn dim(&self, k: i64) -> usize {
        if k < self.lo || k > self.hi() {
            0
        } else {
            self.dims[(k - self.lo) as usize]
        }
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Boundary at degree `k`, materialized as a zero matrix when absent.
    pub fn boundary(&self, k: i64) -> Gf2Matrix {
        self.boundaries
            .get(&k)
            .cloned()
            .unwrap_or_else(|| Gf2Matrix::zeros(self.dim(k - 1), self.dim(k)))
    }

    pub fn labels(&self, k: i64) -> Vec<String> {
        self.labels.get(&k).cloned().unwrap_or_else(|| {
            (0..self.dim(k)).map(|i| format!("g{k}_{i}")).collect()
        })
    }

    /// Checks `∂_k ∘ ∂_{k+1} = 0` for every degree.
    pub fn verify(&self) -> Result<(), ComplexError> {
        for k in self.lo..=self.hi() {
            if !self.boundary(k).mul(&self.boundary(k + 1)).is_zero() {
                return Err(ComplexError::NotAComplex(k));
            }
        }
        Ok(())
    }

    /// `dim H_k = dim C_k − rank ∂_k − rank ∂_{k+1}` per degree.
    pub fn homology_dims(&self) -> BTreeMap<i64, usize> {
        (self.lo..=self.hi())
            .map(|k| {
                let h = self.dim(k) - self.boundary(k).rank() - self.boundary(k + 1).rank();
                (k, h)
            })
            .collect()
    }

    /// Independent homology oracle: enumerates all vectors of every chain
    /// group, counting cycles and boundaries directly. No elimination is
    /// shared with [`Self::homology_dims`].
    pub fn homology_dims_bruteforce(&self) -> Result<BTreeMap<i64, usize>, ComplexError> {
        let total = self.total_dim();
        if total > BRUTE_FORCE_CAP {
            return Err(ComplexError::BruteForceTooLarge(total, BRUTE_FORCE_CAP));
        }
        let apply = |m: &Gf2Matrix, v: u64| -> u64 {
            let mut out = 0u64;
            for i in 0..m.rows() {
                let mut bit = false;
                for j in 0..m.cols() {
                    bit ^= m.get(i, j) && v >> j & 1 == 1;
                }
                out |= (bit as u64) << i;
            }
            out
        };
        let mut result = BTreeMap::new();
        for k in self.lo..=self.hi() {
            let d_k = self.boundary(k);
            let cycles = (0..1u64 << self.dim(k))
                .filter(|&v| apply(&d_k, v) == 0)
                .count();
            let d_up = self.boundary(k + 1);
            let images: HashSet<u64> = (0..1u64 << self.dim(k + 1))
                .map(|v| apply(&d_up, v))
                .collect();
            let log2 = |n: usize| n.trailing_zeros() as usize;
            result.insert(k, log2(cycles) - log2(images.len()));
        }
        Ok(result)
    }

    pub fn euler_characteristic(&self) -> i64 {
        (self.lo..=self.hi())
            .map(|k| {
                let sign = if k.rem_euclid(2) == 0 { 1 } else { -1 };
                sign * self.dim(k) as i64
            })
            .sum()
    }

    /// Quotient by a free cyclic action commuting with the boundary.
    /// Generators of the quotient are the orbits; the induced boundary entry
    /// is the mod-2 count over one source orbit against a fixed target
    /// representative.
    pub fn quotient_by_action(&self, action: &DegreeAction) -> Result<Self, ComplexError> {
        action.validate(self)?;
        let mut dims = Vec::new();
        let mut boundaries = BTreeMap::new();
        let mut labels = BTreeMap::new();
        let mut orbit_reps: BTreeMap<i64, Vec<Vec<usize>>> = BTreeMap::new();
        for k in self.lo..=self.hi() {
            let orbits = action.orbits(k, self.dim(k));
            dims.push(orbits.len());
            let names = self.labels(k);
            labels.insert(
                k,
                orbits
                    .iter()
                    .map(|o| {
                        o.iter()
                            .map(|&i| names[i].clone())
                            .collect::<Vec<_>>()
                            .join("+")
                    })
                    .collect(),
            );
            orbit_reps.insert(k, orbits);
        }
        for k in self.lo + 1..=self.hi() {
            let d = self.boundary(k);
            let src = &orbit_reps[&k];
            let dst = &orbit_reps[&(k - 1)];
            if d.rows() == 0 || d.cols() == 0 {
                continue;
            }
            let m = Gf2Matrix::from_fn(dst.len(), src.len(), |r, c| {
                dst[r].iter().fold(false, |acc, &y| acc ^ d.get(y, src[c][0]))
            });
            boundaries.insert(k, m);
        }
        GradedComplexZ2::new(self.lo, dims, boundaries, Some(labels))
    }
}

/// Z-indexed chain complex given by one period block, a degree shift per
/// period, and a linking matrix from the bottom of each copy to the top of
/// the previous one.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicComplexZ2 {
    period_shift: i64,
    block: GradedComplexZ2,
    linking: Gf2Matrix,
}

impl PeriodicComplexZ2 {
    pub fn new(
        period_shift: i64,
        block: GradedComplexZ2,
        linking: Gf2Matrix,
    ) -> Result<Self, ComplexError> {
        if period_shift <= 0 || block.dims.len() as i64 != period_shift {
            return Err(ComplexError::BlockSpanMismatch {
                block: block.dims.len(),
                shift: period_shift,
            });
        }
        let (want_rows, want_cols) = (block.dim(block.hi()), block.dim(block.lo()));
        if linking.rows() != want_rows || linking.cols() != want_cols {
            return Err(ComplexError::LinkingShape {
                rows: linking.rows(),
                cols: linking.cols(),
                want_rows,
                want_cols,
            });
        }
        // ∂² across the seam: linking ∘ ∂_{lo+1} and ∂_hi ∘ linking.
        if !linking.mul(&block.boundary(block.lo() + 1)).is_zero() {
            return Err(ComplexError::NotAComplex(block.lo() + 1));
        }
        if !block.boundary(block.hi()).mul(&linking).is_zero() {
            return Err(ComplexError::NotAComplex(block.lo()));
        }
        Ok(PeriodicComplexZ2 {
            period_shift,
            block,
            linking,
        })
    }

    pub fn period_shift(&self) -> i64 {
        self.period_shift
    }

    pub fn block(&self) -> &GradedComplexZ2 {
        &self.block
    }

    pub fn linking(&self) -> &Gf2Matrix {
        &self.linking
    }

    /// Materializes copies `j_lo..=j_hi` of the block as one finite complex;
    /// copy `j` occupies degrees `j·P + (block range)`.
    pub fn assemble_window(&self, j_lo: i64, j_hi: i64) -> GradedComplexZ2 {
        assert!(j_lo <= j_hi);
        let p = self.period_shift;
        let b = &self.block;
        let lo = j_lo * p + b.lo();
        let mut dims = Vec::new();
        let mut boundaries = BTreeMap::new();
        let mut labels = BTreeMap::new();
        for j in j_lo..=j_hi {
            for k in b.lo()..=b.hi() {
                let deg = j * p + k;
                dims.push(b.dim(k));
                labels.insert(
                    deg,
                    b.labels(k).iter().map(|l| format!("{j}:{l}")).collect(),
                );
                if k > b.lo() {
                    boundaries.insert(deg, b.boundary(k));
                } else if j > j_lo {
                    boundaries.insert(deg, self.linking.clone());
                }
            }
        }
        GradedComplexZ2::new(lo, dims, boundaries, Some(labels))
            .expect("periodic block invariants guarantee a valid window")
    }

    /// Homology of the assembled window of all full periods inside the given
    /// degree range, reported for interior degrees only (the two extreme
    /// degrees of the window see a truncated boundary and are excluded).
    /// Requires at least three full periods.
    pub fn periodic_homology_dims(
        &self,
        degree_lo: i64,
        degree_hi: i64,
    ) -> Result<BTreeMap<i64, usize>, ComplexError> {
        let p = self.period_shift;
        let j_lo = (degree_lo - self.block.lo()).div_euclid(p)
            + i64::from((degree_lo - self.block.lo()).rem_euclid(p) != 0);
        let j_hi = (degree_hi - self.block.hi()).div_euclid(p);
        let got = (j_hi - j_lo + 1).max(0) as usize;
        if got < 3 {
            return Err(ComplexError::WindowTooSmall { need: 3, got });
        }
        let window = self.assemble_window(j_lo, j_hi);
        let mut dims = window.homology_dims();
        dims.remove(&window.lo());
        dims.remove(&window.hi());
        Ok(dims)
    }

    /// Quotient of both the block and the linking matrix by a free cyclic
    /// action; the action must commute with the linking seam as well.
    pub fn quotient_by_action(&self, action: &DegreeAction) -> Result<Self, ComplexError> {
        let b = &self.block;
        let p_top = action.perm(b.hi(), b.dim(b.hi()))?;
        let p_bot = action.perm(b.lo(), b.dim(b.lo()))?;
        for r in 0..self.linking.rows() {
            for c in 0..self.linking.cols() {
                if self.linking.get(r, c) != self.linking.get(p_top[r], p_bot[c]) {
                    return Err(ComplexError::ActionNotChainMap(b.lo()));
                }
            }
        }
        let q_block = b.quotient_by_action(action)?;
        let top_orbits = action.orbits(b.hi(), b.dim(b.hi()));
        let bot_orbits = action.orbits(b.lo(), b.dim(b.lo()));
        let q_link = Gf2Matrix::from_fn(top_orbits.len(), bot_orbits.len(), |r, c| {
            top_orbits[r]
                .iter()
                .fold(false, |acc, &y| acc ^ self.linking.get(y, bot_orbits[c][0]))
        });
        PeriodicComplexZ2::new(self.period_shift, q_block, q_link)
    }
}

/// Cyclic group action of order `m`, given per degree as a permutation of
/// the generators of that degree.
#[derive(Debug, Clone)]
pub struct DegreeAction {
    order: usize,
    perms: BTreeMap<i64, Vec<usize>>,
}

impl DegreeAction {
    pub fn new(order: usize, perms: BTreeMap<i64, Vec<usize>>) -> Self {
        assert!(order >= 1);
        DegreeAction { order, perms }
    }

    /// The same permutation applied at every degree of a range.
    pub fn uniform(order: usize, degrees: std::ops::RangeInclusive<i64>, perm: Vec<usize>) -> Self {
        let perms = degrees.map(|k| (k, perm.clone())).collect();
        Self::new(order, perms)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn perm(&self, k: i64, dim: usize) -> Result<&Vec<usize>, ComplexError> {
        if dim == 0 {
            // An empty degree is acted on trivially; reuse any stored perm.
            return Ok(self.perms.get(&k).unwrap_or(
                self.perms.values().next().unwrap_or(&EMPTY_PERM),
            ));
        }
        let p = self
            .perms
            .get(&k)
            .ok_or(ComplexError::ActionNotPermutation(k))?;
        let mut seen = vec![false; dim];
        if p.len() != dim || p.iter().any(|&i| i >= dim || std::mem::replace(&mut seen[i], true)) {
            return Err(ComplexError::ActionNotPermutation(k));
        }
        Ok(p)
    }

    /// Orbit partition at one degree; each orbit lists indices starting from
    /// its minimal representative, in action order.
    fn orbits(&self, k: i64, dim: usize) -> Vec<Vec<usize>> {
        let Some(p) = self.perms.get(&k) else {
            return (0..dim).map(|i| vec![i]).collect();
        };
        let mut seen = vec![false; dim];
        let mut orbits = Vec::new();
        for start in 0..dim {
            if seen[start] {
                continue;
            }
            let mut orbit = vec![start];
            seen[start] = true;
            let mut cur = p[start];
            while cur != start {
                seen[cur] = true;
                orbit.push(cur);
                cur = p[cur];
            }
            orbits.push(orbit);
        }
        orbits
    }

    /// Checks that every degree of the complex carries a bijection whose
    /// order divides `m`, that the action is free (no generator fixed by a
    /// nontrivial power), and that it commutes with every boundary.
    pub fn validate(&self, c: &GradedComplexZ2) -> Result<(), ComplexError> {
        for k in c.lo()..=c.hi() {
            let dim = c.dim(k);
            if dim == 0 {
                continue;
            }
            let p = self.perm(k, dim)?;
            for start in 0..dim {
                let mut cur = start;
                for step in 1..=self.order {
                    cur = p[cur];
                    if cur == start {
                        if self.order % step != 0 {
                            return Err(ComplexError::ActionOrderMismatch {
                                degree: k,
                                found: step,
                                order: self.order,
                            });
                        }
                        if step != self.order && self.order > 1 {
                            return Err(ComplexError::ActionNotFree {
                                degree: k,
                                generator: start,
                            });
                        }
                        break;
                    }
                    if step == self.order {
                        return Err(ComplexError::ActionOrderMismatch {
                            degree: k,
                            found: step + 1,
                            order: self.order,
                        });
                    }
                }
            }
        }
        for k in c.lo() + 1..=c.hi() {
            let d = c.boundary(k);
            if d.rows() == 0 || d.cols() == 0 {
                continue;
            }
            let p_src = self.perm(k, c.dim(k))?;
            let p_dst = self.perm(k - 1, c.dim(k - 1))?;
            for r in 0..d.rows() {
                for col in 0..d.cols() {
                    if d.get(r, col) != d.get(p_dst[r], p_src[col]) {
                        return Err(ComplexError::ActionNotChainMap(k));
                    }
                }
            }
        }
        Ok(())
    }
}

static EMPTY_PERM: Vec<usize> = Vec::new();

/// Wire format for [`GradedComplexZ2`]:
/// `{"degrees":[lo,hi],"dims":[...],"boundaries":{"k":[[0,1,...],...]},"labels":{"k":[...]}}`.
#[derive(Serialize, Deserialize)]
struct GradedComplexDto {
    degrees: [i64; 2],
    dims: Vec<usize>,
    boundaries: BTreeMap<String, Gf2Matrix>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    labels: BTreeMap<String, Vec<String>>,
}

impl Serialize for GradedComplexZ2 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut boundaries = BTreeMap::new();
        for k in self.lo + 1..=self.hi() {
            if self.dim(k) > 0 && self.dim(k - 1) > 0 {
                boundaries.insert(k.to_string(), self.boundary(k));
            }
        }
        GradedComplexDto {
            degrees: [self.lo, self.hi()],
            dims: self.dims.clone(),
            boundaries,
            labels: self
                .labels
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GradedComplexZ2 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let dto = GradedComplexDto::deserialize(deserializer)?;
        fn parse_keys<E: serde::de::Error, V>(
            m: BTreeMap<String, V>,
        ) -> Result<BTreeMap<i64, V>, E> {
            m.into_iter()
                .map(|(k, v)| k.parse::<i64>().map(|k| (k, v)).map_err(E::custom))
                .collect()
        }
        if dto.degrees[1] - dto.degrees[0] + 1 != dto.dims.len() as i64 {
            return Err(D::Error::custom("degree range does not match dims length"));
        }
        let labels = parse_keys(dto.labels)?;
        GradedComplexZ2::new(
            dto.degrees[0],
            dto.dims,
            parse_keys(dto.boundaries)?,
            if labels.is_empty() { None } else { Some(labels) },
        )
        .map_err(D::Error::custom)
    }
}

/// Wire format for [`PeriodicComplexZ2`]:
/// `{"period_shift":P,"block":{...},"linking":[[...]]}`.
#[derive(Serialize, Deserialize)]
struct PeriodicComplexDto {
    period_shift: i64,
    block: GradedComplexZ2,
    linking: Gf2Matrix,
}

impl Serialize for PeriodicComplexZ2 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PeriodicComplexDto {
            period_shift: self.period_shift,
            block: self.block.clone(),
            linking: self.linking.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PeriodicComplexZ2 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let dto = PeriodicComplexDto::deserialize(deserializer)?;
        PeriodicComplexZ2::new(dto.period_shift, dto.block, dto.linking).map_err(D::Error::custom)
    }
}
