//! Dense GF(2) vectors and matrices.
//!
//! Bits are packed into 64-bit words, LSB-first within each word, so bit `i`
//! lives in word `i / 64` at position `i % 64`. This is the same order the
//! wire payload uses, which lets check vectors move between the lattice code
//! and the packet codec without re-packing.

use std::fmt;

use crate::error::{Error, Result};

const WORD: usize = 64;

#[inline]
fn words_for(len: usize) -> usize {
    len.div_ceil(WORD)
}

/// A fixed-length vector over GF(2).
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    /// Builds a vector with the given indices set. Repeated indices cancel.
    pub fn from_indices(len: usize, indices: &[usize]) -> Result<Self> {
        let mut v = Self::zeros(len);
        for &i in indices {
            if i >= len {
                return Err(Error::InvalidParameter(format!(
                    "index {i} out of range for length {len}"
                )));
            }
            v.flip(i);
        }
        Ok(v)
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.set(i, true);
            }
        }
        v
    }

    /// Unpacks `len` bits from LSB-first bytes.
    pub fn from_bytes_lsb(len: usize, bytes: &[u8]) -> Self {
        let mut v = Self::zeros(len);
        for i in 0..len {
            if bytes.get(i / 8).is_some_and(|b| (b >> (i % 8)) & 1 == 1) {
                v.set(i, true);
            }
        }
        v
    }

    /// Packs into `len.div_ceil(8)` bytes, LSB-first.
    pub fn to_bytes_lsb(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len.div_ceil(8)];
        for i in self.iter_ones() {
            out[i / 8] |= 1 << (i % 8);
        }
        out
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / WORD] ^= 1u64 << (i % WORD);
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// In-place XOR. Panics on length mismatch.
    pub fn xor_assign(&mut self, other: &BitVec) {
        assert_eq!(self.len, other.len, "GF(2) length mismatch");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn xor(&self, other: &BitVec) -> BitVec {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    /// Parity of the overlap `<self, other>` over GF(2).
    pub fn dot(&self, other: &BitVec) -> bool {
        assert_eq!(self.len, other.len, "GF(2) length mismatch");
        let ones: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        ones & 1 == 1
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let bit = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * WORD + bit)
            })
        })
    }

    pub fn ones(&self) -> Vec<usize> {
        self.iter_ones().collect()
    }

    pub fn first_one(&self) -> Option<usize> {
        self.iter_ones().next()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVec[{}]{:?}", self.len, self.ones())
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// A dense row-major GF(2) matrix.
#[derive(Clone, PartialEq, Eq)]
pub struct BitMatrix {
    cols: usize,
    rows: Vec<BitVec>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            cols,
            rows: vec![BitVec::zeros(cols); rows],
        }
    }

    pub fn from_rows(cols: usize, rows: Vec<BitVec>) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::InvalidParameter(format!(
                "row of length {} in a matrix with {cols} columns",
                bad.len()
            )));
        }
        Ok(Self { cols, rows })
    }

    /// Builds a matrix from 0/1 entries; every row must have the same length.
    pub fn from_dense(entries: &[&[u8]]) -> Result<Self> {
        let cols = entries.first().map_or(0, |r| r.len());
        let rows = entries
            .iter()
            .map(|r| {
                if r.len() != cols {
                    return Err(Error::InvalidParameter("ragged matrix".into()));
                }
                Ok(BitVec::from_bools(
                    &r.iter().map(|&x| x & 1 == 1).collect::<Vec<_>>(),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cols, rows })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &BitVec {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[BitVec] {
        &self.rows
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r].get(c)
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        self.rows[r].set(c, value);
    }

    /// `self * v` over GF(2).
    pub fn mul_vec(&self, v: &BitVec) -> Result<BitVec> {
        if v.len() != self.cols {
            return Err(Error::InvalidParameter(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        let mut out = BitVec::zeros(self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            if row.dot(v) {
                out.set(i, true);
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> BitMatrix {
        let mut t = BitMatrix::zeros(self.cols, self.rows.len());
        for (r, row) in self.rows.iter().enumerate() {
            for c in row.iter_ones() {
                t.rows[c].set(r, true);
            }
        }
        t
    }

    /// `self * other^T`, i.e. the matrix of row-overlap parities.
    pub fn mul_transpose(&self, other: &BitMatrix) -> Result<BitMatrix> {
        if self.cols != other.cols {
            return Err(Error::InvalidParameter(format!(
                "column counts differ: {} vs {}",
                self.cols, other.cols
            )));
        }
        let mut out = BitMatrix::zeros(self.rows.len(), other.rows.len());
        for (i, a) in self.rows.iter().enumerate() {
            for (j, b) in other.rows.iter().enumerate() {
                if a.dot(b) {
                    out.rows[i].set(j, true);
                }
            }
        }
        Ok(out)
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(BitVec::is_zero)
    }

    pub fn rank(&self) -> usize {
        RowBasis::from_rows(self.rows.iter().cloned()).len()
    }

    /// A basis of the right null space `{x : self * x = 0}`.
    pub fn kernel(&self) -> Vec<BitVec> {
        // Reduced row echelon form, then one basis vector per free column.
        let mut m = self.rows.clone();
        let mut pivots: Vec<usize> = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            let Some(p) = (r..m.len()).find(|&i| m[i].get(c)) else {
                continue;
            };
            m.swap(r, p);
            let pivot_row = m[r].clone();
            for (i, row) in m.iter_mut().enumerate() {
                if i != r && row.get(c) {
                    row.xor_assign(&pivot_row);
                }
            }
            pivots.push(c);
            r += 1;
            if r == m.len() {
                break;
            }
        }
        let mut is_pivot = vec![false; self.cols];
        for &c in &pivots {
            is_pivot[c] = true;
        }
        (0..self.cols)
            .filter(|&c| !is_pivot[c])
            .map(|free| {
                let mut v = BitVec::zeros(self.cols);
                v.set(free, true);
                for (row_idx, &pc) in pivots.iter().enumerate() {
                    if m[row_idx].get(free) {
                        v.set(pc, true);
                    }
                }
                v
            })
            .collect()
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows.len(), self.cols)?;
        for row in &self.rows {
            writeln!(f, "  {row}")?;
        }
        Ok(())
    }
}

/// An incrementally built echelon basis of a row space.
///
/// Each stored row is reduced against all earlier ones and keyed by its
/// first set bit, so membership tests reduce a candidate in one sweep.
#[derive(Clone, Debug, Default)]
pub struct RowBasis {
    rows: Vec<(usize, BitVec)>,
}

impl RowBasis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rows(rows: impl IntoIterator<Item = BitVec>) -> Self {
        let mut basis = Self::new();
        for r in rows {
            basis.insert(r);
        }
        basis
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Reduces `v` against the basis; the result is zero iff `v` is in the span.
    pub fn reduce(&self, v: &BitVec) -> BitVec {
        let mut v = v.clone();
        for (pivot, row) in &self.rows {
            if v.get(*pivot) {
                v.xor_assign(row);
            }
        }
        v
    }

    pub fn contains(&self, v: &BitVec) -> bool {
        self.reduce(v).is_zero()
    }

    /// Adds `v` to the span. Returns false if it was already dependent.
    pub fn insert(&mut self, v: BitVec) -> bool {
        let reduced = self.reduce(&v);
        let Some(pivot) = reduced.first_one() else {
            return false;
        };
        // Keep earlier rows free of the new pivot so `reduce` stays one pass.
        for (_, row) in self.rows.iter_mut() {
            if row.get(pivot) {
                row.xor_assign(&reduced);
            }
        }
        self.rows.push((pivot, reduced));
        true
    }
}

/// Inverts a square GF(2) matrix, or returns `None` if it is singular.
pub fn invert(m: &BitMatrix) -> Option<BitMatrix> {
    let n = m.n_rows();
    if n != m.n_cols() {
        return None;
    }
    let mut a = m.rows.clone();
    let mut inv: Vec<BitVec> = (0..n)
        .map(|i| {
            let mut v = BitVec::zeros(n);
            v.set(i, true);
            v
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&i| a[i].get(c))?;
        a.swap(c, p);
        inv.swap(c, p);
        let (pa, pi) = (a[c].clone(), inv[c].clone());
        for i in 0..n {
            if i != c && a[i].get(c) {
                a[i].xor_assign(&pa);
                inv[i].xor_assign(&pi);
            }
        }
    }
    Some(BitMatrix { cols: n, rows: inv })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_is_lsb_first() {
        let v = BitVec::from_indices(10, &[0, 3, 9]).unwrap();
        assert_eq!(v.to_bytes_lsb(), vec![0b0000_1001, 0b0000_0010]);
        assert_eq!(BitVec::from_bytes_lsb(10, &v.to_bytes_lsb()), v);
    }

    #[test]
    fn repeated_indices_cancel() {
        let v = BitVec::from_indices(5, &[1, 1, 2]).unwrap();
        assert_eq!(v.ones(), vec![2]);
        assert!(BitVec::from_indices(5, &[5]).is_err());
    }

    #[test]
    fn rank_of_zero_and_identity() {
        assert_eq!(BitMatrix::zeros(4, 7).rank(), 0);
        let id = BitMatrix::from_dense(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]).unwrap();
        assert_eq!(id.rank(), 3);
        let dep = BitMatrix::from_dense(&[&[1, 1, 0], &[0, 1, 1], &[1, 0, 1]]).unwrap();
        assert_eq!(dep.rank(), 2);
    }

    #[test]
    fn kernel_vectors_are_annihilated() {
        let h = BitMatrix::from_dense(&[
            &[1, 1, 0, 1, 0, 0],
            &[0, 1, 1, 0, 1, 0],
            &[0, 0, 1, 1, 0, 1],
        ])
        .unwrap();
        let ker = h.kernel();
        assert_eq!(ker.len(), 6 - h.rank());
        for v in &ker {
            assert!(h.mul_vec(v).unwrap().is_zero());
        }
    }

    #[test]
    fn inverse_round_trips() {
        let m = BitMatrix::from_dense(&[&[1, 1, 0], &[0, 1, 0], &[1, 0, 1]]).unwrap();
        let inv = invert(&m).unwrap();
        let prod = m.mul_transpose(&inv.transpose()).unwrap();
        assert_eq!(
            prod,
            BitMatrix::from_dense(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]).unwrap()
        );
        let singular = BitMatrix::from_dense(&[&[1, 1], &[1, 1]]).unwrap();
        assert!(invert(&singular).is_none());
    }
}
