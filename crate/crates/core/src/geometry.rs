//! Surface-code lattices and generic CSS codes as GF(2) chain complexes.
//!
//! Data qubits live on edges, X-checks on vertices and Z-checks on faces, so
//! `H_X` is the vertex-edge incidence map (the edge boundary) and `H_Z` is
//! the transpose of the face boundary. Z errors are 1-chains; their syndrome
//! is their boundary.
//!
//! Planar layout for distance `d`: a vertex grid of `d` rows by `d + 1`
//! columns. Horizontal edges `(r,c)-(r,c+1)` exist for every row and
//! `c < d`; vertical edges `(r,c)-(r+1,c)` exist only for interior columns
//! `1..d`. Columns `0` and `d` are the rough boundaries and carry no checks.
//! Edge indices list horizontal edges first, then vertical, row-major.

use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::gf2::{invert, BitMatrix, BitVec, RowBasis};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CodeKind {
    Planar,
    Toric,
    CssGeneric,
}

impl CodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CodeKind::Planar => "planar",
            CodeKind::Toric => "toric",
            CodeKind::CssGeneric => "css-generic",
        }
    }
}

impl std::str::FromStr for CodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "planar" => Ok(CodeKind::Planar),
            "toric" => Ok(CodeKind::Toric),
            "css-generic" => Ok(CodeKind::CssGeneric),
            other => Err(invalid(format!("unknown code kind {other:?}"))),
        }
    }
}

/// A lattice vertex, addressed by row then column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Site {
    pub row: usize,
    pub col: usize,
}

impl Site {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// A set of data-qubit edges.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Chain1(pub BitVec);

/// A set of X-check indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Syndrome0(pub BitVec);

impl Chain1 {
    pub fn zeros(n: usize) -> Self {
        Chain1(BitVec::zeros(n))
    }

    pub fn from_edges(n: usize, edges: &[usize]) -> Result<Self> {
        Ok(Chain1(BitVec::from_indices(n, edges)?))
    }

    pub fn edges(&self) -> Vec<usize> {
        self.0.ones()
    }

    pub fn xor(&self, other: &Chain1) -> Chain1 {
        Chain1(self.0.xor(&other.0))
    }
}

impl Syndrome0 {
    pub fn checks(&self) -> Vec<usize> {
        self.0.ones()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HomologyClass {
    Trivial,
    /// Overlap parity with each `logical_x` representative.
    Nontrivial(BitVec),
}

impl HomologyClass {
    pub fn is_trivial(&self) -> bool {
        matches!(self, HomologyClass::Trivial)
    }
}

#[derive(Clone, Debug)]
pub struct CodeSpec {
    kind: CodeKind,
    /// `d` for planar, `L` for toric, 0 for generic codes.
    size: usize,
    h_x: BitMatrix,
    h_z: BitMatrix,
    logical_z: Vec<BitVec>,
    logical_x: Vec<BitVec>,
    /// Checks touched by each edge (column of `H_X`), at most two for graph-like codes.
    edge_checks: Vec<Vec<usize>>,
    stabilizer_span: RowBasis,
}

impl CodeSpec {
    pub fn build_planar(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(invalid(format!("planar distance must be >= 2, got {d}")));
        }
        let n = d * d + (d - 1) * (d - 1);
        let m_x = d * (d - 1);
        let m_z = d * (d - 1);
        let h = |r: usize, c: usize| r * d + c;
        let v = |r: usize, c: usize| d * d + r * (d - 1) + (c - 1);
        let check = |r: usize, c: usize| r * (d - 1) + (c - 1);

        let mut h_x = BitMatrix::zeros(m_x, n);
        for r in 0..d {
            for c in 0..d {
                // Horizontal edge (r,c)-(r,c+1).
                for col in [c, c + 1] {
                    if (1..d).contains(&col) {
                        h_x.set(check(r, col), h(r, c), true);
                    }
                }
            }
        }
        for r in 0..d - 1 {
            for c in 1..d {
                h_x.set(check(r, c), v(r, c), true);
                h_x.set(check(r + 1, c), v(r, c), true);
            }
        }

        let mut h_z = BitMatrix::zeros(m_z, n);
        for r in 0..d - 1 {
            for c in 0..d {
                let f = r * d + c;
                h_z.set(f, h(r, c), true);
                h_z.set(f, h(r + 1, c), true);
                for col in [c, c + 1] {
                    if (1..d).contains(&col) {
                        h_z.set(f, v(r, col), true);
                    }
                }
            }
        }

        let logical_z = vec![BitVec::from_indices(
            n,
            &(0..d).map(|c| h(0, c)).collect::<Vec<_>>(),
        )?];
        let logical_x = vec![BitVec::from_indices(
            n,
            &(0..d).map(|r| h(r, 0)).collect::<Vec<_>>(),
        )?];
        Ok(Self::assemble(
            CodeKind::Planar,
            d,
            h_x,
            h_z,
            logical_z,
            logical_x,
        ))
    }

    pub fn build_toric(l: usize) -> Result<Self> {
        if l < 2 {
            return Err(invalid(format!("toric side must be >= 2, got {l}")));
        }
        let n = 2 * l * l;
        let h = |r: usize, c: usize| (r % l) * l + (c % l);
        let v = |r: usize, c: usize| l * l + (r % l) * l + (c % l);
        let vertex = |r: usize, c: usize| (r % l) * l + (c % l);

        let mut h_x = BitMatrix::zeros(l * l, n);
        let mut h_z = BitMatrix::zeros(l * l, n);
        for r in 0..l {
            for c in 0..l {
                h_x.set(vertex(r, c), h(r, c), true);
                h_x.set(vertex(r, c + 1), h(r, c), true);
                h_x.set(vertex(r, c), v(r, c), true);
                h_x.set(vertex(r + 1, c), v(r, c), true);

                let f = r * l + c;
                for e in [h(r, c), h(r + 1, c), v(r, c), v(r, c + 1)] {
                    h_z.set(f, e, true);
                }
            }
        }
        let row0: Vec<usize> = (0..l).map(|c| h(0, c)).collect();
        let col0: Vec<usize> = (0..l).map(|r| v(r, 0)).collect();
        let dual_h: Vec<usize> = (0..l).map(|r| h(r, 0)).collect();
        let dual_v: Vec<usize> = (0..l).map(|c| v(0, c)).collect();
        let logical_z = vec![
            BitVec::from_indices(n, &row0)?,
            BitVec::from_indices(n, &col0)?,
        ];
        let logical_x = vec![
            BitVec::from_indices(n, &dual_h)?,
            BitVec::from_indices(n, &dual_v)?,
        ];
        Ok(Self::assemble(
            CodeKind::Toric,
            l,
            h_x,
            h_z,
            logical_z,
            logical_x,
        ))
    }

    /// Accepts an arbitrary CSS pair and derives paired logical operators.
    /// Rejects pairs that do not commute.
    pub fn css(h_x: BitMatrix, h_z: BitMatrix) -> Result<Self> {
        if !css_commutes(&h_x, &h_z)? {
            return Err(invalid("H_X * H_Z^T != 0: not a valid CSS pair"));
        }
        let n = h_x.n_cols();
        let logical_z = nontrivial_basis(&h_x, &h_z);
        let logical_x = nontrivial_basis(&h_z, &h_x);
        debug_assert_eq!(logical_z.len(), logical_x.len());
        let k = logical_z.len();
        // Re-pair the X representatives so that Z_i . X_j = delta_ij.
        let logical_x = if k == 0 {
            logical_x
        } else {
            let gram = BitMatrix::from_rows(
                k,
                logical_z
                    .iter()
                    .map(|z| {
                        BitVec::from_bools(&logical_x.iter().map(|x| z.dot(x)).collect::<Vec<_>>())
                    })
                    .collect(),
            )?;
            let a =
                invert(&gram.transpose()).ok_or_else(|| invalid("degenerate logical pairing"))?;
            (0..k)
                .map(|j| {
                    let mut acc = BitVec::zeros(n);
                    for l in a.row(j).iter_ones() {
                        acc.xor_assign(&logical_x[l]);
                    }
                    acc
                })
                .collect()
        };
        Ok(Self::assemble(
            CodeKind::CssGeneric,
            0,
            h_x,
            h_z,
            logical_z,
            logical_x,
        ))
    }

    fn assemble(
        kind: CodeKind,
        size: usize,
        h_x: BitMatrix,
        h_z: BitMatrix,
        logical_z: Vec<BitVec>,
        logical_x: Vec<BitVec>,
    ) -> Self {
        let hxt = h_x.transpose();
        let edge_checks = hxt.rows().iter().map(BitVec::ones).collect();
        let stabilizer_span = RowBasis::from_rows(h_z.rows().iter().cloned());
        Self {
            kind,
            size,
            h_x,
            h_z,
            logical_z,
            logical_x,
            edge_checks,
            stabilizer_span,
        }
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    /// Code distance `d` (planar) or side `L` (toric); 0 for generic codes.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of data qubits (edges).
    pub fn n(&self) -> usize {
        self.h_x.n_cols()
    }

    pub fn m_x(&self) -> usize {
        self.h_x.n_rows()
    }

    pub fn m_z(&self) -> usize {
        self.h_z.n_rows()
    }

    pub fn h_x(&self) -> &BitMatrix {
        &self.h_x
    }

    pub fn h_z(&self) -> &BitMatrix {
        &self.h_z
    }

    pub fn logical_z(&self) -> &[BitVec] {
        &self.logical_z
    }

    pub fn logical_x(&self) -> &[BitVec] {
        &self.logical_x
    }

    /// Checks incident to edge `e` (sorted).
    pub fn edge_checks(&self, e: usize) -> &[usize] {
        &self.edge_checks[e]
    }

    /// Canonical textual description, stable across runs.
    pub fn canonical_text(&self) -> String {
        match self.kind {
            CodeKind::Planar | CodeKind::Toric => format!("{} {}", self.kind.as_str(), self.size),
            CodeKind::CssGeneric => {
                let mut s = format!("css-generic n={}\n", self.n());
                for (tag, m) in [("X", &self.h_x), ("Z", &self.h_z)] {
                    for row in m.rows() {
                        s.push_str(&format!("{tag} {row}\n"));
                    }
                }
                s
            }
        }
    }

    fn lattice_size(&self) -> Result<usize> {
        match self.kind {
            CodeKind::CssGeneric => Err(invalid("generic CSS codes have no lattice coordinates")),
            _ => Ok(self.size),
        }
    }

    /// The X-check sitting at a lattice vertex, if any.
    pub fn check_at(&self, site: Site) -> Result<Option<usize>> {
        let s = self.lattice_size()?;
        match self.kind {
            CodeKind::Planar => {
                if site.row >= s || site.col > s {
                    return Err(invalid(format!("vertex {site} outside planar d={s}")));
                }
                Ok((1..s)
                    .contains(&site.col)
                    .then(|| site.row * (s - 1) + site.col - 1))
            }
            _ => {
                if site.row >= s || site.col >= s {
                    return Err(invalid(format!("vertex {site} outside toric L={s}")));
                }
                Ok(Some(site.row * s + site.col))
            }
        }
    }

    /// Lattice vertex of an X-check.
    pub fn check_site(&self, check: usize) -> Result<Site> {
        let s = self.lattice_size()?;
        if check >= self.m_x() {
            return Err(invalid(format!("check {check} out of range")));
        }
        Ok(match self.kind {
            CodeKind::Planar => Site::new(check / (s - 1), check % (s - 1) + 1),
            _ => Site::new(check / s, check % s),
        })
    }

    /// Index of the edge joining two adjacent vertices.
    pub fn edge_between(&self, a: Site, b: Site) -> Result<usize> {
        let s = self.lattice_size()?;
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let err = || invalid(format!("no edge between {a} and {b}"));
        match self.kind {
            CodeKind::Planar => {
                if a.row >= s || b.row >= s || a.col > s || b.col > s {
                    return Err(err());
                }
                if a.row == b.row && b.col == a.col + 1 {
                    Ok(a.row * s + a.col)
                } else if a.col == b.col && b.row == a.row + 1 && (1..s).contains(&a.col) {
                    Ok(s * s + a.row * (s - 1) + a.col - 1)
                } else {
                    Err(err())
                }
            }
            _ => {
                if a.row >= s || b.row >= s || a.col >= s || b.col >= s {
                    return Err(err());
                }
                let right = |p: Site| Site::new(p.row, (p.col + 1) % s);
                let down = |p: Site| Site::new((p.row + 1) % s, p.col);
                if right(a) == b {
                    Ok(a.row * s + a.col)
                } else if right(b) == a {
                    Ok(b.row * s + b.col)
                } else if down(a) == b {
                    Ok(s * s + a.row * s + a.col)
                } else if down(b) == a {
                    Ok(s * s + b.row * s + b.col)
                } else {
                    Err(err())
                }
            }
        }
    }

    /// Edge boundary: the checks touched an odd number of times.
    pub fn boundary(&self, chain: &Chain1) -> Result<Syndrome0> {
        Ok(Syndrome0(self.h_x.mul_vec(&chain.0)?))
    }

    /// Boundary of a single face (Z-check), as a 1-chain.
    pub fn face_boundary(&self, face: usize) -> Result<Chain1> {
        if face >= self.m_z() {
            return Err(invalid(format!("face {face} out of range")));
        }
        Ok(Chain1(self.h_z.row(face).clone()))
    }

    pub fn logical_count(&self) -> usize {
        logical_count(&self.h_x, &self.h_z)
    }

    /// Overlap parities of a chain with each logical-X representative.
    pub fn logical_label(&self, chain: &Chain1) -> BitVec {
        BitVec::from_bools(
            &self
                .logical_x
                .iter()
                .map(|x| x.dot(&chain.0))
                .collect::<Vec<_>>(),
        )
    }

    /// Classifies a cycle as a stabilizer (trivial) or a logical operator.
    pub fn homology_class(&self, cycle: &Chain1) -> Result<HomologyClass> {
        if !self.boundary(cycle)?.0.is_zero() {
            return Err(invalid("homology_class needs a cycle (zero boundary)"));
        }
        if self.stabilizer_span.contains(&cycle.0) {
            Ok(HomologyClass::Trivial)
        } else {
            Ok(HomologyClass::Nontrivial(self.logical_label(cycle)))
        }
    }

    pub fn is_stabilizer(&self, chain: &Chain1) -> bool {
        self.stabilizer_span.contains(&chain.0)
    }

    /// Minimum weight of a nontrivial cycle, by exhaustive search in
    /// increasing weight. Limited to codes with at most 25 qubits.
    pub fn min_logical_weight(&self) -> Result<usize> {
        const LIMIT: usize = 25;
        let n = self.n();
        if n > LIMIT {
            return Err(Error::UnsupportedSize(format!(
                "exhaustive logical search supports n <= {LIMIT}, got {n}"
            )));
        }
        if self.logical_count() == 0 {
            return Err(invalid("code encodes no logical qubits"));
        }
        let cols: Vec<BitVec> = self.h_x.transpose().rows().to_vec();
        for w in 1..=n {
            let mut idx: Vec<usize> = (0..w).collect();
            loop {
                let mut syn = BitVec::zeros(self.m_x());
                for &i in &idx {
                    syn.xor_assign(&cols[i]);
                }
                if syn.is_zero() {
                    let c = BitVec::from_indices(n, &idx)?;
                    if !self.stabilizer_span.contains(&c) {
                        return Ok(w);
                    }
                }
                if !next_combination(&mut idx, n) {
                    break;
                }
            }
        }
        unreachable!("k > 0 implies a nontrivial cycle exists")
    }
}

/// Advances `idx` to the next lexicographic w-subset of `0..n`.
pub(crate) fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let w = idx.len();
    let mut i = w;
    while i > 0 {
        i -= 1;
        if idx[i] < n - w + i {
            idx[i] += 1;
            for j in i + 1..w {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Basis of `ker(a)` modulo the row space of `b`.
fn nontrivial_basis(a: &BitMatrix, b: &BitMatrix) -> Vec<BitVec> {
    let mut span = RowBasis::from_rows(b.rows().iter().cloned());
    let mut out = Vec::new();
    for v in a.kernel() {
        if span.insert(v.clone()) {
            out.push(v);
        }
    }
    out
}

/// `s = H * e` over GF(2).
pub fn syndrome_css(h: &BitMatrix, e: &BitVec) -> Result<BitVec> {
    h.mul_vec(e)
}

/// True iff `H_X * H_Z^T = 0`.
pub fn css_commutes(h_x: &BitMatrix, h_z: &BitMatrix) -> Result<bool> {
    if h_x.n_rows() == 0 || h_z.n_rows() == 0 {
        if h_x.n_cols() != h_z.n_cols() && h_x.n_rows() != 0 && h_z.n_rows() != 0 {
            return Err(invalid("column counts differ"));
        }
        return Ok(true);
    }
    Ok(h_x.mul_transpose(h_z)?.is_zero())
}

pub fn rank_gf2(h: &BitMatrix) -> usize {
    h.rank()
}

/// `k = n - rank(H_X) - rank(H_Z)`.
pub fn logical_count(h_x: &BitMatrix, h_z: &BitMatrix) -> usize {
    h_x.n_cols() - h_x.rank() - h_z.rank()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(code: &CodeSpec, pairs: &[(Site, Site)]) -> Chain1 {
        let edges: Vec<usize> = pairs
            .iter()
            .map(|&(a, b)| code.edge_between(a, b).unwrap())
            .collect();
        Chain1::from_edges(code.n(), &edges).unwrap()
    }

    fn defect_sites(code: &CodeSpec, s: &Syndrome0) -> Vec<Site> {
        s.checks()
            .iter()
            .map(|&c| code.check_site(c).unwrap())
            .collect()
    }

    #[test]
    fn planar_counts() {
        for (d, n) in [(2, 5), (3, 13), (4, 25), (5, 41)] {
            let code = CodeSpec::build_planar(d).unwrap();
            assert_eq!(code.n(), n);
            assert_eq!(code.m_x(), d * (d - 1));
            assert_eq!(code.m_z(), d * (d - 1));
            assert_eq!(code.logical_count(), 1, "d={d}");
        }
        assert!(CodeSpec::build_planar(1).is_err());
    }

    #[test]
    fn toric_counts_and_star_weight() {
        let code = CodeSpec::build_toric(3).unwrap();
        assert_eq!(code.n(), 18);
        assert_eq!(code.h_x().rank(), 8);
        assert_eq!(code.h_z().rank(), 8);
        assert_eq!(code.logical_count(), 2);
        for l in 2..=6 {
            let code = CodeSpec::build_toric(l).unwrap();
            assert!(code.h_x().rows().iter().all(|r| r.weight() == 4), "L={l}");
            assert_eq!(code.logical_count(), 2);
        }
        assert_eq!(CodeSpec::build_toric(2).unwrap().n(), 8);
        assert!(CodeSpec::build_toric(1).is_err());
    }

    #[test]
    fn boundary_of_bent_path_on_planar_patch() {
        let code = CodeSpec::build_planar(4).unwrap();
        let e = chain(
            &code,
            &[
                (Site::new(1, 1), Site::new(2, 1)),
                (Site::new(2, 1), Site::new(3, 1)),
                (Site::new(3, 1), Site::new(3, 2)),
            ],
        );
        let s = code.boundary(&e).unwrap();
        assert_eq!(
            defect_sites(&code, &s),
            vec![Site::new(1, 1), Site::new(3, 2)]
        );
    }

    #[test]
    fn boundary_of_l_shape_on_torus() {
        let code = CodeSpec::build_toric(3).unwrap();
        let e = chain(
            &code,
            &[
                (Site::new(0, 0), Site::new(1, 0)),
                (Site::new(1, 0), Site::new(1, 1)),
            ],
        );
        let s = code.boundary(&e).unwrap();
        assert_eq!(
            defect_sites(&code, &s),
            vec![Site::new(0, 0), Site::new(1, 1)]
        );
    }

    #[test]
    fn face_boundaries_are_cycles() {
        for code in [
            CodeSpec::build_planar(3).unwrap(),
            CodeSpec::build_toric(3).unwrap(),
        ] {
            for f in 0..code.m_z() {
                let b = code.face_boundary(f).unwrap();
                assert!(code.boundary(&b).unwrap().0.is_zero());
                assert!(code.homology_class(&b).unwrap().is_trivial());
            }
        }
    }

    #[test]
    fn boundary_rejects_wrong_length() {
        let code = CodeSpec::build_planar(3).unwrap();
        assert!(code.boundary(&Chain1::zeros(12)).is_err());
        assert!(code.edge_between(Site::new(0, 0), Site::new(1, 0)).is_err());
    }

    #[test]
    fn logicals_are_paired() {
        for code in [
            CodeSpec::build_planar(2).unwrap(),
            CodeSpec::build_planar(5).unwrap(),
            CodeSpec::build_toric(2).unwrap(),
            CodeSpec::build_toric(4).unwrap(),
        ] {
            let k = code.logical_count();
            assert_eq!(code.logical_z().len(), k);
            for (i, z) in code.logical_z().iter().enumerate() {
                assert!(code.h_x().mul_vec(z).unwrap().is_zero());
                for (j, x) in code.logical_x().iter().enumerate() {
                    assert_eq!(z.dot(x), i == j);
                }
            }
            for x in code.logical_x() {
                assert!(code.h_z().mul_vec(x).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn logical_representative_is_nontrivial() {
        let code = CodeSpec::build_planar(3).unwrap();
        let z = Chain1(code.logical_z()[0].clone());
        match code.homology_class(&z).unwrap() {
            HomologyClass::Nontrivial(label) => assert_eq!(label.ones(), vec![0]),
            HomologyClass::Trivial => panic!("logical Z classified trivial"),
        }
        let zero = z.xor(&z);
        assert!(code.homology_class(&zero).unwrap().is_trivial());
        let single = Chain1::from_edges(code.n(), &[0]).unwrap();
        assert!(code.homology_class(&single).is_err());
    }

    #[test]
    fn qldpc_worked_example() {
        let h_x = BitMatrix::from_dense(&[
            &[1, 1, 0, 1, 0, 0],
            &[0, 1, 1, 0, 1, 0],
            &[0, 0, 1, 1, 0, 1],
        ])
        .unwrap();
        let h_z = BitMatrix::from_dense(&[&[1, 0, 1, 0, 1, 0], &[0, 1, 0, 1, 0, 1]]).unwrap();
        let e = BitVec::from_bools(&[false, true, false, false, true, false]);
        assert_eq!(syndrome_css(&h_x, &e).unwrap().ones(), vec![0]);
        // Row 1 of each matrix overlaps only in column 1: the pair does not commute.
        assert!(!css_commutes(&h_x, &h_z).unwrap());
        assert!(CodeSpec::css(h_x, h_z).is_err());
    }

    #[test]
    fn tanner_exercise_syndrome() {
        let h = BitMatrix::from_dense(&[&[1, 0, 1, 1], &[0, 1, 1, 0]]).unwrap();
        let e = BitVec::from_bools(&[true, false, true, false]);
        assert_eq!(syndrome_css(&h, &e).unwrap().to_string(), "01");
        assert!(syndrome_css(&h, &BitVec::zeros(4)).unwrap().is_zero());
        assert!(syndrome_css(&h, &BitVec::zeros(5)).is_err());
    }

    #[test]
    fn empty_matrices_commute() {
        assert!(css_commutes(&BitMatrix::zeros(0, 4), &BitMatrix::zeros(0, 4)).unwrap());
    }

    #[test]
    fn generic_css_from_toric_matrices() {
        let toric = CodeSpec::build_toric(3).unwrap();
        let generic = CodeSpec::css(toric.h_x().clone(), toric.h_z().clone()).unwrap();
        assert_eq!(generic.logical_count(), 2);
        for (i, z) in generic.logical_z().iter().enumerate() {
            for (j, x) in generic.logical_x().iter().enumerate() {
                assert_eq!(z.dot(x), i == j);
            }
        }
    }

    #[test]
    fn min_weights() {
        assert_eq!(
            CodeSpec::build_planar(2)
                .unwrap()
                .min_logical_weight()
                .unwrap(),
            2
        );
        assert_eq!(
            CodeSpec::build_planar(3)
                .unwrap()
                .min_logical_weight()
                .unwrap(),
            3
        );
        assert_eq!(
            CodeSpec::build_toric(2)
                .unwrap()
                .min_logical_weight()
                .unwrap(),
            2
        );
        assert_eq!(
            CodeSpec::build_toric(3)
                .unwrap()
                .min_logical_weight()
                .unwrap(),
            3
        );
        assert!(matches!(
            CodeSpec::build_planar(5).unwrap().min_logical_weight(),
            Err(Error::UnsupportedSize(_))
        ));
    }

    #[test]
    fn check_coordinates_round_trip() {
        let code = CodeSpec::build_planar(4).unwrap();
        for c in 0..code.m_x() {
            let site = code.check_site(c).unwrap();
            assert_eq!(code.check_at(site).unwrap(), Some(c));
        }
        assert_eq!(code.check_at(Site::new(0, 0)).unwrap(), None);
        assert_eq!(code.check_at(Site::new(0, 4)).unwrap(), None);
    }
}
