//! Exact reference decoders for small instances.
//!
//! `mwpm_decode` solves minimum-weight perfect matching by dynamic
//! programming over defect subsets, with the boundary as a per-defect
//! termination cost. `MlTable` enumerates every error pattern of a small
//! code once and answers maximum-likelihood coset queries for any syndrome.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;

use crate::error::{invalid, Error, Result};
use crate::geometry::{Chain1, CodeSpec};
use crate::gf2::BitVec;
use crate::graph::{DecodingGraph, DistKey};

pub const MAX_MATCH_DEFECTS: usize = 14;
pub const MAX_ML_QUBITS: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Partner {
    Defect(usize),
    Boundary,
}

#[derive(Clone, Debug)]
pub struct Matching {
    pub chain: Chain1,
    pub weight: f64,
    /// Quantized total weight and hop count, the quantity actually minimized.
    pub key: DistKey,
    /// For each defect (by position in the input), its partner.
    pub pairs: Vec<(usize, Partner)>,
}

fn add_key(a: DistKey, b: DistKey) -> DistKey {
    (a.0.saturating_add(b.0), a.1.saturating_add(b.1))
}

/// Minimum-weight perfect matching of `defects` (graph node ids), where any
/// defect may instead terminate on the virtual boundary. Ties go to the
/// lexicographically smallest partner sequence, taking defects in input
/// order with the boundary ordered after every defect.
pub fn mwpm_decode(graph: &DecodingGraph, defects: &[usize]) -> Result<Matching> {
    let k = defects.len();
    if k > MAX_MATCH_DEFECTS {
        return Err(Error::UnsupportedSize(format!(
            "{k} defects exceed the exact matching limit of {MAX_MATCH_DEFECTS}"
        )));
    }
    let boundary = graph.boundary_node();
    let mut sorted = defects.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) || sorted.iter().any(|&d| d >= boundary) {
        return Err(invalid("defects must be distinct check nodes"));
    }

    let dist: Vec<Vec<Option<DistKey>>> =
        defects.iter().map(|&d| graph.distances_from(d)).collect();
    let pair_cost = |i: usize, j: usize| dist[i][defects[j]];
    let bnd_cost = |i: usize| dist[i][boundary];

    // best[mask] = optimal cost to resolve exactly the defects in `mask`.
    let full = (1usize << k) - 1;
    let mut best: Vec<Option<DistKey>> = vec![None; 1 << k];
    let mut choice: Vec<Option<Partner>> = vec![None; 1 << k];
    best[0] = Some((0, 0));
    for mask in 1..=full {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut options: Vec<(Partner, Option<DistKey>, usize)> = Vec::new();
        for j in i + 1..k {
            if rest & (1 << j) != 0 {
                options.push((Partner::Defect(j), pair_cost(i, j), rest & !(1 << j)));
            }
        }
        options.push((Partner::Boundary, bnd_cost(i), rest));
        for (partner, cost, remaining) in options {
            let (Some(c), Some(r)) = (cost, best[remaining]) else {
                continue;
            };
            let total = add_key(c, r);
            if best[mask].is_none_or(|b| total < b) {
                best[mask] = Some(total);
                choice[mask] = Some(partner);
            }
        }
    }
    let key = best[full].ok_or_else(|| invalid("defect set admits no perfect matching"))?;

    let mut pairs = Vec::new();
    let mut chain = BitVec::zeros(graph.n_data());
    let mut weight = 0.0;
    let mut mask = full;
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        let partner = choice[mask].clone().expect("reachable state has a choice");
        let path = match partner {
            Partner::Defect(j) => {
                mask &= !(1 << j);
                graph.shortest_distance(defects[i], defects[j])?
            }
            Partner::Boundary => graph.boundary_distance(defects[i])?,
        }
        .expect("finite cost implies a path");
        chain.xor_assign(&graph.data_chain(&path.edges));
        weight += path.weight;
        mask &= !(1 << i);
        pairs.push((i, partner));
    }
    Ok(Matching {
        chain: Chain1(chain),
        weight,
        key,
        pairs,
    })
}

#[derive(Clone, Debug, Default)]
struct ClassStats {
    /// Number of patterns of each Hamming weight.
    counts: Vec<u64>,
    /// Smallest (weight, pattern) seen.
    min_rep: Option<(u32, u32)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlResult {
    /// Overlap parities with `logical_x` of the most likely coset.
    pub label: BitVec,
    /// Minimum-weight member of that coset.
    pub representative: Chain1,
    /// Every label whose likelihood equals the maximum, ascending. Longer
    /// than one exactly when there is a tie.
    pub tied: Vec<BitVec>,
    /// `ln Pr(class)` per reachable label, ascending by label.
    pub log_likelihoods: Vec<(BitVec, f64)>,
}

impl MlResult {
    pub fn is_tie(&self) -> bool {
        self.tied.len() > 1
    }
}

/// Every error pattern of a small code, bucketed by syndrome and coset.
pub struct MlTable {
    n: usize,
    k: usize,
    buckets: HashMap<u64, BTreeMap<u32, ClassStats>>,
}

impl MlTable {
    pub fn build(code: &CodeSpec) -> Result<Self> {
        let n = code.n();
        if n > MAX_ML_QUBITS {
            return Err(Error::UnsupportedSize(format!(
                "exhaustive ML supports n <= {MAX_ML_QUBITS}, got {n}"
            )));
        }
        let (m, k) = (code.m_x(), code.logical_count());
        if m > 64 || k > 32 {
            return Err(Error::UnsupportedSize("too many checks or logicals".into()));
        }
        let cols = code.h_x().transpose();
        let col_syn: Vec<u64> = cols.rows().iter().map(pack64).collect();
        let col_lab: Vec<u32> = (0..n)
            .map(|j| {
                (0..k).fold(0u32, |acc, i| {
                    acc | (u32::from(code.logical_x()[i].get(j)) << i)
                })
            })
            .collect();

        let mut buckets: HashMap<u64, BTreeMap<u32, ClassStats>> = HashMap::new();
        let (mut syn, mut lab, mut e, mut w) = (0u64, 0u32, 0u32, 0u32);
        for step in 0u64..(1u64 << n) {
            if step > 0 {
                // Gray code: flip the bit at the position of the lowest set bit of `step`.
                let j = step.trailing_zeros() as usize;
                syn ^= col_syn[j];
                lab ^= col_lab[j];
                e ^= 1 << j;
                if e & (1 << j) != 0 {
                    w += 1;
                } else {
                    w -= 1;
                }
            }
            let stats = buckets.entry(syn).or_default().entry(lab).or_default();
            if stats.counts.is_empty() {
                stats.counts = vec![0; n + 1];
            }
            stats.counts[w as usize] += 1;
            if stats.min_rep.is_none_or(|r| (w, e) < r) {
                stats.min_rep = Some((w, e));
            }
        }
        Ok(Self { n, k, buckets })
    }

    /// Most likely coset for `syndrome` under i.i.d. flips with rate `p`.
    pub fn decode(&self, syndrome: &BitVec, p: f64) -> Result<MlResult> {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid(format!("ML decoding needs p in (0,1), got {p}")));
        }
        let classes = self
            .buckets
            .get(&pack64(syndrome))
            .ok_or_else(|| invalid("syndrome is not reachable"))?;
        let (lp, lq) = (p.ln(), (1.0 - p).ln());
        let logs: Vec<(u32, f64)> = classes
            .iter()
            .map(|(&lab, st)| {
                let terms: Vec<f64> = st
                    .counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(w, &c)| (c as f64).ln() + w as f64 * lp + (self.n - w) as f64 * lq)
                    .collect();
                (lab, log_sum_exp(&terms))
            })
            .collect();
        let top = logs
            .iter()
            .map(|&(_, l)| l)
            .fold(f64::NEG_INFINITY, f64::max);
        let near: Vec<u32> = logs
            .iter()
            .filter(|&&(_, l)| top - l <= 1e-9 * top.abs().max(1.0))
            .map(|&(lab, _)| lab)
            .collect();
        let tied: Vec<u32> = if near.len() > 1 {
            match dyadic(p) {
                Some((a, b)) => {
                    let exact: Vec<(u32, BigUint)> = near
                        .iter()
                        .map(|lab| (*lab, exact_weight(&classes[lab].counts, a, b)))
                        .collect();
                    let max = exact
                        .iter()
                        .map(|(_, v)| v)
                        .max()
                        .expect("nonempty")
                        .clone();
                    exact
                        .into_iter()
                        .filter(|(_, v)| *v == max)
                        .map(|(l, _)| l)
                        .collect()
                }
                None => near,
            }
        } else {
            near
        };
        let winner = tied[0];
        let (_, rep) = classes[&winner].min_rep.expect("class is nonempty");
        let to_label = |lab: u32| {
            BitVec::from_bools(&(0..self.k).map(|i| lab >> i & 1 == 1).collect::<Vec<_>>())
        };
        let rep_idx: Vec<usize> = (0..self.n).filter(|&j| rep >> j & 1 == 1).collect();
        Ok(MlResult {
            label: to_label(winner),
            representative: Chain1::from_edges(self.n, &rep_idx)?,
            tied: tied.into_iter().map(to_label).collect(),
            log_likelihoods: logs.into_iter().map(|(l, v)| (to_label(l), v)).collect(),
        })
    }
}

/// One-shot exhaustive maximum-likelihood decode.
pub fn ml_decode_exhaustive(code: &CodeSpec, syndrome: &BitVec, p: f64) -> Result<MlResult> {
    MlTable::build(code)?.decode(syndrome, p)
}

fn pack64(v: &BitVec) -> u64 {
    v.words().first().copied().unwrap_or(0)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Writes `p` as `a / 2^b` when `b <= 64`.
fn dyadic(p: f64) -> Option<(u64, u32)> {
    for b in 0..=64u32 {
        let scaled = p * 2f64.powi(b as i32);
        if scaled.fract() == 0.0 && scaled < 2f64.powi(64) {
            return Some((scaled as u64, b));
        }
    }
    None
}

/// `Σ_w counts[w] a^w (2^b - a)^(n-w)`, proportional to the class probability.
fn exact_weight(counts: &[u64], a: u64, b: u32) -> BigUint {
    let n = counts.len() - 1;
    let a = BigUint::from(a);
    let q = (BigUint::from(1u8) << b) - &a;
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(w, &c)| BigUint::from(c) * a.pow(w as u32) * q.pow((n - w) as u32))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Site;

    #[test]
    fn empty_matching() {
        let code = CodeSpec::build_planar(3).unwrap();
        let g = DecodingGraph::build_uniform(&code, 1).unwrap();
        let m = mwpm_decode(&g, &[]).unwrap();
        assert!(m.chain.0.is_zero());
        assert_eq!(m.weight, 0.0);
    }

    #[test]
    fn two_defects_pick_cheaper_option() {
        let code = CodeSpec::build_planar(5).unwrap();
        let g = DecodingGraph::build_uniform(&code, 1).unwrap();
        // Both beside the left boundary, three rows apart.
        let a = code.check_at(Site::new(0, 1)).unwrap().unwrap();
        let b = code.check_at(Site::new(3, 1)).unwrap().unwrap();
        let m = mwpm_decode(&g, &[a, b]).unwrap();
        assert_eq!(m.weight, 2.0);
        let left = [
            code.edge_between(Site::new(0, 0), Site::new(0, 1)).unwrap(),
            code.edge_between(Site::new(3, 0), Site::new(3, 1)).unwrap(),
        ];
        assert_eq!(m.chain.edges(), left.to_vec());
        let c = code.check_at(Site::new(1, 2)).unwrap().unwrap();
        let d = code.check_at(Site::new(2, 2)).unwrap().unwrap();
        let m = mwpm_decode(&g, &[c, d]).unwrap();
        assert_eq!(m.weight, 1.0);
        assert_eq!(m.pairs, vec![(0, Partner::Defect(1))]);
    }

    #[test]
    fn matching_chain_has_the_defects_as_boundary() {
        let code = CodeSpec::build_planar(4).unwrap();
        let g = DecodingGraph::build_uniform(&code, 1).unwrap();
        let defects = [0, 4, 5, 10];
        let m = mwpm_decode(&g, &defects).unwrap();
        assert_eq!(code.boundary(&m.chain).unwrap().checks(), defects.to_vec());
    }

    #[test]
    fn too_many_defects() {
        let code = CodeSpec::build_planar(5).unwrap();
        let g = DecodingGraph::build_uniform(&code, 1).unwrap();
        let defects: Vec<usize> = (0..15).collect();
        assert!(matches!(
            mwpm_decode(&g, &defects),
            Err(Error::UnsupportedSize(_))
        ));
    }

    #[test]
    fn odd_defects_on_torus_have_no_matching() {
        let code = CodeSpec::build_toric(3).unwrap();
        let g = DecodingGraph::build_uniform(&code, 1).unwrap();
        assert!(mwpm_decode(&g, &[0]).is_err());
    }

    #[test]
    fn ml_zero_syndrome_is_trivial() {
        let code = CodeSpec::build_planar(3).unwrap();
        let r = ml_decode_exhaustive(&code, &BitVec::zeros(6), 0.05).unwrap();
        assert!(r.label.is_zero());
        assert!(!r.is_tie());
        assert!(r.representative.0.is_zero());
    }

    #[test]
    fn ml_single_edges_on_d2() {
        let code = CodeSpec::build_planar(2).unwrap();
        let table = MlTable::build(&code).unwrap();
        for e in 0..code.n() {
            let chain = Chain1::from_edges(code.n(), &[e]).unwrap();
            let s = code.boundary(&chain).unwrap().0;
            let r = table.decode(&s, 0.1).unwrap();
            // Mirror symmetry makes the two cosets of a lone defect equally
            // likely at d = 2; only the central edge is unambiguous.
            assert!(r.tied.contains(&code.logical_label(&chain)), "edge {e}");
            assert_eq!(r.is_tie(), code.edge_checks(e).len() == 1, "edge {e}");
        }
    }

    #[test]
    fn ml_half_probability_ties() {
        let code = CodeSpec::build_planar(2).unwrap();
        let r = ml_decode_exhaustive(&code, &BitVec::zeros(2), 0.5).unwrap();
        assert!(r.is_tie());
        assert_eq!(r.tied.len(), 2);
    }

    #[test]
    fn ml_rejects_large_codes() {
        let code = CodeSpec::build_planar(4).unwrap();
        assert!(matches!(
            MlTable::build(&code),
            Err(Error::UnsupportedSize(_))
        ));
    }

    #[test]
    fn dyadic_decomposition() {
        assert_eq!(dyadic(0.5), Some((1, 1)));
        assert_eq!(dyadic(0.375), Some((3, 3)));
        assert_eq!(dyadic(0.1), Some((3_602_879_701_896_397, 55)));
        assert_eq!(dyadic(1e-30), None);
    }
}
