//! Irregular LDPC codes for syndrome-based reconciliation on a BSC.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Desk-scale block length.
pub const DESK_BLOCK: usize = 32_000;
/// Decoder iteration cap.
pub const MAX_ITER: usize = 200;

/// Largest message magnitude; keeps tanh away from ±1.
const LLR_CLAMP: f64 = 30.0;

/// Edge-perspective variable-degree distribution λ: (degree, fraction of edges).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeProfile {
    pub var_edges: Vec<(usize, f64)>,
}

impl DegreeProfile {
    /// Found by a population-dynamics search at rate 0.05 on the BSC; check
    /// degrees follow from the rate and the concentrating construction.
    pub fn low_rate() -> Self {
        Self {
            var_edges: vec![
                (2, 0.48),
                (3, 0.25),
                (6, 0.04),
                (8, 0.04),
                (10, 0.03),
                (14, 0.08),
                (20, 0.03),
                (30, 0.05),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.var_edges.iter().map(|&(_, f)| f).sum();
        if self.var_edges.is_empty()
            || self.var_edges.iter().any(|&(d, f)| d < 2 || !(f >= 0.0))
            || (total - 1.0).abs() > 1e-9
        {
            return Err(Error::Construction("degree profile needs degrees ≥ 2 and fractions summing to 1".into()));
        }
        Ok(())
    }

    /// Same profile with every degree above `cap` folded into `cap`.
    pub fn capped(&self, cap: usize) -> Self {
        let mut out: Vec<(usize, f64)> = Vec::new();
        for &(d, f) in &self.var_edges {
            let d = d.min(cap);
            match out.iter_mut().find(|(e, _)| *e == d) {
                Some(slot) => slot.1 += f,
                None => out.push((d, f)),
            }
        }
        Self { var_edges: out }
    }

    /// Node counts per degree for `n` variables, largest-remainder rounding.
    pub fn node_counts(&self, n: usize) -> Vec<(usize, usize)> {
        let norm: f64 = self.var_edges.iter().map(|&(d, f)| f / d as f64).sum();
        let exact: Vec<f64> = self.var_edges.iter().map(|&(d, f)| n as f64 * f / d as f64 / norm).collect();
        let mut counts: Vec<usize> = exact.iter().map(|&x| libm::floor(x) as usize).collect();
        let mut short = n - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..exact.len()).collect();
        order.sort_by(|&a, &b| (exact[b] - libm::floor(exact[b])).total_cmp(&(exact[a] - libm::floor(exact[a]))));
        for &k in order.iter().cycle() {
            if short == 0 {
                break;
            }
            counts[k] += 1;
            short -= 1;
        }
        self.var_edges.iter().zip(counts).map(|(&(d, _), c)| (d, c)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdpcCode {
    n: usize,
    m: usize,
    seed: u64,
    /// CSR by check: edges of check c are `check_ptr[c]..check_ptr[c+1]`.
    check_ptr: Vec<u32>,
    edge_var: Vec<u32>,
    /// CSR by variable over edge indices.
    var_ptr: Vec<u32>,
    var_edge: Vec<u32>,
    short_cycles: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub bits: Vec<u8>,
    pub success: bool,
    pub iterations: usize,
}

/// Code with L·rate information bits and syndrome length S = L − L·rate.
pub fn ldpc_construct(rate: f64, l: usize, seed: u64) -> Result<LdpcCode> {
    LdpcCode::construct(rate, l, seed, &DegreeProfile::low_rate())
}

/// Syndrome length for a rate, rejecting non-integral L·rate.
pub fn syndrome_length(rate: f64, l: usize) -> Result<usize> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::Parameter { field: "rate", reason: "must lie in (0, 1)" });
    }
    let k = rate * l as f64;
    let kr = libm::round(k);
    if (k - kr).abs() > 1e-6 || kr < 1.0 || kr as usize >= l {
        return Err(Error::Parameter { field: "rate", reason: "L·rate must be an integer in [1, L)" });
    }
    Ok(l - kr as usize)
}

impl LdpcCode {
    /// Progressive edge growth restricted to depth two: each new edge goes to
    /// a lowest-degree check not sharing a variable with the node's current
    /// checks, which keeps the girth ≥ 6. When no such check exists the
    /// lowest-degree non-adjacent check is used and the 4-cycle is counted.
    pub fn construct(rate: f64, l: usize, seed: u64, profile: &DegreeProfile) -> Result<Self> {
        let m = syndrome_length(rate, l)?;
        profile.validate()?;
        if profile.var_edges.iter().any(|&(d, _)| d > m) {
            // small codes cannot host the heavy nodes
            return Self::build(l, m, seed, &profile.capped(m));
        }
        Self::build(l, m, seed, profile)
    }

    fn build(n: usize, m: usize, seed: u64, profile: &DegreeProfile) -> Result<Self> {
        let mut degrees: Vec<usize> = Vec::with_capacity(n);
        for (d, c) in profile.node_counts(n) {
            degrees.extend(core::iter::repeat_n(d, c));
        }
        let edges: usize = degrees.iter().sum();
        if edges < m {
            return Err(Error::Construction("degree profile leaves checks without edges".into()));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        // Degree-sorted insertion would give every check the same mix of edge
        // types; a random order keeps the graph close to the random ensemble.
        degrees.shuffle(&mut rng);
        let mut adj_var: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut adj_chk: Vec<Vec<u32>> = vec![Vec::new(); m];
        let mut buckets = Buckets::new(m);
        let mut mark = vec![u32::MAX; m];
        let mut short_cycles = 0usize;
        // Degree-2 variables are kept a forest over the checks, so none of
        // their cycles (low-weight codewords) exist.
        let mut forest = DisjointSets::new(m);
        let deg2_room = degrees.iter().filter(|&&d| d == 2).count() < m;
        for (v, &dv) in degrees.iter().enumerate() {
            let stamp = v as u32;
            for k in 0..dv {
                let root = (dv == 2 && k == 1 && deg2_room).then(|| forest.find(adj_var[v][0] as usize));
                let pick = match root {
                    Some(r) => buckets.pick(&mut rng, |c| mark[c] != stamp && forest.find_ro(c) != r),
                    None => None,
                };
                let pick = pick.or_else(|| buckets.pick(&mut rng, |c| mark[c] != stamp));
                let c = match pick {
                    Some(c) => c,
                    None => {
                        let own = &adj_var[v];
                        let c = buckets
                            .pick(&mut rng, |c| !own.contains(&(c as u32)))
                            .ok_or_else(|| Error::Construction("no check left for a variable node".into()))?;
                        short_cycles += 1;
                        c
                    }
                };
                if let Some(r) = root {
                    forest.union(r, c);
                }
                adj_var[v].push(c as u32);
                adj_chk[c].push(v as u32);
                buckets.bump(c);
                for &u in &adj_chk[c] {
                    for &c2 in &adj_var[u as usize] {
                        mark[c2 as usize] = stamp;
                    }
                }
            }
        }
        if adj_chk.iter().any(|a| a.is_empty()) {
            return Err(Error::Construction("a check node received no edges".into()));
        }
        let mut check_ptr = Vec::with_capacity(m + 1);
        let mut edge_var = Vec::with_capacity(edges);
        check_ptr.push(0u32);
        for a in &mut adj_chk {
            a.sort_unstable();
            edge_var.extend_from_slice(a);
            check_ptr.push(edge_var.len() as u32);
        }
        let mut var_ptr = vec![0u32; n + 1];
        for &v in &edge_var {
            var_ptr[v as usize + 1] += 1;
        }
        for v in 0..n {
            var_ptr[v + 1] += var_ptr[v];
        }
        let mut fill = var_ptr.clone();
        let mut var_edge = vec![0u32; edges];
        for (e, &v) in edge_var.iter().enumerate() {
            var_edge[fill[v as usize] as usize] = e as u32;
            fill[v as usize] += 1;
        }
        Ok(Self { n, m, seed, check_ptr, edge_var, var_ptr, var_edge, short_cycles })
    }

    /// Block length L.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Syndrome length S.
    pub fn syndrome_len(&self) -> usize {
        self.m
    }

    pub fn rate(&self) -> f64 {
        (self.n - self.m) as f64 / self.n as f64
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn edges(&self) -> usize {
        self.edge_var.len()
    }

    /// 4-cycles the construction could not avoid (zero means girth ≥ 6).
    pub fn short_cycles(&self) -> usize {
        self.short_cycles
    }

    pub fn check_vars(&self, c: usize) -> &[u32] {
        &self.edge_var[self.check_ptr[c] as usize..self.check_ptr[c + 1] as usize]
    }

    pub fn var_degree(&self, v: usize) -> usize {
        (self.var_ptr[v + 1] - self.var_ptr[v]) as usize
    }

    pub fn check_degree(&self, c: usize) -> usize {
        (self.check_ptr[c + 1] - self.check_ptr[c]) as usize
    }

    /// Edge-perspective (λ, ρ) of this graph as (degree, fraction) lists.
    pub fn edge_distributions(&self) -> (Vec<(usize, f64)>, Vec<(usize, f64)>) {
        let e = self.edges() as f64;
        let tally = |degs: &mut dyn Iterator<Item = usize>| {
            let mut t: Vec<(usize, f64)> = Vec::new();
            for d in degs {
                match t.iter_mut().find(|(k, _)| *k == d) {
                    Some(s) => s.1 += d as f64 / e,
                    None => t.push((d, d as f64 / e)),
                }
            }
            t.sort_by_key(|&(d, _)| d);
            t
        };
        (tally(&mut (0..self.n).map(|v| self.var_degree(v))), tally(&mut (0..self.m).map(|c| self.check_degree(c))))
    }

    /// Rows of H packed into u64 words.
    pub fn dense_rows(&self) -> Vec<Vec<u64>> {
        let words = self.n.div_ceil(64);
        (0..self.m)
            .map(|c| {
                let mut row = vec![0u64; words];
                for &v in self.check_vars(c) {
                    row[v as usize / 64] ^= 1 << (v % 64);
                }
                row
            })
            .collect()
    }

    /// GF(2) rank of H by elimination on packed rows.
    pub fn rank(&self) -> usize {
        let mut rows = self.dense_rows();
        let mut rank = 0;
        for col in 0..self.n {
            let (w, b) = (col / 64, 1u64 << (col % 64));
            let Some(p) = (rank..rows.len()).find(|&r| rows[r][w] & b != 0) else { continue };
            rows.swap(rank, p);
            let pivot = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row[w] & b != 0 {
                    for (x, y) in row.iter_mut().zip(&pivot) {
                        *x ^= y;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    /// H·bits over GF(2).
    pub fn syndrome(&self, bits: &[u8]) -> Result<Vec<u8>> {
        if bits.len() != self.n {
            return Err(Error::Length { expected: self.n, got: bits.len() });
        }
        Ok((0..self.m).map(|c| self.check_vars(c).iter().fold(0u8, |s, &v| s ^ (bits[v as usize] & 1))).collect())
    }

    fn syndrome_matches(&self, bits: &[u8], target: &[u8]) -> bool {
        (0..self.m).all(|c| self.check_vars(c).iter().fold(0u8, |s, &v| s ^ bits[v as usize]) == target[c])
    }

    /// Sum-product decoding toward the block whose syndrome is `target`,
    /// flooding schedule. Positive LLR favours bit 0.
    pub fn bp_decode(&self, llr: &[f64], target: &[u8], max_iter: usize) -> Result<DecodeOutcome> {
        if llr.len() != self.n {
            return Err(Error::Length { expected: self.n, got: llr.len() });
        }
        if target.len() != self.m {
            return Err(Error::Length { expected: self.m, got: target.len() });
        }
        if llr.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter { field: "llr", reason: "must be finite" });
        }
        let mut bits: Vec<u8> = llr.iter().map(|&x| (x < 0.0) as u8).collect();
        if self.syndrome_matches(&bits, target) {
            return Ok(DecodeOutcome { bits, success: true, iterations: 0 });
        }
        let clamp = |x: f64| x.clamp(-LLR_CLAMP, LLR_CLAMP);
        let mut v2c: Vec<f64> = self.edge_var.iter().map(|&v| clamp(llr[v as usize])).collect();
        let mut c2v = vec![0.0f64; v2c.len()];
        let mut t = vec![0.0f64; 64];
        let mut total = vec![0.0f64; self.n];
        for it in 1..=max_iter {
            for c in 0..self.m {
                let (a, b) = (self.check_ptr[c] as usize, self.check_ptr[c + 1] as usize);
                let d = b - a;
                if t.len() < d {
                    t.resize(d, 0.0);
                }
                let sign = if target[c] == 1 { -1.0 } else { 1.0 };
                let mut prod = 1.0;
                let mut zeros = 0usize;
                let mut zero_at = 0usize;
                for k in 0..d {
                    let x = half_tanh(v2c[a + k]);
                    t[k] = x;
                    if x == 0.0 {
                        zeros += 1;
                        zero_at = k;
                    } else {
                        prod *= x;
                    }
                }
                for k in 0..d {
                    let ext = match zeros {
                        0 => prod / t[k],
                        1 if k == zero_at => prod,
                        _ => 0.0,
                    };
                    c2v[a + k] = sign * two_atanh(ext);
                }
            }
            total.copy_from_slice(llr);
            for (e, &v) in self.edge_var.iter().enumerate() {
                total[v as usize] += c2v[e];
            }
            for (e, &v) in self.edge_var.iter().enumerate() {
                v2c[e] = clamp(total[v as usize] - c2v[e]);
            }
            for (b, &x) in bits.iter_mut().zip(&total) {
                *b = (x < 0.0) as u8;
            }
            if self.syndrome_matches(&bits, target) {
                return Ok(DecodeOutcome { bits, success: true, iterations: it });
            }
        }
        Ok(DecodeOutcome { bits, success: false, iterations: max_iter })
    }

    /// Edge indices incident to variable v.
    pub fn var_edges(&self, v: usize) -> &[u32] {
        &self.var_edge[self.var_ptr[v] as usize..self.var_ptr[v + 1] as usize]
    }
}

struct DisjointSets {
    parent: Vec<u32>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self { parent: (0..n as u32).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let up = self.parent[self.parent[x] as usize];
            self.parent[x] = up;
            x = up as usize;
        }
        x
    }

    fn find_ro(&self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            x = self.parent[x] as usize;
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[rb] = ra as u32;
        }
    }
}

/// tanh(x/2) through a single expm1.
#[inline]
fn half_tanh(x: f64) -> f64 {
    let e = libm::expm1(x);
    e / (e + 2.0)
}

/// 2·atanh(y) through a single log1p.
#[inline]
fn two_atanh(y: f64) -> f64 {
    let y = y.clamp(-1.0 + 1e-15, 1.0 - 1e-15);
    libm::log1p(2.0 * y / (1.0 - y))
}

/// Checks bucketed by current degree for O(1) lowest-degree picks.
struct Buckets {
    lists: Vec<Vec<u32>>,
    pos: Vec<u32>,
    deg: Vec<u32>,
    lowest: usize,
}

impl Buckets {
    fn new(m: usize) -> Self {
        Self { lists: vec![(0..m as u32).collect()], pos: (0..m as u32).collect(), deg: vec![0; m], lowest: 0 }
    }

    /// Uniformly random start within the lowest bucket, scanning upward
    /// through buckets until `ok` accepts a check.
    fn pick(&self, rng: &mut ChaCha20Rng, ok: impl Fn(usize) -> bool) -> Option<usize> {
        for list in &self.lists[self.lowest..] {
            if list.is_empty() {
                continue;
            }
            let start = rng.gen_range(0..list.len());
            for k in 0..list.len() {
                let c = list[(start + k) % list.len()] as usize;
                if ok(c) {
                    return Some(c);
                }
            }
        }
        None
    }

    fn bump(&mut self, c: usize) {
        let d = self.deg[c] as usize;
        let p = self.pos[c] as usize;
        let list = &mut self.lists[d];
        let last = *list.last().unwrap();
        list[p] = last;
        self.pos[last as usize] = p as u32;
        list.pop();
        if self.lists.len() <= d + 1 {
            self.lists.push(Vec::new());
        }
        self.pos[c] = self.lists[d + 1].len() as u32;
        self.lists[d + 1].push(c as u32);
        self.deg[c] += 1;
        while self.lowest < self.lists.len() && self.lists[self.lowest].is_empty() {
            self.lowest += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_bits(n: usize, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(0..2)).collect()
    }

    #[test]
    fn toy_half_rate_shape_and_rank() {
        let code = ldpc_construct(0.5, 16, 1).unwrap();
        assert_eq!((code.syndrome_len(), code.len()), (8, 16));
        assert_eq!(code.rank(), 8);
        assert!((0..16).all(|v| code.var_degree(v) > 0));
        assert_eq!(code.rate(), 0.5);
    }

    #[test]
    fn rejects_non_integral_rate() {
        assert!(ldpc_construct(0.05, 32_768, 0).is_err());
        assert_eq!(syndrome_length(0.05, 32_000).unwrap(), 30_400);
        assert!(ldpc_construct(0.0, 100, 0).is_err());
        assert!(ldpc_construct(1.0, 100, 0).is_err());
    }

    #[test]
    fn desk_code_structure() {
        let code = ldpc_construct(0.05, DESK_BLOCK, 7).unwrap();
        assert_eq!(code.syndrome_len(), 30_400);
        assert_eq!(code.short_cycles(), 0);
        let (lam, rho) = code.edge_distributions();
        let lsum: f64 = lam.iter().map(|x| x.1).sum();
        assert!((lsum - 1.0).abs() < 1e-12);
        // concentrated check degrees
        assert!(rho.len() <= 3, "{rho:?}");
        // no repeated (v, c) pairs
        for c in 0..code.syndrome_len() {
            let vs = code.check_vars(c);
            assert!(vs.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(code, ldpc_construct(0.05, DESK_BLOCK, 7).unwrap());
    }

    #[test]
    fn girth_at_least_six_on_mid_size_code() {
        let code = ldpc_construct(0.3, 2000, 3).unwrap();
        assert_eq!(code.short_cycles(), 0);
        // brute-force: no two checks share two variables
        let rows: Vec<Vec<u32>> = (0..code.syndrome_len()).map(|c| code.check_vars(c).to_vec()).collect();
        let mut seen = alloc::collections::BTreeSet::new();
        for r in &rows {
            for i in 0..r.len() {
                for j in i + 1..r.len() {
                    assert!(seen.insert((r[i], r[j])), "4-cycle through {} {}", r[i], r[j]);
                }
            }
        }
    }

    #[test]
    fn syndrome_matches_dense_product() {
        let code = ldpc_construct(0.25, 400, 9).unwrap();
        let rows = code.dense_rows();
        for seed in 0..5 {
            let bits = random_bits(400, seed);
            let dense: Vec<u8> = rows
                .iter()
                .map(|row| (0..400).fold(0u8, |s, v| s ^ (((row[v / 64] >> (v % 64)) & 1) as u8 & bits[v])))
                .collect();
            assert_eq!(code.syndrome(&bits).unwrap(), dense);
        }
        assert!(code.syndrome(&[0; 399]).is_err());
        assert!(code.syndrome(&[0; 400]).unwrap().iter().all(|&s| s == 0));
    }

    #[test]
    fn codeword_has_zero_syndrome() {
        // a null-space vector of H found by elimination on the toy code
        let code = ldpc_construct(0.5, 16, 4).unwrap();
        let mut found = false;
        for x in 1u32..1 << 16 {
            let bits: Vec<u8> = (0..16).map(|i| ((x >> i) & 1) as u8).collect();
            if code.syndrome(&bits).unwrap().iter().all(|&s| s == 0) {
                found = true;
                break;
            }
        }
        assert!(found);
    }

    #[test]
    fn zero_flips_converge_immediately() {
        let code = ldpc_construct(0.05, 4000, 2).unwrap();
        let bits = random_bits(4000, 1);
        let s = code.syndrome(&bits).unwrap();
        let llr: Vec<f64> = bits.iter().map(|&b| if b == 0 { 0.5 } else { -0.5 }).collect();
        let out = code.bp_decode(&llr, &s, MAX_ITER).unwrap();
        assert!(out.success);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.bits, bits);
    }

    #[test]
    fn corrects_a_light_bsc() {
        let code = ldpc_construct(0.05, 4000, 5).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let p = 0.15;
        let l0 = libm::log((1.0 - p) / p);
        for _ in 0..5 {
            let bob: Vec<u8> = (0..4000).map(|_| rng.gen_range(0..2)).collect();
            let alice: Vec<u8> = bob.iter().map(|&b| b ^ (rng.gen::<f64>() < p) as u8).collect();
            let llr: Vec<f64> = alice.iter().map(|&a| if a == 0 { l0 } else { -l0 }).collect();
            let out = code.bp_decode(&llr, &code.syndrome(&bob).unwrap(), MAX_ITER).unwrap();
            assert!(out.success);
            assert_eq!(out.bits, bob);
            assert_eq!(code.syndrome(&out.bits).unwrap(), code.syndrome(&bob).unwrap());
        }
    }

    #[test]
    fn decode_rejects_bad_inputs() {
        let code = ldpc_construct(0.5, 16, 1).unwrap();
        assert!(code.bp_decode(&[0.1; 15], &[0; 8], 10).is_err());
        assert!(code.bp_decode(&[0.1; 16], &[0; 7], 10).is_err());
        let mut llr = [0.1; 16];
        llr[3] = f64::NAN;
        assert!(code.bp_decode(&llr, &[0; 8], 10).is_err());
    }
}
