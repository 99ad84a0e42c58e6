//! Oracles shared by the integration and acceptance tests. Nothing here calls
//! into the crate's arithmetic kernels.
#![allow(dead_code)]

use num_bigint::{BigInt, Sign};
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::{Rng, RngCore};
use torontonian::scheduler::{InstrRef, InstructionDag, InstructionNode, Pipeline};

pub fn limbs_to_signed(limbs: &[u64]) -> BigInt {
    let width = 64 * limbs.len();
    let mut u = BigInt::zero();
    for &w in limbs.iter().rev() {
        u = (u << 64) + BigInt::from(w);
    }
    if limbs[limbs.len() - 1] >> 63 == 1 {
        u -= BigInt::one() << width;
    }
    u
}

/// Reduces `x` modulo `2^width` into the two's-complement limb pattern.
pub fn signed_to_limbs(x: &BigInt, n: usize) -> Vec<u64> {
    let modulus = BigInt::one() << (64 * n);
    let r = x.mod_floor(&modulus);
    let (_, mut digits) = r.to_u64_digits();
    digits.resize(n, 0);
    digits
}

pub fn floor_shift(x: &BigInt, f: u32) -> BigInt {
    x.div_floor(&(BigInt::one() << f))
}

pub fn bigint_sqrt_floor(x: &BigInt) -> BigInt {
    assert!(!x.is_negative());
    x.sqrt()
}

/// Random limbs drawn from a mix of full-range and short-magnitude values;
/// the most negative word is never produced.
pub fn random_limbs<R: RngCore>(rng: &mut R, n: usize) -> Vec<u64> {
    let width = 64 * n as u32;
    let mut limbs: Vec<u64> = (0..n).map(|_| rng.next_u64()).collect();
    match rng.gen_range(0..3) {
        0 => {}
        _ => {
            let bits = rng.gen_range(1..width);
            let mag = limbs_to_signed(&limbs).abs() % (BigInt::one() << bits);
            let v = if rng.gen_bool(0.5) { -mag } else { mag };
            limbs = signed_to_limbs(&v, n);
        }
    }
    let min = signed_to_limbs(&-(BigInt::one() << (width - 1)), n);
    if limbs == min {
        limbs[0] = 1;
    }
    limbs
}

pub fn sign_of(x: &BigInt) -> Sign {
    x.sign()
}

/// Dense complex matrix, row-major.
#[derive(Clone, Debug)]
pub struct Dense {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl Dense {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    pub fn identity_minus(&self) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v = -*v;
        }
        for i in 0..self.n {
            out.data[i * self.n + i] += 1.0;
        }
        out
    }

    pub fn principal(&self, idx: &[usize]) -> Self {
        let mut out = Dense::zeros(idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out.set(a, b, self.get(i, j));
            }
        }
        out
    }
}

/// Determinant by LU with partial pivoting.
pub fn lu_det(m: &Dense) -> Complex64 {
    let n = m.n;
    let mut a = m.data.clone();
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let p = (k..n).max_by(|&x, &y| a[x * n + k].norm().partial_cmp(&a[y * n + k].norm()).unwrap()).unwrap();
        if a[p * n + k].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            det = -det;
        }
        let piv = a[k * n + k];
        det *= piv;
        for i in k + 1..n {
            let l = a[i * n + k] / piv;
            for j in k..n {
                let t = a[k * n + j];
                a[i * n + j] -= l * t;
            }
        }
    }
    det
}

/// Determinant by Laplace expansion along the first row.
pub fn cofactor_det(m: &Dense) -> Complex64 {
    if m.n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if m.n == 1 {
        return m.get(0, 0);
    }
    let mut total = Complex64::new(0.0, 0.0);
    for c in 0..m.n {
        let idx_cols: Vec<usize> = (0..m.n).filter(|&j| j != c).collect();
        let mut minor = Dense::zeros(m.n - 1);
        for i in 1..m.n {
            for (b, &j) in idx_cols.iter().enumerate() {
                minor.set(i - 1, b, m.get(i, j));
            }
        }
        let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * m.get(0, c) * cofactor_det(&minor);
    }
    total
}

/// Random Hermitian positive definite matrix: B^H B / n + shift * I.
pub fn random_hpd<R: Rng>(rng: &mut R, n: usize, shift: f64) -> Dense {
    let mut b = Dense::zeros(n);
    for v in b.data.iter_mut() {
        *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    let mut m = Dense::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..n {
                s += b.get(k, i).conj() * b.get(k, j);
            }
            m.set(i, j, s / n as f64);
        }
        let d = m.get(i, i);
        m.set(i, i, Complex64::new(d.re + shift, 0.0));
    }
    m
}

/// Torontonian by direct summation over all subsets, with determinants from
/// LU with pivoting. `a` is the dense 2N x 2N matrix.
pub fn brute_torontonian(a: &Dense) -> f64 {
    let n = a.n / 2;
    let ima = a.identity_minus();
    let mut total = 0.0;
    for mask in 0u64..(1 << n) {
        let modes: Vec<usize> = (0..n).filter(|j| mask >> j & 1 == 1).collect();
        let mut idx = modes.clone();
        idx.extend(modes.iter().map(|j| j + n));
        let det = if idx.is_empty() { 1.0 } else { lu_det(&ima.principal(&idx)).re };
        let sign = if (n - modes.len()) % 2 == 0 { 1.0 } else { -1.0 };
        total += sign / det.abs().sqrt();
    }
    total
}

/// Smallest eigenvalue bound check via Sylvester's criterion on a Hermitian
/// matrix: all leading principal minors positive.
pub fn is_positive_definite(m: &Dense) -> bool {
    (1..=m.n).all(|k| {
        let idx: Vec<usize> = (0..k).collect();
        lu_det(&m.principal(&idx)).re > 0.0
    })
}

/// Random DAG description: `(latency, pipeline 0/1, group_count)` per node
/// and forward edges `(i, j)` with `i < j`, ids equal to indices.
pub struct RandomDag {
    pub nodes: Vec<(u32, u8, u32)>,
    pub edges: Vec<(u32, u32)>,
}

pub fn random_dag<R: Rng>(rng: &mut R, max_expanded: usize, max_group: u32, edge_prob: f64) -> RandomDag {
    let lats = [1u32, 2, 6];
    let mut nodes = Vec::new();
    let mut total = 0usize;
    let target = rng.gen_range(1..=max_expanded);
    while total < target {
        let g = rng.gen_range(1..=max_group).min((target - total) as u32);
        nodes.push((lats[rng.gen_range(0..3)], rng.gen_range(0..2u8), g));
        total += g as usize;
    }
    let mut edges = Vec::new();
    for j in 0..nodes.len() {
        for i in 0..j {
            if rng.gen_bool(edge_prob) {
                edges.push((i as u32, j as u32));
            }
        }
    }
    RandomDag { nodes, edges }
}

/// Straightforward re-statement of the machine model over explicit
/// instruction lists: `lat`, `pipe`, `deps` per instruction, `order` as
/// instruction indices. Returns issue cycles and makespan.
pub fn model_simulate(lat: &[u32], pipe: &[u8], deps: &[Vec<usize>], order: &[usize], global_wb: bool) -> (Vec<u32>, u32) {
    let n = lat.len();
    let mut issue = vec![0u32; n];
    let mut done = vec![false; n];
    let mut last = [0u32; 2];
    for &i in order {
        let mut t = last[pipe[i] as usize] + 1;
        for &d in &deps[i] {
            assert!(done[d], "order violates a dependence");
            t = t.max(issue[d] + lat[d]);
        }
        loop {
            let c = t + lat[i];
            let clash = (0..n).any(|j| done[j] && issue[j] + lat[j] == c && (global_wb || pipe[j] == pipe[i]));
            if !clash {
                break;
            }
            t += 1;
        }
        issue[i] = t;
        done[i] = true;
        last[pipe[i] as usize] = t;
    }
    let makespan = (0..n).map(|i| issue[i] + lat[i]).max().unwrap_or(0);
    (issue, makespan)
}

/// Exact dyadic decomposition of a finite double: `x = m * 2^e`.
fn split_f64(x: f64) -> (BigInt, i32) {
    if x == 0.0 {
        return (BigInt::zero(), 0);
    }
    let bits = x.abs().to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (m, e) = if biased == 0 { (frac, -1074) } else { (frac | (1 << 52), biased - 1075) };
    let m = BigInt::from(m);
    (if x < 0.0 { -m } else { m }, e)
}

/// Gaussian integer `re + i im`.
#[derive(Clone, Debug)]
pub struct GInt {
    pub re: BigInt,
    pub im: BigInt,
}

impl GInt {
    fn mul(&self, o: &GInt) -> GInt {
        GInt { re: &self.re * &o.re - &self.im * &o.im, im: &self.re * &o.im + &self.im * &o.re }
    }

    fn sub(&self, o: &GInt) -> GInt {
        GInt { re: &self.re - &o.re, im: &self.im - &o.im }
    }

    /// Exact quotient; panics if `o` does not divide `self`.
    fn div_exact(&self, o: &GInt) -> GInt {
        let n = &o.re * &o.re + &o.im * &o.im;
        let re = &self.re * &o.re + &self.im * &o.im;
        let im = &self.im * &o.re - &self.re * &o.im;
        assert!((&re % &n).is_zero() && (&im % &n).is_zero(), "inexact Bareiss step");
        GInt { re: re / &n, im: im / n }
    }
}

/// Determinant by fraction-free Bareiss elimination, no pivoting. Leading
/// principal minors must be nonzero (true for definite matrices).
pub fn bareiss_det(m: &[Vec<GInt>]) -> GInt {
    let n = m.len();
    if n == 0 {
        return GInt { re: BigInt::one(), im: BigInt::zero() };
    }
    let mut a = m.to_vec();
    let mut prev = GInt { re: BigInt::one(), im: BigInt::zero() };
    for k in 0..n - 1 {
        assert!(!(a[k][k].re.is_zero() && a[k][k].im.is_zero()), "zero leading minor");
        for i in k + 1..n {
            for j in k + 1..n {
                let t = a[i][j].mul(&a[k][k]).sub(&a[i][k].mul(&a[k][j]));
                a[i][j] = t.div_exact(&prev);
            }
        }
        prev = a[k][k].clone();
    }
    a[n - 1][n - 1].clone()
}

/// Torontonian of the dense `2N x 2N` matrix `a` with every term exact to
/// `2^-prec`: determinants of `I - A_Z` are computed exactly, each term is
/// `floor(2^prec / sqrt(det))`. Returns the sum as an integer at scale
/// `2^prec` together with the sum of absolute terms at the same scale.
pub fn exact_torontonian(a: &Dense, prec: u32) -> (BigInt, BigInt) {
    let n = a.n / 2;
    let ima = a.identity_minus();
    // common scale 2^s making every entry an integer
    let mut s = 0i32;
    for v in &ima.data {
        for x in [v.re, v.im] {
            let (m, e) = split_f64(x);
            if !m.is_zero() {
                s = s.max(-e);
            }
        }
    }
    let to_int = |x: f64| -> BigInt {
        let (m, e) = split_f64(x);
        m << (e + s) as usize
    };
    let mut total = BigInt::zero();
    let mut abs_total = BigInt::zero();
    for mask in 0u64..(1 << n) {
        let modes: Vec<usize> = (0..n).filter(|j| mask >> j & 1 == 1).collect();
        let mut idx = modes.clone();
        idx.extend(modes.iter().map(|j| j + n));
        let d = idx.len();
        let rows: Vec<Vec<GInt>> = idx
            .iter()
            .map(|&i| idx.iter().map(|&j| GInt { re: to_int(ima.get(i, j).re), im: to_int(ima.get(i, j).im) }).collect())
            .collect();
        let det = bareiss_det(&rows);
        assert!(det.im.is_zero() && det.re.is_positive(), "determinant not positive real");
        // 1/sqrt(det / 2^(s d)) * 2^prec = sqrt(2^(2 prec + s d) / det)
        let num = BigInt::one() << (2 * prec as usize + s as usize * d);
        let term = (num / &det.re).sqrt();
        abs_total += &term;
        if (n - modes.len()) % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    (total, abs_total)
}

/// `x / 2^prec` as a double.
pub fn scaled_to_f64(x: &BigInt, prec: u32) -> f64 {
    let bits = x.bits() as i64;
    let shift = (bits - 60).max(0);
    let top = x >> shift as usize;
    let top: i64 = top.try_into().unwrap();
    top as f64 * 2f64.powi((shift - prec as i64) as i32)
}

/// Expanded instruction list of a [`RandomDag`]: per-instruction latency,
/// pipeline, dependences, and the (node, copy) it came from.
pub struct Flat {
    pub lat: Vec<u32>,
    pub pipe: Vec<u8>,
    pub deps: Vec<Vec<usize>>,
    pub node: Vec<u32>,
    pub copy: Vec<u32>,
}

pub fn build(d: &RandomDag) -> (InstructionDag, Flat) {
    let nodes = d
        .nodes
        .iter()
        .enumerate()
        .map(|(k, &(lat, p, g))| InstructionNode::new(k as u32, lat, if p == 0 { Pipeline::P0 } else { Pipeline::P1 }, g))
        .collect();
    let dag = InstructionDag::new(nodes, &d.edges).unwrap();
    let mut first = Vec::new();
    let mut f = Flat { lat: vec![], pipe: vec![], deps: vec![], node: vec![], copy: vec![] };
    for (k, &(lat, p, g)) in d.nodes.iter().enumerate() {
        first.push(f.lat.len());
        for c in 0..g {
            f.lat.push(lat);
            f.pipe.push(p);
            f.deps.push(vec![]);
            f.node.push(k as u32);
            f.copy.push(c);
        }
    }
    for &(a, b) in &d.edges {
        let (a, b) = (a as usize, b as usize);
        let (ga, gb) = (d.nodes[a].2, d.nodes[b].2);
        for cb in 0..gb {
            for ca in 0..ga {
                if ga != gb || ca == cb {
                    f.deps[first[b] + cb as usize].push(first[a] + ca as usize);
                }
            }
        }
    }
    (dag, f)
}

pub fn to_refs(f: &Flat, order: &[usize]) -> Vec<InstrRef> {
    order.iter().map(|&i| InstrRef { node: f.node[i], copy: f.copy[i] }).collect()
}

pub fn index_of(f: &Flat, r: InstrRef) -> usize {
    (0..f.lat.len()).find(|&i| f.node[i] == r.node && f.copy[i] == r.copy).unwrap()
}

/// Every order respecting dependences (and copy order when asked).
pub fn all_orders(f: &Flat, copy_order: bool) -> Vec<Vec<usize>> {
    fn rec(f: &Flat, copy_order: bool, cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        let n = f.lat.len();
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in 0..n {
            if used[i] || f.deps[i].iter().any(|&d| !used[d]) {
                continue;
            }
            if copy_order && f.copy[i] > 0 && !used[i - 1] {
                continue;
            }
            used[i] = true;
            cur.push(i);
            rec(f, copy_order, cur, used, out);
            cur.pop();
            used[i] = false;
        }
    }
    let mut out = Vec::new();
    rec(f, copy_order, &mut Vec::new(), &mut vec![false; f.lat.len()], &mut out);
    out
}

pub fn optimum(f: &Flat, copy_order: bool, global: bool) -> u32 {
    all_orders(f, copy_order)
        .iter()
        .map(|o| model_simulate(&f.lat, &f.pipe, &f.deps, o, global).1)
        .min()
        .unwrap_or(0)
}
