//! Relation systems on consecutive products `c_j c_{j+1} ... c_{j+k-1}`:
//! exact sums, certificates, a bounded exact search, and a damped Newton
//! solver for the near-symmetric box system.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::blocks::ApVariant;
use crate::error::{Error, Result};
use crate::sequences::BasicSequence;

fn product(c: &[BigRational], idx: impl Iterator<Item = usize>) -> BigRational {
    idx.fold(BigRational::one(), |acc, i| acc * &c[i])
}

/// `S_k(c) = Σ_{j=0}^{t-k} c_j c_{j+1} ... c_{j+k-1}`.
pub fn consecutive_product_sum(c: &[BigRational], k: u64) -> Result<BigRational> {
    let t = c.len() as u64;
    if k == 0 || k > t {
        return Err(Error::InvalidParameter(format!("order {k} outside 1..={t}")));
    }
    let k = k as usize;
    Ok((0..=c.len() - k).fold(BigRational::zero(), |acc, j| acc + product(c, j..j + k)))
}

/// Progression sums: type I
/// `Σ_{j=0}^{⌊(t-k-r)/m⌋} c_{r+jm} c_{r+jm+1} ... c_{r+jm+k-1}`, type II
/// `Σ_{j=0}^{⌊(t-r-1)/m⌋-k+1} c_{r+jm} c_{r+(j+1)m} ... c_{r+(j+k-1)m}`.
pub fn ap_product_sum(c: &[BigRational], k: u64, m: u64, r: u64, variant: ApVariant) -> Result<BigRational> {
    let t = c.len() as i64;
    let (k, m, r) = (k as i64, m as i64, r as i64);
    if k < 1 || m < 1 || r < 0 || r >= m {
        return Err(Error::InvalidParameter(format!("k = {k}, m = {m}, r = {r}")));
    }
    let (top, idx): (i64, Box<dyn Fn(i64, i64) -> usize>) = match variant {
        ApVariant::TypeI => (t - k - r, Box::new(move |j, s| (r + j * m + s) as usize)),
        ApVariant::TypeII => (
            Integer::div_floor(&(t - r - 1), &m) - k + 1,
            Box::new(move |j, s| (r + (j + s) * m) as usize),
        ),
    };
    if top < 0 {
        return Err(Error::InvalidParameter(format!(
            "empty progression sum for t = {t}, k = {k}, m = {m}, r = {r}"
        )));
    }
    let jmax = match variant {
        ApVariant::TypeI => Integer::div_floor(&top, &m),
        ApVariant::TypeII => top,
    };
    Ok((0..=jmax).fold(BigRational::zero(), |acc, j| acc + product(c, (0..k).map(|s| idx(j, s)))))
}

/// An extra relation on a progression: the sum must equal `d/m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ApConstraint {
    pub k: u64,
    pub m: u64,
    pub r: u64,
    pub variant: ApVariant,
}

/// `S_k = d` for `k ∈ A`, `S_k ≠ d` for `k ∈ B`, plus progression relations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelationSystem {
    pub t: u64,
    pub a: Vec<u64>,
    pub b: Vec<u64>,
    pub ap: Vec<ApConstraint>,
}

impl RelationSystem {
    pub fn new(t: u64, mut a: Vec<u64>, mut b: Vec<u64>) -> Result<Self> {
        if t < 2 {
            return Err(Error::InvalidParameter("relation systems need t >= 2".into()));
        }
        a.sort_unstable();
        b.sort_unstable();
        let mut all: Vec<u64> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        if all != (1..=t).collect::<Vec<_>>() {
            return Err(Error::InvalidParameter(format!("A and B must partition 1..={t}")));
        }
        Ok(RelationSystem { t, a, b, ap: Vec::new() })
    }

    pub fn with_ap(mut self, constraint: ApConstraint) -> Self {
        self.ap.push(constraint);
        self
    }
}

/// `(c_0, ..., c_{t-1}, d)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Solution {
    #[serde(serialize_with = "ser_rationals")]
    pub c: Vec<BigRational>,
    pub d: u64,
}

fn ser_rationals<S: serde::Serializer>(v: &[BigRational], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&x.to_string())?;
    }
    seq.end()
}

impl Solution {
    pub fn from_integers(c: &[i64], d: u64) -> Self {
        Solution {
            c: c.iter().map(|&v| BigRational::from_integer(v.into())).collect(),
            d,
        }
    }

    /// The numerators `α_j` of `c_j = α_j/β_j` in lowest terms.
    pub fn alphas(&self) -> Vec<BigInt> {
        self.c.iter().map(|c| c.numer().clone()).collect()
    }
}

/// One checked relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelationCheck {
    pub label: String,
    #[serde(serialize_with = "ser_rational")]
    pub value: BigRational,
    #[serde(serialize_with = "ser_rational")]
    pub target: BigRational,
    /// `true` for `=`, `false` for `≠`.
    pub equal: bool,
    pub pass: bool,
}

fn ser_rational<S: serde::Serializer>(v: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// Per-relation exact values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Certificate {
    pub checks: Vec<RelationCheck>,
    pub pass: bool,
}

impl Certificate {
    /// The order-`k` values `S_1, ..., S_t`, in order of `k`.
    pub fn sums(&self) -> Vec<BigRational> {
        let mut v: Vec<(u64, BigRational)> = self
            .checks
            .iter()
            .filter_map(|c| c.label.strip_prefix("S_").and_then(|k| k.parse().ok()).map(|k| (k, c.value.clone())))
            .collect();
        v.sort_by_key(|(k, _)| *k);
        v.into_iter().map(|(_, s)| s).collect()
    }
}

/// Checks every relation of `sys` at `sol` in exact arithmetic.
pub fn verify_solution(sys: &RelationSystem, sol: &Solution) -> Certificate {
    let mut checks = Vec::new();
    let d = BigRational::from_integer(sol.d.into());
    let domain_ok = sol.c.len() as u64 == sys.t && sol.c.iter().all(|c| c.is_positive()) && sol.d > sys.t;
    checks.push(RelationCheck {
        label: "domain".into(),
        value: BigRational::from_integer(sol.d.into()),
        target: BigRational::from_integer((sys.t + 1).into()),
        equal: false,
        pass: domain_ok,
    });
    if sol.c.len() as u64 != sys.t {
        return Certificate { checks, pass: false };
    }
    for k in 1..=sys.t {
        let value = consecutive_product_sum(&sol.c, k).expect("k within 1..=t");
        let equal = sys.a.contains(&k);
        let pass = (value == d) == equal;
        checks.push(RelationCheck {
            label: format!("S_{k}"),
            value,
            target: d.clone(),
            equal,
            pass,
        });
    }
    for ap in &sys.ap {
        let target = &d / BigRational::from_integer(ap.m.into());
        let label = format!("{:?}(k={},m={},r={})", ap.variant, ap.k, ap.m, ap.r);
        match ap_product_sum(&sol.c, ap.k, ap.m, ap.r, ap.variant) {
            Ok(value) => {
                let pass = value == target;
                checks.push(RelationCheck { label, value, target, equal: true, pass });
            }
            Err(_) => checks.push(RelationCheck {
                label,
                value: BigRational::zero(),
                target,
                equal: true,
                pass: false,
            }),
        }
        let u = sys.t.lcm(&ap.m);
        checks.push(RelationCheck {
            label: format!("d in {u}N"),
            value: BigRational::from_integer(sol.d.into()),
            target: BigRational::from_integer(u.into()),
            equal: true,
            pass: sol.d.is_multiple_of(u) && sol.d / u >= 2,
        });
    }
    let pass = checks.iter().all(|c| c.pass);
    Certificate { checks, pass }
}

/// Reduced fractions `p/q` with `1 <= p, q <= h`, ordered by height
/// `max(p, q)` and then by value (the order in which a Stern–Brocot style
/// descent first meets them).
pub fn bounded_rationals(h: u64) -> Vec<BigRational> {
    let mut v: Vec<(u64, u64, u64)> = Vec::new();
    for q in 1..=h {
        for p in 1..=h {
            if p.gcd(&q) == 1 {
                v.push((p.max(q), p, q));
            }
        }
    }
    v.sort_by(|a, b| a.0.cmp(&b.0).then((a.1 * b.2).cmp(&(b.1 * a.2))));
    v.into_iter()
        .map(|(_, p, q)| BigRational::new(p.into(), q.into()))
        .collect()
}

/// Result of a bounded exact search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchOutcome {
    pub solution: Option<Solution>,
    pub certificate: Option<Certificate>,
    pub max_height: u64,
    pub max_d: u64,
    pub tuples_examined: u64,
}

fn search_d(sys: &RelationSystem, rationals: &[BigRational], d: u64) -> (Option<Solution>, u64) {
    let t = sys.t as usize;
    let prune_product = sys.a.contains(&sys.t);
    let d_rat = BigRational::from_integer(d.into());
    let mut examined = 0u64;
    let mut stack: Vec<usize> = Vec::with_capacity(t);
    let mut c: Vec<BigRational> = Vec::with_capacity(t);
    // Iterative depth-first enumeration over index tuples.
    let mut next = 0usize;
    loop {
        if c.len() + 1 == t && prune_product {
            // The last coordinate is fixed by Π c_j = d.
            let partial = c.iter().fold(BigRational::one(), |acc, x| acc * x);
            let last = &d_rat / partial;
            if rationals.contains(&last) {
                c.push(last);
                examined += 1;
                let sol = Solution { c: c.clone(), d };
                if verify_solution(sys, &sol).pass {
                    return (Some(sol), examined);
                }
                c.pop();
            }
            match stack.pop() {
                Some(i) => {
                    c.pop();
                    next = i + 1;
                    continue;
                }
                None => return (None, examined),
            }
        }
        if c.len() == t {
            examined += 1;
            let sol = Solution { c: c.clone(), d };
            if verify_solution(sys, &sol).pass {
                return (Some(sol), examined);
            }
            match stack.pop() {
                Some(i) => {
                    c.pop();
                    next = i + 1;
                }
                None => return (None, examined),
            }
            continue;
        }
        if next < rationals.len() {
            stack.push(next);
            c.push(rationals[next].clone());
            next = 0;
        } else {
            match stack.pop() {
                Some(i) => {
                    c.pop();
                    next = i + 1;
                }
                None => return (None, examined),
            }
        }
    }
}

/// Enumerates `d = t+1, ..., max_d` and tuples of reduced fractions with
/// numerator and denominator at most `max_height`, returning the first
/// solution in that order. Values of `d` are searched in parallel.
pub fn solve_exact(sys: &RelationSystem, max_height: u64, max_d: u64) -> SearchOutcome {
    let rationals = bounded_rationals(max_height);
    let ds: Vec<u64> = (sys.t + 1..=max_d).collect();
    let results: Vec<(Option<Solution>, u64)> = ds.par_iter().map(|&d| search_d(sys, &rationals, d)).collect();
    let examined = results.iter().map(|r| r.1).sum();
    let solution = results.into_iter().find_map(|r| r.0);
    let certificate = solution.as_ref().map(|s| verify_solution(sys, s));
    SearchOutcome {
        solution,
        certificate,
        max_height,
        max_d,
        tuples_examined: examined,
    }
}

/// Checks `α_j | p_n` for every `j` and `n <= upto`, returning the first
/// failing pair.
pub fn check_divisibility(sol: &Solution, p: &BasicSequence, upto: u64) -> Result<Option<(usize, u64)>> {
    let alphas = sol.alphas();
    for n in 1..=upto {
        let pn = BigInt::from(p.q_at(n)?.to_biguint());
        for (j, a) in alphas.iter().enumerate() {
            if !(&pn % a).is_zero() {
                return Ok(Some((j, n)));
            }
        }
    }
    Ok(None)
}

/// `α_j | b` for every base `b` a schedule emits reduces to divisibility by
/// the lcm of the numerators.
pub fn numerator_lcm(sol: &Solution) -> BigInt {
    sol.alphas().iter().fold(BigInt::one(), |acc, a| acc.lcm(a))
}

/// `[t, t+1] × [1 + 1/(2t), 1 + 1/(t-1)]^{t-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxSystem {
    pub t: usize,
    pub eps: Vec<f64>,
}

impl BoxSystem {
    pub fn new(t: usize, eps: Vec<f64>) -> Result<Self> {
        if t < 3 {
            return Err(Error::InvalidParameter("box system needs t >= 3".into()));
        }
        if eps.len() != t {
            return Err(Error::InvalidParameter(format!("need {t} perturbations, got {}", eps.len())));
        }
        Ok(BoxSystem { t, eps })
    }

    pub fn lower(&self, i: usize) -> f64 {
        if i == 0 {
            self.t as f64
        } else {
            1.0 + 1.0 / (2.0 * self.t as f64)
        }
    }

    pub fn upper(&self, i: usize) -> f64 {
        if i == 0 {
            self.t as f64 + 1.0
        } else {
            1.0 + 1.0 / (self.t as f64 - 1.0)
        }
    }

    pub fn start(&self) -> DVector<f64> {
        DVector::from_fn(self.t, |i, _| if i == 0 { self.t as f64 + 0.5 } else { 1.0 + 1.0 / self.t as f64 })
    }

    pub fn project(&self, c: &mut DVector<f64>) {
        for i in 0..self.t {
            c[i] = c[i].clamp(self.lower(i), self.upper(i));
        }
    }

    pub fn contains(&self, c: &DVector<f64>) -> bool {
        (0..self.t).all(|i| c[i] >= self.lower(i) && c[i] <= self.upper(i))
    }

    /// Largest violation of the box bounds (0 inside).
    pub fn distance(&self, c: &DVector<f64>) -> f64 {
        (0..self.t)
            .map(|i| (self.lower(i) - c[i]).max(c[i] - self.upper(i)).max(0.0))
            .fold(0.0, f64::max)
    }

    /// `F_k(c) = S_k(c) - 2t - ε_k`.
    pub fn residual(&self, c: &DVector<f64>) -> DVector<f64> {
        let t = self.t;
        DVector::from_fn(t, |row, _| {
            let k = row + 1;
            let s: f64 = (0..=t - k).map(|j| (j..j + k).map(|i| c[i]).product::<f64>()).sum();
            s - 2.0 * t as f64 - self.eps[row]
        })
    }

    /// `∂S_k/∂c_i = Σ_{j <= i <= j+k-1} Π_{s ≠ i} c_{j+s}`.
    pub fn jacobian(&self, c: &DVector<f64>) -> DMatrix<f64> {
        let t = self.t;
        let mut jac = DMatrix::zeros(t, t);
        for k in 1..=t {
            for j in 0..=t - k {
                for i in j..j + k {
                    let p: f64 = (j..j + k).filter(|&s| s != i).map(|s| c[s]).product();
                    jac[(k - 1, i)] += p;
                }
            }
        }
        jac
    }
}

/// Why a Newton run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoxStatus {
    Converged,
    /// No step size reduced the residual.
    Stalled,
    IterationCap,
    SingularJacobian,
}

/// Result of [`solve_box`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxOutcome {
    pub t: usize,
    pub c: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub iterations: usize,
    pub status: BoxStatus,
    pub in_box: bool,
    /// Box violation of the unprojected Newton root, when that run converged.
    pub free_root_distance: Option<f64>,
    pub free_root: Option<Vec<f64>>,
}

impl BoxOutcome {
    pub fn converged(&self) -> bool {
        self.status == BoxStatus::Converged && self.in_box
    }
}

/// Residual below which the box system counts as solved.
pub const BOX_TOLERANCE: f64 = 1e-9;
const MAX_NEWTON: usize = 100;
const MAX_HALVINGS: u32 = 30;

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn newton(sys: &BoxSystem, project: bool) -> (DVector<f64>, DVector<f64>, usize, BoxStatus) {
    let mut c = sys.start();
    let mut f = sys.residual(&c);
    for iter in 0..MAX_NEWTON {
        let norm = inf_norm(&f);
        if norm < BOX_TOLERANCE {
            return (c, f, iter, BoxStatus::Converged);
        }
        let jac = sys.jacobian(&c);
        let Some(step) = jac.lu().solve(&(-&f)) else {
            return (c, f, iter, BoxStatus::SingularJacobian);
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let mut cand = &c + &step * lambda;
            if project {
                sys.project(&mut cand);
            }
            let fc = sys.residual(&cand);
            if inf_norm(&fc) < norm {
                c = cand;
                f = fc;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return (c, f, iter, BoxStatus::Stalled);
        }
    }
    let status = if inf_norm(&f) < BOX_TOLERANCE { BoxStatus::Converged } else { BoxStatus::IterationCap };
    (c, f, MAX_NEWTON, status)
}

/// Damped Newton on `S_k(c) = 2t + ε_k`, started at `c_0 = t + 1/2`,
/// `c_j = 1 + 1/t` and projected into the box after every step. The
/// unprojected root is also computed and its box violation reported.
pub fn solve_box(t: usize, eps: &[f64]) -> Result<BoxOutcome> {
    let sys = BoxSystem::new(t, eps.to_vec())?;
    let (c, f, iterations, status) = newton(&sys, true);
    let (free_c, _, _, free_status) = newton(&sys, false);
    let (free_root_distance, free_root) = if free_status == BoxStatus::Converged {
        (Some(sys.distance(&free_c)), Some(free_c.iter().copied().collect()))
    } else {
        (None, None)
    };
    Ok(BoxOutcome {
        t,
        in_box: sys.contains(&c),
        max_residual: inf_norm(&f),
        residuals: f.iter().copied().collect(),
        c: c.iter().copied().collect(),
        iterations,
        status,
        free_root_distance,
        free_root,
    })
}

/// Largest `s` in `[0, hi]` (to within `tol`) such that `solve_box` with
/// `ε = s · direction` still converges in the box. Exploratory only.
pub fn max_perturbation(t: usize, direction: &[f64], hi: f64, tol: f64) -> Result<f64> {
    let ok = |s: f64| -> Result<bool> {
        let eps: Vec<f64> = direction.iter().map(|d| d * s).collect();
        Ok(solve_box(t, &eps)?.converged())
    };
    if !ok(0.0)? {
        return Ok(0.0);
    }
    if ok(hi)? {
        return Ok(hi);
    }
    let (mut lo, mut up) = (0.0, hi);
    while up - lo > tol {
        let mid = 0.5 * (lo + up);
        if ok(mid)? {
            lo = mid;
        } else {
            up = mid;
        }
    }
    Ok(lo)
}

/// Approximates each `c_j` by a rational with denominator `10^digits`.
pub fn rational_approximation(c: &[f64], digits: u32) -> Vec<BigRational> {
    let scale = 10i64.pow(digits);
    c.iter()
        .map(|&x| BigRational::new(BigInt::from((x * scale as f64).round() as i64), BigInt::from(scale)))
        .collect()
}

/// `S_k` at rational points as `f64`, for cross-checking the floating path.
pub fn exact_sums_f64(c: &[BigRational]) -> Vec<f64> {
    (1..=c.len() as u64)
        .map(|k| consecutive_product_sum(c, k).expect("k in range").to_f64().unwrap_or(f64::NAN))
        .collect()
}
