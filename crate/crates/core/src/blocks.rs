//! Finite digit blocks, the lexicographic concatenations `C_{b,w}`, block
//! counting along arithmetic progressions and the finite normality
//! predicates.
//!
//! Positions are 1-based. A residue class `r` of modulus `m` selects the
//! positions `p` with `p % m == r`, so class 0 is `{m, 2m, ...}`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of digits a caller may materialize.
pub const DEFAULT_MATERIALIZATION_CAP: u64 = 100_000_000;

/// An ordered tuple of non-negative digits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Block {
    digits: Vec<u64>,
    base_hint: Option<u64>,
}

impl Block {
    pub fn new(digits: Vec<u64>) -> Self {
        Block {
            digits,
            base_hint: None,
        }
    }

    /// Block whose digits are all below `base`.
    pub fn with_base(digits: Vec<u64>, base: u64) -> Result<Self> {
        if base < 2 {
            return Err(Error::InvalidParameter(format!("base {base} < 2")));
        }
        if let Some(d) = digits.iter().find(|&&d| d >= base) {
            return Err(Error::InvalidParameter(format!(
                "digit {d} is not below base {base}"
            )));
        }
        Ok(Block {
            digits,
            base_hint: Some(base),
        })
    }

    pub fn digits(&self) -> &[u64] {
        &self.digits
    }

    pub fn into_digits(self) -> Vec<u64> {
        self.digits
    }

    pub fn base_hint(&self) -> Option<u64> {
        self.base_hint
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// All blocks of length `k` in base `b`, in lexicographic order.
    pub fn all_of_length(b: u64, k: usize) -> Vec<Block> {
        let total = (b as usize).pow(k as u32);
        (0..total)
            .map(|mut code| {
                let mut digits = vec![0u64; k];
                for slot in digits.iter_mut().rev() {
                    *slot = (code % b as usize) as u64;
                    code /= b as usize;
                }
                Block {
                    digits,
                    base_hint: Some(b),
                }
            })
            .collect()
    }
}

impl From<Vec<u64>> for Block {
    fn from(digits: Vec<u64>) -> Self {
        Block::new(digits)
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.digits.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for Block {
    type Err = Error;

    /// Parses the literal form `(0,0,1)`; the parentheses are optional.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let inner = s
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .unwrap_or(s)
            .trim();
        if inner.is_empty() {
            return Ok(Block::new(Vec::new()));
        }
        let digits = inner
            .split(',')
            .map(|d| {
                d.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Descriptor(format!("bad block digit {d:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Block::new(digits))
    }
}

/// The uniform measure `λ_b`: every block of length `k` has mass `b^{-k}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformMeasure {
    pub base: u64,
}

impl UniformMeasure {
    pub fn new(base: u64) -> Result<Self> {
        if base < 2 {
            return Err(Error::InvalidParameter(format!("measure base {base} < 2")));
        }
        Ok(UniformMeasure { base })
    }

    pub fn measure(&self, block: &Block) -> BigRational {
        BigRational::new(
            One::one(),
            num_bigint::BigInt::from(self.base).pow(block.len() as u32),
        )
    }
}

/// Result of a finite count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountResult {
    pub count: u64,
    pub positions_scanned: u64,
}

/// Which AP counting convention a predicate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ApVariant {
    /// Occurrences starting at positions in the progression.
    TypeI,
    /// Occurrences inside the subsequence extracted along the progression.
    TypeII,
}

/// `|C_{b,w}| = w * b^w`.
pub fn cbw_len(b: u64, w: u64) -> BigUint {
    BigUint::from(w) * BigUint::from(b).pow(w as u32)
}

/// Materializes `C_{b,w}`, the lexicographic concatenation of all base-`b`
/// blocks of length `w`.
pub fn concat_lexicographic(b: u64, w: u64, cap: u64) -> Result<Block> {
    if b < 2 || w < 1 {
        return Err(Error::InvalidParameter(format!("C_{{{b},{w}}} needs b >= 2, w >= 1")));
    }
    let len = cbw_len(b, w);
    if len > BigUint::from(cap) {
        return Err(Error::BudgetExceeded {
            requested: len.to_string(),
            cap,
        });
    }
    let len = len.to_usize().expect("bounded by cap");
    let mut out = Vec::with_capacity(len);
    let mut counter = vec![0u64; w as usize];
    loop {
        out.extend_from_slice(&counter);
        // Odometer increment; stops after the all-(b-1) block.
        let mut i = counter.len();
        loop {
            if i == 0 {
                return Ok(Block {
                    digits: out,
                    base_hint: Some(b),
                });
            }
            i -= 1;
            counter[i] += 1;
            if counter[i] < b {
                break;
            }
            counter[i] = 0;
        }
    }
}

/// The `p`-th digit (1-based) of `C_{b,w}` without materializing it.
pub fn cbw_digit_at(b: u64, w: u64, p: &BigUint) -> Result<u64> {
    if b < 2 || w < 1 {
        return Err(Error::InvalidParameter(format!("C_{{{b},{w}}} needs b >= 2, w >= 1")));
    }
    if let Some(p) = p.to_u128() {
        return cbw_digit_at_u128(b, w, p);
    }
    let len = cbw_len(b, w);
    if p.is_zero() || *p > len {
        return Err(Error::OutOfRange {
            position: p.to_string(),
            len: len.to_string(),
        });
    }
    let (block, within) = (p - 1u32).div_rem(&BigUint::from(w));
    let within = within.to_u64().expect("below w");
    let exp = (w - 1 - within) as u32;
    let digit = (block / BigUint::from(b).pow(exp)) % BigUint::from(b);
    Ok(digit.to_u64().expect("below b"))
}

/// Machine-word fast path of [`cbw_digit_at`].
pub fn cbw_digit_at_u128(b: u64, w: u64, p: u128) -> Result<u64> {
    if b < 2 || w < 1 {
        return Err(Error::InvalidParameter(format!("C_{{{b},{w}}} needs b >= 2, w >= 1")));
    }
    let out_of_range = || Error::OutOfRange {
        position: p.to_string(),
        len: cbw_len(b, w).to_string(),
    };
    if p == 0 {
        return Err(out_of_range());
    }
    let block = (p - 1) / w as u128;
    let within = ((p - 1) % w as u128) as u64;
    let exp = w - 1 - within;
    // Block index must be below b^w.
    if let Some(limit) = checked_pow_u128(b, w) {
        if block >= limit {
            return Err(out_of_range());
        }
    }
    match checked_pow_u128(b, exp) {
        Some(scale) => Ok(((block / scale) % b as u128) as u64),
        None => Ok(0),
    }
}

fn checked_pow_u128(b: u64, e: u64) -> Option<u128> {
    let e = u32::try_from(e).ok()?;
    (b as u128).checked_pow(e)
}

fn in_class(p: usize, m: usize, r: usize) -> bool {
    p % m == r
}

fn check_ap(m: u64, r: u64) -> Result<()> {
    if m == 0 || r >= m {
        return Err(Error::InvalidParameter(format!("residue {r} mod {m}")));
    }
    Ok(())
}

/// Counts occurrences of `b` in `y` whose 1-based start position is
/// congruent to `r` mod `m`. `m = 1` gives the plain count.
pub fn count_occurrences(b: &Block, y: &Block, m: u64, r: u64) -> Result<CountResult> {
    if b.is_empty() {
        return Err(Error::EmptyBlock);
    }
    check_ap(m, r)?;
    let (m, r) = (m as usize, r as usize);
    let k = b.len();
    if y.len() < k {
        return Ok(CountResult {
            count: 0,
            positions_scanned: 0,
        });
    }
    let last_start = y.len() - k + 1;
    let mut count = 0;
    let mut scanned = 0;
    for p in 1..=last_start {
        if !in_class(p, m, r) {
            continue;
        }
        scanned += 1;
        if y.digits[p - 1..p - 1 + k] == b.digits[..] {
            count += 1;
        }
    }
    Ok(CountResult {
        count,
        positions_scanned: scanned,
    })
}

/// The digits of `y` at positions congruent to `r` mod `m`, in order.
pub fn extract(y: &Block, m: u64, r: u64) -> Result<Block> {
    check_ap(m, r)?;
    let digits = y
        .digits
        .iter()
        .enumerate()
        .filter(|(i, _)| in_class(i + 1, m as usize, r as usize))
        .map(|(_, &d)| d)
        .collect();
    Ok(Block {
        digits,
        base_hint: y.base_hint,
    })
}

/// Type II count: occurrences of `b` inside the subsequence of `y` taken at
/// positions congruent to `r` mod `m`.
pub fn count_occurrences_extracted(b: &Block, y: &Block, m: u64, r: u64) -> Result<CountResult> {
    if b.is_empty() {
        return Err(Error::EmptyBlock);
    }
    let sub = extract(y, m, r)?;
    count_occurrences(b, &sub, 1, 0)
}

/// Histogram of all length-`k` windows of `digits` (base `b`) whose start
/// satisfies `keep`, indexed by the block's base-`b` code.
fn window_histogram(digits: &[u64], b: u64, k: usize, keep: impl Fn(usize) -> bool) -> Vec<u64> {
    let size = (b as usize).pow(k as u32);
    let mut hist = vec![0u64; size];
    if digits.len() < k {
        return hist;
    }
    let top = size / b as usize;
    let mut code = 0usize;
    for (i, &d) in digits.iter().enumerate() {
        if i >= k {
            code %= top.max(1);
        }
        code = if k == 0 { 0 } else { code * b as usize + d as usize };
        if i + 1 >= k {
            let start = i + 2 - k;
            if keep(start) {
                hist[code] += 1;
            }
        }
    }
    hist
}

fn check_base(y: &Block, b: u64) -> Result<()> {
    if let Some(d) = y.digits.iter().find(|&&d| d >= b) {
        return Err(Error::InvalidParameter(format!(
            "digit {d} is not below measure base {b}"
        )));
    }
    Ok(())
}

fn histogram_guard(b: u64, k: u64) -> Result<()> {
    match b.checked_pow(k as u32) {
        Some(n) if n <= 1 << 24 => Ok(()),
        _ => Err(Error::Guard(format!("{b}^{k} block histogram"))),
    }
}

/// True when `lo_factor <= count * b^k / expected <= hi_factor` for every bin,
/// where the admissible interval is `expected * b^{-k} * (1 ± eps)`.
fn histogram_within(hist: &[u64], b: u64, k: usize, expected: &BigRational, eps: &BigRational) -> bool {
    let scale = BigRational::from_integer(num_bigint::BigInt::from(b).pow(k as u32));
    let lo = expected * (BigRational::one() - eps);
    let hi = expected * (BigRational::one() + eps);
    hist.iter().all(|&c| {
        let scaled = BigRational::from_integer(c.into()) * &scale;
        scaled >= lo && scaled <= hi
    })
}

/// Whether `y` is `(eps, k, mu)`-normal: every block of length at most `k`
/// in base `mu.base` occurs `|Y| mu(B) (1 ± eps)` times.
pub fn is_normal_block(y: &Block, eps: &BigRational, k: u64, mu: UniformMeasure) -> Result<bool> {
    if y.is_empty() {
        return Err(Error::InvalidParameter("normality of an empty block".into()));
    }
    check_base(y, mu.base)?;
    histogram_guard(mu.base, k)?;
    let expected = BigRational::from_integer((y.len() as u64).into());
    for kk in 1..=k as usize {
        let hist = window_histogram(&y.digits, mu.base, kk, |_| true);
        if !histogram_within(&hist, mu.base, kk, &expected, eps) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Whether `y` is `(eps, k, m, mu)`-normal of the given type: for every block
/// length `k' <= k`, modulus `m' <= m` and residue `r < m'`, each count lies in
/// `mu(B) ceil((|Y| - r) / m') (1 ± eps)`.
pub fn is_normal_block_ap(
    y: &Block,
    eps: &BigRational,
    k: u64,
    m: u64,
    mu: UniformMeasure,
    variant: ApVariant,
) -> Result<bool> {
    if y.is_empty() {
        return Err(Error::InvalidParameter("normality of an empty block".into()));
    }
    if k == 0 || m == 0 {
        return Err(Error::InvalidParameter("k and m must be positive".into()));
    }
    check_base(y, mu.base)?;
    histogram_guard(mu.base, k)?;
    let n = y.len() as u64;
    for mm in 1..=m {
        for r in 0..mm {
            let expected =
                BigRational::from_integer(n.saturating_sub(r).div_ceil(mm).into());
            let sub;
            let (digits, keep_class): (&[u64], bool) = match variant {
                ApVariant::TypeI => (&y.digits, true),
                ApVariant::TypeII => {
                    sub = extract(y, mm, r)?;
                    (&sub.digits, false)
                }
            };
            for kk in 1..=k as usize {
                let hist = if keep_class {
                    window_histogram(digits, mu.base, kk, |p| in_class(p, mm as usize, r as usize))
                } else {
                    window_histogram(digits, mu.base, kk, |_| true)
                };
                if !histogram_within(&hist, mu.base, kk, &expected, eps) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Lower and upper count bounds for `C_{b,w}` along `A_{m,r}`: `lo_i`/`hi_i`
/// bound the type I count and `lo_ii`/`hi_ii` the type II count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountBounds {
    pub lo_i: BigRational,
    pub hi_i: BigRational,
    pub lo_ii: BigRational,
    pub hi_ii: BigRational,
}

fn pow_signed(b: u64, e: i64) -> BigRational {
    let p = BigRational::from_integer(num_bigint::BigInt::from(b).pow(e.unsigned_abs() as u32));
    if e >= 0 {
        p
    } else {
        p.recip()
    }
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

/// Count bounds for blocks of length `k` in `C_{b,w}` along `A_{m,r}`.
/// Negative lower bounds are clamped to zero.
pub fn cbw_count_bounds(b: u64, w: u64, m: u64, r: u64, k: u64) -> CountBounds {
    let (w, m, r, k) = (w as i64, m as i64, r as i64, k as i64);
    let scale = pow_signed(b, w - k);
    let zero = BigRational::zero();
    let lo_i = (rat(Integer::div_floor(&(w - k + 1), &m)) * &scale).max(zero.clone());
    let hi_i = (BigRational::new((w + 2 * m).into(), m.into())) * &scale;
    let lo_ii = (rat(Integer::div_floor(&(w - r), &m) - k + 1) * &scale).max(zero);
    let hi_ii = rat(Integer::div_ceil(&(w - r), &m)) * &scale;
    CountBounds {
        lo_i,
        hi_i,
        lo_ii,
        hi_ii,
    }
}

/// Outcome of checking the count bounds exhaustively over one grid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BoundsReport {
    pub checked: u64,
    pub violations: Vec<String>,
    /// Cases where a type I count equals its strict upper bound.
    pub equal_hi_i: u64,
    /// Cases where a type II count equals its upper bound.
    pub equal_hi_ii: u64,
}

/// Checks every block of length `k <= max_k` against [`cbw_count_bounds`]
/// on `C_{b,w}` for all `m <= max_m`, `r < m`. The type I upper bound is
/// strict; the type II upper bound is checked as `<=` and equality cases are
/// tallied.
pub fn check_count_bounds(b: u64, w: u64, max_m: u64, max_k: u64) -> Result<BoundsReport> {
    let y = concat_lexicographic(b, w, DEFAULT_MATERIALIZATION_CAP)?;
    let mut report = BoundsReport::default();
    for m in 1..=max_m {
        for r in 0..m {
            let sub = extract(&y, m, r)?;
            for k in 1..=max_k {
                let bounds = cbw_count_bounds(b, w, m, r, k);
                let h1 = window_histogram(&y.digits, b, k as usize, |p| {
                    in_class(p, m as usize, r as usize)
                });
                let h2 = window_histogram(&sub.digits, b, k as usize, |_| true);
                for (code, (&c1, &c2)) in h1.iter().zip(&h2).enumerate() {
                    report.checked += 1;
                    let (c1r, c2r) = (rat(c1 as i64), rat(c2 as i64));
                    let label = || format!("b={b} w={w} m={m} r={r} k={k} block#{code}");
                    if c1r < bounds.lo_i || c1r > bounds.hi_i {
                        report.violations.push(format!("type I {} count {c1}", label()));
                    } else if c1r == bounds.hi_i {
                        report.equal_hi_i += 1;
                        report.violations.push(format!("type I {} hits strict bound {c1}", label()));
                    }
                    if c2r < bounds.lo_ii || c2r > bounds.hi_ii {
                        report.violations.push(format!("type II {} count {c2}", label()));
                    } else if c2r == bounds.hi_ii {
                        report.equal_hi_ii += 1;
                    }
                }
            }
        }
    }
    Ok(report)
}
