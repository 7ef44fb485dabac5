//! Basic sequences `Q = (q_n)` and the divergence sums `Q_n^{(k)}` and
//! `Q_{n,m,r}^{(k)}`.
//!
//! Every rule is random access: constants and explicit lists directly,
//! Γ through the schedule's cumulative lengths, Ξ residue by residue and Λ
//! through its index stream. Cursors give cheap sequential access.

use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::schedule::{ConstructionSchedule, SegmentWalker, Tuple};

/// Exact factors materialized by the exact-rational sums.
pub const EXACT_GUARD: u64 = 100_000;

/// A base value `mantissa * 2^shift`. Ξ produces `2^n p_n`, which never fits
/// a machine word for large `n`; this keeps it exact without materializing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Radix {
    pub mantissa: u64,
    pub shift: u64,
}

impl Radix {
    pub const fn small(v: u64) -> Self {
        Radix {
            mantissa: v,
            shift: 0,
        }
    }

    pub fn to_u64(self) -> Option<u64> {
        if self.shift >= 64 {
            return (self.mantissa == 0).then_some(0);
        }
        let v = self.mantissa.checked_shl(self.shift as u32)?;
        (v >> self.shift == self.mantissa).then_some(v)
    }

    pub fn to_biguint(self) -> BigUint {
        BigUint::from(self.mantissa) << self.shift
    }

    pub fn is_valid_base(self) -> bool {
        self.mantissa >= 2 || (self.mantissa == 1 && self.shift >= 1)
    }

    /// `log2` of the value.
    pub fn log2(self) -> f64 {
        (self.mantissa as f64).log2() + self.shift as f64
    }

    /// `1/q` in double precision; 0 on underflow.
    pub fn recip_f64(self) -> f64 {
        scale_pow2(1.0 / self.mantissa as f64, self.shift)
    }

    /// `min(digit, q - 1)`.
    pub fn clamp_digit(self, digit: u64) -> u64 {
        match self.to_u64() {
            Some(q) => digit.min(q - 1),
            None => digit,
        }
    }

    /// Whether `digit <= q - 1`.
    pub fn admits(self, digit: u64) -> bool {
        self.to_u64().is_none_or(|q| digit < q)
    }

    /// Whether `digit == q - 1`.
    pub fn is_top_digit(self, digit: u64) -> bool {
        self.to_u64().is_some_and(|q| digit == q - 1)
    }
}

impl fmt::Display for Radix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_u64() {
            Some(v) => write!(f, "{v}"),
            None => write!(f, "{}*2^{}", self.mantissa, self.shift),
        }
    }
}

fn scale_pow2(x: f64, shift: u64) -> f64 {
    if shift > 2200 {
        return 0.0;
    }
    let mut v = x;
    let mut s = shift as i32;
    while s > 0 {
        let step = s.min(1000);
        v *= 2f64.powi(-step);
        s -= step;
    }
    v
}

/// `1/(q_1 ... q_k)` in double precision, with the exponent accumulated
/// separately so that only the final value can underflow.
pub fn recip_product(terms: &[Radix]) -> f64 {
    recip_product_iter(terms.iter().copied())
}

fn recip_product_iter(terms: impl Iterator<Item = Radix>) -> f64 {
    let mut mant = 1.0f64;
    let mut shift = 0u64;
    for t in terms {
        mant /= t.mantissa as f64;
        shift = shift.saturating_add(t.shift);
    }
    scale_pow2(mant, shift)
}

/// `1/(q_1 ... q_k)` exactly.
pub fn recip_product_exact(terms: &[Radix]) -> BigRational {
    let den = terms.iter().fold(BigUint::one(), |acc, t| acc * t.to_biguint());
    BigRational::new(BigInt::one(), BigInt::from(den))
}

/// Positions `{r, r+m, ...}`, or `{m, 2m, ...}` when `r = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ArithmeticProgression {
    pub m: u64,
    pub r: u64,
}

impl ArithmeticProgression {
    pub fn new(m: u64, r: u64) -> Result<Self> {
        if m == 0 || r >= m {
            return Err(Error::InvalidParameter(format!("residue {r} mod {m}")));
        }
        Ok(ArithmeticProgression { m, r })
    }

    pub const fn identity() -> Self {
        ArithmeticProgression { m: 1, r: 0 }
    }

    /// The `t`-th position (1-based `t`).
    pub fn position(&self, t: u64) -> u64 {
        if self.r == 0 {
            self.m * t
        } else {
            self.r + self.m * (t - 1)
        }
    }

    pub fn contains(&self, p: u64) -> bool {
        p % self.m == self.r
    }

    /// Number of positions `<= n`.
    pub fn count_upto(&self, n: u64) -> u64 {
        if self.r == 0 {
            n / self.m
        } else if n < self.r {
            0
        } else {
            (n - self.r) / self.m + 1
        }
    }
}

/// A strictly increasing index stream `M = (m_t)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndexStream {
    Ap(ArithmeticProgression),
    Explicit(Arc<Vec<u64>>),
}

impl IndexStream {
    pub fn identity() -> Self {
        IndexStream::Ap(ArithmeticProgression::identity())
    }

    pub fn explicit(indices: Vec<u64>) -> Result<Self> {
        if indices.first() == Some(&0) || indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::NonMonotone);
        }
        Ok(IndexStream::Explicit(Arc::new(indices)))
    }

    /// `m_t` for 1-based `t`.
    pub fn at(&self, t: u64) -> Result<u64> {
        if t == 0 {
            return Err(Error::InvalidParameter("index streams are 1-based".into()));
        }
        match self {
            IndexStream::Ap(ap) => Ok(ap.position(t)),
            IndexStream::Explicit(v) => v
                .get(t as usize - 1)
                .copied()
                .ok_or_else(|| Error::ScheduleExhausted(format!("index stream entry {t}"))),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, IndexStream::Ap(ap) if ap.m == 1)
    }
}

/// Ξ(P, c, d): `ξ_n = max(2, p_n / c_j)` when `n ≡ j (mod d)` with `j < t`,
/// `ξ_n = 2^n p_n` otherwise.
#[derive(Debug, Clone)]
pub struct XiTransform {
    pub p: BasicSequence,
    pub c: Vec<Ratio<u64>>,
    pub d: u64,
}

impl XiTransform {
    pub fn t(&self) -> u64 {
        self.c.len() as u64
    }

    fn at(&self, n: u64) -> Result<Radix> {
        let p = self.p.q_at(n)?;
        let j = (n % self.d) as usize;
        match self.c.get(j) {
            Some(c) => {
                let pn = p.to_u64().ok_or_else(|| {
                    Error::Divisibility(format!("p_{n} = {p} is too large to rescale"))
                })?;
                let (alpha, beta) = (*c.numer(), *c.denom());
                if pn % alpha != 0 {
                    return Err(Error::Divisibility(format!("alpha_{j} = {alpha} does not divide p_{n} = {pn}")));
                }
                let v = (pn / alpha)
                    .checked_mul(beta)
                    .ok_or(Error::Overflow)?;
                Ok(Radix::small(v.max(2)))
            }
            None => Ok(Radix {
                mantissa: p.mantissa,
                shift: p.shift.checked_add(n).ok_or(Error::Overflow)?,
            }),
        }
    }
}

/// The rule behind a basic sequence.
#[derive(Debug, Clone)]
pub enum Rule {
    Constant(u64),
    /// `prefix` followed by `period` repeated forever; empty `period`
    /// makes the sequence finite.
    Explicit { prefix: Vec<u64>, period: Vec<u64> },
    Gamma(Arc<ConstructionSchedule>),
    Xi(XiTransform),
    Lambda { base: BasicSequence, index: IndexStream },
}

/// A lazily evaluated basic sequence (`q_n >= 2`). Cheap to clone and safe
/// to share between threads.
#[derive(Debug, Clone)]
pub struct BasicSequence(Arc<Rule>);

impl BasicSequence {
    pub fn constant(b: u64) -> Result<Self> {
        if b < 2 {
            return Err(Error::InvalidBase { n: 1, value: b.to_string() });
        }
        Ok(BasicSequence(Arc::new(Rule::Constant(b))))
    }

    pub fn explicit(prefix: Vec<u64>, period: Vec<u64>) -> Result<Self> {
        if prefix.is_empty() && period.is_empty() {
            return Err(Error::InvalidParameter("explicit sequence is empty".into()));
        }
        if let Some((i, &v)) = prefix.iter().chain(&period).enumerate().find(|(_, &v)| v < 2) {
            return Err(Error::InvalidBase { n: i as u64 + 1, value: v.to_string() });
        }
        Ok(BasicSequence(Arc::new(Rule::Explicit { prefix, period })))
    }

    /// Γ(W, X): `γ_n = b_i` for `L_{i-1} < n <= L_i`.
    pub fn gamma(schedule: Arc<ConstructionSchedule>) -> Self {
        BasicSequence(Arc::new(Rule::Gamma(schedule)))
    }

    /// Ξ(P, c, d). Requires `d >= t = |c|` and positive `c_j`; divisibility
    /// `α_j | p_n` is checked when `ξ_n` is accessed.
    pub fn xi_transform(p: BasicSequence, c: Vec<Ratio<u64>>, d: u64) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::InvalidParameter("Xi needs at least one coefficient".into()));
        }
        if c.iter().any(|c| c.is_zero()) {
            return Err(Error::InvalidParameter("Xi coefficients must be positive".into()));
        }
        if d < c.len() as u64 {
            return Err(Error::InvalidParameter(format!("Xi needs d >= t, got d = {d}, t = {}", c.len())));
        }
        Ok(BasicSequence(Arc::new(Rule::Xi(XiTransform { p, c, d }))))
    }

    /// Λ_M(Q) = `(q_{m_t})`.
    pub fn lambda_subsequence(q: BasicSequence, index: IndexStream) -> Self {
        if index.is_identity() {
            return q;
        }
        if let Rule::Constant(_) = q.rule() {
            return q;
        }
        BasicSequence(Arc::new(Rule::Lambda { base: q, index }))
    }

    pub fn rule(&self) -> &Rule {
        &self.0
    }

    /// `q_n` for 1-based `n`.
    pub fn q_at(&self, n: u64) -> Result<Radix> {
        if n == 0 {
            return Err(Error::InvalidParameter("sequences are 1-based".into()));
        }
        let v = match self.rule() {
            Rule::Constant(b) => Radix::small(*b),
            Rule::Explicit { prefix, period } => Radix::small(periodic_at(prefix, period, n)?),
            Rule::Gamma(s) => {
                let (i, _) = s.locate(&BigUint::from(n))?;
                Radix::small(s.tuple(i)?.b)
            }
            Rule::Xi(x) => x.at(n)?,
            Rule::Lambda { base, index } => base.q_at(index.at(n)?)?,
        };
        if !v.is_valid_base() {
            return Err(Error::InvalidBase { n, value: v.to_string() });
        }
        Ok(v)
    }

    /// `q_n` at an arbitrary-width position. Constant, explicit and Γ rules
    /// answer directly; the others need `n` to fit a machine word.
    pub fn q_at_big(&self, n: &BigUint) -> Result<Radix> {
        if let Some(n) = n.to_u64() {
            return self.q_at(n);
        }
        match self.rule() {
            Rule::Constant(b) => Ok(Radix::small(*b)),
            Rule::Explicit { prefix, period } if !period.is_empty() => {
                let idx = (n - BigUint::from(prefix.len() + 1)) % BigUint::from(period.len());
                Ok(Radix::small(period[idx.to_usize().expect("below period")]))
            }
            Rule::Gamma(s) => {
                let (i, _) = s.locate(n)?;
                Ok(Radix::small(s.tuple(i)?.b))
            }
            _ => Err(Error::Guard(format!("random access at {n} needs a machine-word position"))),
        }
    }

    /// Sequential access starting at `q_start`.
    pub fn cursor(&self, start: u64) -> Result<SeqCursor> {
        if start == 0 {
            return Err(Error::InvalidParameter("sequences are 1-based".into()));
        }
        match self.rule() {
            Rule::Gamma(s) => {
                let (i, offset) = s.locate(&BigUint::from(start))?;
                let t = s.tuple(i)?;
                let left = (t.segment_len() - offset).to_u64().unwrap_or(u64::MAX);
                Ok(SeqCursor::Gamma {
                    walker: SegmentWalker::starting_at(s.clone(), i + 1),
                    current: t,
                    left,
                })
            }
            _ => Ok(SeqCursor::Direct { seq: self.clone(), n: start }),
        }
    }

    /// Eventually periodic form `(prefix, period)` when the rule is known to
    /// be periodic.
    pub fn as_periodic(&self) -> Option<(Vec<u64>, Vec<u64>)> {
        match self.rule() {
            Rule::Constant(b) => Some((Vec::new(), vec![*b])),
            Rule::Explicit { prefix, period } if !period.is_empty() => Some((prefix.clone(), period.clone())),
            Rule::Lambda { base, index: IndexStream::Ap(ap) } => {
                let (prefix, period) = base.as_periodic()?;
                let (pre, per) = periodic_extract(&prefix, &period, *ap);
                Some((pre, per))
            }
            _ => None,
        }
    }

    /// Whether the sequence is finite (an explicit list without period).
    pub fn is_finite(&self) -> bool {
        matches!(self.rule(), Rule::Explicit { period, .. } if period.is_empty())
    }
}

fn periodic_at(prefix: &[u64], period: &[u64], n: u64) -> Result<u64> {
    let i = (n - 1) as usize;
    if let Some(&v) = prefix.get(i) {
        return Ok(v);
    }
    if period.is_empty() {
        return Err(Error::ScheduleExhausted(format!("explicit sequence at {n}")));
    }
    Ok(period[(i - prefix.len()) % period.len()])
}

/// Extracts an eventually periodic list along an arithmetic progression;
/// the result is again eventually periodic.
pub fn periodic_extract(prefix: &[u64], period: &[u64], ap: ArithmeticProgression) -> (Vec<u64>, Vec<u64>) {
    // After the prefix, values repeat with period lcm(|period|, m) in
    // position, i.e. every lcm/m extracted entries.
    let cycle = (period.len() as u64).lcm(&ap.m) / ap.m;
    let pre_len = ap.count_upto(prefix.len() as u64);
    let at = |t: u64| periodic_at(prefix, period, ap.position(t)).expect("periodic");
    let pre = (1..=pre_len).map(at).collect();
    let per = (pre_len + 1..=pre_len + cycle).map(at).collect();
    (pre, per)
}

/// Sequential reader over a basic sequence.
pub enum SeqCursor {
    Gamma {
        walker: SegmentWalker,
        current: Arc<Tuple>,
        left: u64,
    },
    Direct { seq: BasicSequence, n: u64 },
}

impl SeqCursor {
    pub fn next_q(&mut self) -> Result<Radix> {
        match self {
            SeqCursor::Gamma { walker, current, left } => {
                if *left == 0 {
                    let (_, t, len) = walker.next_segment()?;
                    *current = t;
                    *left = len;
                }
                *left -= 1;
                Ok(Radix::small(current.b))
            }
            SeqCursor::Direct { seq, n } => {
                let v = seq.q_at(*n)?;
                *n += 1;
                Ok(v)
            }
        }
    }
}

/// Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// A floating divergence partial sum with its underflow accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PartialSum {
    pub value: f64,
    /// Terms that underflowed to zero.
    pub underflowed: u64,
    /// Upper bound on the total mass of the underflowed terms.
    pub neglected_bound: f64,
}

/// Running sum of reciprocal `k`-products over selected start positions,
/// fed one `q` at a time.
#[derive(Debug, Clone)]
pub struct ProductSumAccumulator {
    k: usize,
    window: std::collections::VecDeque<Radix>,
    sum: CompensatedSum,
    underflowed: u64,
}

impl ProductSumAccumulator {
    pub fn new(k: usize) -> Self {
        ProductSumAccumulator {
            k,
            window: std::collections::VecDeque::with_capacity(k + 1),
            sum: CompensatedSum::default(),
            underflowed: 0,
        }
    }

    /// Feeds `q_e`; once `k` values are buffered, the product starting at
    /// `e - k + 1` is added when `take_start` is true.
    pub fn push(&mut self, q: Radix, take_start: impl FnOnce(usize) -> bool, e: usize) {
        self.window.push_back(q);
        if self.window.len() > self.k {
            self.window.pop_front();
        }
        if self.window.len() == self.k && take_start(e + 1 - self.k) {
            let v = recip_product_iter(self.window.iter().copied());
            if v == 0.0 {
                self.underflowed += 1;
            }
            self.sum.add(v);
        }
    }

    pub fn current(&self) -> PartialSum {
        PartialSum {
            value: self.sum.value(),
            underflowed: self.underflowed,
            neglected_bound: self.underflowed as f64 * f64::MIN_POSITIVE,
        }
    }
}

/// Terms `j` with `start(j)` over `1..=n`: `Σ 1/(q_j ... q_{j+k-1})`.
fn product_sum(q: &BasicSequence, n: u64, k: u64, keep: impl Fn(u64) -> bool) -> Result<PartialSum> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if n == 0 {
        return Ok(PartialSum::default());
    }
    let mut cur = q.cursor(1)?;
    let mut acc = ProductSumAccumulator::new(k as usize);
    for e in 1..=n + k - 1 {
        let qe = cur.next_q()?;
        acc.push(qe, |s| s as u64 <= n && keep(s as u64), e as usize);
    }
    Ok(acc.current())
}

fn product_sum_exact(q: &BasicSequence, n: u64, k: u64, keep: impl Fn(u64) -> bool) -> Result<BigRational> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if n.saturating_mul(k) > EXACT_GUARD {
        return Err(Error::Guard(format!("exact sum over {n} terms of order {k}")));
    }
    let qs = (1..n + k).map(|i| q.q_at(i)).collect::<Result<Vec<_>>>()?;
    let mut total = BigRational::zero();
    for j in 1..=n {
        if keep(j) {
            total += recip_product_exact(&qs[(j - 1) as usize..(j - 1 + k) as usize]);
        }
    }
    Ok(total)
}

/// `Q_n^{(k)} = Σ_{j=1}^n 1/(q_j ... q_{j+k-1})`, compensated.
pub fn qnk_partial(q: &BasicSequence, n: u64, k: u64) -> Result<PartialSum> {
    product_sum(q, n, k, |_| true)
}

/// Exact `Q_n^{(k)}` for small `n`.
pub fn qnk_partial_exact(q: &BasicSequence, n: u64, k: u64) -> Result<BigRational> {
    product_sum_exact(q, n, k, |_| true)
}

/// `Q_{n,m,r}^{(k)}`: the sum over start positions `mj + r <= n`, skipping
/// the undefined start 0 when `r = 0`.
pub fn qnk_ap_partial(q: &BasicSequence, n: u64, k: u64, m: u64, r: u64) -> Result<PartialSum> {
    let ap = ArithmeticProgression::new(m, r)?;
    product_sum(q, n, k, |j| ap.contains(j))
}

/// Exact `Q_{n,m,r}^{(k)}` for small `n`.
pub fn qnk_ap_partial_exact(q: &BasicSequence, n: u64, k: u64, m: u64, r: u64) -> Result<BigRational> {
    let ap = ArithmeticProgression::new(m, r)?;
    product_sum_exact(q, n, k, |j| ap.contains(j))
}

/// Which divergence sum a probe follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProbeVariant {
    /// `Q_{n,m,r}^{(k)}` at original positions `n`.
    TypeI,
    /// `(Λ_{A_{m,r}}(Q))_n^{(k)}` at extracted indices `n`.
    TypeII,
}

/// Partial sums at each checkpoint; the caller judges the divergence trend.
pub fn divergence_probe(
    q: &BasicSequence,
    k: u64,
    m: u64,
    r: u64,
    variant: ProbeVariant,
    checkpoints: &[u64],
) -> Result<Vec<(u64, PartialSum)>> {
    let ap = ArithmeticProgression::new(m, r)?;
    let seq = match variant {
        ProbeVariant::TypeI => q.clone(),
        ProbeVariant::TypeII => BasicSequence::lambda_subsequence(q.clone(), IndexStream::Ap(ap)),
    };
    let mut cps: Vec<u64> = checkpoints.to_vec();
    cps.sort_unstable();
    cps.dedup();
    let Some(&last) = cps.last() else { return Ok(Vec::new()) };
    let keep = |j: u64| variant == ProbeVariant::TypeII || ap.contains(j);
    let mut cur = seq.cursor(1)?;
    let mut acc = ProductSumAccumulator::new(k as usize);
    let mut out = Vec::with_capacity(cps.len());
    let mut next = 0;
    for e in 1..=last + k - 1 {
        acc.push(cur.next_q()?, |s| keep(s as u64), e as usize);
        // Start positions up to e - k + 1 are complete.
        while next < cps.len() && cps[next] + k - 1 == e {
            out.push((cps[next], acc.current()));
            next += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alt32() -> BasicSequence {
        BasicSequence::explicit(vec![], vec![3, 2]).unwrap()
    }

    #[test]
    fn radix_basics() {
        assert_eq!(Radix { mantissa: 6, shift: 3 }.to_u64(), Some(48));
        assert_eq!(Radix { mantissa: 3, shift: 70 }.to_u64(), None);
        assert_eq!(Radix { mantissa: 3, shift: 70 }.to_biguint(), BigUint::from(3u32) << 70);
        assert_eq!(Radix { mantissa: 1, shift: 5000 }.recip_f64(), 0.0);
        assert!((Radix { mantissa: 3, shift: 1000 }.recip_f64() - 2f64.powi(-1000) / 3.0).abs() < 1e-310);
        assert_eq!(Radix { mantissa: 3, shift: 70 }.clamp_digit(u64::MAX), u64::MAX);
        assert_eq!(Radix::small(3).clamp_digit(7), 2);
    }

    #[test]
    fn constant_and_explicit() {
        let c = BasicSequence::constant(5).unwrap();
        assert_eq!(c.q_at(1_000_000_000).unwrap(), Radix::small(5));
        assert!(BasicSequence::constant(1).is_err());
        let a = alt32();
        assert_eq!((1..=4).map(|n| a.q_at(n).unwrap().mantissa).collect::<Vec<_>>(), vec![3, 2, 3, 2]);
        let big = BigUint::from(10u32).pow(30) + 1u32;
        assert_eq!(a.q_at_big(&big).unwrap(), Radix::small(3));
    }

    #[test]
    fn xi_example() {
        let p = BasicSequence::constant(6).unwrap();
        let c = vec![Ratio::from_integer(2), Ratio::from_integer(1), Ratio::from_integer(2)];
        let xi = BasicSequence::xi_transform(p, c, 4).unwrap();
        let v: Vec<u64> = (1..=4).map(|n| xi.q_at(n).unwrap().to_u64().unwrap()).collect();
        assert_eq!(v, vec![6, 3, 48, 3]);
        assert_eq!(xi.q_at(4003).unwrap(), Radix { mantissa: 6, shift: 4003 });
    }

    #[test]
    fn xi_divisibility_is_checked_lazily() {
        let p = BasicSequence::explicit(vec![6, 5], vec![6]).unwrap();
        let xi = BasicSequence::xi_transform(p, vec![Ratio::from_integer(2)], 3).unwrap();
        assert!(xi.q_at(1).is_ok());
        assert!(xi.q_at(3).is_ok());
        let p = BasicSequence::explicit(vec![], vec![5]).unwrap();
        let xi = BasicSequence::xi_transform(p, vec![Ratio::from_integer(2)], 2).unwrap();
        assert!(matches!(xi.q_at(2), Err(Error::Divisibility(_))));
        let p = BasicSequence::constant(6).unwrap();
        assert!(BasicSequence::xi_transform(p, vec![Ratio::from_integer(1); 3], 2).is_err());
    }

    #[test]
    fn lambda_commutes_with_indexing() {
        let a = alt32();
        let odd = BasicSequence::lambda_subsequence(a.clone(), IndexStream::Ap(ArithmeticProgression::new(2, 1).unwrap()));
        assert!((1..10).all(|t| odd.q_at(t).unwrap() == Radix::small(3)));
        let even = BasicSequence::lambda_subsequence(a.clone(), IndexStream::Ap(ArithmeticProgression::new(2, 0).unwrap()));
        assert!((1..10).all(|t| even.q_at(t).unwrap() == Radix::small(2)));
        assert_eq!(odd.as_periodic(), Some((vec![], vec![3])));
        assert!(IndexStream::explicit(vec![1, 3, 3]).is_err());
    }

    #[test]
    fn partial_sum_examples() {
        let c2 = BasicSequence::constant(2).unwrap();
        assert_eq!(qnk_partial(&c2, 4, 1).unwrap().value, 2.0);
        assert_eq!(qnk_partial(&c2, 0, 3).unwrap().value, 0.0);
        let a = alt32();
        assert_eq!(qnk_partial_exact(&a, 4, 1).unwrap(), BigRational::new(5.into(), 3.into()));
        assert_eq!(qnk_ap_partial_exact(&a, 5, 1, 2, 1).unwrap(), BigRational::one());
        assert!((qnk_ap_partial(&c2, 5, 2, 2, 1).unwrap().value - 0.75).abs() < 1e-15);
        assert_eq!(qnk_partial_exact(&c2, 0, 2).unwrap(), BigRational::zero());
    }

    #[test]
    fn probe_tracks_underflow() {
        let p = BasicSequence::constant(6).unwrap();
        let xi = BasicSequence::xi_transform(p, vec![Ratio::from_integer(1); 3], 3).unwrap();
        let out = divergence_probe(&xi, 1, 1, 0, ProbeVariant::TypeI, &[10, 3000]).unwrap();
        assert!((out[0].1.value - 10.0 / 6.0).abs() < 1e-12);
        assert_eq!(out[1].1.underflowed, 0);
        let p = BasicSequence::constant(6).unwrap();
        let xi = BasicSequence::xi_transform(p, vec![Ratio::from_integer(1); 3], 4).unwrap();
        let out = divergence_probe(&xi, 1, 1, 0, ProbeVariant::TypeI, &[3000]).unwrap();
        assert!(out[0].1.underflowed > 0);
        assert!(out[0].1.neglected_bound > 0.0);
    }
}
