//! Block friendly families: tuple streams `(l_i, b_i, v_i, ε_i, k_i, μ_i, m_i)`
//! with a block rule `X_i`, and the cumulative lengths `L_i = Σ l_j |X_j|`.

use std::sync::{Arc, RwLock};

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::blocks::{cbw_digit_at, cbw_len, concat_lexicographic, Block, UniformMeasure};
use crate::error::{Error, Result};

/// Tuples searched before a schedule is declared exhausted.
const MAX_TUPLES: usize = 100_000;

/// How the block `X_i` is described.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum BlockRule {
    Explicit(Block),
    /// `C_{b,w}`, accessed by position without materializing it.
    Cbw { b: u64, w: u64 },
}

impl BlockRule {
    pub fn len(&self) -> BigUint {
        match self {
            BlockRule::Explicit(b) => BigUint::from(b.len()),
            BlockRule::Cbw { b, w } => cbw_len(*b, *w),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len().is_zero()
    }

    /// Digit at 0-based `offset` inside one copy of the block.
    pub fn digit_at(&self, offset: &BigUint) -> Result<u64> {
        match self {
            BlockRule::Explicit(b) => offset
                .to_usize()
                .and_then(|o| b.digits().get(o).copied())
                .ok_or_else(|| Error::OutOfRange {
                    position: (offset + 1u32).to_string(),
                    len: b.len().to_string(),
                }),
            BlockRule::Cbw { b, w } => cbw_digit_at(*b, *w, &(offset + 1u32)),
        }
    }

    pub fn materialize(&self, cap: u64) -> Result<Block> {
        match self {
            BlockRule::Explicit(b) => Ok(b.clone()),
            BlockRule::Cbw { b, w } => concat_lexicographic(*b, *w, cap),
        }
    }
}

/// One schedule entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Tuple {
    #[serde(serialize_with = "ser_display")]
    pub l: BigUint,
    pub b: u64,
    pub v: u64,
    #[serde(serialize_with = "ser_display")]
    pub eps: BigRational,
    pub k: u64,
    pub mu: UniformMeasure,
    pub m: u64,
    pub block: BlockRule,
}

fn ser_display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl Tuple {
    /// A tuple whose statistics fields follow `b` (`v = b`, `μ = λ_b`).
    pub fn simple(l: impl Into<BigUint>, b: u64, block: BlockRule, eps: BigRational, k: u64, m: u64) -> Result<Self> {
        Ok(Tuple {
            l: l.into(),
            b,
            v: b,
            eps,
            k,
            mu: UniformMeasure::new(b)?,
            m,
            block,
        })
    }

    /// `l_i |X_i|`.
    pub fn segment_len(&self) -> BigUint {
        &self.l * self.block.len()
    }
}

/// Tuples appended after an explicit list: `b_i` grows arithmetically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TailRule {
    pub b0: u64,
    pub b_step: u64,
    pub l: u64,
    pub block: Block,
}

/// Desk-scale growth knobs: `b_i = b0 + (i-1) b_step`, `X_i = C_{b_i, w_i}`
/// with `w_i` taken from `widths` (last entry repeats), and
/// `l_i = ceil(first_segment * growth^(i-1) / |X_i|)` unless overridden.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScaledProfile {
    pub b0: u64,
    pub b_step: u64,
    pub widths: Vec<u64>,
    pub first_segment: u64,
    pub growth: u64,
    pub reps_override: Vec<u64>,
}

impl Default for ScaledProfile {
    fn default() -> Self {
        ScaledProfile {
            b0: 2,
            b_step: 1,
            widths: vec![2, 4],
            first_segment: 400,
            growth: 4,
            reps_override: Vec::new(),
        }
    }
}

impl ScaledProfile {
    pub fn width(&self, i: usize) -> u64 {
        *self
            .widths
            .get(i - 1)
            .or(self.widths.last())
            .expect("profile has at least one width")
    }

    pub fn tuple(&self, i: usize) -> Result<Tuple> {
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::InvalidParameter("profile widths must be positive".into()));
        }
        let b = self.b0 + (i as u64 - 1) * self.b_step;
        let w = self.width(i);
        let block = BlockRule::Cbw { b, w };
        let l = match self.reps_override.get(i - 1) {
            Some(&l) => BigUint::from(l),
            None => {
                let target = BigUint::from(self.first_segment) * BigUint::from(self.growth).pow(i as u32 - 1);
                Integer::div_ceil(&target, &block.len())
            }
        };
        let k = (w - 1).max(1);
        Tuple::simple(l, b, block, BigRational::new(1.into(), (i as u64 + 1).into()), k, largest_factorial_divisor(w))
    }
}

/// Largest `M <= w` with `M! | w`.
pub fn largest_factorial_divisor(w: u64) -> u64 {
    let mut fact = 1u64;
    let mut best = 1;
    for m in 1..=w {
        fact = match fact.checked_mul(m) {
            Some(f) => f,
            None => break,
        };
        if w.is_multiple_of(fact) {
            best = m;
        } else {
            break;
        }
    }
    best
}

/// Where the tuples of a schedule come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum TupleSource {
    Listed { tuples: Vec<Tuple>, tail: Option<TailRule> },
    /// The exact parameters `X_i = C_{it,i!}`, `b_i = it`,
    /// `l_i = 3^{i!} (i+1)^{i! i}` for `i >= 6`, empty before.
    Factorial { t: u64 },
    Scaled(ScaledProfile),
}

impl TupleSource {
    fn tuple(&self, i: usize) -> Result<Option<Tuple>> {
        match self {
            TupleSource::Listed { tuples, tail } => {
                if let Some(t) = tuples.get(i - 1) {
                    return Ok(Some(t.clone()));
                }
                match tail {
                    None => Ok(None),
                    Some(tail) => {
                        let b = tail.b0 + (i - tuples.len() - 1) as u64 * tail.b_step;
                        let eps = BigRational::new(1.into(), (i as u64 + 1).into());
                        Tuple::simple(tail.l, b, BlockRule::Explicit(tail.block.clone()), eps, 1, 1).map(Some)
                    }
                }
            }
            TupleSource::Factorial { t } => factorial_tuple(*t, i as u64).map(Some),
            TupleSource::Scaled(p) => p.tuple(i).map(Some),
        }
    }
}

fn factorial(n: u64) -> Result<u64> {
    (1..=n)
        .try_fold(1u64, |acc, x| acc.checked_mul(x))
        .ok_or_else(|| Error::Guard(format!("{n}! overflows")))
}

fn factorial_tuple(t: u64, i: u64) -> Result<Tuple> {
    if t == 0 {
        return Err(Error::InvalidParameter("factorial schedule needs t >= 1".into()));
    }
    let b = (i * t).max(2);
    let eps = BigRational::new(1.into(), i.into());
    let mu = UniformMeasure::new(b)?;
    if i < 6 {
        return Ok(Tuple {
            l: BigUint::zero(),
            b,
            v: b,
            eps,
            k: i,
            mu,
            m: i,
            block: BlockRule::Explicit(Block::new(vec![0])),
        });
    }
    let w = factorial(i)?;
    let w32 = u32::try_from(w).map_err(|_| Error::Guard(format!("{i}! too large")))?;
    let exp2 = w
        .checked_mul(i)
        .and_then(|e| u32::try_from(e).ok())
        .ok_or_else(|| Error::Guard(format!("{i}!*{i} too large")))?;
    let l = BigUint::from(3u32).pow(w32) * BigUint::from(i + 1).pow(exp2);
    Ok(Tuple {
        l,
        b,
        v: b,
        eps,
        k: i,
        mu,
        m: i,
        block: BlockRule::Cbw { b, w },
    })
}

#[derive(Default)]
struct Cache {
    tuples: Vec<Arc<Tuple>>,
    /// `ends[i-1] = L_i`.
    ends: Vec<BigUint>,
    exhausted: bool,
}

/// A lazily expanded construction schedule. Cumulative lengths are cached
/// behind a lock with a single extending writer.
pub struct ConstructionSchedule {
    source: TupleSource,
    cache: RwLock<Cache>,
}

impl std::fmt::Debug for ConstructionSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstructionSchedule").field("source", &self.source).finish()
    }
}

impl ConstructionSchedule {
    pub fn new(source: TupleSource) -> Result<Self> {
        let s = ConstructionSchedule {
            source,
            cache: RwLock::new(Cache::default()),
        };
        s.validate_prefix(8)?;
        Ok(s)
    }

    pub fn source(&self) -> &TupleSource {
        &self.source
    }

    /// Checks monotonicity of the first `count` tuples (fewer if finite).
    pub fn validate_prefix(&self, count: usize) -> Result<()> {
        let mut prev: Option<Arc<Tuple>> = None;
        for i in 1..=count {
            let t = match self.tuple(i) {
                Ok(t) => t,
                Err(Error::ScheduleExhausted(_)) => break,
                Err(e) => return Err(e),
            };
            if t.b < 2 || t.v < 2 {
                return Err(Error::InvalidParameter(format!("tuple {i}: bases must be >= 2")));
            }
            if let Some(p) = &prev {
                let ok = t.b >= p.b && t.v >= p.v && t.k >= p.k && t.m >= p.m && t.eps < p.eps;
                if !ok {
                    return Err(Error::InvalidParameter(format!("tuple {i} breaks monotonicity")));
                }
            }
            prev = Some(t);
        }
        Ok(())
    }

    fn extend_to(&self, i: usize) -> Result<()> {
        if self.cache.read().expect("schedule lock").tuples.len() >= i {
            return Ok(());
        }
        let mut c = self.cache.write().expect("schedule lock");
        while c.tuples.len() < i {
            if c.exhausted {
                return Err(Error::ScheduleExhausted(format!("tuple {i}")));
            }
            let next = c.tuples.len() + 1;
            match self.source.tuple(next)? {
                None => {
                    c.exhausted = true;
                }
                Some(t) => {
                    let prev = c.ends.last().cloned().unwrap_or_default();
                    c.ends.push(prev + t.segment_len());
                    c.tuples.push(Arc::new(t));
                }
            }
        }
        Ok(())
    }

    /// The `i`-th tuple (1-based).
    pub fn tuple(&self, i: usize) -> Result<Arc<Tuple>> {
        if i == 0 {
            return Err(Error::InvalidParameter("tuples are 1-based".into()));
        }
        self.extend_to(i)?;
        Ok(self.cache.read().expect("schedule lock").tuples[i - 1].clone())
    }

    /// `L_i`; `L_0 = 0`.
    pub fn cumulative(&self, i: usize) -> Result<BigUint> {
        if i == 0 {
            return Ok(BigUint::zero());
        }
        self.extend_to(i)?;
        Ok(self.cache.read().expect("schedule lock").ends[i - 1].clone())
    }

    /// Finds `i` with `L_{i-1} < n <= L_i` and returns it with the 0-based
    /// offset `n - L_{i-1} - 1` inside segment `i`.
    pub fn locate(&self, n: &BigUint) -> Result<(usize, BigUint)> {
        if n.is_zero() {
            return Err(Error::InvalidParameter("positions are 1-based".into()));
        }
        loop {
            {
                let c = self.cache.read().expect("schedule lock");
                if c.ends.last().is_some_and(|last| last >= n) {
                    let i = c.ends.partition_point(|e| e < n);
                    let start = if i == 0 { BigUint::zero() } else { c.ends[i - 1].clone() };
                    return Ok((i + 1, n - start - 1u32));
                }
                if c.tuples.len() >= MAX_TUPLES || c.exhausted {
                    return Err(Error::ScheduleExhausted(n.to_string()));
                }
            }
            let have = self.cache.read().expect("schedule lock").tuples.len();
            match self.extend_to(have + 1) {
                Ok(()) => {}
                Err(Error::ScheduleExhausted(_)) => return Err(Error::ScheduleExhausted(n.to_string())),
                Err(e) => return Err(e),
            }
        }
    }

    /// Position of the `copy`-th copy of `X_i` (0-based copy and offset),
    /// for use by callers that walk the schedule.
    pub fn split_offset(&self, i: usize, offset: &BigUint) -> Result<(BigUint, BigUint)> {
        let t = self.tuple(i)?;
        Ok(offset.div_rem(&t.block.len()))
    }
}

/// Sequential walker over the segments of a schedule: yields
/// `(tuple index, tuple, segment length capped to u64)` for nonempty segments.
pub struct SegmentWalker {
    schedule: Arc<ConstructionSchedule>,
    next: usize,
}

impl SegmentWalker {
    pub fn new(schedule: Arc<ConstructionSchedule>) -> Self {
        SegmentWalker { schedule, next: 1 }
    }

    pub fn starting_at(schedule: Arc<ConstructionSchedule>, i: usize) -> Self {
        SegmentWalker { schedule, next: i }
    }

    pub fn next_segment(&mut self) -> Result<(usize, Arc<Tuple>, u64)> {
        for _ in 0..MAX_TUPLES {
            let i = self.next;
            self.next += 1;
            let t = self.schedule.tuple(i)?;
            let len = t.segment_len();
            if !len.is_zero() {
                return Ok((i, t, len.to_u64().unwrap_or(u64::MAX)));
            }
        }
        Err(Error::ScheduleExhausted("no nonempty segment".into()))
    }
}

/// `b^k` as an exact integer.
pub fn pow_big(b: u64, k: u64) -> BigUint {
    BigUint::from(b).pow(k as u32)
}

/// `1/i` style rational helper.
pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Whether every tuple up to `i` has a strictly smaller ε than its
/// predecessor and the ε's stay positive.
pub fn eps_strictly_decreasing(s: &ConstructionSchedule, upto: usize) -> Result<bool> {
    let mut prev: Option<BigRational> = None;
    for i in 1..=upto {
        let e = s.tuple(i)?.eps.clone();
        if e <= BigRational::zero() || prev.as_ref().is_some_and(|p| &e >= p) {
            return Ok(false);
        }
        prev = Some(e);
    }
    Ok(prev.is_some_and(|p| p < BigRational::one()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn listed(pairs: &[(u64, u64, Vec<u64>)]) -> ConstructionSchedule {
        let tuples = pairs
            .iter()
            .enumerate()
            .map(|(i, (l, b, x))| {
                Tuple::simple(*l, *b, BlockRule::Explicit(Block::new(x.clone())), ratio(1, i as i64 + 2), 1, 1).unwrap()
            })
            .collect();
        ConstructionSchedule::new(TupleSource::Listed { tuples, tail: None }).unwrap()
    }

    #[test]
    fn cumulative_lengths() {
        let s = listed(&[(2, 3, vec![0, 1]), (1, 3, vec![2])]);
        assert_eq!(s.cumulative(1).unwrap(), BigUint::from(4u32));
        assert_eq!(s.cumulative(2).unwrap(), BigUint::from(5u32));
        assert_eq!(s.locate(&4u32.into()).unwrap(), (1, 3u32.into()));
        assert_eq!(s.locate(&5u32.into()).unwrap(), (2, 0u32.into()));
        assert!(matches!(s.locate(&6u32.into()), Err(Error::ScheduleExhausted(_))));
    }

    #[test]
    fn thm17_first_nonempty_tuple() {
        let s = ConstructionSchedule::new(TupleSource::Factorial { t: 2 }).unwrap();
        assert_eq!(s.cumulative(5).unwrap(), BigUint::zero());
        let t6 = s.tuple(6).unwrap();
        assert_eq!(t6.b, 12);
        assert_eq!(t6.block, BlockRule::Cbw { b: 12, w: 720 });
        assert_eq!(t6.eps, ratio(1, 6));
        assert_eq!((t6.k, t6.m), (6, 6));
        assert_eq!(s.locate(&1u32.into()).unwrap(), (6, BigUint::zero()));
    }

    #[test]
    fn default_profile_shape() {
        let p = ScaledProfile::default();
        let t1 = p.tuple(1).unwrap();
        assert_eq!(t1.block, BlockRule::Cbw { b: 2, w: 2 });
        assert_eq!(t1.l, BigUint::from(50u32));
        let t3 = p.tuple(3).unwrap();
        assert_eq!(t3.block, BlockRule::Cbw { b: 4, w: 4 });
        assert_eq!(t3.l, BigUint::from(7u32));
        assert_eq!(largest_factorial_divisor(4), 2);
        assert_eq!(largest_factorial_divisor(6), 3);
        assert_eq!(largest_factorial_divisor(720), 6);
    }
}
