//! Digit streams of Q-Cantor expansions `x = E_0 + Σ E_n/(q_1...q_n)`.
//!
//! Streams are descriptors; every consumer opens its own [`DigitCursor`].
//! Random access ([`DigitStream::digit_at`]) and cursors are independent code
//! paths for the η construction, which lets each check the other.

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::schedule::{BlockRule, ConstructionSchedule, SegmentWalker};
use crate::sequences::{periodic_extract, BasicSequence, IndexStream, Radix, SeqCursor};

/// Factors allowed in an exact prefix evaluation.
pub const EVALUATION_GUARD: u64 = 100_000;

/// Where the digits of a stream come from.
#[derive(Debug)]
pub enum Source {
    /// `X_1^{l_1} X_2^{l_2} ...`
    Eta(Arc<ConstructionSchedule>),
    /// `min(E_n, q_n - 1)`, declared with respect to `q`.
    Psi { inner: DigitStream, p: BasicSequence, q: BasicSequence },
    /// `E_{m_1} E_{m_2} ...`
    Upsilon { inner: DigitStream, index: IndexStream },
    /// `prefix` then `period` forever; empty `period` makes it finite.
    Explicit { prefix: Vec<u64>, period: Vec<u64> },
    /// `E_n` uniform on `[0, q_n - 1]` from a seeded generator.
    RandomUniform { seed: u64, q: BasicSequence },
}

/// A lazily evaluated digit stream with integer part `E_0`.
#[derive(Debug, Clone)]
pub struct DigitStream {
    source: Arc<Source>,
    integer_part: BigInt,
}

impl DigitStream {
    fn from_source(source: Source) -> Self {
        DigitStream {
            source: Arc::new(source),
            integer_part: BigInt::zero(),
        }
    }

    pub fn explicit(prefix: Vec<u64>, period: Vec<u64>) -> Self {
        Self::from_source(Source::Explicit { prefix, period })
    }

    pub fn random_uniform(seed: u64, q: BasicSequence) -> Self {
        Self::from_source(Source::RandomUniform { seed, q })
    }

    pub fn with_integer_part(mut self, e0: BigInt) -> Self {
        self.integer_part = e0;
        self
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    pub fn integer_part(&self) -> &BigInt {
        &self.integer_part
    }

    /// The basic sequence the digits are declared against, when the stream
    /// carries one.
    pub fn governing(&self) -> Option<BasicSequence> {
        match self.source() {
            Source::Eta(s) => Some(BasicSequence::gamma(s.clone())),
            Source::Psi { q, .. } => Some(q.clone()),
            Source::Upsilon { inner, index } => inner
                .governing()
                .map(|q| BasicSequence::lambda_subsequence(q, index.clone())),
            Source::Explicit { .. } => None,
            Source::RandomUniform { q, .. } => Some(q.clone()),
        }
    }

    /// `E_n` for 1-based `n`.
    pub fn digit_at(&self, n: u64) -> Result<u64> {
        if n == 0 {
            return Err(Error::InvalidParameter("digits are 1-based".into()));
        }
        match self.source() {
            Source::Eta(s) => eta_digit_at(s, &BigUint::from(n)),
            Source::Psi { inner, q, .. } => Ok(q.q_at(n)?.clamp_digit(inner.digit_at(n)?)),
            Source::Upsilon { inner, index } => inner.digit_at(index.at(n)?),
            Source::Explicit { prefix, period } => periodic_digit(prefix, period, n),
            Source::RandomUniform { seed, q } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_word_pos(2 * (n as u128 - 1));
                uniform_below(rng.next_u64(), q.q_at(n)?)
            }
        }
    }

    /// A cursor whose first digit is `E_start`.
    pub fn cursor(&self, start: u64) -> Result<DigitCursor> {
        if start == 0 {
            return Err(Error::InvalidParameter("digits are 1-based".into()));
        }
        Ok(match self.source() {
            Source::Eta(s) => DigitCursor::Eta(EtaCursor::new(s.clone(), start)?),
            Source::Psi { inner, q, .. } => DigitCursor::Psi {
                inner: Box::new(inner.cursor(start)?),
                q: q.cursor(start)?,
                monitor: PsiMonitor::default(),
                n: start,
            },
            Source::Upsilon { inner, index } => {
                let first = index.at(start)?;
                DigitCursor::Upsilon {
                    inner: Box::new(inner.cursor(first)?),
                    index: index.clone(),
                    t: start,
                    pos: first - 1,
                }
            }
            Source::Explicit { .. } => DigitCursor::Explicit {
                stream: self.clone(),
                n: start,
            },
            Source::RandomUniform { seed, q } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_word_pos(2 * (start as u128 - 1));
                DigitCursor::Random {
                    rng: Box::new(rng),
                    q: q.cursor(start)?,
                }
            }
        })
    }

    /// First `n` digits.
    pub fn prefix(&self, n: u64) -> Result<Vec<u64>> {
        let mut c = self.cursor(1)?;
        (0..n).map(|_| c.next_digit()).collect()
    }

    /// Eventually periodic form `(prefix, period)` when it is known exactly.
    pub fn as_periodic(&self) -> Option<(Vec<u64>, Vec<u64>)> {
        match self.source() {
            Source::Explicit { prefix, period } if !period.is_empty() => Some((prefix.clone(), period.clone())),
            Source::Psi { inner, q, .. } => {
                let x = inner.as_periodic()?;
                let qp = q.as_periodic()?;
                let (s, _, xs, qs) = align(&x, &qp);
                let digits: Vec<u64> = xs.iter().zip(&qs).map(|(&e, &q)| e.min(q - 1)).collect();
                Some((digits[..s].to_vec(), digits[s..].to_vec()))
            }
            Source::Upsilon { inner, index: IndexStream::Ap(ap) } => {
                let (pre, per) = inner.as_periodic()?;
                Some(periodic_extract(&pre, &per, *ap))
            }
            _ => None,
        }
    }
}

/// η(W, X) for a schedule.
pub fn eta_stream(schedule: Arc<ConstructionSchedule>) -> DigitStream {
    DigitStream::from_source(Source::Eta(schedule))
}

/// ψ_{P,Q}(x): digit-wise `min(E_n, q_n - 1)` declared with respect to `Q`.
/// Raw digits are emitted; see [`canonicalize`] for the periodic case.
pub fn psi_transform(x: DigitStream, p: BasicSequence, q: BasicSequence) -> DigitStream {
    let e0 = x.integer_part.clone();
    DigitStream::from_source(Source::Psi { inner: x, p, q }).with_integer_part(e0)
}

/// Υ_{Q,M}(x) = `0.E_{m_1} E_{m_2} ...`, declared w.r.t. `Λ_M(Q)`.
pub fn upsilon_extract(x: DigitStream, index: IndexStream) -> DigitStream {
    if index.is_identity() {
        return x;
    }
    DigitStream::from_source(Source::Upsilon { inner: x, index })
}

/// The `n`-th digit of η(W, X) by locating its segment; `C_{b,w}` blocks
/// are never materialized.
pub fn eta_digit_at(schedule: &ConstructionSchedule, n: &BigUint) -> Result<u64> {
    let (i, offset) = schedule.locate(n)?;
    let (_, within) = schedule.split_offset(i, &offset)?;
    schedule.tuple(i)?.block.digit_at(&within)
}

fn periodic_digit(prefix: &[u64], period: &[u64], n: u64) -> Result<u64> {
    let i = (n - 1) as usize;
    if let Some(&d) = prefix.get(i) {
        return Ok(d);
    }
    if period.is_empty() {
        return Err(Error::ScheduleExhausted(format!("explicit digits at {n}")));
    }
    Ok(period[(i - prefix.len()) % period.len()])
}

/// Maps a uniform 64-bit word onto `[0, q - 1]` by multiply-shift.
fn uniform_below(word: u64, q: Radix) -> Result<u64> {
    let q = q
        .to_u64()
        .ok_or_else(|| Error::Guard(format!("random digit below q = {q}")))?;
    Ok(((word as u128 * q as u128) >> 64) as u64)
}

/// Observations of the ψ hypothesis `E_n < q_n - 1` on the digits read so far.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PsiMonitor {
    /// Positions with `E_n < q_n - 1`.
    pub witnesses: u64,
    /// Positions where the digit was reduced.
    pub clamped: u64,
    /// Last position that was reduced.
    pub last_clamp: Option<u64>,
    /// Current run of output digits equal to `q_n - 1`.
    pub top_run: u64,
    /// Longest such run seen.
    pub longest_top_run: u64,
}

/// Sequential reader over a digit stream.
pub enum DigitCursor {
    Eta(EtaCursor),
    Psi {
        inner: Box<DigitCursor>,
        q: SeqCursor,
        monitor: PsiMonitor,
        n: u64,
    },
    Upsilon {
        inner: Box<DigitCursor>,
        index: IndexStream,
        t: u64,
        /// Position of the last inner digit consumed.
        pos: u64,
    },
    Explicit { stream: DigitStream, n: u64 },
    Random { rng: Box<ChaCha8Rng>, q: SeqCursor },
}

impl DigitCursor {
    pub fn next_digit(&mut self) -> Result<u64> {
        match self {
            DigitCursor::Eta(c) => c.next_digit(),
            DigitCursor::Psi { inner, q, monitor, n } => {
                let e = inner.next_digit()?;
                let qn = q.next_q()?;
                let f = qn.clamp_digit(e);
                if f != e {
                    monitor.clamped += 1;
                    monitor.last_clamp = Some(*n);
                }
                if qn.is_top_digit(f) {
                    monitor.top_run += 1;
                    monitor.longest_top_run = monitor.longest_top_run.max(monitor.top_run);
                } else {
                    monitor.top_run = 0;
                    if qn.admits(e.saturating_add(1)) {
                        monitor.witnesses += 1;
                    }
                }
                *n += 1;
                Ok(f)
            }
            DigitCursor::Upsilon { inner, index, t, pos } => {
                let target = index.at(*t)?;
                while *pos + 1 < target {
                    inner.next_digit()?;
                    *pos += 1;
                }
                let d = inner.next_digit()?;
                *pos = target;
                *t += 1;
                Ok(d)
            }
            DigitCursor::Explicit { stream, n } => {
                let d = stream.digit_at(*n)?;
                *n += 1;
                Ok(d)
            }
            DigitCursor::Random { rng, q } => {
                // One 64-bit draw (two 32-bit words) per position keeps
                // random access aligned with the cursor.
                uniform_below(rng.next_u64(), q.next_q()?)
            }
        }
    }

    /// Skips `count` digits.
    pub fn skip(&mut self, count: u64) -> Result<()> {
        for _ in 0..count {
            self.next_digit()?;
        }
        Ok(())
    }

    /// The ψ monitor of the outermost transform, if any.
    pub fn psi_monitor(&self) -> Option<PsiMonitor> {
        match self {
            DigitCursor::Psi { monitor, .. } => Some(*monitor),
            DigitCursor::Upsilon { inner, .. } => inner.psi_monitor(),
            _ => None,
        }
    }
}

enum BlockIter {
    Explicit { digits: Arc<Vec<u64>>, pos: usize },
    /// Odometer over the blocks of `C_{b,w}`; wrapping past the last block
    /// restarts the next copy.
    Cbw { b: u64, counter: Vec<u64>, pos: usize },
}

impl BlockIter {
    fn at(rule: &BlockRule, offset: &BigUint) -> Result<Self> {
        match rule {
            BlockRule::Explicit(block) => Ok(BlockIter::Explicit {
                digits: Arc::new(block.digits().to_vec()),
                pos: offset.to_usize().expect("offset within an explicit block"),
            }),
            BlockRule::Cbw { b, w } => {
                let (mut idx, pos) = offset.div_rem(&BigUint::from(*w));
                let w = usize::try_from(*w).map_err(|_| Error::Guard("block width".into()))?;
                let mut counter = vec![0u64; w];
                let base = BigUint::from(*b);
                for slot in counter.iter_mut().rev() {
                    if idx.is_zero() {
                        break;
                    }
                    let (q, r) = idx.div_rem(&base);
                    *slot = r.to_u64().expect("below b");
                    idx = q;
                }
                Ok(BlockIter::Cbw {
                    b: *b,
                    counter,
                    pos: pos.to_usize().expect("below w"),
                })
            }
        }
    }

    fn next_digit(&mut self) -> u64 {
        match self {
            BlockIter::Explicit { digits, pos } => {
                if *pos == digits.len() {
                    *pos = 0;
                }
                let d = digits[*pos];
                *pos += 1;
                d
            }
            BlockIter::Cbw { b, counter, pos } => {
                if *pos == counter.len() {
                    *pos = 0;
                    for slot in counter.iter_mut().rev() {
                        *slot += 1;
                        if *slot < *b {
                            break;
                        }
                        *slot = 0;
                    }
                }
                let d = counter[*pos];
                *pos += 1;
                d
            }
        }
    }
}

/// Sequential reader over η(W, X).
pub struct EtaCursor {
    walker: SegmentWalker,
    block: BlockIter,
    left: u64,
}

impl EtaCursor {
    fn new(schedule: Arc<ConstructionSchedule>, start: u64) -> Result<Self> {
        let (i, offset) = schedule.locate(&BigUint::from(start))?;
        let t = schedule.tuple(i)?;
        let left = (t.segment_len() - &offset).to_u64().unwrap_or(u64::MAX);
        let (_, within) = schedule.split_offset(i, &offset)?;
        let block = BlockIter::at(&t.block, &within)?;
        Ok(EtaCursor {
            walker: SegmentWalker::starting_at(schedule, i + 1),
            block,
            left,
        })
    }

    fn next_digit(&mut self) -> Result<u64> {
        if self.left == 0 {
            let (_, t, len) = self.walker.next_segment()?;
            self.block = BlockIter::at(&t.block, &BigUint::zero())?;
            self.left = len;
        }
        self.left -= 1;
        Ok(self.block.next_digit())
    }
}

/// Pads two eventually periodic lists to a common prefix length `s` and
/// period `l`, returning `s + l` entries of each.
fn align(a: &(Vec<u64>, Vec<u64>), b: &(Vec<u64>, Vec<u64>)) -> (usize, usize, Vec<u64>, Vec<u64>) {
    let s = a.0.len().max(b.0.len());
    let l = a.1.len().lcm(&b.1.len());
    let expand = |x: &(Vec<u64>, Vec<u64>)| {
        (1..=(s + l) as u64)
            .map(|n| periodic_digit(&x.0, &x.1, n).expect("periodic"))
            .collect::<Vec<_>>()
    };
    (s, l, expand(a), expand(b))
}

fn q_big(q: u64) -> BigInt {
    BigInt::from(q)
}

/// Exact `E_0 + Σ_{j<=n} E_j / (q_1 ... q_j)` in lowest terms.
pub fn evaluate_prefix(x: &DigitStream, q: &BasicSequence, n: u64) -> Result<BigRational> {
    if n > EVALUATION_GUARD {
        return Err(Error::Guard(format!("exact evaluation of {n} digits")));
    }
    let mut num = BigInt::zero();
    let mut den = BigInt::one();
    let mut xc = x.cursor(1)?;
    let mut qc = q.cursor(1)?;
    for _ in 0..n {
        let e = xc.next_digit()?;
        let qj = BigInt::from(qc.next_q()?.to_biguint());
        num = num * &qj + e;
        den *= qj;
    }
    Ok(BigRational::from_integer(x.integer_part.clone()) + BigRational::new(num, den))
}

/// Exact value of an eventually periodic expansion against an eventually
/// periodic basic sequence (geometric closed form of the tail).
pub fn periodic_value(x: &DigitStream, q: &BasicSequence) -> Result<BigRational> {
    let (xp, qp) = periodic_pair(x, q)?;
    let (s, l, xs, qs) = align(&xp, &qp);
    let head = sum_digits(&xs[..s], &qs[..s]);
    let scale: BigInt = qs[..s].iter().map(|&v| q_big(v)).product();
    let cycle = sum_digits(&xs[s..s + l], &qs[s..s + l]);
    let period: BigInt = qs[s..s + l].iter().map(|&v| q_big(v)).product();
    let tail = cycle * BigRational::new(period.clone(), period - 1);
    Ok(BigRational::from_integer(x.integer_part.clone()) + head + tail / BigRational::from_integer(scale))
}

fn sum_digits(e: &[u64], q: &[u64]) -> BigRational {
    let mut num = BigInt::zero();
    let mut den = BigInt::one();
    for (&e, &q) in e.iter().zip(q) {
        num = num * q_big(q) + e;
        den *= q_big(q);
    }
    BigRational::new(num, den)
}

/// `(prefix, period)` of an eventually periodic sequence.
type Periodic = (Vec<u64>, Vec<u64>);

fn periodic_pair(x: &DigitStream, q: &BasicSequence) -> Result<(Periodic, Periodic)> {
    let xp = x
        .as_periodic()
        .ok_or_else(|| Error::InvalidParameter("digit stream is not known to be periodic".into()))?;
    let qp = q
        .as_periodic()
        .ok_or_else(|| Error::InvalidParameter("basic sequence is not known to be periodic".into()))?;
    Ok((xp, qp))
}

/// Rewrites an eventually periodic expansion whose tail is all `q_n - 1`
/// into the canonical form (increment the last non-top digit, zeros after).
/// Returns the input unchanged when its tail is already canonical.
pub fn canonicalize(x: &DigitStream, q: &BasicSequence) -> Result<DigitStream> {
    let (xp, qp) = periodic_pair(x, q)?;
    let (s, _, xs, qs) = align(&xp, &qp);
    if let Some((n, (&e, &q))) = xs.iter().zip(&qs).enumerate().find(|(_, (&e, &q))| e >= q) {
        return Err(Error::DigitOutOfRange {
            n: n as u64 + 1,
            digit: e,
            base: q.to_string(),
        });
    }
    let tail_is_top = xs[s..].iter().zip(&qs[s..]).all(|(&e, &q)| e == q - 1);
    if !tail_is_top {
        return Ok(DigitStream::explicit(xp.0, xp.1).with_integer_part(x.integer_part.clone()));
    }
    let head = &xs[..s];
    match head.iter().zip(&qs[..s]).rposition(|(&e, &q)| e < q - 1) {
        Some(j) => {
            let mut digits = head[..=j].to_vec();
            digits[j] += 1;
            Ok(DigitStream::explicit(digits, vec![0]).with_integer_part(x.integer_part.clone()))
        }
        None => Ok(DigitStream::explicit(Vec::new(), vec![0]).with_integer_part(x.integer_part.clone() + 1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::Block;
    use crate::schedule::{Tuple, TupleSource};
    use crate::sequences::ArithmeticProgression;

    fn alt32() -> BasicSequence {
        BasicSequence::explicit(vec![], vec![3, 2]).unwrap()
    }

    fn clamp_tail_example() -> (DigitStream, BasicSequence, BasicSequence) {
        let p = BasicSequence::constant(3).unwrap();
        (DigitStream::explicit(vec![], vec![2, 1]), p, alt32())
    }

    fn two_tuple_schedule() -> Arc<ConstructionSchedule> {
        let t = |l: u64, x: Vec<u64>, e: i64| {
            Tuple::simple(l, 3, BlockRule::Explicit(Block::new(x)), BigRational::new(1.into(), e.into()), 1, 1).unwrap()
        };
        Arc::new(
            ConstructionSchedule::new(TupleSource::Listed {
                tuples: vec![t(2, vec![0, 1], 2), t(1, vec![2], 3)],
                tail: None,
            })
            .unwrap(),
        )
    }

    #[test]
    fn eta_concatenates() {
        let s = two_tuple_schedule();
        let x = eta_stream(s.clone());
        assert_eq!(x.prefix(5).unwrap(), vec![0, 1, 0, 1, 2]);
        assert_eq!(eta_digit_at(&s, &5u32.into()).unwrap(), 2);
        assert!(matches!(x.digit_at(6), Err(Error::ScheduleExhausted(_))));
        let mut c = x.cursor(3).unwrap();
        assert_eq!(c.next_digit().unwrap(), 0);
    }

    #[test]
    fn eta_exact_factorial_starts_with_zeros() {
        let s = Arc::new(ConstructionSchedule::new(TupleSource::Factorial { t: 2 }).unwrap());
        let x = eta_stream(s.clone());
        assert!(x.prefix(720).unwrap().iter().all(|&d| d == 0));
        assert_eq!(x.digit_at(1440).unwrap(), 1);
        let l6 = s.cumulative(6).unwrap();
        assert_eq!(eta_digit_at(&s, &l6).unwrap(), 11);
        assert_eq!(eta_digit_at(&s, &(l6 + 1u32)).unwrap(), 0);
    }

    #[test]
    fn psi_clamp_tail_raw_and_canonical() {
        let (x, p, q) = clamp_tail_example();
        let y = psi_transform(x.clone(), p.clone(), q.clone());
        assert_eq!(y.prefix(4).unwrap(), vec![2, 1, 2, 1]);
        assert_eq!(periodic_value(&x, &p).unwrap(), BigRational::new(7.into(), 8.into()));
        assert_eq!(periodic_value(&y, &q).unwrap(), BigRational::one());
        let c = canonicalize(&y, &q).unwrap();
        assert_eq!(c.integer_part(), &BigInt::one());
        assert!(c.prefix(100).unwrap().iter().all(|&d| d == 0));
        let mut cur = y.cursor(1).unwrap();
        cur.skip(50).unwrap();
        let mon = cur.psi_monitor().unwrap();
        assert_eq!(mon.witnesses, 0);
        assert_eq!(mon.longest_top_run, 50);
    }

    #[test]
    fn canonicalize_carries_into_prefix() {
        let q = BasicSequence::constant(10).unwrap();
        let x = DigitStream::explicit(vec![1, 2], vec![9]);
        let c = canonicalize(&x, &q).unwrap();
        assert_eq!(c.prefix(4).unwrap(), vec![1, 3, 0, 0]);
        assert_eq!(periodic_value(&x, &q).unwrap(), periodic_value(&c, &q).unwrap());
        let y = DigitStream::explicit(vec![1], vec![4, 9]);
        assert_eq!(canonicalize(&y, &q).unwrap().prefix(3).unwrap(), vec![1, 4, 9]);
    }

    #[test]
    fn prefix_values() {
        let (x, _, q) = clamp_tail_example();
        assert_eq!(evaluate_prefix(&x, &q, 2).unwrap(), BigRational::new(5.into(), 6.into()));
        assert_eq!(evaluate_prefix(&x, &q, 4).unwrap(), BigRational::new(35.into(), 36.into()));
        let (x, p, _) = clamp_tail_example();
        let mut prev = BigRational::zero();
        for n in 1..30 {
            let v = evaluate_prefix(&x, &p, n).unwrap();
            assert!(v >= prev && v < BigRational::new(7.into(), 8.into()));
            prev = v;
        }
    }

    #[test]
    fn upsilon_and_commutation() {
        let x = DigitStream::explicit((0..20).collect(), vec![0]);
        let ap = IndexStream::Ap(ArithmeticProgression::new(2, 1).unwrap());
        assert_eq!(upsilon_extract(x, ap.clone()).prefix(4).unwrap(), vec![0, 2, 4, 6]);

        let q = BasicSequence::explicit(vec![], vec![5, 2, 7]).unwrap();
        let p = BasicSequence::constant(9).unwrap();
        let x = DigitStream::random_uniform(7, p.clone());
        let lhs = upsilon_extract(psi_transform(x.clone(), p.clone(), q.clone()), ap.clone());
        let lp = BasicSequence::lambda_subsequence(p.clone(), ap.clone());
        let lq = BasicSequence::lambda_subsequence(q.clone(), ap.clone());
        let rhs = psi_transform(upsilon_extract(x, ap), lp, lq);
        assert_eq!(lhs.prefix(500).unwrap(), rhs.prefix(500).unwrap());
    }

    #[test]
    fn random_access_matches_cursor() {
        let q = BasicSequence::explicit(vec![], vec![2, 10, 1000]).unwrap();
        let x = DigitStream::random_uniform(42, q.clone());
        let streamed = x.prefix(300).unwrap();
        for (i, &d) in streamed.iter().enumerate() {
            assert_eq!(x.digit_at(i as u64 + 1).unwrap(), d);
            assert!(q.q_at(i as u64 + 1).unwrap().admits(d));
        }
        let mut c = x.cursor(101).unwrap();
        assert_eq!(c.next_digit().unwrap(), streamed[100]);
    }
}
