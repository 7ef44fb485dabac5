//! Streaming block statistics: plain, AP type I and AP type II counts with
//! their divergence-sum denominators, ratio normality, predicted limits and
//! a star-discrepancy diagnostic for distribution normality.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;

use crate::blocks::Block;
use crate::diophantine::{ap_product_sum, consecutive_product_sum};
use crate::digits::{upsilon_extract, DigitCursor, DigitStream, PsiMonitor, Source};
use crate::schedule::ConstructionSchedule;
use crate::error::{Error, Result};
use crate::sequences::{ArithmeticProgression, BasicSequence, IndexStream, PartialSum, ProductSumAccumulator};

/// Denominators below this are reported as pre-asymptotic.
pub const DEFAULT_MIN_DENOMINATOR: f64 = 10.0;

/// Counting convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Mode {
    Plain,
    /// Start positions in `A_{m,r}`.
    ApI { m: u64, r: u64 },
    /// Plain counts inside the subsequence extracted along `A_{m,r}`.
    ApII { m: u64, r: u64 },
}

impl Mode {
    pub fn progression(&self) -> ArithmeticProgression {
        match *self {
            Mode::Plain => ArithmeticProgression::identity(),
            Mode::ApI { m, r } | Mode::ApII { m, r } => ArithmeticProgression { m, r },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Plain => "plain",
            Mode::ApI { .. } => "apI",
            Mode::ApII { .. } => "apII",
        }
    }

    fn validate(&self) -> Result<()> {
        let ap = self.progression();
        ArithmeticProgression::new(ap.m, ap.r).map(|_| ())
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Plain => write!(f, "plain"),
            Mode::ApI { m, r } => write!(f, "apI:{m}:{r}"),
            Mode::ApII { m, r } => write!(f, "apII:{m}:{r}"),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    /// `plain`, `apI:m:r` or `apII:m:r`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<u64> {
            parts
                .get(i)
                .ok_or_else(|| Error::Descriptor(format!("mode {s:?} needs m and r")))?
                .parse()
                .map_err(|_| Error::Descriptor(format!("bad number in mode {s:?}")))
        };
        let mode = match parts[0] {
            "plain" if parts.len() == 1 => Mode::Plain,
            "apI" if parts.len() == 3 => Mode::ApI { m: num(1)?, r: num(2)? },
            "apII" if parts.len() == 3 => Mode::ApII { m: num(1)?, r: num(2)? },
            _ => return Err(Error::Descriptor(format!("unknown mode {s:?}"))),
        };
        mode.validate().map_err(|e| Error::Descriptor(e.to_string()))?;
        Ok(mode)
    }
}

/// Knuth–Morris–Pratt automaton for one block.
#[derive(Debug, Clone)]
pub struct Kmp {
    pattern: Vec<u64>,
    fail: Vec<usize>,
    state: usize,
}

impl Kmp {
    pub fn new(block: &Block) -> Result<Self> {
        if block.is_empty() {
            return Err(Error::EmptyBlock);
        }
        let p = block.digits().to_vec();
        let mut fail = vec![0usize; p.len()];
        let mut k = 0;
        for i in 1..p.len() {
            while k > 0 && p[i] != p[k] {
                k = fail[k - 1];
            }
            if p[i] == p[k] {
                k += 1;
            }
            fail[i] = k;
        }
        Ok(Kmp { pattern: p, fail, state: 0 })
    }

    /// Feeds one digit; true when an occurrence ends here.
    pub fn step(&mut self, d: u64) -> bool {
        while self.state > 0 && self.pattern[self.state] != d {
            self.state = self.fail[self.state - 1];
        }
        if self.pattern[self.state] == d {
            self.state += 1;
        }
        if self.state == self.pattern.len() {
            self.state = self.fail[self.state - 1];
            return true;
        }
        false
    }

    pub fn len(&self) -> usize {
        self.pattern.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pattern.is_empty()
    }
}

/// Block counters over one digit stream. Counts only include occurrences
/// whose start position satisfies the progression.
#[derive(Debug, Clone)]
pub struct CounterState {
    ap: ArithmeticProgression,
    automata: Vec<Kmp>,
    counts: Vec<u64>,
    n: u64,
    /// Largest start position counted.
    limit: u64,
}

impl CounterState {
    /// Counters for starts in `ap` up to `limit`.
    pub fn new(blocks: &[Block], ap: ArithmeticProgression, limit: u64) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidParameter("no blocks to count".into()));
        }
        let automata = blocks.iter().map(Kmp::new).collect::<Result<Vec<_>>>()?;
        Ok(CounterState {
            ap,
            counts: vec![0; automata.len()],
            automata,
            n: 0,
            limit,
        })
    }

    /// Continues counting at position `n + 1` after `n` digits were skipped.
    fn at_position(mut self, n: u64) -> Self {
        self.n = n;
        self
    }

    pub fn push(&mut self, d: u64) -> Result<()> {
        self.n += 1;
        for (a, c) in self.automata.iter_mut().zip(self.counts.iter_mut()) {
            if a.step(d) {
                let start = self.n + 1 - a.len() as u64;
                if start <= self.limit && self.ap.contains(start) {
                    *c = c.checked_add(1).ok_or(Error::Overflow)?;
                }
            }
        }
        Ok(())
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn position(&self) -> u64 {
        self.n
    }
}

/// One emitted checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRow {
    pub n: u64,
    pub mode: Mode,
    pub block: Block,
    pub count: u64,
    pub denominator: f64,
    /// `None` while the denominator is below the reporting floor.
    pub ratio: Option<f64>,
}

/// Checkpointed count/denominator series.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RatioSeries {
    pub rows: Vec<RatioRow>,
    /// Bound on denominator mass lost to floating underflow.
    pub neglected_bound: f64,
    /// ψ hypothesis monitor when the stream is a ψ transform.
    pub psi_monitor: Option<PsiMonitor>,
}

impl RatioSeries {
    /// Rows for one block, in checkpoint order.
    pub fn for_block<'a>(&'a self, block: &'a Block) -> impl Iterator<Item = &'a RatioRow> + 'a {
        self.rows.iter().filter(move |r| &r.block == block)
    }

    /// The row at the largest checkpoint for `block`.
    pub fn last_for(&self, block: &Block) -> Option<&RatioRow> {
        self.rows.iter().rev().find(|r| &r.block == block)
    }
}

/// Options for [`count_stream`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountOptions {
    pub min_denominator: f64,
}

impl Default for CountOptions {
    fn default() -> Self {
        CountOptions {
            min_denominator: DEFAULT_MIN_DENOMINATOR,
        }
    }
}

/// `ceil(1.5^j)` for all `j` up to `horizon`, plus `horizon`.
pub fn geometric_checkpoints(horizon: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut x = 1.0f64;
    while x.ceil() as u64 <= horizon {
        out.push(x.ceil() as u64);
        x *= 1.5;
    }
    out.push(horizon);
    out.sort_unstable();
    out.dedup();
    out
}

fn normalize_checkpoints(checkpoints: &[u64], horizon: u64) -> Vec<u64> {
    let mut cps: Vec<u64> = checkpoints.iter().copied().filter(|&c| c >= 1 && c <= horizon).collect();
    cps.push(horizon);
    cps.sort_unstable();
    cps.dedup();
    cps
}

/// Single pass over the digits of `x` (checked against `q`) counting every
/// block in `mode`. Counts at checkpoint `n` include occurrences starting at
/// positions `<= n`. For type II the stream is the extracted subsequence and
/// `horizon`/checkpoints are indices into it.
pub fn count_stream(
    x: &DigitStream,
    q: &BasicSequence,
    blocks: &[Block],
    mode: Mode,
    horizon: u64,
    checkpoints: &[u64],
    opts: CountOptions,
) -> Result<RatioSeries> {
    mode.validate()?;
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    match mode {
        Mode::ApII { .. } => {
            let index = IndexStream::Ap(mode.progression());
            let ux = upsilon_extract(x.clone(), index.clone());
            let lq = BasicSequence::lambda_subsequence(q.clone(), index);
            let mut series = count_positions(&ux, &lq, blocks, ArithmeticProgression::identity(), horizon, checkpoints, opts)?;
            for row in &mut series.rows {
                row.mode = mode;
            }
            Ok(series)
        }
        _ => {
            let mut series = count_positions(x, q, blocks, mode.progression(), horizon, checkpoints, opts)?;
            for row in &mut series.rows {
                row.mode = mode;
            }
            Ok(series)
        }
    }
}

fn count_positions(
    x: &DigitStream,
    q: &BasicSequence,
    blocks: &[Block],
    ap: ArithmeticProgression,
    horizon: u64,
    checkpoints: &[u64],
    opts: CountOptions,
) -> Result<RatioSeries> {
    let cps = normalize_checkpoints(checkpoints, horizon);
    let mut counter = CounterState::new(blocks, ap, horizon)?;
    let kmax = blocks.iter().map(Block::len).max().unwrap_or(1) as u64;
    let mut ks: Vec<usize> = blocks.iter().map(Block::len).collect();
    ks.sort_unstable();
    ks.dedup();
    let mut accs: Vec<ProductSumAccumulator> = ks.iter().map(|&k| ProductSumAccumulator::new(k)).collect();
    let acc_of = |k: usize| ks.binary_search(&k).expect("block length registered");

    let mut xc = x.cursor(1)?;
    let mut qc = q.cursor(1)?;
    let mut next_cp = vec![0usize; blocks.len()];
    let mut snapshots: Vec<Vec<(u64, u64, PartialSum)>> = vec![Vec::new(); blocks.len()];
    for e in 1..=horizon + kmax - 1 {
        let d = xc.next_digit()?;
        let qe = qc.next_q()?;
        if !qe.admits(d) {
            return Err(Error::DigitOutOfRange { n: e, digit: d, base: qe.to_string() });
        }
        for acc in accs.iter_mut() {
            acc.push(qe, |s| s as u64 <= horizon && ap.contains(s as u64), e as usize);
        }
        counter.push(d)?;
        for (bi, block) in blocks.iter().enumerate() {
            let k = block.len() as u64;
            while next_cp[bi] < cps.len() && cps[next_cp[bi]] + k - 1 == e {
                let sum = accs[acc_of(block.len())].current();
                snapshots[bi].push((cps[next_cp[bi]], counter.counts()[bi], sum));
                next_cp[bi] += 1;
            }
        }
    }
    let mut rows = Vec::with_capacity(cps.len() * blocks.len());
    let mut neglected = 0.0f64;
    for (ci, &n) in cps.iter().enumerate() {
        for (bi, block) in blocks.iter().enumerate() {
            let (_, count, sum) = snapshots[bi][ci];
            neglected = neglected.max(sum.neglected_bound);
            let ratio = (sum.value >= opts.min_denominator && sum.value > 0.0).then(|| count as f64 / sum.value);
            rows.push(RatioRow {
                n,
                mode: Mode::Plain,
                block: block.clone(),
                count,
                denominator: sum.value,
                ratio,
            });
        }
    }
    Ok(RatioSeries {
        rows,
        neglected_bound: neglected,
        psi_monitor: xc.psi_monitor(),
    })
}

fn stream_for_mode(x: &DigitStream, mode: Mode) -> (DigitStream, ArithmeticProgression) {
    match mode {
        Mode::ApII { .. } => (
            upsilon_extract(x.clone(), IndexStream::Ap(mode.progression())),
            ArithmeticProgression::identity(),
        ),
        _ => (x.clone(), mode.progression()),
    }
}

/// Final counts at `horizon` from one sequential pass, without denominators.
pub fn count_sequential(x: &DigitStream, blocks: &[Block], mode: Mode, horizon: u64) -> Result<Vec<u64>> {
    mode.validate()?;
    let (stream, ap) = stream_for_mode(x, mode);
    count_range(&stream, blocks, ap, 1, horizon, horizon)
}

fn count_range(x: &DigitStream, blocks: &[Block], ap: ArithmeticProgression, first: u64, last: u64, horizon: u64) -> Result<Vec<u64>> {
    let kmax = blocks.iter().map(Block::len).max().unwrap_or(1) as u64;
    let mut counter = CounterState::new(blocks, ap, last.min(horizon))?.at_position(first - 1);
    let mut cursor: DigitCursor = x.cursor(first)?;
    for _ in first..=last + kmax - 1 {
        counter.push(cursor.next_digit()?)?;
    }
    // Occurrences starting before `first` cannot complete inside the range
    // because the automata start empty there.
    Ok(counter.counts().to_vec())
}

/// Final counts at `horizon` computed over `chunks` start-position ranges in
/// parallel. Each range reads `max |B| - 1` digits past its end; per-range
/// counts are summed.
pub fn count_chunked(x: &DigitStream, blocks: &[Block], mode: Mode, horizon: u64, chunks: usize) -> Result<Vec<u64>> {
    mode.validate()?;
    if blocks.is_empty() {
        return Err(Error::InvalidParameter("no blocks to count".into()));
    }
    let (stream, ap) = stream_for_mode(x, mode);
    let chunks = chunks.max(1) as u64;
    let size = horizon.div_ceil(chunks).max(1);
    let ranges: Vec<(u64, u64)> = (0..chunks)
        .map(|c| (c * size + 1, ((c + 1) * size).min(horizon)))
        .filter(|(a, b)| a <= b)
        .collect();
    let parts = ranges
        .par_iter()
        .map(|&(a, b)| count_range(&stream, blocks, ap, a, b, horizon))
        .collect::<Result<Vec<_>>>()?;
    let mut total = vec![0u64; blocks.len()];
    for part in parts {
        for (t, c) in total.iter_mut().zip(part) {
            *t = t.checked_add(c).ok_or(Error::Overflow)?;
        }
    }
    Ok(total)
}

/// `(n, N(B1), N(B2), ratio)`.
pub type BlockPairRow = (u64, u64, u64, Option<f64>);

/// `N(B1)/N(B2)` at each checkpoint; `None` where `N(B2) = 0`.
pub fn ratio_normality_series(
    x: &DigitStream,
    q: &BasicSequence,
    b1: &Block,
    b2: &Block,
    horizon: u64,
    checkpoints: &[u64],
) -> Result<Vec<BlockPairRow>> {
    if b1.len() != b2.len() {
        return Err(Error::InvalidParameter(format!("block lengths differ: {} vs {}", b1.len(), b2.len())));
    }
    let blocks = [b1.clone(), b2.clone()];
    let series = count_stream(x, q, &blocks, Mode::Plain, horizon, checkpoints, CountOptions::default())?;
    let a: Vec<&RatioRow> = series.for_block(b1).collect();
    let b: Vec<&RatioRow> = series.for_block(b2).collect();
    Ok(a.iter()
        .zip(&b)
        .map(|(r1, r2)| (r1.n, r1.count, r2.count, (r2.count > 0).then(|| r1.count as f64 / r2.count as f64)))
        .collect())
}

/// Limit of `N/Q^{(k)}` predicted for ψ-images under Ξ(P, c, d):
/// `d / Σ_{j=0}^{t-k} c_j ... c_{j+k-1}` (plain) and the type I/II variants
/// `(d/m) / Σ` over the progression sums.
pub fn predicted_limit(c: &[BigRational], d: u64, k: u64, mode: Mode) -> Result<BigRational> {
    mode.validate()?;
    let d = BigRational::from_integer(d.into());
    let (num, den) = match mode {
        Mode::Plain => (d, consecutive_product_sum(c, k)?),
        Mode::ApI { m, r } => (
            d / BigRational::from_integer(m.into()),
            ap_product_sum(c, k, m, r, crate::blocks::ApVariant::TypeI)?,
        ),
        Mode::ApII { m, r } => (
            d / BigRational::from_integer(m.into()),
            ap_product_sum(c, k, m, r, crate::blocks::ApVariant::TypeII)?,
        ),
    };
    if num_traits::Zero::is_zero(&den) {
        return Err(Error::InvalidParameter("predicted limit has a zero denominator".into()));
    }
    Ok(num / den)
}

/// Star discrepancy of the approximated orbit points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discrepancy {
    pub d_star: f64,
    /// Largest truncation error of a point (`1/(q_{j+1}...q_{j+tail})`).
    pub truncation_bound: f64,
    pub points: u64,
}

/// `D*_n` of `T_{Q,j}(x) ≈ 0.E_{j+1}...E_{j+tail}` for `j = 1..=n`.
pub fn distribution_discrepancy(x: &DigitStream, q: &BasicSequence, n: u64, tail_digits: usize) -> Result<Discrepancy> {
    if tail_digits == 0 {
        return Err(Error::InvalidParameter("tail_digits must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one point".into()));
    }
    let mut xc = x.cursor(2)?;
    let mut qc = q.cursor(2)?;
    let mut window: std::collections::VecDeque<(u64, f64)> = std::collections::VecDeque::with_capacity(tail_digits);
    for _ in 0..tail_digits {
        window.push_back((xc.next_digit()?, qc.next_q()?.recip_f64()));
    }
    let mut points = Vec::with_capacity(n as usize);
    let mut trunc = 0.0f64;
    for j in 1..=n {
        let mut z = 0.0f64;
        let mut tail_weight = 1.0f64;
        for &(e, r) in window.iter().rev() {
            z = (e as f64 + z) * r;
        }
        for &(_, r) in window.iter() {
            tail_weight *= r;
        }
        trunc = trunc.max(tail_weight);
        points.push(z.clamp(0.0, 1.0));
        if j < n {
            window.pop_front();
            window.push_back((xc.next_digit()?, qc.next_q()?.recip_f64()));
        }
    }
    points.sort_by(|a, b| a.total_cmp(b));
    let nn = n as f64;
    let d_star = points
        .iter()
        .enumerate()
        .map(|(i, &z)| ((i as f64 + 1.0) / nn - z).max(z - i as f64 / nn))
        .fold(0.0f64, f64::max);
    Ok(Discrepancy {
        d_star,
        truncation_bound: trunc,
        points: n,
    })
}

/// Ends of copies of `X_i` (always including each `L_i`) up to `horizon`,
/// mapped to counting indices of `mode`. At most `per_segment` copy ends
/// are kept per segment.
pub fn boundary_checkpoints(schedule: &ConstructionSchedule, horizon: u64, mode: Mode, per_segment: usize) -> Result<Vec<u64>> {
    let ap = mode.progression();
    let (last_position, extracted) = match mode {
        Mode::ApII { .. } => (ap.position(horizon), true),
        _ => (horizon, false),
    };
    let mut out = Vec::new();
    let mut start = 0u64;
    for i in 1.. {
        let t = schedule.tuple(i)?;
        let copy = t.block.len().to_u64().unwrap_or(u64::MAX);
        let copies = t.l.to_u64().unwrap_or(u64::MAX);
        if copy == 0 || copies == 0 {
            continue;
        }
        let stride = copies.div_ceil(per_segment.max(1) as u64);
        let mut j = 0u64;
        while j < copies {
            j = (j + stride).min(copies);
            let end = match copy.checked_mul(j).and_then(|v| v.checked_add(start)) {
                Some(e) if e <= last_position => e,
                _ => return Ok(out),
            };
            out.push(if extracted { ap.count_upto(end) } else { end });
        }
        start += copy * copies;
    }
    Ok(out)
}

/// The schedule behind an η stream, looking through ψ.
pub fn stream_schedule(x: &DigitStream) -> Option<Arc<ConstructionSchedule>> {
    match x.source() {
        Source::Eta(s) => Some(s.clone()),
        Source::Psi { inner, .. } => stream_schedule(inner),
        _ => None,
    }
}

/// How far the plain counts of two streams drift apart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountDrift {
    pub block: Block,
    /// `max_n |N_n(B, y) - N_n(B, x)|`.
    pub max_abs: u64,
    /// First `n` where the maximum is reached.
    pub first_at_max: u64,
    /// Last `n` where the difference changed.
    pub last_change: u64,
    pub final_diff: i64,
}

/// Counts every block in `x` and `y` in lockstep over `1..=horizon`
/// (occurrences completed by position `n`).
pub fn count_drift(x: &DigitStream, y: &DigitStream, blocks: &[Block], horizon: u64) -> Result<Vec<CountDrift>> {
    let mut cx = CounterState::new(blocks, ArithmeticProgression::identity(), u64::MAX)?;
    let mut cy = CounterState::new(blocks, ArithmeticProgression::identity(), u64::MAX)?;
    let mut xc = x.cursor(1)?;
    let mut yc = y.cursor(1)?;
    let mut out: Vec<CountDrift> = blocks
        .iter()
        .map(|b| CountDrift {
            block: b.clone(),
            max_abs: 0,
            first_at_max: 0,
            last_change: 0,
            final_diff: 0,
        })
        .collect();
    for n in 1..=horizon {
        cx.push(xc.next_digit()?)?;
        cy.push(yc.next_digit()?)?;
        for (i, drift) in out.iter_mut().enumerate() {
            let diff = cy.counts()[i] as i64 - cx.counts()[i] as i64;
            if diff != drift.final_diff {
                drift.last_change = n;
                drift.final_diff = diff;
            }
            if diff.unsigned_abs() > drift.max_abs {
                drift.max_abs = diff.unsigned_abs();
                drift.first_at_max = n;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::count_occurrences;
    use num_traits::One;

    fn blk(d: &[u64]) -> Block {
        Block::new(d.to_vec())
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn kmp_counts_overlaps() {
        let mut k = Kmp::new(&blk(&[0, 0])).unwrap();
        let hits = [0, 0, 0].iter().filter(|&&d| k.step(d)).count();
        assert_eq!(hits, 2);
        let mut k = Kmp::new(&blk(&[1, 0, 1])).unwrap();
        let hits = [1, 0, 1, 0, 1, 1, 0, 1].iter().filter(|&&d| k.step(d)).count();
        assert_eq!(hits, 3);
    }

    #[test]
    fn periodic_stream_ratio_one() {
        let x = DigitStream::explicit(vec![], vec![0, 1]);
        let q = BasicSequence::constant(2).unwrap();
        let s = count_stream(&x, &q, &[blk(&[0])], Mode::Plain, 10_000, &[], CountOptions::default()).unwrap();
        let row = s.last_for(&blk(&[0])).unwrap();
        assert_eq!(row.count, 5000);
        assert_eq!(row.denominator, 5000.0);
        assert_eq!(row.ratio, Some(1.0));
    }

    #[test]
    fn streaming_matches_direct_scan() {
        let q = BasicSequence::constant(3).unwrap();
        let x = DigitStream::random_uniform(5, q.clone());
        let blocks = vec![blk(&[0]), blk(&[1, 2]), blk(&[0, 0, 1])];
        let y = Block::new(x.prefix(2002).unwrap());
        for mode in [Mode::Plain, Mode::ApI { m: 3, r: 2 }, Mode::ApI { m: 2, r: 0 }] {
            let s = count_stream(&x, &q, &blocks, mode, 2000, &[500], CountOptions::default()).unwrap();
            for b in &blocks {
                for row in s.for_block(b) {
                    let prefix = Block::new(y.digits()[..(row.n as usize + b.len() - 1)].to_vec());
                    let ap = mode.progression();
                    assert_eq!(row.count, count_occurrences(b, &prefix, ap.m, ap.r).unwrap().count);
                }
            }
        }
    }

    #[test]
    fn uniform_random_ratio_near_one() {
        let q = BasicSequence::constant(10).unwrap();
        let x = DigitStream::random_uniform(2024, q.clone());
        let s = count_stream(&x, &q, &[blk(&[7])], Mode::Plain, 1_000_000, &[], CountOptions::default()).unwrap();
        let r = s.last_for(&blk(&[7])).unwrap().ratio.unwrap();
        assert!((r - 1.0).abs() < 0.02, "{r}");
    }

    #[test]
    fn chunked_equals_sequential() {
        let q = BasicSequence::constant(2).unwrap();
        let x = DigitStream::random_uniform(9, q);
        let blocks = vec![blk(&[1, 1]), blk(&[0, 1, 0])];
        for mode in [Mode::Plain, Mode::ApI { m: 4, r: 3 }, Mode::ApII { m: 3, r: 0 }] {
            let a = count_sequential(&x, &blocks, mode, 5000).unwrap();
            let b = count_chunked(&x, &blocks, mode, 5000, 7).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn predicted_limits() {
        let c = vec![rat(2, 1), rat(1, 1), rat(2, 1)];
        assert_eq!(predicted_limit(&c, 4, 1, Mode::Plain).unwrap(), rat(4, 5));
        assert_eq!(predicted_limit(&c, 4, 2, Mode::Plain).unwrap(), BigRational::one());
        assert_eq!(predicted_limit(&c, 4, 3, Mode::Plain).unwrap(), BigRational::one());
        let c11: Vec<BigRational> = [4, 4, 1, 1, 4, 4, 1, 1].iter().map(|&v| rat(v, 1)).collect();
        assert_eq!(predicted_limit(&c11, 24, 2, Mode::Plain).unwrap(), rat(24, 46));
        assert_eq!(predicted_limit(&c11, 24, 2, Mode::ApII { m: 2, r: 0 }).unwrap(), BigRational::one());
        assert_eq!(predicted_limit(&c11, 24, 2, Mode::ApII { m: 2, r: 1 }).unwrap(), BigRational::one());
    }

    #[test]
    fn ratio_series_identity() {
        let q = BasicSequence::constant(2).unwrap();
        let x = DigitStream::explicit(vec![], vec![0, 1]);
        let s = ratio_normality_series(&x, &q, &blk(&[0]), &blk(&[0]), 1000, &[10, 100]).unwrap();
        assert!(s.iter().all(|r| r.3 == Some(1.0)));
        let s = ratio_normality_series(&x, &q, &blk(&[0]), &blk(&[1]), 1000, &[]).unwrap();
        assert_eq!(s.last().unwrap().3, Some(1.0));
        assert!(ratio_normality_series(&x, &q, &blk(&[0]), &blk(&[0, 1]), 10, &[]).is_err());
    }

    #[test]
    fn discrepancy_examples() {
        let q = BasicSequence::constant(2).unwrap();
        let zero = DigitStream::explicit(vec![], vec![0]);
        assert_eq!(distribution_discrepancy(&zero, &q, 100, 20).unwrap().d_star, 1.0);
        let alt = DigitStream::explicit(vec![], vec![0, 1]);
        assert!(distribution_discrepancy(&alt, &q, 1000, 30).unwrap().d_star > 0.3);
        let grow = BasicSequence::gamma(std::sync::Arc::new(
            crate::schedule::ConstructionSchedule::new(crate::schedule::TupleSource::Listed {
                tuples: vec![],
                tail: Some(crate::schedule::TailRule { b0: 2, b_step: 1, l: 100, block: blk(&[0]) }),
            })
            .unwrap(),
        ));
        let x = DigitStream::random_uniform(11, grow.clone());
        let d = distribution_discrepancy(&x, &grow, 10_000, 8).unwrap();
        assert!(d.d_star < 0.05, "{d:?}");
    }
}
