//! Text descriptors for basic sequences and digit streams.
//!
//! A descriptor is `kind:body`, where the body is a `;`-separated list of
//! `key=value` items (or a bare value). Nested descriptors go in brackets:
//! `lambda:base=[xi:base=[constant:6];c=2,1,2;d=4];m=2;r=1`.
//!
//! Sequences: `constant:5`, `explicit:3,2` (periodic) or
//! `explicit:prefix=..;period=..`, `gamma:<schedule>`,
//! `xi:base=[..];c=2,1/2,2;d=4`, `lambda:base=[..];m=2;r=1` or
//! `lambda:base=[..];idx=1,4,9`.
//!
//! Schedules (the body of `gamma:` and `eta:`):
//! `preset=factorial;t=2`,
//! `preset=scaled;b0=6;bstep=2;widths=4;first=100000;growth=3;reps=20,20`,
//! `preset=listed;l=2,1;b=3,4;x=(0,1)|(2);tail_b0=5;tail_step=1;tail_l=10;tail_x=(0)`.
//!
//! Digit streams: `eta:<schedule>`, `explicit:2,1` (periodic digits, optional
//! `e0=`), `random:seed=7;q=[..]`, `psi:x=[..];q=[..]` (optional `p=[..]`,
//! defaulting to the governing sequence of `x`), `upsilon:x=[..];m=2;r=1`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_rational::Ratio;

use crate::blocks::Block;
use crate::digits::{eta_stream, psi_transform, upsilon_extract, DigitStream};
use crate::error::{Error, Result};
use crate::schedule::{BlockRule, ConstructionSchedule, ScaledProfile, TailRule, Tuple, TupleSource};
use crate::sequences::{ArithmeticProgression, BasicSequence, IndexStream};

fn err(msg: impl Into<String>) -> Error {
    Error::Descriptor(msg.into())
}

/// Splits `s` on `sep` at bracket depth zero.
fn split_top(s: &str, sep: char) -> Result<Vec<&str>> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth < 0 {
                    return Err(err(format!("unbalanced ']' in {s:?}")));
                }
            }
            c if c == sep && depth == 0 => {
                out.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(err(format!("unbalanced '[' in {s:?}")));
    }
    out.push(&s[start..]);
    Ok(out)
}

fn unbracket(s: &str) -> &str {
    let s = s.trim();
    if !s.starts_with('[') {
        return s;
    }
    // Strip only when the opening bracket closes at the very end.
    let mut depth = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth == 0 {
                    return if i == s.len() - 1 { &s[1..i] } else { s };
                }
            }
            _ => {}
        }
    }
    s
}

/// A parsed `kind:body`.
struct Parsed<'a> {
    kind: &'a str,
    bare: Vec<&'a str>,
    keys: Vec<(&'a str, &'a str)>,
}

impl<'a> Parsed<'a> {
    fn new(desc: &'a str) -> Result<Self> {
        let desc = unbracket(desc);
        let (kind, body) = match desc.find(':') {
            Some(i) => (&desc[..i], &desc[i + 1..]),
            None => (desc, ""),
        };
        let mut bare = Vec::new();
        let mut keys = Vec::new();
        if !body.trim().is_empty() {
            for item in split_top(body, ';')? {
                let item = item.trim();
                if item.is_empty() {
                    continue;
                }
                match split_top(item, '=')?.as_slice() {
                    [v] => bare.push(*v),
                    [k, _, ..] => {
                        let eq = item.find('=').expect("split found '='");
                        keys.push((k.trim(), unbracket(&item[eq + 1..])));
                    }
                    [] => {}
                }
            }
        }
        Ok(Parsed { kind: kind.trim(), bare, keys })
    }

    fn get(&self, key: &str) -> Option<&'a str> {
        self.keys.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    fn need(&self, key: &str) -> Result<&'a str> {
        self.get(key).ok_or_else(|| err(format!("{}: missing key {key:?}", self.kind)))
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for (k, _) in &self.keys {
            if !allowed.contains(k) {
                return Err(err(format!("{}: unknown key {k:?}", self.kind)));
            }
        }
        Ok(())
    }
}

fn parse_u64(s: &str) -> Result<u64> {
    s.trim().parse().map_err(|_| err(format!("expected a non-negative integer, got {s:?}")))
}

fn parse_u64_list(s: &str) -> Result<Vec<u64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_u64).collect()
}

fn parse_ratio(s: &str) -> Result<Ratio<u64>> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let d = parse_u64(d)?;
            if d == 0 {
                return Err(err(format!("zero denominator in {s:?}")));
            }
            Ok(Ratio::new(parse_u64(n)?, d))
        }
        None => Ok(Ratio::from_integer(parse_u64(s)?)),
    }
}

/// Parses `(0,1)|(2)` into blocks.
pub fn parse_blocks(s: &str, sep: char) -> Result<Vec<Block>> {
    s.split(sep)
        .filter(|b| !b.trim().is_empty())
        .map(|b| b.trim().parse::<Block>().map_err(|_| err(format!("bad block {b:?}"))))
        .collect()
}

/// Builds sequences and streams from descriptors. Identical schedule
/// descriptors share one schedule (and its length cache).
#[derive(Default)]
pub struct DescriptorParser {
    schedules: Mutex<HashMap<String, Arc<ConstructionSchedule>>>,
}

impl DescriptorParser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schedule(&self, body: &str) -> Result<Arc<ConstructionSchedule>> {
        let key = unbracket(body).to_string();
        if let Some(s) = self.schedules.lock().expect("schedule cache").get(&key) {
            return Ok(s.clone());
        }
        let parsed = Parsed::new(&format!("schedule:{key}"))?.into_owned_schedule()?;
        let schedule = Arc::new(ConstructionSchedule::new(parsed).map_err(|e| match e {
            Error::Descriptor(m) => Error::Descriptor(m),
            other => err(format!("schedule {key:?}: {other}")),
        })?);
        self.schedules.lock().expect("schedule cache").insert(key, schedule.clone());
        Ok(schedule)
    }

    pub fn sequence(&self, desc: &str) -> Result<BasicSequence> {
        let p = Parsed::new(desc)?;
        match p.kind {
            "constant" => {
                let b = p.bare.first().ok_or_else(|| err("constant: missing base"))?;
                BasicSequence::constant(parse_u64(b)?).map_err(|e| err(e.to_string()))
            }
            "explicit" => {
                let (prefix, period) = explicit_parts(&p)?;
                BasicSequence::explicit(prefix, period).map_err(|e| err(e.to_string()))
            }
            "gamma" => {
                let body = unbracket(desc).split_once(':').map(|x| x.1).unwrap_or("");
                Ok(BasicSequence::gamma(self.schedule(body)?))
            }
            "xi" => {
                p.check_keys(&["base", "c", "d"])?;
                let base = self.sequence(p.need("base")?)?;
                let c = p.need("c")?.split(',').map(parse_ratio).collect::<Result<Vec<_>>>()?;
                let d = parse_u64(p.need("d")?)?;
                BasicSequence::xi_transform(base, c, d).map_err(|e| err(e.to_string()))
            }
            "lambda" => {
                p.check_keys(&["base", "m", "r", "idx"])?;
                let base = self.sequence(p.need("base")?)?;
                Ok(BasicSequence::lambda_subsequence(base, index_stream(&p)?))
            }
            other => Err(err(format!("unknown sequence kind {other:?}"))),
        }
    }

    pub fn stream(&self, desc: &str) -> Result<DigitStream> {
        let p = Parsed::new(desc)?;
        let stream = match p.kind {
            "eta" => {
                let body = unbracket(desc).split_once(':').map(|x| x.1).unwrap_or("");
                eta_stream(self.schedule(body)?)
            }
            "explicit" => {
                let (prefix, period) = explicit_parts(&p)?;
                DigitStream::explicit(prefix, period)
            }
            "random" => {
                p.check_keys(&["seed", "q", "e0"])?;
                let seed = parse_u64(p.need("seed")?)?;
                DigitStream::random_uniform(seed, self.sequence(p.need("q")?)?)
            }
            "psi" => {
                p.check_keys(&["x", "p", "q", "e0"])?;
                let x = self.stream(p.need("x")?)?;
                let from = match p.get("p") {
                    Some(d) => self.sequence(d)?,
                    None => x
                        .governing()
                        .ok_or_else(|| err("psi: inner stream has no governing sequence; give p=[..]"))?,
                };
                psi_transform(x, from, self.sequence(p.need("q")?)?)
            }
            "upsilon" => {
                p.check_keys(&["x", "m", "r", "idx", "e0"])?;
                upsilon_extract(self.stream(p.need("x")?)?, index_stream(&p)?)
            }
            other => return Err(err(format!("unknown stream kind {other:?}"))),
        };
        match p.get("e0") {
            Some(e0) => Ok(stream.with_integer_part(
                e0.trim().parse::<BigInt>().map_err(|_| err(format!("bad e0 {e0:?}")))?,
            )),
            None => Ok(stream),
        }
    }
}

fn explicit_parts(p: &Parsed) -> Result<(Vec<u64>, Vec<u64>)> {
    p.check_keys(&["prefix", "period", "e0"])?;
    let (prefix, period) = match (p.get("prefix"), p.get("period"), p.bare.first()) {
        (None, None, Some(v)) => (Vec::new(), parse_u64_list(v)?),
        (pre, per, None) => (
            pre.map(parse_u64_list).transpose()?.unwrap_or_default(),
            per.map(parse_u64_list).transpose()?.unwrap_or_default(),
        ),
        _ => return Err(err("explicit: give either a bare list or prefix=/period=")),
    };
    if prefix.is_empty() && period.is_empty() {
        return Err(err("explicit: empty list"));
    }
    Ok((prefix, period))
}

fn index_stream(p: &Parsed) -> Result<IndexStream> {
    if let Some(idx) = p.get("idx") {
        return IndexStream::explicit(parse_u64_list(idx)?).map_err(|e| err(e.to_string()));
    }
    let m = parse_u64(p.need("m")?)?;
    let r = parse_u64(p.get("r").unwrap_or("0"))?;
    Ok(IndexStream::Ap(ArithmeticProgression::new(m, r).map_err(|e| err(e.to_string()))?))
}

impl Parsed<'_> {
    fn into_owned_schedule(self) -> Result<TupleSource> {
        let preset = self.need("preset")?;
        match preset {
            "factorial" => {
                self.check_keys(&["preset", "t"])?;
                Ok(TupleSource::Factorial { t: parse_u64(self.need("t")?)? })
            }
            "scaled" => {
                self.check_keys(&["preset", "b0", "bstep", "widths", "first", "growth", "reps"])?;
                let mut prof = ScaledProfile::default();
                if let Some(v) = self.get("b0") {
                    prof.b0 = parse_u64(v)?;
                }
                if let Some(v) = self.get("bstep") {
                    prof.b_step = parse_u64(v)?;
                }
                if let Some(v) = self.get("widths") {
                    prof.widths = parse_u64_list(v)?;
                }
                if let Some(v) = self.get("first") {
                    prof.first_segment = parse_u64(v)?;
                }
                if let Some(v) = self.get("growth") {
                    prof.growth = parse_u64(v)?;
                }
                if let Some(v) = self.get("reps") {
                    prof.reps_override = parse_u64_list(v)?;
                }
                Ok(TupleSource::Scaled(prof))
            }
            "listed" => {
                self.check_keys(&["preset", "l", "b", "x", "tail_b0", "tail_step", "tail_l", "tail_x"])?;
                let l = parse_u64_list(self.need("l")?)?;
                let b = parse_u64_list(self.need("b")?)?;
                let x = parse_blocks(self.need("x")?, '|')?;
                if l.len() != b.len() || l.len() != x.len() {
                    return Err(err("listed schedule: l, b and x must have equal lengths"));
                }
                let tuples = l
                    .iter()
                    .zip(&b)
                    .zip(x)
                    .enumerate()
                    .map(|(i, ((&l, &b), x))| {
                        let eps = num_rational::BigRational::new(1.into(), (i as i64 + 2).into());
                        Tuple::simple(l, b, BlockRule::Explicit(x), eps, 1, 1)
                    })
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| err(e.to_string()))?;
                let tail = match self.get("tail_b0") {
                    None => None,
                    Some(b0) => Some(TailRule {
                        b0: parse_u64(b0)?,
                        b_step: parse_u64(self.get("tail_step").unwrap_or("1"))?,
                        l: parse_u64(self.need("tail_l")?)?,
                        block: self.get("tail_x").unwrap_or("(0)").parse().map_err(|_| err("bad tail_x"))?,
                    }),
                };
                Ok(TupleSource::Listed { tuples, tail })
            }
            other => Err(err(format!("unknown schedule preset {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequences_parse() {
        let p = DescriptorParser::new();
        let xi = p.sequence("xi:base=constant:6;c=2,1,2;d=4").unwrap();
        let v: Vec<String> = (1..=4).map(|n| xi.q_at(n).unwrap().to_string()).collect();
        assert_eq!(v, ["6", "3", "48", "3"]);
        let lam = p.sequence("lambda:base=[explicit:2,3];m=2;r=1").unwrap();
        assert_eq!(lam.q_at(5).unwrap().to_u64(), Some(2));
        let g = p.sequence("gamma:preset=listed;l=2;b=3;x=(0,1);tail_b0=4;tail_l=1").unwrap();
        let v: Vec<u64> = (1..=5).map(|n| g.q_at(n).unwrap().to_u64().unwrap()).collect();
        assert_eq!(v, [3, 3, 3, 3, 4]);
        let half = p.sequence("xi:base=[constant:4];c=1/2,1;d=3").unwrap();
        assert_eq!(half.q_at(3).unwrap().to_u64(), Some(8));
    }

    #[test]
    fn streams_parse() {
        let p = DescriptorParser::new();
        let x = p.stream("psi:x=[explicit:2,1];p=[constant:3];q=[explicit:3,2]").unwrap();
        assert_eq!(x.prefix(4).unwrap(), vec![2, 1, 2, 1]);
        let e = p.stream("eta:preset=listed;l=2,1;b=2,3;x=(0,1)|(2)").unwrap();
        assert_eq!(e.prefix(5).unwrap(), vec![0, 1, 0, 1, 2]);
        let u = p.stream("upsilon:x=[explicit:prefix=0,1,2,3,4,5;period=6];m=2;r=1").unwrap();
        assert_eq!(u.prefix(3).unwrap(), vec![0, 2, 4]);
        let r = p.stream("random:seed=3;q=[constant:10]").unwrap();
        assert!(r.prefix(100).unwrap().iter().all(|&d| d < 10));
    }

    #[test]
    fn schedules_are_shared() {
        let p = DescriptorParser::new();
        let a = p.schedule("preset=factorial;t=2").unwrap();
        let b = p.schedule("[preset=factorial;t=2]").unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn bad_descriptors() {
        let p = DescriptorParser::new();
        for d in ["", "nope:1", "constant:x", "xi:base=constant:6;c=2;d=4;zz=1", "lambda:base=[constant:3", "constant:1"] {
            assert!(matches!(p.sequence(d), Err(Error::Descriptor(_))), "{d}");
        }
        assert!(matches!(p.stream("psi:x=[explicit:1]"), Err(Error::Descriptor(_))));
    }
}
