//! Presets that wire schedules, Ξ-rescaled bases and ψ-images together,
//! desk-scale schedules with their growth-condition report, and the
//! manifest-driven experiment runner.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::blocks::Block;
use crate::descriptor::{parse_blocks, DescriptorParser};
use crate::digits::DigitStream;
use crate::error::{Error, Result};
use crate::schedule::{BlockRule, ConstructionSchedule, ScaledProfile, TupleSource};
use crate::sequences::BasicSequence;
use crate::stats::{
    boundary_checkpoints, count_stream, geometric_checkpoints, predicted_limit, stream_schedule, CountOptions, Mode,
    RatioRow,
};

/// Named constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetKind {
    /// `ζ_t = η(D_t, X_t)` over `R_t = Γ(D_t, X_t)` with `X_i = C_{it,i!}`.
    Factorial,
    /// Ξ(R_t, (t!, 1, ..., 1), t!): normal of order `t` only.
    TopOrder,
    /// `t = 2k²`, `c_j = 2k` on two runs of length `k`, `d = 2k²(k+1)`:
    /// type II normal of order `k` along `m = k` without being normal of order `k`.
    ApDichotomy,
    /// `c = (2, 1, 2)`, `d = 4`: normal of orders 2 and 3 but not 1.
    SkipOrderOne,
    /// ψ_{R_1,Q}(ζ_1) for a user-supplied `Q`.
    RatioPsi,
}

impl PresetKind {
    pub const ALL: [PresetKind; 5] = [
        PresetKind::Factorial,
        PresetKind::TopOrder,
        PresetKind::ApDichotomy,
        PresetKind::SkipOrderOne,
        PresetKind::RatioPsi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PresetKind::Factorial => "factorial",
            PresetKind::TopOrder => "top-order",
            PresetKind::ApDichotomy => "ap-dichotomy",
            PresetKind::SkipOrderOne => "skip-order-one",
            PresetKind::RatioPsi => "ratio-psi",
        }
    }

    pub fn default_param(self) -> u64 {
        match self {
            PresetKind::Factorial => 2,
            PresetKind::TopOrder => 3,
            PresetKind::ApDichotomy => 2,
            PresetKind::SkipOrderOne | PresetKind::RatioPsi => 1,
        }
    }
}

impl fmt::Display for PresetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PresetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PresetKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::Descriptor(format!("unknown preset {s:?}")))
    }
}

/// Exact parameters or a desk-scale profile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Scale {
    Exact,
    Scaled(ScaledProfile),
}

/// One predicted limit of `N/Q^{(k)}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PredictedLimit {
    pub mode: Mode,
    pub k: u64,
    #[serde(serialize_with = "ser_display")]
    pub value: BigRational,
}

fn ser_display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn ser_display_vec<T: fmt::Display, S: serde::Serializer>(v: &[T], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

/// Descriptor-level description of a preset; enough to rebuild every object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PresetSpec {
    pub kind: PresetKind,
    pub param: u64,
    pub scale: Scale,
    /// The schedule body shared by `ζ` and `R`.
    pub schedule: String,
    /// The base sequence `P` (`R_t` or its desk-scale analogue).
    pub p: String,
    /// The target sequence `Q`.
    pub q: String,
    /// The digit stream whose statistics are studied.
    pub x: String,
    #[serde(serialize_with = "ser_display_vec")]
    pub c: Vec<BigRational>,
    pub d: u64,
    pub limits: Vec<PredictedLimit>,
    pub warnings: Vec<String>,
}

/// A preset with its objects built.
pub struct Preset {
    pub spec: PresetSpec,
    pub schedule: Arc<ConstructionSchedule>,
    pub p: BasicSequence,
    pub q: BasicSequence,
    pub x: DigitStream,
}

fn factorial(n: u64) -> Result<u64> {
    (1..=n)
        .try_fold(1u64, |a, x| a.checked_mul(x))
        .ok_or_else(|| Error::Guard(format!("{n}! overflows")))
}

fn int(v: u64) -> BigRational {
    BigRational::from_integer(v.into())
}

/// The `c` vector of the order-`k` AP dichotomy: `t = 2k²`, `c_j = 2k` for
/// `j < k` and `k² <= j < k² + k`, `1` otherwise.
pub fn ap_dichotomy_coefficients(k: u64) -> (Vec<BigRational>, u64) {
    let t = 2 * k * k;
    let c = (0..t)
        .map(|j| if j < k || (k * k..k * k + k).contains(&j) { int(2 * k) } else { int(1) })
        .collect();
    (c, 2 * k * k * (k + 1))
}

/// `c = (t!, 1, ..., 1)`, `d = t!`.
pub fn top_order_coefficients(t: u64) -> Result<(Vec<BigRational>, u64)> {
    let f = factorial(t)?;
    let mut c = vec![int(1); t as usize];
    c[0] = int(f);
    Ok((c, f))
}

/// Serializes a profile into a schedule descriptor body.
pub fn profile_descriptor(p: &ScaledProfile) -> String {
    let list = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
    let mut s = format!(
        "preset=scaled;b0={};bstep={};widths={};first={};growth={}",
        p.b0,
        p.b_step,
        list(&p.widths),
        p.first_segment,
        p.growth
    );
    if !p.reps_override.is_empty() {
        s.push_str(&format!(";reps={}", list(&p.reps_override)));
    }
    s
}

/// Smallest width `w >= k + 1` with `m! | w`.
fn width_for(k: u64, m: u64) -> Result<u64> {
    let f = factorial(m)?;
    Ok((k + 1).div_ceil(f) * f)
}

/// The desk-scale profile used when a preset is built without exact
/// parameters. Bases are multiples of the lcm of the numerators of `c` and
/// large enough that ψ never clamps a digit into `{0, 1}`.
pub fn default_profile(kind: PresetKind, param: u64) -> Result<ScaledProfile> {
    Ok(match kind {
        PresetKind::Factorial | PresetKind::RatioPsi => ScaledProfile::default(),
        PresetKind::SkipOrderOne => ScaledProfile {
            b0: 6,
            b_step: 2,
            widths: vec![4],
            first_segment: 100_000,
            growth: 3,
            reps_override: Vec::new(),
        },
        PresetKind::ApDichotomy => {
            let k = param;
            ScaledProfile {
                b0: 6 * k,
                b_step: 2 * k,
                widths: vec![width_for(k, k)?],
                first_segment: 2_100_000,
                growth: 3,
                reps_override: Vec::new(),
            }
        }
        PresetKind::TopOrder => {
            let f = factorial(param)?;
            ScaledProfile {
                b0: 3 * f,
                b_step: f,
                widths: vec![width_for(param, 2)?],
                first_segment: 1_000_000,
                growth: 3,
                reps_override: Vec::new(),
            }
        }
    })
}

fn limits_for(c: &[BigRational], d: u64, modes: &[(Mode, u64)]) -> Vec<PredictedLimit> {
    modes
        .iter()
        .filter_map(|&(mode, k)| {
            predicted_limit(c, d, k, mode).ok().map(|value| PredictedLimit { mode, k, value })
        })
        .collect()
}

/// Describes a preset. `param` is `t` (factorial, top-order), `k`
/// (ap-dichotomy) or ignored; `q` is the target descriptor for ratio-psi.
pub fn preset_spec(kind: PresetKind, param: Option<u64>, scale: Scale, q: Option<&str>) -> Result<PresetSpec> {
    let param = param.unwrap_or(kind.default_param());
    let warnings = Vec::new();
    let t_for_schedule = match kind {
        PresetKind::Factorial => {
            if param < 2 {
                return Err(Error::InvalidParameter("factorial preset needs t >= 2".into()));
            }
            param
        }
        PresetKind::TopOrder => {
            if param < 3 {
                return Err(Error::InvalidParameter(
                    "top-order preset needs t >= 3 (t = 2 gives d = 2, below the solution domain d >= t + 1)".into(),
                ));
            }
            param
        }
        PresetKind::ApDichotomy => {
            if param < 2 {
                return Err(Error::InvalidParameter("ap-dichotomy preset needs k >= 2".into()));
            }
            2 * param * param
        }
        PresetKind::SkipOrderOne => 2,
        PresetKind::RatioPsi => 1,
    };
    let schedule = match &scale {
        Scale::Exact => format!("preset=factorial;t={t_for_schedule}"),
        Scale::Scaled(p) => profile_descriptor(p),
    };
    let p = format!("gamma:{schedule}");
    let zeta = format!("eta:{schedule}");
    let (c, d) = match kind {
        PresetKind::Factorial | PresetKind::RatioPsi => (Vec::new(), 0),
        PresetKind::TopOrder => top_order_coefficients(param)?,
        PresetKind::ApDichotomy => ap_dichotomy_coefficients(param),
        PresetKind::SkipOrderOne => (vec![int(2), int(1), int(2)], 4),
    };
    let c_text = c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
    let (q, x) = match kind {
        PresetKind::Factorial => (p.clone(), zeta),
        PresetKind::RatioPsi => {
            let q = q
                .map(str::to_string)
                .unwrap_or_else(|| "gamma:preset=scaled;b0=3;bstep=1;widths=3;first=64;growth=8".into());
            (q.clone(), format!("psi:x=[{zeta}];p=[{p}];q=[{q}]"))
        }
        _ => {
            let q = format!("xi:base=[{p}];c={c_text};d={d}");
            (q.clone(), format!("psi:x=[{zeta}];p=[{p}];q=[{q}]"))
        }
    };
    let t = c.len() as u64;
    let mut modes: Vec<(Mode, u64)> = (1..=t).map(|k| (Mode::Plain, k)).collect();
    match kind {
        PresetKind::ApDichotomy => {
            let k = param;
            for r in 0..k {
                modes.push((Mode::ApI { m: k, r }, k));
                modes.push((Mode::ApII { m: k, r }, k));
            }
        }
        PresetKind::TopOrder | PresetKind::SkipOrderOne => {
            for k in 1..=t {
                for r in 0..2 {
                    modes.push((Mode::ApI { m: 2, r }, k));
                    modes.push((Mode::ApII { m: 2, r }, k));
                }
            }
        }
        _ => {}
    }
    let limits = limits_for(&c, d, &modes);
    Ok(PresetSpec {
        kind,
        param,
        scale,
        schedule,
        p,
        q,
        x,
        c,
        d,
        limits,
        warnings,
    })
}

impl Preset {
    pub fn build(spec: PresetSpec) -> Result<Self> {
        let parser = DescriptorParser::new();
        let schedule = parser.schedule(&spec.schedule)?;
        let p = parser.sequence(&spec.p)?;
        let q = parser.sequence(&spec.q)?;
        let x = parser.stream(&spec.x)?;
        Ok(Preset { spec, schedule, p, q, x })
    }
}

/// Describes and builds a preset in one step.
pub fn preset(kind: PresetKind, param: Option<u64>, scaled: bool, q: Option<&str>) -> Result<Preset> {
    let param_v = param.unwrap_or(kind.default_param());
    let scale = if scaled { Scale::Scaled(default_profile(kind, param_v)?) } else { Scale::Exact };
    Preset::build(preset_spec(kind, Some(param_v), scale, q)?)
}

/// A positive ratio kept as an unreduced fraction; comparisons
/// cross-multiply so million-bit values never need a gcd.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactRatio {
    pub num: BigUint,
    pub den: BigUint,
}

impl ExactRatio {
    pub fn new(num: BigUint, den: BigUint) -> Option<Self> {
        (!den.is_zero()).then_some(ExactRatio { num, den })
    }

    pub fn log2(&self) -> f64 {
        fn lg(x: &BigUint) -> f64 {
            let bits = x.bits();
            if bits <= 64 {
                return x.to_f64().unwrap_or(0.0).log2();
            }
            let top = (x >> (bits - 64)).to_f64().unwrap_or(0.0);
            top.log2() + (bits - 64) as f64
        }
        if self.num.is_zero() {
            return f64::NEG_INFINITY;
        }
        lg(&self.num) - lg(&self.den)
    }

    pub fn cmp_ratio(&self, other: &ExactRatio) -> std::cmp::Ordering {
        (&self.num * &other.den).cmp(&(&other.num * &self.den))
    }
}

impl Serialize for ExactRatio {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.log2())
    }
}

/// Shape of a ratio sequence over the tested indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Trend {
    StrictlyDecreasing,
    NonDecreasing,
    Mixed,
    /// Fewer than two defined values.
    Insufficient,
}

fn trend(values: &[&ExactRatio]) -> Trend {
    if values.len() < 2 {
        return Trend::Insufficient;
    }
    let orders: Vec<_> = values.windows(2).map(|w| w[1].cmp_ratio(w[0])).collect();
    if orders.iter().all(|o| o.is_lt()) {
        Trend::StrictlyDecreasing
    } else if orders.iter().all(|o| o.is_ge()) {
        Trend::NonDecreasing
    } else {
        Trend::Mixed
    }
}

/// The three growth ratios at one index `i` and order `k`. Values serialize
/// as base-2 logarithms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoodRow {
    pub i: usize,
    pub k: u64,
    /// `b_i^k / ((ε_{i-1} - ε_i) |X_i|)`.
    pub r1: Option<ExactRatio>,
    /// `(l_{i-1}|X_{i-1}|) / (l_i|X_i|) · i · b_i^k`; undefined when
    /// `l_{i-1}|X_{i-1}| = 0`.
    pub r2: Option<ExactRatio>,
    /// `|X_{i+1}| / (l_i |X_i|) · b_i^k`.
    pub r3: Option<ExactRatio>,
}

/// Per-order verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GoodVerdict {
    pub k: u64,
    pub r1: Trend,
    pub r2: Trend,
    pub r3: Trend,
}

/// The smallest `ε` for which `C_{b,w}` is provably normal of type I at
/// `(k, m)`: `(m + max(k, m)) / w`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EpsThreshold {
    pub i: usize,
    pub w: u64,
    #[serde(serialize_with = "ser_display")]
    pub threshold: BigRational,
    #[serde(serialize_with = "ser_display")]
    pub eps: BigRational,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoodReport {
    pub k_max: u64,
    pub m: u64,
    pub first: usize,
    pub last: usize,
    pub rows: Vec<GoodRow>,
    pub verdicts: Vec<GoodVerdict>,
    pub thresholds: Vec<EpsThreshold>,
    /// The type I ε threshold fails to decrease somewhere in the range.
    pub threshold_stalls: bool,
}

impl GoodReport {
    /// All three ratios strictly decrease for every order.
    pub fn all_decreasing(&self) -> bool {
        self.verdicts.iter().all(|v| {
            v.r1 == Trend::StrictlyDecreasing && v.r2 == Trend::StrictlyDecreasing && v.r3 == Trend::StrictlyDecreasing
        })
    }

    pub fn r3_decreasing(&self) -> bool {
        self.verdicts.iter().all(|v| v.r3 == Trend::StrictlyDecreasing)
    }
}

fn pow(b: u64, k: u64) -> BigUint {
    BigUint::from(b).pow(k as u32)
}

/// Computes the growth ratios for `i` in `first..=last` and `k <= k_max`.
/// `m` is the progression modulus the schedule must support; it only
/// enters the ε threshold.
pub fn check_good_conditions(
    schedule: &ConstructionSchedule,
    k_max: u64,
    m: u64,
    first: usize,
    last: usize,
) -> Result<GoodReport> {
    if first == 0 || last < first || k_max == 0 || m == 0 {
        return Err(Error::InvalidParameter("need 1 <= first <= last and k, m >= 1".into()));
    }
    let lo = first.saturating_sub(1).max(1);
    let tuples: BTreeMap<usize, _> = (lo..=last + 1)
        .map(|i| schedule.tuple(i).map(|t| (i, t)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for k in 1..=k_max {
        for i in first..=last {
            let t = &tuples[&i];
            let x_len = t.block.len();
            let seg = &t.l * &x_len;
            let bk = pow(t.b, k);
            let r1 = if i >= 2 {
                let delta = &tuples[&(i - 1)].eps - &t.eps;
                if delta.is_positive() && !x_len.is_zero() {
                    let (dn, dd) = (delta.numer().to_biguint(), delta.denom().to_biguint());
                    match (dn, dd) {
                        (Some(dn), Some(dd)) => ExactRatio::new(&bk * dd, dn * &x_len),
                        _ => None,
                    }
                } else {
                    None
                }
            } else {
                None
            };
            let r2 = if i >= 2 {
                let prev = &tuples[&(i - 1)];
                let prev_seg = &prev.l * prev.block.len();
                if prev_seg.is_zero() || seg.is_zero() {
                    None
                } else {
                    ExactRatio::new(prev_seg * BigUint::from(i) * &bk, seg.clone())
                }
            } else {
                None
            };
            let r3 = if seg.is_zero() {
                None
            } else {
                ExactRatio::new(tuples[&(i + 1)].block.len() * &bk, seg.clone())
            };
            rows.push(GoodRow { i, k, r1, r2, r3 });
        }
    }
    let verdicts = (1..=k_max)
        .map(|k| {
            let of = |f: fn(&GoodRow) -> &Option<ExactRatio>| {
                let v: Vec<&ExactRatio> = rows.iter().filter(|r| r.k == k).filter_map(|r| f(r).as_ref()).collect();
                trend(&v)
            };
            GoodVerdict {
                k,
                r1: of(|r| &r.r1),
                r2: of(|r| &r.r2),
                r3: of(|r| &r.r3),
            }
        })
        .collect();
    let mut thresholds = Vec::new();
    for i in first..=last {
        let t = &tuples[&i];
        if let BlockRule::Cbw { w, .. } = t.block {
            thresholds.push(EpsThreshold {
                i,
                w,
                threshold: BigRational::new((m + k_max.max(m)).into(), w.into()),
                eps: t.eps.clone(),
            });
        }
    }
    let threshold_stalls = thresholds.windows(2).any(|w| w[1].threshold >= w[0].threshold);
    Ok(GoodReport {
        k_max,
        m,
        first,
        last,
        rows,
        verdicts,
        thresholds,
        threshold_stalls,
    })
}

/// A desk-scale schedule with its growth report.
pub struct ScaledSchedule {
    pub profile: ScaledProfile,
    pub descriptor: String,
    pub schedule: Arc<ConstructionSchedule>,
    pub report: GoodReport,
}

impl ScaledSchedule {
    /// The tail condition `|X_{i+1}| / (l_i|X_i|) = o(b_i^{-k})` is the one a
    /// desk-scale schedule can track; the others need super-geometric growth.
    pub fn accepted(&self) -> bool {
        self.report.r3_decreasing()
    }

    /// Digits in the first `i` segments.
    pub fn total_len(&self, i: usize) -> Result<BigUint> {
        self.schedule.cumulative(i)
    }
}

/// Builds a profile's schedule and reports the growth ratios for
/// `i in 2..=last`, orders `k <= k_max`.
pub fn scaled_schedule(profile: ScaledProfile, k_max: u64, last: usize) -> Result<ScaledSchedule> {
    let schedule = Arc::new(ConstructionSchedule::new(TupleSource::Scaled(profile.clone()))?);
    let report = check_good_conditions(&schedule, k_max, 1, 2, last)?;
    Ok(ScaledSchedule {
        descriptor: profile_descriptor(&profile),
        profile,
        schedule,
        report,
    })
}

/// Windowed minima of `q_n` over `1..=upto`, for checking growth of a
/// sequence that should be infinite in limit on the accessed prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GrowthReport {
    pub window_minima: Vec<String>,
    pub non_decreasing: bool,
    pub grew: bool,
}

pub fn infinite_in_limit_report(q: &BasicSequence, upto: u64, windows: u64) -> Result<GrowthReport> {
    let windows = windows.clamp(1, upto.max(1));
    let mut cur = q.cursor(1)?;
    let size = upto.div_ceil(windows);
    let mut minima = Vec::new();
    let mut n = 0;
    while n < upto {
        let mut best: Option<crate::sequences::Radix> = None;
        for _ in 0..size.min(upto - n) {
            let v = cur.next_q()?;
            best = Some(match best {
                Some(b) if b.log2() <= v.log2() => b,
                _ => v,
            });
            n += 1;
        }
        minima.push(best.expect("window is nonempty"));
    }
    let non_decreasing = minima.windows(2).all(|w| w[0].log2() <= w[1].log2());
    let grew = minima.len() >= 2 && minima[0].log2() < minima[minima.len() - 1].log2();
    Ok(GrowthReport {
        window_minima: minima.iter().map(|r| r.to_string()).collect(),
        non_decreasing,
        grew,
    })
}

/// Checkpoint policy for experiments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum CheckpointPolicy {
    Geometric,
    /// Copy ends of the schedule behind the stream (and the horizon).
    Boundaries,
    Both,
    List(Vec<u64>),
}

impl FromStr for CheckpointPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "geometric" => CheckpointPolicy::Geometric,
            "boundaries" => CheckpointPolicy::Boundaries,
            "both" | "geometric+boundaries" => CheckpointPolicy::Both,
            _ => match s.strip_prefix("list:") {
                Some(v) => CheckpointPolicy::List(
                    v.split(',')
                        .map(|x| x.trim().parse().map_err(|_| Error::Descriptor(format!("bad checkpoint {x:?}"))))
                        .collect::<Result<_>>()?,
                ),
                None => return Err(Error::Descriptor(format!("unknown checkpoint policy {s:?}"))),
            },
        })
    }
}

/// A parsed experiment manifest (`key = value` lines, `#` comments).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub entries: BTreeMap<String, String>,
}

const MANIFEST_KEYS: &[&str] = &[
    "name",
    "preset",
    "param",
    "scale",
    "x",
    "q",
    "c",
    "d",
    "blocks",
    "modes",
    "horizon",
    "checkpoints",
    "copies_per_segment",
    "min_denominator",
    "seed",
];

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Descriptor(format!("manifest line {}: expected key = value", no + 1)))?;
            let k = k.trim().to_string();
            if !MANIFEST_KEYS.contains(&k.as_str()) {
                return Err(Error::Descriptor(format!("manifest line {}: unknown key {k:?}", no + 1)));
            }
            let v = v.trim();
            let v = v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v);
            entries.insert(k, v.to_string());
        }
        Ok(Manifest { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn parse_u64(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| v.parse().map_err(|_| Error::Descriptor(format!("manifest {key}: expected an integer"))))
            .transpose()
    }
}

/// Predicted and observed values for one `(mode, block)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub mode: Mode,
    pub block: Block,
    pub predicted: Option<String>,
    pub predicted_f64: Option<f64>,
    pub final_n: u64,
    pub final_ratio: Option<f64>,
    /// `|ratio - predicted|` at the last three boundary checkpoints, oldest first.
    pub last_errors: Vec<f64>,
}

/// JSON summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub tool: String,
    pub version: String,
    pub manifest: BTreeMap<String, String>,
    pub x: String,
    pub q: String,
    pub seed: Option<u64>,
    pub horizon: u64,
    pub preset: Option<PresetSpec>,
    pub observations: Vec<Observation>,
    pub neglected_bound: f64,
    pub warnings: Vec<String>,
}

/// CSV plus summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bundle {
    pub csv: String,
    pub summary: Summary,
    #[serde(skip)]
    pub rows: Vec<RatioRow>,
}

impl Bundle {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("ratios.csv"), &self.csv)?;
        let json = serde_json::to_string_pretty(&self.summary).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(dir.join("summary.json"), json + "\n")?;
        Ok(())
    }
}

/// Rows as CSV with columns `n,mode,m,r,block,count,denominator,ratio`.
pub fn rows_to_csv(rows: &[RatioRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n", "mode", "m", "r", "block", "count", "denominator", "ratio"])
        .map_err(|e| Error::Io(e.to_string()))?;
    for row in rows {
        let ap = row.mode.progression();
        w.write_record([
            row.n.to_string(),
            row.mode.name().to_string(),
            ap.m.to_string(),
            ap.r.to_string(),
            row.block.to_string(),
            row.count.to_string(),
            row.denominator.to_string(),
            row.ratio.map(|r| r.to_string()).unwrap_or_default(),
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn parse_modes(s: &str) -> Result<Vec<Mode>> {
    s.split([';', ' '])
        .filter(|m| !m.trim().is_empty())
        .map(|m| m.trim().parse::<Mode>().map_err(|e| Error::Descriptor(e.to_string())))
        .collect()
}

fn parse_c(s: &str) -> Result<Vec<BigRational>> {
    s.split(',')
        .map(|v| v.trim().parse::<BigRational>().map_err(|_| Error::Descriptor(format!("bad coefficient {v:?}"))))
        .collect()
}

/// Runs the counts a manifest asks for. Modes run in parallel; output
/// order and content do not depend on scheduling.
pub fn run_experiment(manifest: &Manifest) -> Result<Bundle> {
    let horizon = manifest
        .parse_u64("horizon")?
        .ok_or_else(|| Error::Descriptor("manifest needs a horizon".into()))?;
    let blocks = parse_blocks(
        manifest.get("blocks").ok_or_else(|| Error::Descriptor("manifest needs blocks".into()))?,
        ';',
    )?;
    if blocks.is_empty() {
        return Err(Error::Descriptor("manifest lists no blocks".into()));
    }
    let modes = parse_modes(manifest.get("modes").unwrap_or("plain"))?;
    let policy: CheckpointPolicy = manifest.get("checkpoints").unwrap_or("geometric").parse()?;
    let per_segment = manifest.parse_u64("copies_per_segment")?.unwrap_or(64) as usize;
    let min_denominator = match manifest.get("min_denominator") {
        Some(v) => v.parse().map_err(|_| Error::Descriptor("manifest min_denominator: expected a number".into()))?,
        None => crate::stats::DEFAULT_MIN_DENOMINATOR,
    };
    let (spec, x_desc, q_desc) = match manifest.get("preset") {
        Some(name) => {
            let kind: PresetKind = name.parse()?;
            let param = manifest.parse_u64("param")?;
            let scaled = match manifest.get("scale").unwrap_or("scaled") {
                "scaled" => true,
                "exact" => false,
                other => return Err(Error::Descriptor(format!("manifest scale: unknown value {other:?}"))),
            };
            let pv = param.unwrap_or(kind.default_param());
            let scale = if scaled { Scale::Scaled(default_profile(kind, pv)?) } else { Scale::Exact };
            let spec = preset_spec(kind, Some(pv), scale, manifest.get("q"))?;
            let (x, q) = (spec.x.clone(), spec.q.clone());
            (Some(spec), x, q)
        }
        None => (
            None,
            manifest.get("x").ok_or_else(|| Error::Descriptor("manifest needs x or preset".into()))?.to_string(),
            manifest.get("q").ok_or_else(|| Error::Descriptor("manifest needs q or preset".into()))?.to_string(),
        ),
    };
    let (c, d) = match (&spec, manifest.get("c"), manifest.get("d")) {
        (_, Some(c), Some(d)) => (
            parse_c(c)?,
            d.parse().map_err(|_| Error::Descriptor("manifest d: expected an integer".into()))?,
        ),
        (Some(s), _, _) => (s.c.clone(), s.d),
        _ => (Vec::new(), 0),
    };
    let parser = DescriptorParser::new();
    let x = parser.stream(&x_desc)?;
    let q = parser.sequence(&q_desc)?;
    let schedule = stream_schedule(&x);
    let opts = CountOptions { min_denominator };

    let results: Vec<Result<(Mode, crate::stats::RatioSeries, Vec<u64>)>> = modes
        .par_iter()
        .map(|&mode| {
            let boundaries = match &schedule {
                Some(s) => boundary_checkpoints(s, horizon, mode, per_segment)?,
                None => Vec::new(),
            };
            let cps = match &policy {
                CheckpointPolicy::Geometric => geometric_checkpoints(horizon),
                CheckpointPolicy::Boundaries => boundaries.clone(),
                CheckpointPolicy::Both => {
                    let mut v = geometric_checkpoints(horizon);
                    v.extend(&boundaries);
                    v
                }
                CheckpointPolicy::List(v) => v.clone(),
            };
            let series = count_stream(&x, &q, &blocks, mode, horizon, &cps, opts)?;
            Ok((mode, series, boundaries))
        })
        .collect();
    let mut rows = Vec::new();
    let mut observations = Vec::new();
    let mut neglected = 0.0f64;
    let mut warnings = spec.as_ref().map(|s| s.warnings.clone()).unwrap_or_default();
    for res in results {
        let (mode, series, boundaries) = res?;
        neglected = neglected.max(series.neglected_bound);
        if let Some(m) = &series.psi_monitor {
            if m.witnesses == 0 {
                warnings.push(format!("{mode}: no ψ hypothesis witnesses in the counted prefix"));
            }
        }
        for block in &blocks {
            let k = block.len() as u64;
            let predicted = if c.is_empty() { None } else { predicted_limit(&c, d, k, mode).ok() };
            let pf = predicted.as_ref().and_then(|p| p.to_f64());
            let last = series.last_for(block);
            let mut last_errors: Vec<f64> = series
                .for_block(block)
                .filter(|r| boundaries.contains(&r.n))
                .filter_map(|r| Some((r.ratio? - pf?).abs()))
                .collect();
            if last_errors.len() > 3 {
                last_errors.drain(..last_errors.len() - 3);
            }
            observations.push(Observation {
                mode,
                block: block.clone(),
                predicted: predicted.map(|p| p.to_string()),
                predicted_f64: pf,
                final_n: last.map(|r| r.n).unwrap_or(0),
                final_ratio: last.and_then(|r| r.ratio),
                last_errors,
            });
        }
        rows.extend(series.rows);
    }
    let csv = rows_to_csv(&rows)?;
    let seed = manifest.parse_u64("seed")?;
    Ok(Bundle {
        csv,
        summary: Summary {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            manifest: manifest.entries.clone(),
            x: x_desc,
            q: q_desc,
            seed,
            horizon,
            preset: spec,
            observations,
            neglected_bound: neglected,
            warnings,
        },
        rows,
    })
}

/// `(2k)^k > 2k²(k+1)`, exactly.
pub fn dichotomy_inequality(k: u64) -> bool {
    pow(2 * k, k) > BigUint::from(2 * k * k * (k + 1))
}

/// `|ratio - target|` is non-increasing along `errors`, or every error is
/// below `settled`.
pub fn monotone_toward(errors: &[f64], settled: f64) -> bool {
    errors.windows(2).all(|w| w[1] <= w[0]) || errors.iter().all(|&e| e < settled)
}

/// `Σ_j` over all `r` of the ap-dichotomy sums, as exact checks: every
/// type II sum equals `d/m` and the plain order-`k` sum differs from `d`.
pub fn ap_dichotomy_identities(k: u64) -> Result<bool> {
    use crate::blocks::ApVariant;
    use crate::diophantine::{ap_product_sum, consecutive_product_sum};
    let (c, d) = ap_dichotomy_coefficients(k);
    let target = BigRational::new(d.into(), k.into());
    for r in 0..k {
        if ap_product_sum(&c, k, k, r, ApVariant::TypeII)? != target {
            return Ok(false);
        }
    }
    Ok(consecutive_product_sum(&c, k)? != int(d))
}

/// `S_t = t!` and `S_1 = t! + t - 1` for the top-order coefficients.
pub fn top_order_identities(t: u64) -> Result<bool> {
    use crate::diophantine::consecutive_product_sum;
    let (c, d) = top_order_coefficients(t)?;
    Ok(consecutive_product_sum(&c, t)? == int(d) && consecutive_product_sum(&c, 1)? == int(d + t - 1))
}

/// `1` as a rational, for callers comparing predicted limits.
pub fn one() -> BigRational {
    BigRational::one()
}

#[allow(dead_code)]
fn lcm_numerators(c: &[BigRational]) -> BigUint {
    c.iter()
        .filter_map(|v| v.numer().to_biguint())
        .fold(BigUint::one(), |a, b| a.lcm(&b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_wire_up() {
        let p = preset_spec(PresetKind::ApDichotomy, Some(2), Scale::Exact, None).unwrap();
        assert_eq!(p.c.len(), 8);
        assert_eq!(p.d, 24);
        let lim = |mode, k| p.limits.iter().find(|l| l.mode == mode && l.k == k).unwrap().value.clone();
        assert_eq!(lim(Mode::Plain, 2), BigRational::new(24.into(), 46.into()));
        assert_eq!(lim(Mode::ApII { m: 2, r: 0 }, 2), one());
        assert_eq!(lim(Mode::ApII { m: 2, r: 1 }, 2), one());

        let p = preset_spec(PresetKind::TopOrder, Some(3), Scale::Exact, None).unwrap();
        assert_eq!(p.c, vec![int(6), int(1), int(1)]);
        let lim = |k| p.limits.iter().find(|l| l.mode == Mode::Plain && l.k == k).unwrap().value.clone();
        assert_eq!(lim(1), BigRational::new(6.into(), 8.into()));
        assert_eq!(lim(2), BigRational::new(6.into(), 7.into()));
        assert_eq!(lim(3), one());

        let p = preset_spec(PresetKind::SkipOrderOne, None, Scale::Exact, None).unwrap();
        let plain: Vec<String> = p.limits.iter().filter(|l| l.mode == Mode::Plain).map(|l| l.value.to_string()).collect();
        assert_eq!(plain, ["4/5", "1", "1"]);
        assert!(preset_spec(PresetKind::TopOrder, Some(2), Scale::Exact, None).is_err());
    }

    #[test]
    fn exact_factorial_first_tuple() {
        let p = preset(PresetKind::Factorial, Some(2), false, None).unwrap();
        let t = p.schedule.tuple(6).unwrap();
        assert_eq!((t.b, t.k, t.m), (12, 6, 6));
        assert_eq!(t.eps, BigRational::new(1.into(), 6.into()));
        assert_eq!(t.block, BlockRule::Cbw { b: 12, w: 720 });
        assert_eq!(p.x.digit_at(1).unwrap(), 0);
    }

    #[test]
    fn scaled_presets_build_and_validate_digits() {
        for kind in PresetKind::ALL {
            let p = preset(kind, None, true, None).unwrap();
            let mut xc = p.x.cursor(1).unwrap();
            let mut qc = p.q.cursor(1).unwrap();
            for _ in 0..2000 {
                let (d, q) = (xc.next_digit().unwrap(), qc.next_q().unwrap());
                assert!(q.admits(d), "{kind}");
            }
        }
    }

    #[test]
    fn good_conditions_default_profile() {
        let s = scaled_schedule(ScaledProfile::default(), 2, 8).unwrap();
        assert!(s.accepted(), "{:?}", s.report.verdicts);
        let degenerate = ScaledProfile {
            reps_override: vec![4; 12],
            ..ScaledProfile::default()
        };
        let d = scaled_schedule(degenerate, 2, 8).unwrap();
        assert!(!d.accepted());
        assert!(d.report.verdicts.iter().all(|v| v.r2 != Trend::StrictlyDecreasing));
        let flat = ScaledProfile {
            widths: vec![4],
            ..ScaledProfile::default()
        };
        assert!(scaled_schedule(flat, 2, 8).unwrap().report.threshold_stalls);
    }

    /// log2 of the three ratios from the closed-form parameters
    /// `b_i = it`, `|X_i| = i! (it)^{i!}`, `l_i = 3^{i!} (i+1)^{i! i}`, `ε_i = 1/i`.
    fn factorial_oracle(t: u64, i: u64, k: u64) -> (f64, Option<f64>, f64) {
        let fact = |n: u64| (1..=n).map(|x| x as f64).product::<f64>();
        let lx = |i: u64| fact(i).log2() + fact(i) * ((i * t) as f64).log2();
        let ll = |i: u64| if i < 6 { None } else { Some(fact(i) * (3f64.log2() + i as f64 * ((i + 1) as f64).log2())) };
        let bk = k as f64 * ((i * t) as f64).log2();
        let r1 = bk + ((i * (i - 1)) as f64).log2() - lx(i);
        let r2 = ll(i - 1).map(|prev| prev + lx(i - 1) - ll(i).unwrap() - lx(i) + (i as f64).log2() + bk);
        let r3 = lx(i + 1) + bk - ll(i).unwrap() - lx(i);
        (r1, r2, r3)
    }

    #[test]
    fn good_conditions_exact_factorial() {
        for t in [1, 2] {
            let s = ConstructionSchedule::new(TupleSource::Factorial { t }).unwrap();
            let rep = check_good_conditions(&s, 2, 1, 6, 8).unwrap();
            for row in &rep.rows {
                let (r1, r2, r3) = factorial_oracle(t, row.i as u64, row.k);
                let close = |a: &Option<ExactRatio>, b: f64| (a.as_ref().unwrap().log2() - b).abs() < 1e-6 * b.abs().max(1.0);
                assert!(close(&row.r1, r1) && close(&row.r3, r3), "t={t} i={}", row.i);
                match r2 {
                    Some(v) => assert!(close(&row.r2, v)),
                    None => assert!(row.r2.is_none()),
                }
            }
            for v in &rep.verdicts {
                assert_eq!(v.r1, Trend::StrictlyDecreasing);
                assert_eq!(v.r2, Trend::StrictlyDecreasing);
                // l_i ignores t, so for t >= 2 the next block outgrows l_i|X_i|.
                let r3 = if t == 1 { Trend::StrictlyDecreasing } else { Trend::NonDecreasing };
                assert_eq!(v.r3, r3, "t={t}");
            }
        }
    }

    #[test]
    fn exact_identities() {
        assert!((3..=64).all(dichotomy_inequality));
        assert!(!dichotomy_inequality(2));
        assert!((2..=8).all(|k| ap_dichotomy_identities(k).unwrap()));
        assert!((3..=8).all(|t| top_order_identities(t).unwrap()));
    }

    #[test]
    fn manifest_round_trip() {
        let text = "# demo\nx = explicit:0,1\nq = constant:2\nblocks = (0);(1)\nmodes = plain apI:2:1\nhorizon = 1000\n";
        let m = Manifest::parse(text).unwrap();
        let a = run_experiment(&m).unwrap();
        let b = run_experiment(&m).unwrap();
        assert_eq!(a.csv, b.csv);
        assert!(a.csv.starts_with("n,mode,m,r,block,count,denominator,ratio\n"));
        let last = a.summary.observations.iter().find(|o| o.mode == Mode::Plain).unwrap();
        assert_eq!(last.final_ratio, Some(1.0));
        assert!(Manifest::parse("bogus = 1").is_err());
    }
}
