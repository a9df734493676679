//! Frequency and phase planning for the four-output synthesizer.
//!
//! The synthesizer multiplies the reference by a fractional feedback divider
//! to reach the VCO, then divides the VCO by one fractional output divider per
//! channel:
//!
//! ```text
//! f_vco = f_in * (a_fb + b_fb / c_fb)
//! f_out = f_vco / (a_ms + b_ms / c_ms)
//! ```
//!
//! All arithmetic is exact. A plan is searched in a fixed order:
//!
//! 1. integer feedback with an integer output divider,
//! 2. integer feedback with an exact fractional output divider,
//! 3. exact fractional feedback found on a divisor lattice,
//! 4. integer feedback with the closest output divider under the
//!    denominator cap (Stern–Brocot descent).
//!
//! Within a stage the lowest VCO wins, then the smallest feedback denominator.

use crate::bridge::{Bridge, BridgeError};
use crate::factor;
use crate::rational::{best_approximation, int, ratio, round_half_away, Rational};
use crate::regmap::{merge_patches, RegisterPatch};
use crate::synth::SynthLayout;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

pub const DENOMINATOR_CAP: u32 = (1 << 30) - 1;
pub const P1_BITS: u32 = 18;
pub const P2_BITS: u32 = 30;
pub const P3_BITS: u32 = 30;
pub const CHANNELS: u8 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DividerError {
    #[error("fraction {b}/{c} is not a proper fraction with nonzero denominator")]
    InvalidFraction { b: u64, c: u64 },
    #[error("denominator {0} exceeds the cap {DENOMINATOR_CAP}")]
    DenominatorTooLarge(String),
    #[error("integer part {0} does not fit a divider")]
    IntegerTooLarge(String),
    #[error("{field} = {value} does not fit its register field")]
    FieldOverflow { field: &'static str, value: i128 },
    #[error("inconsistent divider encoding: {0}")]
    InconsistentEncoding(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("target {0} Hz is outside the supported output band")]
    OutOfBand(String),
    #[error("reference {0} Hz is outside the supported input range")]
    ReferenceOutOfRange(String),
    #[error("channel {0} does not exist")]
    InvalidChannel(u8),
    #[error("no divider pair reaches {0} Hz inside the VCO window")]
    Unsatisfiable(String),
    #[error("phase offset needs {steps} steps, limit is {limit}")]
    PhaseOutOfRange { steps: String, limit: u8 },
    #[error(transparent)]
    Divider(#[from] DividerError),
}

/// Legal range of a divider's integer part, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DividerRange {
    pub min: u32,
    pub max: u32,
}

impl DividerRange {
    pub fn contains(&self, d: &RationalDivider) -> bool {
        (self.min..=self.max).contains(&d.a)
    }

    fn contains_value(&self, v: &Rational) -> bool {
        v >= &int(self.min as i64) && v < &int(self.max as i64 + 1)
    }
}

/// Planner limits. Defaults model the evaluation board.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraints {
    pub f_in_min: Rational,
    pub f_in_max: Rational,
    pub f_out_min: Rational,
    pub f_out_max: Rational,
    pub vco_min: Rational,
    pub vco_max: Rational,
    pub feedback: DividerRange,
    pub output: DividerRange,
    pub denominator_max: u32,
    pub phase_steps_max: u8,
}

impl Default for Constraints {
    fn default() -> Self {
        Constraints {
            f_in_min: int(10_000_000),
            f_in_max: int(50_000_000),
            f_out_min: int(5_000_000),
            f_out_max: int(200_000_000),
            vco_min: int(2_200_000_000),
            vco_max: int(2_840_000_000),
            feedback: DividerRange { min: 8, max: 566 },
            output: DividerRange { min: 5, max: 2048 },
            denominator_max: DENOMINATOR_CAP,
            phase_steps_max: 127,
        }
    }
}

impl Constraints {
    pub fn vco_in_window(&self, f_vco: &Rational) -> bool {
        f_vco >= &self.vco_min && f_vco <= &self.vco_max
    }
}

/// `a + b/c` with `0 <= b < c`, `b/c` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RationalDivider {
    a: u32,
    b: u32,
    c: u32,
}

impl RationalDivider {
    pub fn new(a: u32, b: u32, c: u32) -> Result<Self, DividerError> {
        if c == 0 || b >= c {
            return Err(DividerError::InvalidFraction { b: b as u64, c: c as u64 });
        }
        let g = b.gcd(&c);
        let (b, c) = (b / g, c / g);
        if c > DENOMINATOR_CAP {
            return Err(DividerError::DenominatorTooLarge(c.to_string()));
        }
        Ok(RationalDivider { a, b, c })
    }

    pub fn integer(a: u32) -> Self {
        RationalDivider { a, b: 0, c: 1 }
    }

    pub fn from_value(v: &Rational) -> Result<Self, DividerError> {
        if v.is_negative() {
            return Err(DividerError::IntegerTooLarge(v.to_string()));
        }
        let a = v.floor().to_integer();
        let frac = v - v.floor();
        let a = a.to_u32().ok_or_else(|| DividerError::IntegerTooLarge(a.to_string()))?;
        let c = frac.denom().to_u32().filter(|c| *c <= DENOMINATOR_CAP);
        let c = c.ok_or_else(|| DividerError::DenominatorTooLarge(frac.denom().to_string()))?;
        let b = frac.numer().to_u32().expect("numerator below denominator");
        RationalDivider::new(a, b, c)
    }

    pub fn a(&self) -> u32 {
        self.a
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    pub fn c(&self) -> u32 {
        self.c
    }

    pub fn is_integer(&self) -> bool {
        self.b == 0
    }

    pub fn value(&self) -> Rational {
        Rational::new(
            BigInt::from(self.a as u64 * self.c as u64 + self.b as u64),
            BigInt::from(self.c),
        )
    }
}

impl std::fmt::Display for RationalDivider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.b == 0 {
            write!(f, "{}", self.a)
        } else {
            write!(f, "{} + {}/{}", self.a, self.b, self.c)
        }
    }
}

/// Register-level parameters of one divider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DividerRegisters {
    pub p1: u32,
    pub p2: u32,
    pub p3: u32,
}

pub fn encode_divider(d: &RationalDivider) -> Result<DividerRegisters, DividerError> {
    let (a, b, c) = (d.a as i128, d.b as i128, d.c as i128);
    let p1 = ((a * c + b) * 128).div_euclid(c) - 512;
    let p2 = (b * 128) % c;
    let p3 = c;
    let fits = |v: i128, bits: u32| v >= 0 && v < (1i128 << bits);
    if !fits(p1, P1_BITS) {
        return Err(DividerError::FieldOverflow { field: "P1", value: p1 });
    }
    if !fits(p2, P2_BITS) {
        return Err(DividerError::FieldOverflow { field: "P2", value: p2 });
    }
    if !fits(p3, P3_BITS) {
        return Err(DividerError::FieldOverflow { field: "P3", value: p3 });
    }
    Ok(DividerRegisters { p1: p1 as u32, p2: p2 as u32, p3: p3 as u32 })
}

/// Inverts [`encode_divider`]: the divider value is
/// `((P1 + 512) * P3 + P2) / (128 * P3)`.
pub fn decode_divider(
    regs: &DividerRegisters,
    range: &DividerRange,
) -> Result<RationalDivider, DividerError> {
    let bad = |m: String| DividerError::InconsistentEncoding(m);
    let DividerRegisters { p1, p2, p3 } = *regs;
    if p3 == 0 {
        return Err(bad("P3 is zero".into()));
    }
    if p1 >= 1 << P1_BITS || p2 >= 1 << P2_BITS || p3 >= 1 << P3_BITS {
        return Err(bad("field wider than its register".into()));
    }
    if p2 >= p3 {
        return Err(bad(format!("P2 {p2} not below P3 {p3}")));
    }
    let num = (p1 as u64 + 512) * p3 as u64 + p2 as u64;
    let value = Rational::new(BigInt::from(num), BigInt::from(128u64 * p3 as u64));
    let d = RationalDivider::from_value(&value)?;
    if !range.contains(&d) {
        return Err(bad(format!("value {d} outside [{}, {}]", range.min, range.max)));
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlanKind {
    IntegerRatio,
    FractionalOutput,
    FractionalFeedback,
    Approximate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyPlan {
    pub channel: u8,
    pub f_in: Rational,
    pub f_target: Rational,
    pub feedback: RationalDivider,
    pub output: RationalDivider,
    pub f_vco: Rational,
    pub f_achieved: Rational,
    pub rel_error: Rational,
    pub kind: PlanKind,
}

impl FrequencyPlan {
    pub fn is_exact(&self) -> bool {
        self.rel_error.is_zero()
    }

    /// Plan describing dividers already in place; the target is what they
    /// produce.
    pub fn from_dividers(channel: u8, f_in: &Rational, feedback: RationalDivider, output: RationalDivider) -> Self {
        let f_achieved = f_in * feedback.value() / output.value();
        let kind = match (feedback.is_integer(), output.is_integer()) {
            (true, true) => PlanKind::IntegerRatio,
            (true, false) => PlanKind::FractionalOutput,
            (false, _) => PlanKind::FractionalFeedback,
        };
        FrequencyPlan::build(channel, f_in, &f_achieved, feedback, output, kind)
    }

    fn build(
        channel: u8,
        f_in: &Rational,
        f_target: &Rational,
        feedback: RationalDivider,
        output: RationalDivider,
        kind: PlanKind,
    ) -> Self {
        let f_vco = f_in * feedback.value();
        let f_achieved = &f_vco / output.value();
        let rel_error = ((&f_achieved - f_target) / f_target).abs();
        FrequencyPlan {
            channel,
            f_in: f_in.clone(),
            f_target: f_target.clone(),
            feedback,
            output,
            f_vco,
            f_achieved,
            rel_error,
            kind,
        }
    }
}

fn check_request(
    c: &Constraints,
    f_in: &Rational,
    f_target: &Rational,
    channel: u8,
) -> Result<(), PlanError> {
    if channel >= CHANNELS {
        return Err(PlanError::InvalidChannel(channel));
    }
    if f_target < &c.f_out_min || f_target > &c.f_out_max {
        return Err(PlanError::OutOfBand(f_target.to_string()));
    }
    if f_in < &c.f_in_min || f_in > &c.f_in_max {
        return Err(PlanError::ReferenceOutOfRange(f_in.to_string()));
    }
    Ok(())
}

fn den_ok(v: &Rational, cap: u32) -> bool {
    v.denom() <= &BigInt::from(cap)
}

/// Plans feedback and output dividers for one channel, free to move the VCO.
pub fn plan_frequency(
    c: &Constraints,
    f_in: &Rational,
    f_target: &Rational,
    channel: u8,
) -> Result<FrequencyPlan, PlanError> {
    check_request(c, f_in, f_target, channel)?;
    let ratio_out = f_target / f_in;
    let feasible = |fb: &Rational, out: &Rational| {
        c.feedback.contains_value(fb)
            && c.output.contains_value(out)
            && c.vco_in_window(&(f_in * fb))
            && den_ok(fb, c.denominator_max)
            && den_ok(out, c.denominator_max)
    };

    // Integer feedback values whose VCO lies in the window, ascending.
    let n_lo = (&c.vco_min / f_in).ceil().max(int(c.feedback.min as i64));
    let n_hi = (&c.vco_max / f_in).floor().min(int(c.feedback.max as i64));
    let integer_feedback: Vec<u32> = if n_lo <= n_hi {
        let lo = n_lo.to_integer().to_u32().unwrap_or(u32::MAX);
        let hi = n_hi.to_integer().to_u32().unwrap_or(0);
        (lo..=hi).collect()
    } else {
        Vec::new()
    };

    let mut fractional_output = None;
    for &n in &integer_feedback {
        let fb = int(n as i64);
        let out = &fb / &ratio_out;
        if !feasible(&fb, &out) {
            continue;
        }
        let fbd = RationalDivider::integer(n);
        let outd = RationalDivider::from_value(&out)?;
        if out.is_integer() {
            return Ok(FrequencyPlan::build(channel, f_in, f_target, fbd, outd, PlanKind::IntegerRatio));
        }
        if fractional_output.is_none() {
            fractional_output = Some((fbd, outd));
        }
    }
    if let Some((fbd, outd)) = fractional_output {
        return Ok(FrequencyPlan::build(channel, f_in, f_target, fbd, outd, PlanKind::FractionalOutput));
    }

    if let Some((fb, out)) = lattice_search(c, f_in, &ratio_out) {
        let fbd = RationalDivider::from_value(&fb)?;
        let outd = RationalDivider::from_value(&out)?;
        return Ok(FrequencyPlan::build(channel, f_in, f_target, fbd, outd, PlanKind::FractionalFeedback));
    }

    let mut best: Option<FrequencyPlan> = None;
    for &n in &integer_feedback {
        let fbd = RationalDivider::integer(n);
        if let Ok(p) = closest_output(c, f_in, f_target, fbd, channel) {
            if best.as_ref().is_none_or(|b| p.rel_error < b.rel_error) {
                best = Some(p);
            }
        }
    }
    best.ok_or_else(|| PlanError::Unsatisfiable(f_target.to_string()))
}

/// Plans the output divider for a channel while keeping the VCO fixed.
pub fn plan_with_feedback(
    c: &Constraints,
    f_in: &Rational,
    feedback: RationalDivider,
    f_target: &Rational,
    channel: u8,
) -> Result<FrequencyPlan, PlanError> {
    check_request(c, f_in, f_target, channel)?;
    let f_vco = f_in * feedback.value();
    if !c.feedback.contains(&feedback) || !c.vco_in_window(&f_vco) {
        return Err(PlanError::Unsatisfiable(f_target.to_string()));
    }
    let out = &f_vco / f_target;
    if c.output.contains_value(&out) && den_ok(&out, c.denominator_max) {
        let outd = RationalDivider::from_value(&out)?;
        let kind = if out.is_integer() && feedback.is_integer() {
            PlanKind::IntegerRatio
        } else if feedback.is_integer() {
            PlanKind::FractionalOutput
        } else {
            PlanKind::FractionalFeedback
        };
        return Ok(FrequencyPlan::build(channel, f_in, f_target, feedback, outd, kind));
    }
    closest_output(c, f_in, f_target, feedback, channel)
}

fn closest_output(
    c: &Constraints,
    f_in: &Rational,
    f_target: &Rational,
    feedback: RationalDivider,
    channel: u8,
) -> Result<FrequencyPlan, PlanError> {
    let f_vco = f_in * feedback.value();
    let ideal = &f_vco / f_target;
    let cap = c.denominator_max as i64;
    let lo = int(c.output.min as i64);
    // Largest admissible value below max + 1.
    let hi = int(c.output.max as i64) + ratio(cap - 1, cap);
    let out = best_approximation(&ideal, &lo, &hi, &BigInt::from(cap))
        .ok_or_else(|| PlanError::Unsatisfiable(f_target.to_string()))?;
    let outd = RationalDivider::from_value(&out)?;
    Ok(FrequencyPlan::build(channel, f_in, f_target, feedback, outd, PlanKind::Approximate))
}

/// Searches exact plans with fractional feedback.
///
/// With `f_target / f_in = u / v` in lowest terms, every output divider of the
/// form `g * s / (d * e)` with `d | u` and `g | v` yields a feedback divider
/// `s * (u / d) / ((v / g) * e)`. For each divisor pair the finest admissible
/// `e` is used and the smallest `s` landing in the window is taken.
fn lattice_search(c: &Constraints, f_in: &Rational, ratio_out: &Rational) -> Option<(Rational, Rational)> {
    let u = ratio_out.numer().to_u64()?;
    let v = ratio_out.denom().to_u64()?;

    // Output divider window implied by every constraint.
    let out_lo = [
        int(c.output.min as i64),
        &c.vco_min / f_in / ratio_out,
        int(c.feedback.min as i64) / ratio_out,
    ]
    .into_iter()
    .max()?;

    let pairs = lattice_pairs(u, v, c.denominator_max as u64);
    if let Some(w) = Window::new(c, f_in, &out_lo) {
        if let Some(best) = lattice_fast(&w, u, v, &pairs) {
            return best.map(|[fn_, fd, on, od]| {
                let r = |n: i128, d: i128| Rational::new(BigInt::from(n), BigInt::from(d));
                (r(fn_, fd), r(on, od))
            });
        }
    }
    lattice_exact(c, f_in, ratio_out, &out_lo, &pairs)
}

/// `(g, d, e)` for every divisor pair with its finest admissible `e`.
fn lattice_pairs(u: u64, v: u64, cap: u64) -> Vec<(u64, u64, u64)> {
    let d_list: Vec<u64> = factor::divisors(u).into_iter().filter(|&d| d <= cap).collect();
    let mut out = Vec::new();
    for g in factor::divisors(v).into_iter().filter(|&g| v / g <= cap) {
        for &d in &d_list {
            let e = (cap / d).min(cap / (v / g));
            if e > 0 {
                out.push((g, d, e));
            }
        }
    }
    out
}

/// Arbitrary-precision lattice search; used when machine integers overflow.
fn lattice_exact(
    c: &Constraints,
    f_in: &Rational,
    ratio_out: &Rational,
    out_lo: &Rational,
    pairs: &[(u64, u64, u64)],
) -> Option<(Rational, Rational)> {
    let mut best: Option<(Rational, Rational)> = None;
    for &(g, d, e) in pairs {
        let step = ratio(g as i64, 1) / Rational::from_integer(BigInt::from(d) * BigInt::from(e));
        let s = (out_lo / &step).ceil();
        let out = s * &step;
        let fb = &out * ratio_out;
        let ok = c.feedback.contains_value(&fb)
            && c.output.contains_value(&out)
            && c.vco_in_window(&(f_in * &fb))
            && den_ok(&fb, c.denominator_max)
            && den_ok(&out, c.denominator_max);
        if !ok {
            continue;
        }
        let better = match &best {
            None => true,
            Some((bfb, _)) => &fb < bfb || (&fb == bfb && fb.denom() < bfb.denom()),
        };
        if better {
            best = Some((fb, out));
        }
    }
    best
}

/// A fraction `n / d` with `d > 0`.
type Frac = (i128, i128);

fn frac(r: &Rational) -> Option<Frac> {
    Some((r.numer().to_i128()?, r.denom().to_i128()?))
}

/// Lattice-search bounds as machine fractions.
struct Window {
    out_lo: Frac,
    out_min: Frac,
    out_end: Frac,
    fb_min: Frac,
    fb_end: Frac,
    /// Feedback limits from the VCO window, inclusive.
    fb_vco_lo: Frac,
    fb_vco_hi: Frac,
    cap: i128,
}

impl Window {
    fn new(c: &Constraints, f_in: &Rational, out_lo: &Rational) -> Option<Self> {
        Some(Window {
            out_lo: frac(out_lo)?,
            out_min: (c.output.min as i128, 1),
            out_end: (c.output.max as i128 + 1, 1),
            fb_min: (c.feedback.min as i128, 1),
            fb_end: (c.feedback.max as i128 + 1, 1),
            fb_vco_lo: frac(&(&c.vco_min / f_in))?,
            fb_vco_hi: frac(&(&c.vco_max / f_in))?,
            cap: c.denominator_max as i128,
        })
    }
}

/// `Some(ordering of a vs b)`, or `None` on overflow.
fn cmp_frac(a: Frac, b: Frac) -> Option<std::cmp::Ordering> {
    Some(a.0.checked_mul(b.1)?.cmp(&b.0.checked_mul(a.1)?))
}

fn reduce(n: i128, d: i128) -> Frac {
    let g = n.gcd(&d);
    (n / g, d / g)
}

/// Outer `None` means overflow; the caller then redoes the search exactly.
fn lattice_fast(
    w: &Window,
    u: u64,
    v: u64,
    pairs: &[(u64, u64, u64)],
) -> Option<Option<[i128; 4]>> {
    use std::cmp::Ordering::*;
    let (u, v) = (u as i128, v as i128);
    let mut best: Option<(Frac, Frac)> = None;
    for &(g, d, e) in pairs {
        let (g, d, e) = (g as i128, d as i128, e as i128);
        let de = d * e;
        // s = ceil(out_lo * de / g)
        let num = w.out_lo.0.checked_mul(de)?;
        let den = w.out_lo.1.checked_mul(g)?;
        let s = Integer::div_ceil(&num, &den);
        let out = reduce(s.checked_mul(g)?, de);
        let fb = reduce(s.checked_mul(u / d)?, (v / g).checked_mul(e)?);
        if out.1 > w.cap || fb.1 > w.cap {
            continue;
        }
        let ok = cmp_frac(out, w.out_min)? != Less
            && cmp_frac(out, w.out_end)? == Less
            && cmp_frac(fb, w.fb_min)? != Less
            && cmp_frac(fb, w.fb_end)? == Less
            && cmp_frac(fb, w.fb_vco_lo)? != Less
            && cmp_frac(fb, w.fb_vco_hi)? != Greater;
        if !ok {
            continue;
        }
        let better = match best {
            None => true,
            Some((bfb, _)) => match cmp_frac(fb, bfb)? {
                Less => true,
                Equal => fb.1 < bfb.1,
                Greater => false,
            },
        };
        if better {
            best = Some((fb, out));
        }
    }
    Some(best.map(|(fb, out)| [fb.0, fb.1, out.0, out.1]))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PhaseRequest {
    Seconds(Rational),
    /// Degrees of the channel's output period.
    Degrees(Rational),
}

/// Phase offset quantized to whole VCO periods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhasePlan {
    pub steps: i32,
    pub quantum: Rational,
    pub offset_requested: Rational,
    pub offset_achieved: Rational,
    /// `offset_requested - offset_achieved`
    pub residual: Rational,
}

impl PhasePlan {
    pub fn zero(plan: &FrequencyPlan) -> Self {
        let quantum = plan.f_vco.recip();
        PhasePlan {
            steps: 0,
            quantum,
            offset_requested: Rational::zero(),
            offset_achieved: Rational::zero(),
            residual: Rational::zero(),
        }
    }
}

pub fn plan_phase(
    c: &Constraints,
    plan: &FrequencyPlan,
    request: &PhaseRequest,
) -> Result<PhasePlan, PlanError> {
    let offset = match request {
        PhaseRequest::Seconds(s) => s.clone(),
        PhaseRequest::Degrees(d) => d / int(360) / &plan.f_achieved,
    };
    let quantum = plan.f_vco.recip();
    let steps = round_half_away(&(&offset / &quantum));
    let limit = c.phase_steps_max;
    if steps.abs() > BigInt::from(limit) {
        return Err(PlanError::PhaseOutOfRange { steps: steps.to_string(), limit });
    }
    let steps_i = steps.to_i32().expect("bounded by limit");
    let offset_achieved = &quantum * int(steps_i as i64);
    Ok(PhasePlan {
        steps: steps_i,
        residual: &offset - &offset_achieved,
        quantum,
        offset_requested: offset,
        offset_achieved,
    })
}

/// Register patches storing a plan's dividers and phase for its channel.
pub fn plan_patches(
    layout: &SynthLayout,
    plan: &FrequencyPlan,
    phase: &PhasePlan,
) -> Result<Vec<RegisterPatch>, PlanError> {
    let channel = layout.channel(plan.channel).ok_or(PlanError::InvalidChannel(plan.channel))?;
    let fb = encode_divider(&plan.feedback)?;
    let out = encode_divider(&plan.output)?;
    let mut patches = Vec::new();
    patches.extend(layout.feedback.scatter(&fb));
    patches.extend(channel.divider.scatter(&out));
    patches.extend(channel.phase.scatter(phase.steps as i8 as u8 as u64));
    Ok(merge_patches(patches))
}

#[derive(Debug, Error)]
pub enum ApplyError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
}

/// Writes a plan's feedback, channel divider and phase registers through the
/// bridge. Other channels' registers are not written.
pub fn apply_plan(
    bridge: &mut Bridge,
    layout: &SynthLayout,
    plan: &FrequencyPlan,
    phase: &PhasePlan,
) -> Result<(), ApplyError> {
    let patches = plan_patches(layout, plan, phase)?;
    bridge.apply_patches(layout.i2c_address, &patches)?;
    Ok(())
}
