//! Parameter sequences `λ = (λ_1, λ_2, ...)` with every `|λ_k| > 40`, and
//! their multiplicative sign-schedule perturbations `λ_k(x) = e^{x s_k} η_k`.
//!
//! Every generator is a pure function of `(spec, k)`; nothing keeps
//! sequential state, so sequences can be shared freely between workers.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Parameters must lie strictly outside this modulus.
pub const MIN_MODULUS: f64 = 40.0;

/// Anything that yields the parameter `λ_k` for `k >= 1`.
pub trait Parameters: Sync {
    fn lambda(&self, k: u64) -> Result<Complex64>;

    /// Infimum of `|λ_k|` over the whole sequence.
    fn inf_modulus(&self) -> f64;

    /// `λ_first, ..., λ_{first+count-1}`.
    fn window(&self, first: u64, count: usize) -> Result<Vec<Complex64>> {
        (0..count as u64).map(|i| self.lambda(first + i)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SequenceSpec {
    Constant(Complex64),
    Periodic(Vec<Complex64>),
    Explicit { prefix: Vec<Complex64>, tail: Complex64 },
    RandomAnnulus { seed: u64, min_mod: f64, max_mod: f64 },
}

fn check_member(c: Complex64, what: &str) -> Result<()> {
    if !(c.re.is_finite() && c.im.is_finite()) || c.norm() <= MIN_MODULUS {
        return Err(Error::InvalidSpec(format!(
            "{what} {} has modulus {} <= {MIN_MODULUS}",
            format_complex(c),
            c.norm()
        )));
    }
    Ok(())
}

impl SequenceSpec {
    pub fn constant(c: Complex64) -> Result<Self> {
        let spec = SequenceSpec::Constant(c);
        spec.validate()?;
        Ok(spec)
    }

    pub fn periodic(cycle: Vec<Complex64>) -> Result<Self> {
        let spec = SequenceSpec::Periodic(cycle);
        spec.validate()?;
        Ok(spec)
    }

    pub fn explicit(prefix: Vec<Complex64>, tail: Complex64) -> Result<Self> {
        let spec = SequenceSpec::Explicit { prefix, tail };
        spec.validate()?;
        Ok(spec)
    }

    pub fn random_annulus(seed: u64, min_mod: f64, max_mod: f64) -> Result<Self> {
        let spec = SequenceSpec::RandomAnnulus { seed, min_mod, max_mod };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SequenceSpec::Constant(c) => check_member(*c, "constant"),
            SequenceSpec::Periodic(cycle) => {
                if cycle.is_empty() {
                    return Err(Error::InvalidSpec("empty cycle".into()));
                }
                cycle.iter().try_for_each(|c| check_member(*c, "cycle entry"))
            }
            SequenceSpec::Explicit { prefix, tail } => {
                prefix.iter().try_for_each(|c| check_member(*c, "prefix entry"))?;
                check_member(*tail, "tail")
            }
            SequenceSpec::RandomAnnulus { min_mod, max_mod, .. } => {
                if !(min_mod.is_finite() && max_mod.is_finite())
                    || *min_mod <= MIN_MODULUS
                    || min_mod > max_mod
                {
                    return Err(Error::InvalidSpec(format!(
                        "annulus needs {MIN_MODULUS} < min <= max, got min={min_mod}, max={max_mod}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// `λ_k`, `k >= 1`.
    pub fn at(&self, k: u64) -> Result<Complex64> {
        if k == 0 {
            return Err(Error::Domain("sequence index starts at 1".into()));
        }
        let value = match self {
            SequenceSpec::Constant(c) => *c,
            SequenceSpec::Periodic(cycle) => {
                if cycle.is_empty() {
                    return Err(Error::InvalidSpec("empty cycle".into()));
                }
                cycle[((k - 1) % cycle.len() as u64) as usize]
            }
            SequenceSpec::Explicit { prefix, tail } => {
                prefix.get((k - 1) as usize).copied().unwrap_or(*tail)
            }
            SequenceSpec::RandomAnnulus { seed, min_mod, max_mod } => {
                self.validate()?;
                // One ChaCha stream per index: no sequential state needed.
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(k);
                let u: f64 = rng.gen();
                let v: f64 = rng.gen();
                let modulus = min_mod + u * (max_mod - min_mod);
                Complex64::from_polar(modulus, std::f64::consts::TAU * v)
            }
        };
        check_member(value, "parameter")?;
        Ok(value)
    }
}

impl Parameters for SequenceSpec {
    fn lambda(&self, k: u64) -> Result<Complex64> {
        self.at(k)
    }

    fn inf_modulus(&self) -> f64 {
        match self {
            SequenceSpec::Constant(c) => c.norm(),
            SequenceSpec::Periodic(cycle) => cycle.iter().map(|c| c.norm()).fold(f64::INFINITY, f64::min),
            SequenceSpec::Explicit { prefix, tail } => {
                prefix.iter().map(|c| c.norm()).fold(tail.norm(), f64::min)
            }
            SequenceSpec::RandomAnnulus { min_mod, .. } => *min_mod,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// Signs `s_k ∈ {-1, +1}` constant on blocks of geometrically growing
/// length `initial_block_len * growth_ratio^m`, alternating per block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignSchedule {
    initial_block_len: u64,
    growth_ratio: u64,
    first_sign: Sign,
}

impl Default for SignSchedule {
    fn default() -> Self {
        SignSchedule { initial_block_len: 2, growth_ratio: 2, first_sign: Sign::Plus }
    }
}

impl SignSchedule {
    pub fn new(initial_block_len: u64, growth_ratio: u64, first_sign: Sign) -> Result<Self> {
        if initial_block_len == 0 || growth_ratio < 2 {
            return Err(Error::InvalidSpec(format!(
                "block schedule needs initial length >= 1 and ratio >= 2, got {initial_block_len}x{growth_ratio}"
            )));
        }
        Ok(SignSchedule { initial_block_len, growth_ratio, first_sign })
    }

    pub fn initial_block_len(&self) -> u64 {
        self.initial_block_len
    }

    pub fn growth_ratio(&self) -> u64 {
        self.growth_ratio
    }

    pub fn first_sign(&self) -> Sign {
        self.first_sign
    }

    /// The same blocks with every sign reversed.
    pub fn negated(&self) -> SignSchedule {
        SignSchedule { first_sign: self.first_sign.flip(), ..*self }
    }

    /// Iterator over `(block_len, sign)` pairs.
    fn blocks(&self) -> impl Iterator<Item = (u64, Sign)> + '_ {
        let mut len = self.initial_block_len;
        let mut sign = self.first_sign;
        std::iter::from_fn(move || {
            let out = (len, sign);
            len = len.saturating_mul(self.growth_ratio);
            sign = sign.flip();
            Some(out)
        })
    }

    /// `s_k`, `k >= 1`.
    pub fn sign(&self, k: u64) -> Sign {
        let mut end = 0u64;
        for (len, sign) in self.blocks() {
            end = end.saturating_add(len);
            if k <= end {
                return sign;
            }
        }
        unreachable!("block lengths saturate at u64::MAX")
    }

    /// `S_n = s_1 + ... + s_n` and the Cesàro mean `S_n / n`.
    pub fn cesaro_sum(&self, n: u64) -> (i64, f64) {
        let mut remaining = n;
        let mut total: i128 = 0;
        for (len, sign) in self.blocks() {
            if remaining == 0 {
                break;
            }
            let take = len.min(remaining);
            total += sign.value() as i128 * take as i128;
            remaining -= take;
        }
        let total = total as i64;
        let mean = if n == 0 { 0.0 } else { total as f64 / n as f64 };
        (total, mean)
    }
}

/// `Δ(x) = sup_k |e^{x s_k} - 1| = e^{|x|} - 1`.
pub fn delta(x: f64) -> f64 {
    x.abs().exp_m1()
}

/// The coarser bound `e |x| >= Δ(x)`.
pub fn delta_bound(x: f64) -> f64 {
    std::f64::consts::E * x.abs()
}

/// `λ_k(x) = e^{x s_k} η_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbedSequence {
    base: SequenceSpec,
    schedule: SignSchedule,
    x: f64,
}

impl PerturbedSequence {
    pub fn new(base: SequenceSpec, schedule: SignSchedule, x: f64) -> Result<Self> {
        base.validate()?;
        let r = Self::admissible_radius(&base);
        if !x.is_finite() || x.abs() >= r {
            return Err(Error::PerturbationTooLarge { x, r });
        }
        Ok(PerturbedSequence { base, schedule, x })
    }

    /// `r = min(1, log(inf_k |η_k| / 40))`; `|x| < r` keeps every `|λ_k(x)| > 40`.
    pub fn admissible_radius(base: &SequenceSpec) -> f64 {
        (base.inf_modulus() / MIN_MODULUS).ln().min(1.0)
    }

    pub fn base(&self) -> &SequenceSpec {
        &self.base
    }

    pub fn schedule(&self) -> &SignSchedule {
        &self.schedule
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn delta(&self) -> f64 {
        delta(self.x)
    }

    pub fn at(&self, k: u64) -> Result<Complex64> {
        let eta = self.base.at(k)?;
        let s = self.schedule.sign(k).value() as f64;
        let value = eta * (self.x * s).exp();
        check_member(value, "perturbed parameter")?;
        Ok(value)
    }
}

impl Parameters for PerturbedSequence {
    fn lambda(&self, k: u64) -> Result<Complex64> {
        self.at(k)
    }

    fn inf_modulus(&self) -> f64 {
        self.base.inf_modulus() * (-self.x.abs()).exp()
    }
}

/// Either a plain generator or a perturbation of one; this is what the
/// textual spec grammar describes.
#[derive(Clone, Debug, PartialEq)]
pub enum Sequence {
    Plain(SequenceSpec),
    Perturbed(PerturbedSequence),
}

impl Sequence {
    pub fn at(&self, k: u64) -> Result<Complex64> {
        self.lambda(k)
    }
}

impl From<SequenceSpec> for Sequence {
    fn from(spec: SequenceSpec) -> Self {
        Sequence::Plain(spec)
    }
}

impl From<PerturbedSequence> for Sequence {
    fn from(p: PerturbedSequence) -> Self {
        Sequence::Perturbed(p)
    }
}

impl Parameters for Sequence {
    fn lambda(&self, k: u64) -> Result<Complex64> {
        match self {
            Sequence::Plain(s) => s.at(k),
            Sequence::Perturbed(p) => p.at(k),
        }
    }

    fn inf_modulus(&self) -> f64 {
        match self {
            Sequence::Plain(s) => s.inf_modulus(),
            Sequence::Perturbed(p) => p.inf_modulus(),
        }
    }
}

impl<P: Parameters + ?Sized> Parameters for &P {
    fn lambda(&self, k: u64) -> Result<Complex64> {
        (**self).lambda(k)
    }

    fn inf_modulus(&self) -> f64 {
        (**self).inf_modulus()
    }
}

// ---------------------------------------------------------------------------
// Text grammar
//
//   const:50
//   periodic:50,60+10i
//   explicit:50,60,tail=70
//   random:seed=7,min=45,max=80
//   perturb:base=<spec>;blocks=2x2;x=0.1[;sign=-1]
// ---------------------------------------------------------------------------

pub const GRAMMAR: &str = "\
sequence specs:
  const:<c>                              constant sequence
  periodic:<c1>,<c2>,...                 repeating cycle
  explicit:<c1>,<c2>,...,tail=<c>        finite prefix, then constant tail
  random:seed=<u64>,min=<r>,max=<r>      uniform in the annulus min <= |l| <= max
  perturb:base=<spec>;blocks=<L>x<g>;x=<r>[;sign=-1]
complex literals: 50, -3.5, 60+10i, 40-30i, 2e1i; every modulus must exceed 40";

pub fn format_complex(c: Complex64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else if c.re == 0.0 {
        format!("{}i", c.im)
    } else if c.im < 0.0 {
        format!("{}{}i", c.re, c.im)
    } else {
        format!("{}+{}i", c.re, c.im)
    }
}

pub fn parse_complex(s: &str) -> Result<Complex64> {
    let s = s.trim();
    let bad = || Error::Parse(format!("bad complex literal {s:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad());
    };
    // Split at the last sign that is neither leading nor an exponent sign.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(i) => (&body[..i], &body[i..]),
        None => ("0", body),
    };
    let re: f64 = re.parse().map_err(|_| bad())?;
    let im: f64 = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => other.parse().map_err(|_| bad())?,
    };
    Ok(Complex64::new(re, im))
}

fn parse_list(s: &str) -> Result<Vec<Complex64>> {
    s.split(',').map(parse_complex).collect()
}

fn format_list(values: &[Complex64]) -> String {
    values.iter().map(|c| format_complex(*c)).collect::<Vec<_>>().join(",")
}

fn key_values(s: &str, sep: char) -> Result<Vec<(&str, &str)>> {
    s.split(sep)
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {kv:?}")))
        })
        .collect()
}

impl FromStr for SequenceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, body) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("missing ':' in sequence spec {s:?}")))?;
        match kind {
            "const" => SequenceSpec::constant(parse_complex(body)?),
            "periodic" => SequenceSpec::periodic(parse_list(body)?),
            "explicit" => {
                let (prefix, tail) = match body.rsplit_once(',') {
                    Some((prefix, tail)) => (Some(prefix), tail),
                    None => (None, body),
                };
                let tail = tail
                    .trim()
                    .strip_prefix("tail=")
                    .ok_or_else(|| Error::Parse("explicit spec must end with 'tail=<c>'".into()))?;
                let prefix = prefix.map(parse_list).transpose()?.unwrap_or_default();
                SequenceSpec::explicit(prefix, parse_complex(tail)?)
            }
            "random" => {
                let (mut seed, mut min, mut max) = (None, None, None);
                for (k, v) in key_values(body, ',')? {
                    let num = |v: &str| v.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {v:?}")));
                    match k {
                        "seed" => seed = Some(v.parse::<u64>().map_err(|_| Error::Parse(format!("bad seed {v:?}")))?),
                        "min" => min = Some(num(v)?),
                        "max" => max = Some(num(v)?),
                        other => return Err(Error::Parse(format!("unknown random key {other:?}"))),
                    }
                }
                match (seed, min, max) {
                    (Some(seed), Some(min), Some(max)) => SequenceSpec::random_annulus(seed, min, max),
                    _ => Err(Error::Parse("random spec needs seed, min and max".into())),
                }
            }
            "perturb" => Err(Error::Parse("a perturbed spec cannot be used as a base here".into())),
            other => Err(Error::Parse(format!("unknown sequence kind {other:?}"))),
        }
    }
}

impl fmt::Display for SequenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceSpec::Constant(c) => write!(f, "const:{}", format_complex(*c)),
            SequenceSpec::Periodic(cycle) => write!(f, "periodic:{}", format_list(cycle)),
            SequenceSpec::Explicit { prefix, tail } if prefix.is_empty() => {
                write!(f, "explicit:tail={}", format_complex(*tail))
            }
            SequenceSpec::Explicit { prefix, tail } => {
                write!(f, "explicit:{},tail={}", format_list(prefix), format_complex(*tail))
            }
            SequenceSpec::RandomAnnulus { seed, min_mod, max_mod } => {
                write!(f, "random:seed={seed},min={min_mod},max={max_mod}")
            }
        }
    }
}

impl FromStr for SignSchedule {
    type Err = Error;

    /// `<initial>x<ratio>`, e.g. `2x2`.
    fn from_str(s: &str) -> Result<Self> {
        let (len, ratio) = s
            .split_once('x')
            .ok_or_else(|| Error::Parse(format!("blocks must look like 2x2, got {s:?}")))?;
        let len = len.trim().parse().map_err(|_| Error::Parse(format!("bad block length {len:?}")))?;
        let ratio = ratio.trim().parse().map_err(|_| Error::Parse(format!("bad growth ratio {ratio:?}")))?;
        SignSchedule::new(len, ratio, Sign::Plus)
    }
}

impl FromStr for Sequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let Some(body) = s.strip_prefix("perturb:") else {
            return s.parse::<SequenceSpec>().map(Sequence::Plain);
        };
        let (mut base, mut schedule, mut x, mut sign) = (None, SignSchedule::default(), None, Sign::Plus);
        for (k, v) in key_values(body, ';')? {
            match k {
                "base" => base = Some(v.parse::<SequenceSpec>()?),
                "blocks" => schedule = v.parse()?,
                "x" => x = Some(v.parse::<f64>().map_err(|_| Error::Parse(format!("bad x {v:?}")))?),
                "sign" => {
                    sign = match v {
                        "1" | "+1" | "+" => Sign::Plus,
                        "-1" | "-" => Sign::Minus,
                        other => return Err(Error::Parse(format!("sign must be +1 or -1, got {other:?}"))),
                    }
                }
                other => return Err(Error::Parse(format!("unknown perturb key {other:?}"))),
            }
        }
        let base = base.ok_or_else(|| Error::Parse("perturb spec needs base=<spec>".into()))?;
        let x = x.ok_or_else(|| Error::Parse("perturb spec needs x=<real>".into()))?;
        let schedule = SignSchedule::new(schedule.initial_block_len, schedule.growth_ratio, sign)?;
        PerturbedSequence::new(base, schedule, x).map(Sequence::Perturbed)
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sequence::Plain(s) => s.fmt(f),
            Sequence::Perturbed(p) => {
                write!(
                    f,
                    "perturb:base={};blocks={}x{};x={}",
                    p.base,
                    p.schedule.initial_block_len,
                    p.schedule.growth_ratio,
                    p.x
                )?;
                if p.schedule.first_sign == Sign::Minus {
                    write!(f, ";sign=-1")?;
                }
                Ok(())
            }
        }
    }
}
